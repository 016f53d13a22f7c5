"""Rotation helpers and the SE(3) exponential, checked against scipy's expm."""
import math

import numpy as np
import pytest
from scipy.linalg import expm

from reloc3d.se3 import (
    RigidTransform,
    rot_x,
    rot_y,
    rot_z,
    se3_exp,
    skew,
    so3_exp,
    wrap_pi,
)


def test_wrap_pi_range_and_fixed_points():
    assert wrap_pi(0.0) == 0.0
    assert wrap_pi(math.pi) == pytest.approx(math.pi)
    assert wrap_pi(-math.pi) == pytest.approx(math.pi)  # (-pi, pi], so -pi wraps up
    assert wrap_pi(3 * math.pi) == pytest.approx(math.pi)
    assert wrap_pi(2 * math.pi + 0.3) == pytest.approx(0.3)
    assert wrap_pi(-0.4 - 4 * math.pi) == pytest.approx(-0.4)
    for a in np.linspace(-20.0, 20.0, 101):
        w = wrap_pi(a)
        assert -math.pi < w <= math.pi
        assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-12)
        assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-12)


def test_basic_rotations_are_proper():
    for make in (rot_x, rot_y, rot_z):
        r = make(0.7)
        assert np.allclose(r.T @ r, np.eye(3), atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)
    # rot_z rotates x toward y for a positive angle
    assert np.allclose(rot_z(math.pi / 2) @ [1, 0, 0], [0, 1, 0], atol=1e-12)


def test_so3_exp_matches_matrix_exponential():
    rng = np.random.default_rng(1)
    for _ in range(20):
        w = rng.normal(size=3) * rng.uniform(0.01, 2.5)
        assert np.allclose(so3_exp(w), expm(skew(w)), atol=1e-10)
    # tiny-angle series branch
    w = np.array([1e-13, -2e-13, 5e-14])
    assert np.allclose(so3_exp(w), expm(skew(w)), atol=1e-15)


def test_se3_exp_matches_matrix_exponential():
    rng = np.random.default_rng(2)
    for _ in range(20):
        xi = rng.normal(size=6)
        twist = np.zeros((4, 4))
        twist[:3, :3] = skew(xi[3:])
        twist[:3, 3] = xi[:3]
        m = expm(twist)
        r, t = se3_exp(xi)
        assert np.allclose(r, m[:3, :3], atol=1e-10)
        assert np.allclose(t, m[:3, 3], atol=1e-10)


def test_rigid_transform_algebra():
    a = RigidTransform(rot_z(0.4), np.array([1.0, -2.0, 0.5]))
    b = RigidTransform(rot_x(-0.2) @ rot_y(0.1), np.array([0.3, 0.0, 2.0]))
    pts = np.random.default_rng(3).normal(size=(40, 3))
    assert np.allclose(a.compose(b).apply(pts), a.apply(b.apply(pts)), atol=1e-12)
    assert np.allclose(a.inverse().apply(a.apply(pts)), pts, atol=1e-12)
    assert np.allclose(a.matrix()[:3, :3], a.rotation)
    assert np.allclose(RigidTransform.from_matrix(a.matrix()).translation, a.translation)
    assert a.yaw == pytest.approx(0.4)


def test_rigid_transform_rejects_bad_rotations():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 1.01, np.zeros(3))
    with pytest.raises(ValueError):
        RigidTransform(-np.eye(3), np.zeros(3))  # det -1
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3), np.array([np.nan, 0.0, 0.0]))
