"""Polar descriptors: encoding, distances, shift-yaw convention, retrieval."""
import math

import numpy as np
import pytest

from reloc3d import (
    ScanContext,
    ScanContextParams,
    build_database,
    encode,
    query,
    ring_key,
    sc_distance,
    shift_to_yaw,
)
from reloc3d.cloud import Frame, PointCloud
from reloc3d.descriptor import DescriptorDatabase, _score_block
from reloc3d.scansim import SensorModel, synthesize_scan, to_sensor_frame
from reloc3d.se3 import wrap_pi

P48 = ScanContextParams(n_rings=4, n_sectors=8, l_max=8.0)


def _polar_cloud(rows):
    """rows of (rho, az_deg, z) -> sensor-frame cloud."""
    pts = [
        (r * math.cos(math.radians(a)), r * math.sin(math.radians(a)), z)
        for r, a, z in rows
    ]
    return PointCloud(np.asarray(pts), Frame.SENSOR)


def test_encode_hand_computed_bins():
    # ring width 2.0, sector width 45 degrees
    cloud = _polar_cloud(
        [
            (1.0, 0.0, 1.5),  # ring 0, sector 0
            (3.0, 80.0, 2.0),  # ring 1, sector 1
            (3.0, 80.0, 0.7),  # same bin, lower: max keeps 2.0
            (7.9, 359.0, -0.5),  # ring 3, sector 7, negative height kept
            (2.0, 91.0, 0.4),  # ring exactly at the 2.0 boundary -> ring 1
            (8.0, 10.0, 3.0),  # at l_max: discarded
        ]
    )
    sc = encode(cloud, P48)
    expect = np.zeros((4, 8))
    expect[0, 0] = 1.5
    expect[1, 1] = 2.0
    expect[3, 7] = -0.5
    expect[1, 2] = 0.4
    assert np.allclose(sc.values, expect)


def test_encode_z_offset_shifts_occupied_bins_only():
    cloud = _polar_cloud([(1.0, 0.0, 1.5), (7.9, 359.0, -0.5)])
    sc = encode(cloud, ScanContextParams(n_rings=4, n_sectors=8, l_max=8.0, z_offset=2.0))
    expect = np.zeros((4, 8))
    expect[0, 0] = 3.5
    expect[3, 7] = 1.5
    assert np.allclose(sc.values, expect)


def test_encode_requires_sensor_frame():
    with pytest.raises(ValueError):
        encode(PointCloud(np.ones((3, 3)), Frame.MAP), P48)


def test_encode_empty_cloud_is_all_zero():
    sc = encode(PointCloud(np.zeros((0, 3)), Frame.SENSOR), P48)
    assert np.array_equal(sc.values, np.zeros((4, 8)))


def test_ring_key_occupancy_fractions():
    cloud = _polar_cloud([(1.0, 0.0, 1.5), (3.0, 80.0, 2.0), (3.5, 200.0, 1.0), (7.9, 0.0, 2.0)])
    key = ring_key(encode(cloud, P48))
    assert np.allclose(key, [1 / 8, 2 / 8, 0.0, 1 / 8])


def test_distance_zero_for_identical():
    rng = np.random.default_rng(0)
    sc = ScanContext(rng.uniform(0.5, 3.0, size=(4, 8)), P48)
    d, shift = sc_distance(sc, sc)
    assert d == pytest.approx(0.0, abs=1e-12)
    assert shift == 0


def test_distance_recovers_circular_shift():
    rng = np.random.default_rng(1)
    vals = rng.uniform(0.5, 3.0, size=(4, 8))
    q = ScanContext(vals, P48)
    for k in (1, 3, 5, 7):
        cand = ScanContext(np.roll(vals, k, axis=1), P48)
        d, shift = sc_distance(q, cand)
        assert d == pytest.approx(0.0, abs=1e-12)
        assert shift == k


def test_distance_all_empty_candidate_is_one():
    rng = np.random.default_rng(2)
    q = ScanContext(rng.uniform(0.5, 3.0, size=(4, 8)), P48)
    empty = ScanContext(np.zeros((4, 8)), P48)
    d, shift = sc_distance(q, empty)
    assert d == 1.0
    assert shift == 0


def test_distance_tie_takes_smallest_shift():
    const = ScanContext(np.ones((4, 8)), P48)
    _, shift = sc_distance(const, const)
    assert shift == 0


def test_distance_rejects_mismatched_params():
    a = ScanContext(np.ones((4, 8)), P48)
    b = ScanContext(np.ones((2, 4)), ScanContextParams(n_rings=2, n_sectors=4, l_max=8.0))
    with pytest.raises(ValueError):
        sc_distance(a, b)


def test_shift_to_yaw_convention():
    assert shift_to_yaw(0, 60) == 0.0
    assert shift_to_yaw(5, 60) == pytest.approx(math.radians(30.0))
    assert shift_to_yaw(30, 60) == pytest.approx(math.pi)
    assert shift_to_yaw(45, 60) == pytest.approx(math.radians(-90.0))
    with pytest.raises(ValueError):
        shift_to_yaw(60, 60)


def test_rotation_convention_end_to_end():
    """A sensor yawed by psi sees the world at azimuth az - psi, and the best
    shift against the unrotated reference must read back as psi."""
    params = ScanContextParams()  # 20 x 60, sector width 6 degrees
    rng = np.random.default_rng(3)
    rho = rng.uniform(1.0, 45.0, size=600)
    az = rng.uniform(0.0, 2 * math.pi, size=600)
    z = rng.uniform(0.0, 8.0, size=600)
    world = np.stack([rho * np.cos(az), rho * np.sin(az), z], axis=1)
    ref = encode(PointCloud(world, Frame.SENSOR), params)
    for psi_deg in (30.0, 150.0, -18.0, -96.0):
        psi = math.radians(psi_deg)
        seen = np.stack(
            [rho * np.cos(az - psi), rho * np.sin(az - psi), z], axis=1
        )
        q = encode(PointCloud(seen, Frame.SENSOR), params)
        d, shift = sc_distance(q, ref)
        assert d == pytest.approx(0.0, abs=1e-9)
        assert wrap_pi(shift_to_yaw(shift, 60) - psi) == pytest.approx(0.0, abs=1e-12)


def test_batched_scorer_matches_scalar():
    rng = np.random.default_rng(4)
    params = ScanContextParams(n_rings=6, n_sectors=10, l_max=20.0)
    q_vals = rng.uniform(0.0, 3.0, size=(6, 10))
    q_vals[:, rng.random(10) < 0.3] = 0.0  # knock out some columns
    block = rng.uniform(0.0, 3.0, size=(40, 6, 10))
    block[:, :, :2] = 0.0
    block[rng.random(40) < 0.2] = 0.0  # some all-empty candidates
    dists, shifts = _score_block(q_vals, block)
    q = ScanContext(q_vals, params)
    for m in range(40):
        d, s = sc_distance(q, ScanContext(block[m], params))
        assert dists[m] == pytest.approx(d, abs=1e-12)
        assert shifts[m] == s


def _random_database(n, seed, params=ScanContextParams(n_rings=5, n_sectors=12, l_max=10.0)):
    rng = np.random.default_rng(seed)
    desc = rng.uniform(0.0, 4.0, size=(n, params.n_rings, params.n_sectors)).astype(np.float32)
    keys = np.stack(
        [ring_key(ScanContext(desc[i].astype(np.float64), params)) for i in range(n)]
    ).astype(np.float32)
    pos = rng.uniform(0.0, 50.0, size=(n, 3))
    return DescriptorDatabase(pos, desc, keys, params, SensorModel(), 0.2)


def test_query_full_prefilter_equals_brute_force():
    db = _random_database(60, seed=5)
    rng = np.random.default_rng(6)
    for _ in range(5):
        q_vals = rng.uniform(0.0, 4.0, size=(5, 12))
        q = ScanContext(q_vals, db.params)
        got = query(db, q, top_k=4, prefilter=len(db))
        scored = sorted(
            (sc_distance(q, db.descriptor(i)) + (i,) for i in range(len(db))),
            key=lambda t: (t[0], t[2]),
        )
        for cand, (d, shift, i) in zip(got, scored[:4]):
            assert cand.index == i
            assert cand.distance == pytest.approx(d, abs=1e-12)
            assert cand.yaw == pytest.approx(shift_to_yaw(shift, 12))
            assert np.array_equal(cand.position, db.positions[i])


def test_query_prefilter_restricts_to_ring_key_shortlist():
    db = _random_database(60, seed=7)
    q = ScanContext(np.random.default_rng(8).uniform(0.0, 4.0, size=(5, 12)), db.params)
    k = 10
    got = query(db, q, top_k=3, prefilter=k)
    qkey = ring_key(q)
    d2 = ((db.ring_keys.astype(np.float64) - qkey) ** 2).sum(axis=1)
    shortlist = set(np.argsort(d2, kind="stable")[:k].tolist())
    assert all(c.index in shortlist for c in got)
    brute = sorted(
        (sc_distance(q, db.descriptor(i)) + (i,) for i in shortlist),
        key=lambda t: (t[0], t[2]),
    )
    assert [c.index for c in got] == [t[2] for t in brute[:3]]


def test_query_argument_validation():
    db = _random_database(10, seed=9)
    q = ScanContext(np.ones((5, 12)), db.params)
    with pytest.raises(ValueError):
        query(db, q, top_k=0)
    with pytest.raises(ValueError):
        query(db, q, top_k=5, prefilter=3)
    empty = DescriptorDatabase(
        np.zeros((0, 3)), np.zeros((0, 5, 12), np.float32), np.zeros((0, 5), np.float32),
        db.params, SensorModel(), 0.2,
    )
    with pytest.raises(ValueError):
        query(empty, q)
    other = ScanContext(np.ones((4, 8)), P48)
    with pytest.raises(ValueError):
        query(db, other)


def test_database_shape_validation():
    params = ScanContextParams(n_rings=5, n_sectors=12, l_max=10.0)
    with pytest.raises(ValueError):
        DescriptorDatabase(
            np.zeros((3, 3)), np.zeros((3, 4, 12), np.float32), np.zeros((3, 5), np.float32),
            params, SensorModel(), 0.2,
        )
    with pytest.raises(ValueError):
        DescriptorDatabase(
            np.zeros((3, 3)), np.zeros((3, 5, 12), np.float32), np.zeros((2, 5), np.float32),
            params, SensorModel(), 0.2,
        )


def test_build_database_entries_match_direct_encoding(small_grid, small_samples, small_db):
    assert len(small_db) == len(small_samples)
    assert np.array_equal(small_db.positions, small_samples)
    for i in (0, len(small_db) // 2):
        scan = synthesize_scan(small_grid, small_samples[i], SensorModel())
        local = to_sensor_frame(scan, small_samples[i], np.eye(3))
        sc = encode(local, small_db.params)
        assert np.array_equal(small_db.descriptors[i], sc.values.astype(np.float32))
        assert np.array_equal(small_db.ring_keys[i], ring_key(sc).astype(np.float32))
