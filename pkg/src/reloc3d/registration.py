"""Rigid registration: voxel downsampling, Gauss-Newton ICP, and fitness scoring."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .cloud import PointCloud, as_xyz
from .se3 import RigidTransform, orthonormalized, se3_exp


@dataclass(frozen=True)
class IcpConfig:
    max_iterations: int = 50
    max_corr_dist: float = 2.0
    translation_eps: float = 1e-6
    rmse_eps: float = 1e-6
    min_correspondences: int = 20

    def __post_init__(self):
        if self.max_iterations < 1 or self.min_correspondences < 1:
            raise ValueError("iteration and correspondence floors must be positive")
        if self.max_corr_dist <= 0.0 or self.translation_eps <= 0.0 or self.rmse_eps <= 0.0:
            raise ValueError("distances and tolerances must be positive")


@dataclass(frozen=True)
class RegistrationResult:
    pose: RigidTransform
    rmse: float
    iterations: int
    converged: bool
    correspondence_count: int


def voxel_downsample(cloud, voxel: float):
    """One centroid per non-empty voxel of size `voxel`, in ascending voxel-index order.

    Voxels are half-open [k*voxel, (k+1)*voxel) anchored at the world origin, so
    the output is independent of point order. A PointCloud keeps its frame tag.
    """
    if not voxel > 0.0:
        raise ValueError("voxel must be positive")
    xyz = as_xyz(cloud)
    if xyz.shape[0] == 0:
        out = xyz
    else:
        idx = np.floor(xyz / voxel).astype(np.int64)
        uniq, inverse = np.unique(idx, axis=0, return_inverse=True)
        sums = np.zeros((uniq.shape[0], 3))
        np.add.at(sums, inverse, xyz)
        counts = np.bincount(inverse, minlength=uniq.shape[0]).astype(np.float64)
        out = sums / counts[:, None]
    if isinstance(cloud, PointCloud):
        return PointCloud(out, cloud.frame)
    return out


def _corr_rmse(dist: np.ndarray, sel: np.ndarray) -> float:
    if not sel.any():
        return math.inf
    return float(np.sqrt(np.mean(dist[sel] ** 2)))


def _point_jacobian(p: np.ndarray) -> np.ndarray:
    """d(exp(xi) p)/d(xi) at xi = 0 for each point: (n, 3, 6) blocks [I | -[p]x]."""
    jac = np.zeros((p.shape[0], 3, 6))
    jac[:, 0, 0] = jac[:, 1, 1] = jac[:, 2, 2] = 1.0
    jac[:, 0, 4] = p[:, 2]
    jac[:, 0, 5] = -p[:, 1]
    jac[:, 1, 3] = -p[:, 2]
    jac[:, 1, 5] = p[:, 0]
    jac[:, 2, 3] = p[:, 1]
    jac[:, 2, 4] = -p[:, 0]
    return jac


def target_index(target) -> cKDTree:
    """Prebuilt nearest-neighbor index over a target cloud, reusable across calls."""
    return cKDTree(as_xyz(target))


def gn_icp(
    source, target, initial: RigidTransform, cfg: IcpConfig, index: cKDTree | None = None
) -> RegistrationResult:
    """Point-to-point ICP with one Gauss-Newton step per iteration.

    Per iteration: nearest-neighbor correspondences within max_corr_dist, then a
    single GN step on the 6-dim twist applied as a left multiplication. Stops on
    a small update, a small RMSE change, or the iteration cap; fewer than
    min_correspondences aborts with converged=False and an infinite RMSE.
    `index` may carry a prebuilt tree over exactly the target points.
    """
    src = as_xyz(source)
    tgt = as_xyz(target)
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise ValueError("empty cloud")
    tree = cKDTree(tgt) if index is None else index
    rot = initial.rotation.copy()
    trans = initial.translation.copy()
    prev_rmse = math.inf
    converged = False
    iterations = 0
    for it in range(1, cfg.max_iterations + 1):
        iterations = it
        moved = src @ rot.T + trans
        dist, nn = tree.query(moved)
        sel = dist <= cfg.max_corr_dist
        n_corr = int(sel.sum())
        if n_corr < cfg.min_correspondences:
            return RegistrationResult(
                pose=RigidTransform(orthonormalized(rot), trans),
                rmse=math.inf,
                iterations=it,
                converged=False,
                correspondence_count=n_corr,
            )
        p = moved[sel]
        q = tgt[nn[sel]]
        resid = p - q
        rmse = _corr_rmse(dist, sel)

        # normal equations for residual r_k = exp(xi) p_k - q_k
        jac = _point_jacobian(p)
        a = np.einsum("nij,nik->jk", jac, jac)
        b = -np.einsum("nij,ni->j", jac, resid)
        try:
            step = np.linalg.solve(a, b)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(a, b, rcond=None)[0]
        dr, dt = se3_exp(step)
        rot = dr @ rot
        trans = dr @ trans + dt
        if it % 10 == 0:
            rot = orthonormalized(rot)

        if float(np.linalg.norm(step)) < cfg.translation_eps or abs(rmse - prev_rmse) < cfg.rmse_eps:
            converged = True
            break
        prev_rmse = rmse

    pose = RigidTransform(orthonormalized(rot), trans)
    moved = src @ pose.rotation.T + pose.translation
    dist, _ = tree.query(moved)
    sel = dist <= cfg.max_corr_dist
    return RegistrationResult(
        pose=pose,
        rmse=_corr_rmse(dist, sel),
        iterations=iterations,
        converged=converged,
        correspondence_count=int(sel.sum()),
    )


def fitness_rmse(
    source,
    target,
    pose: RigidTransform,
    max_corr_dist: float,
    index: cKDTree | None = None,
) -> float:
    """RMSE of nearest-neighbor distances over source points with a target
    neighbor within max_corr_dist of their transformed position; +inf if none."""
    src = as_xyz(source)
    tgt = as_xyz(target)
    if src.shape[0] == 0 or tgt.shape[0] == 0:
        raise ValueError("empty cloud")
    if not max_corr_dist > 0.0:
        raise ValueError("max_corr_dist must be positive")
    tree = cKDTree(tgt) if index is None else index
    dist, _ = tree.query(pose.apply(src))
    sel = dist <= max_corr_dist
    return _corr_rmse(dist, sel)
