"""Independent oracles the test suite checks library code against.

Nothing in here may share algebra with the implementation under test: the ray
oracle uses only point-in-voxel membership, the alignment oracle is the
closed-form SVD solution.
"""
from __future__ import annotations

import numpy as np

from reloc3d.grid import OccupancyGrid
from reloc3d.se3 import RigidTransform


def _voxel_of(grid: OccupancyGrid, point) -> tuple[int, int, int] | None:
    """Voxel index of a point, or None when it lies outside the covered box."""
    p = np.asarray(point, dtype=np.float64)
    idx = np.floor((p - grid.origin) / grid.resolution).astype(np.int64)
    if (idx < 0).any() or (idx >= np.array(grid.dims)).any():
        return None
    return int(idx[0]), int(idx[1]), int(idx[2])


def _chain_between(grid, origin, direction, t0, v0, t1, v1, out):
    """Append every voxel crossed in (t0, t1] to `out` as (voxel, t_inside).

    v0/v1 are the voxels at the endpoint parameters. Identical endpoints mean
    no crossing; face neighbors mean exactly one. Anything wider is split at
    the midpoint and resolved recursively, so corner slivers thinner than the
    sampling step are still visited in ray order. t_inside is a parameter at
    which the ray is inside the voxel, kept for later entry refinement.
    Intervals below 1e-12 (an exact corner) are recorded unresolved.
    """
    if v1 == v0:
        return
    manhattan = abs(v1[0] - v0[0]) + abs(v1[1] - v0[1]) + abs(v1[2] - v0[2])
    if manhattan <= 1 or t1 - t0 < 1e-12:
        out.append((v1, t1))
        return
    tm = 0.5 * (t0 + t1)
    vm = _voxel_of(grid, origin + tm * direction)
    if vm is None:
        vm = v1
    _chain_between(grid, origin, direction, t0, v0, tm, vm, out)
    _chain_between(grid, origin, direction, tm, vm, t1, v1, out)


def march_first_return(grid: OccupancyGrid, origin, direction, max_range: float):
    """Fine-step marching reference for first-return ray casting.

    Samples the ray every resolution/20, reconstructs the exact voxel chain by
    bisecting any sampled jump wider than one face crossing, and reports the
    first occupied voxel together with the ray parameter at its entry (refined
    by bisection on membership alone). Returns (voxel, t_entry) or None. The
    origin must lie inside the box, in a free voxel.
    """
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    step = grid.resolution / 20.0
    n_steps = int(np.ceil(max_range / step)) + 1
    ts = np.minimum(step * np.arange(n_steps + 1), max_range)
    pts = o[None, :] + ts[:, None] * d[None, :]

    v_start = _voxel_of(grid, pts[0])
    assert v_start is not None, "oracle rays must start inside the box"
    chain: list[tuple[tuple[int, int, int], float]] = [(v_start, 0.0)]
    prev_t, prev_v = 0.0, v_start
    for i in range(1, len(ts)):
        v = _voxel_of(grid, pts[i])
        if v is None:
            # the box is convex: once outside, the ray never returns. Resolve
            # the remaining in-box stretch up to the exit before stopping.
            lo, hi = prev_t, float(ts[i])
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if _voxel_of(grid, o + mid * d) is None:
                    hi = mid
                else:
                    lo = mid
            v_last = _voxel_of(grid, o + lo * d)
            if v_last is not None:
                _chain_between(grid, o, d, prev_t, prev_v, lo, v_last, chain)
            break
        _chain_between(grid, o, d, prev_t, prev_v, float(ts[i]), v, chain)
        prev_t, prev_v = float(ts[i]), v

    hit = None
    t_before = 0.0
    t_inside = 0.0
    for k in range(len(chain)):
        v, t_hint = chain[k]
        if grid.occupancy[v]:
            hit = v
            t_inside = t_hint
            t_before = chain[k - 1][1]
            break
    if hit is None:
        return None

    # the ray crosses a convex voxel in one interval, so with `lo` before it
    # and `hi` inside it, membership bisection converges to the entry param
    def inside(t: float) -> bool:
        return _voxel_of(grid, o + t * d) == hit

    lo, hi = t_before, t_inside
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo < 1e-10:
            break
    if hi > max_range:
        return None
    return hit, hi


def structured_cloud(seed: int, n: int = 4000):
    """Continuous surfaces (floor, two walls, two boxes), not lattice points.

    Lattice-snapped clouds alias under small rotations; registration tests
    need geometry where the nearest neighbour field is smooth.
    """
    from reloc3d.cloud import Frame, PointCloud

    rng = np.random.default_rng(seed)
    pts = []
    floor = np.stack(
        [rng.uniform(0, 12, n // 2), rng.uniform(0, 8, n // 2), np.zeros(n // 2)], axis=1
    )
    pts.append(floor)
    wall_a = np.stack(
        [rng.uniform(0, 12, n // 4), np.zeros(n // 4), rng.uniform(0, 3, n // 4)], axis=1
    )
    wall_b = np.stack(
        [np.full(n // 8, 12.0), rng.uniform(0, 8, n // 8), rng.uniform(0, 3, n // 8)], axis=1
    )
    pts.extend([wall_a, wall_b])
    for cx, cy, sz in ((4.0, 5.0, 1.5), (9.0, 2.5, 2.5)):
        face = np.stack(
            [
                np.full(n // 16, cx),
                rng.uniform(cy - 1, cy + 1, n // 16),
                rng.uniform(0, sz, n // 16),
            ],
            axis=1,
        )
        top = np.stack(
            [
                rng.uniform(cx - 1, cx + 1, n // 16),
                rng.uniform(cy - 1, cy + 1, n // 16),
                np.full(n // 16, sz),
            ],
            axis=1,
        )
        pts.extend([face, top])
    return PointCloud(np.concatenate(pts), Frame.MAP)


def random_rigid_transform(rng, max_t: float = 1.0, max_deg: float = 10.0) -> RigidTransform:
    """Uniform random axis, rotation angle <= max_deg, translation <= max_t per axis."""
    from reloc3d.se3 import se3_exp

    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.radians(rng.uniform(0.0, max_deg))
    rot = se3_exp(np.concatenate([np.zeros(3), axis * angle]))[0]
    t = rng.uniform(-max_t, max_t, size=3)
    return RigidTransform(rot, t)


def horn_align(source: np.ndarray, target: np.ndarray) -> RigidTransform:
    """Closed-form least-squares rigid alignment of paired points (SVD)."""
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    mu_s = src.mean(axis=0)
    mu_t = tgt.mean(axis=0)
    h = (src - mu_s).T @ (tgt - mu_t)
    u, _, vt = np.linalg.svd(h)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    r = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return RigidTransform(r, mu_t - r @ mu_s)


def rotation_angle_deg(r: np.ndarray) -> float:
    """Geodesic angle of a rotation matrix, degrees."""
    c = (np.trace(r) - 1.0) / 2.0
    return float(np.degrees(np.arccos(np.clip(c, -1.0, 1.0))))
