"""Binary 3D occupancy grids: construction, clearance queries, first-return ray casting."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .cloud import as_xyz


@dataclass(frozen=True)
class OccupancyGrid:
    """Axis-aligned voxel grid over a box; cells are half-open [k*r, (k+1)*r) per axis.

    Immutable after construction: the occupancy array is frozen so grids can be
    read concurrently from many workers.
    """

    origin: np.ndarray  # (3,) min corner of the covered box
    resolution: float
    occupancy: np.ndarray  # (nx, ny, nz) bool
    n_occupied: int = field(init=False)

    def __post_init__(self):
        if not self.resolution > 0.0:
            raise ValueError("resolution must be positive")
        origin = np.ascontiguousarray(np.asarray(self.origin, dtype=np.float64)).reshape(3)
        occ = np.ascontiguousarray(np.asarray(self.occupancy, dtype=bool))
        if occ.ndim != 3 or min(occ.shape) < 1:
            raise ValueError("occupancy must be a non-empty 3D array")
        origin.setflags(write=False)
        occ.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "occupancy", occ)
        object.__setattr__(self, "n_occupied", int(occ.sum()))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.occupancy.shape

    @property
    def max_corner(self) -> np.ndarray:
        return self.origin + np.array(self.dims) * self.resolution

    def contains(self, points) -> np.ndarray:
        """Inclusive box membership; points exactly on the max boundary count."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        inside = (pts >= self.origin).all(axis=1) & (pts <= self.max_corner).all(axis=1)
        return inside if np.asarray(points).ndim == 2 else bool(inside[0])

    def voxel_index(self, points) -> np.ndarray:
        """Map in-box points to voxel indices; max-boundary points clamp into the last cell."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        idx = np.floor((pts - self.origin) / self.resolution).astype(np.int64)
        idx = np.clip(idx, 0, np.array(self.dims, dtype=np.int64) - 1)
        return idx if np.asarray(points).ndim == 2 else idx[0]

    def voxel_center(self, index) -> np.ndarray:
        idx = np.asarray(index, dtype=np.float64)
        return self.origin + (idx + 0.5) * self.resolution

    def is_occupied(self, point) -> bool:
        if not self.contains(point):
            raise ValueError("out of bounds")
        i, j, k = self.voxel_index(point)
        return bool(self.occupancy[i, j, k])

    def occupied_centers(self) -> np.ndarray:
        """Centers of all occupied voxels in C (row-major index) order."""
        idx = np.argwhere(self.occupancy)
        return self.voxel_center(idx)


@dataclass(frozen=True)
class RayHit:
    point: np.ndarray  # center of the hit voxel
    voxel: tuple[int, int, int]
    range: float  # ray parameter at entry into the hit voxel


def build_grid(cloud, resolution: float, padding: float = 0.0) -> OccupancyGrid:
    """Voxelize a point cloud: a voxel is occupied iff at least one point falls in it.

    The covered box is the cloud's AABB inflated by `padding` on every side.
    """
    xyz = as_xyz(cloud)
    if xyz.shape[0] == 0:
        raise ValueError("empty input")
    if not np.isfinite(xyz).all():
        raise ValueError("invalid point: non-finite coordinate")
    if not resolution > 0.0:
        raise ValueError("resolution must be positive")
    if padding < 0.0:
        raise ValueError("padding must be non-negative")
    lo = xyz.min(axis=0) - padding
    hi = xyz.max(axis=0) + padding
    dims = np.maximum(np.ceil((hi - lo) / resolution - 1e-9).astype(np.int64), 1)
    occ = np.zeros(tuple(dims), dtype=bool)
    idx = np.clip(
        np.floor((xyz - lo) / resolution).astype(np.int64), 0, dims - 1
    )
    occ[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    return OccupancyGrid(lo, float(resolution), occ)


def clearance_ok(grid: OccupancyGrid, point, min_clearance: float) -> bool:
    """True iff no occupied voxel center lies within `min_clearance` of `point`.

    Only a local neighborhood is scanned: any voxel center closer than the
    clearance radius is at most ceil(clr/r)+1 cells away per axis.
    """
    p = np.asarray(point, dtype=np.float64).reshape(3)
    if not grid.contains(p):
        raise ValueError("out of bounds")
    if min_clearance < 0.0:
        raise ValueError("clearance must be non-negative")
    if grid.n_occupied == 0:
        return True
    r = grid.resolution
    reach = int(math.ceil(min_clearance / r)) + 1
    v = grid.voxel_index(p)
    dims = np.array(grid.dims, dtype=np.int64)
    lo = np.maximum(v - reach, 0)
    hi = np.minimum(v + reach + 1, dims)
    sub = grid.occupancy[lo[0]: hi[0], lo[1]: hi[1], lo[2]: hi[2]]
    if not sub.any():
        return True
    idx = np.argwhere(sub) + lo
    centers = grid.voxel_center(idx)
    d2 = ((centers - p) ** 2).sum(axis=1)
    return bool(d2.min() >= min_clearance * min_clearance)


@njit(cache=True, parallel=True)
def _raycast_kernel(occ, g0, res, origin, dirs, max_range, hit, vox, t_entry):
    nx, ny, nz = occ.shape
    px, py, pz = origin[0], origin[1], origin[2]
    hx = g0[0] + nx * res
    hy = g0[1] + ny * res
    hz = g0[2] + nz * res
    for k in prange(dirs.shape[0]):
        dx, dy, dz = dirs[k, 0], dirs[k, 1], dirs[k, 2]
        # clip to the grid box so rays may start outside
        t0 = 0.0
        t1 = max_range
        ok = True
        if dx != 0.0:
            ta = (g0[0] - px) / dx
            tb = (hx - px) / dx
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif px < g0[0] or px > hx:
            ok = False
        if dy != 0.0:
            ta = (g0[1] - py) / dy
            tb = (hy - py) / dy
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif py < g0[1] or py > hy:
            ok = False
        if dz != 0.0:
            ta = (g0[2] - pz) / dz
            tb = (hz - pz) / dz
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
        elif pz < g0[2] or pz > hz:
            ok = False
        if not ok or t0 > t1:
            hit[k] = False
            continue

        ix = int(math.floor((px + t0 * dx - g0[0]) / res))
        iy = int(math.floor((py + t0 * dy - g0[1]) / res))
        iz = int(math.floor((pz + t0 * dz - g0[2]) / res))
        if ix < 0:
            ix = 0
        elif ix >= nx:
            ix = nx - 1
        if iy < 0:
            iy = 0
        elif iy >= ny:
            iy = ny - 1
        if iz < 0:
            iz = 0
        elif iz >= nz:
            iz = nz - 1

        sx = 1 if dx > 0.0 else (-1 if dx < 0.0 else 0)
        sy = 1 if dy > 0.0 else (-1 if dy < 0.0 else 0)
        sz = 1 if dz > 0.0 else (-1 if dz < 0.0 else 0)
        invx = 1.0 / dx if dx != 0.0 else 0.0
        invy = 1.0 / dy if dy != 0.0 else 0.0
        invz = 1.0 / dz if dz != 0.0 else 0.0

        found = False
        t_cur = t0
        while True:
            if occ[ix, iy, iz]:
                found = True
                break
            # next boundary crossings, recomputed from the exact geometry so
            # long traversals accumulate no parameter drift
            tx = ((g0[0] + (ix + (1 if sx > 0 else 0)) * res) - px) * invx if sx != 0 else 1e308
            ty = ((g0[1] + (iy + (1 if sy > 0 else 0)) * res) - py) * invy if sy != 0 else 1e308
            tz = ((g0[2] + (iz + (1 if sz > 0 else 0)) * res) - pz) * invz if sz != 0 else 1e308
            # step the axis with the smallest crossing; ties step x, then y, then z
            if tx <= ty and tx <= tz:
                ix += sx
                t_cur = tx
                if ix < 0 or ix >= nx:
                    break
            elif ty <= tz:
                iy += sy
                t_cur = ty
                if iy < 0 or iy >= ny:
                    break
            else:
                iz += sz
                t_cur = tz
                if iz < 0 or iz >= nz:
                    break
            if t_cur > max_range:
                break
        hit[k] = found
        if found:
            vox[k, 0] = ix
            vox[k, 1] = iy
            vox[k, 2] = iz
            t_entry[k] = t_cur


def raycast_batch(grid: OccupancyGrid, origin, directions, max_range: float):
    """Cast many rays at once; returns (hit_mask, voxel_indices, entry_params).

    Directions must be unit vectors. A ray hits the first occupied voxel whose
    entry parameter is <= max_range; misses leave their output rows undefined.
    """
    p = np.ascontiguousarray(np.asarray(origin, dtype=np.float64)).reshape(3)
    dirs = np.ascontiguousarray(np.atleast_2d(np.asarray(directions, dtype=np.float64)))
    norms = np.linalg.norm(dirs, axis=1)
    if dirs.shape[1] != 3 or not np.all(np.abs(norms - 1.0) <= 1e-9):
        raise ValueError("invalid direction: expected unit vectors")
    if not max_range > 0.0:
        raise ValueError("max_range must be positive")
    n = dirs.shape[0]
    hit = np.zeros(n, dtype=bool)
    vox = np.zeros((n, 3), dtype=np.int64)
    t_entry = np.zeros(n, dtype=np.float64)
    _raycast_kernel(
        grid.occupancy, grid.origin, float(grid.resolution), p, dirs,
        float(max_range), hit, vox, t_entry,
    )
    return hit, vox, t_entry


def raycast_first_return(grid: OccupancyGrid, origin, direction, max_range: float):
    """First-return cast of a single ray; returns a RayHit or None.

    The reported point is the hit voxel's center. A ray starting inside the
    grid must start in a free voxel.
    """
    p = np.asarray(origin, dtype=np.float64).reshape(3)
    if grid.contains(p) and grid.is_occupied(p):
        raise ValueError("occupied origin")
    hit, vox, t_entry = raycast_batch(grid, p, direction, max_range)
    if not hit[0]:
        return None
    voxel = (int(vox[0, 0]), int(vox[0, 1]), int(vox[0, 2]))
    return RayHit(grid.voxel_center(vox[0]), voxel, float(t_entry[0]))
