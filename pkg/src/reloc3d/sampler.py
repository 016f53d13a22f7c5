"""Constraint-aware uniform position sampling over free space (RRT-style growth).

Accepted positions must clear obstacles, keep a minimum mutual separation
(blue-noise spacing), and see enough structure to be localizable, with a
windowed yield rule that stops expansion once acceptances decay.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import OccupancyGrid, clearance_ok, raycast_batch


class NoFeasibleRegionError(ValueError):
    """No position satisfying all sampling constraints could be found."""


def fibonacci_directions(n: int) -> np.ndarray:
    """Deterministic, near-uniform unit directions (spherical Fibonacci lattice)."""
    if n < 1:
        raise ValueError("need at least one direction")
    i = np.arange(n)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _default_obs_dirs():
    return fibonacci_directions(32)


@dataclass(frozen=True, eq=False)
class SamplerConfig:
    vehicle_radius: float = 0.4
    safety_margin: float = 0.3
    min_separation: float = 1.2
    obs_directions: np.ndarray = field(default_factory=_default_obs_dirs)
    obs_range: float = 50.0
    min_hits: int = 2
    steer_step: float = 2.4
    window: int = 10000
    ref_window_start: int = 5
    ref_window_end: int = 10
    stop_ratio: float = 0.4
    max_iters: int = 500000
    seed: int = 0

    def __post_init__(self):
        if self.min_separation <= 0.0 or self.steer_step <= 0.0:
            raise ValueError("separation and steer step must be positive")
        if self.vehicle_radius < 0.0 or self.safety_margin < 0.0:
            raise ValueError("radii must be non-negative")
        if not 0.0 < self.stop_ratio < 1.0:
            raise ValueError("stop_ratio must be in (0, 1)")
        if not 1 <= self.ref_window_start <= self.ref_window_end:
            raise ValueError("reference window range is invalid")
        if self.window < 1 or self.max_iters < 1 or self.min_hits < 1:
            raise ValueError("window, max_iters and min_hits must be positive")
        dirs = np.ascontiguousarray(np.asarray(self.obs_directions, dtype=np.float64))
        if dirs.ndim != 2 or dirs.shape[1] != 3:
            raise ValueError("obs_directions must be (K, 3)")
        dirs.setflags(write=False)
        object.__setattr__(self, "obs_directions", dirs)

    @property
    def clearance(self) -> float:
        return self.vehicle_radius + self.safety_margin


@dataclass
class StopState:
    """Completed-window acceptance counts for the early-stopping rule."""

    window_counts: list[int] = field(default_factory=list)

    @property
    def completed(self) -> int:
        return len(self.window_counts)

    def reference_mean(self, cfg: SamplerConfig):
        """Mean acceptance count over the reference windows; None until they exist."""
        if self.completed < cfg.ref_window_end:
            return None
        return float(
            np.mean(self.window_counts[cfg.ref_window_start - 1: cfg.ref_window_end])
        )


def should_stop(state: StopState, cfg: SamplerConfig) -> bool:
    """True once the latest completed window's yield falls below stop_ratio x reference."""
    if state.completed <= cfg.ref_window_end:
        return False
    mu_ref = state.reference_mean(cfg)
    return state.window_counts[-1] < cfg.stop_ratio * mu_ref


@dataclass(frozen=True)
class CandidateSet:
    """Accepted sample positions with their RRT parent links (-1 marks the root)."""

    positions: np.ndarray
    parents: np.ndarray
    iterations: int = 0
    window_counts: tuple[int, ...] = ()
    stopped_early: bool = False

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=np.float64)).reshape(-1, 3)
        par = np.ascontiguousarray(np.asarray(self.parents, dtype=np.int64)).reshape(-1)
        if par.shape[0] != pos.shape[0]:
            raise ValueError("positions and parents disagree")
        pos.setflags(write=False)
        par.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "parents", par)

    def __len__(self) -> int:
        return self.positions.shape[0]


def _positions_of(existing) -> np.ndarray:
    if isinstance(existing, CandidateSet):
        return existing.positions
    return np.asarray(existing, dtype=np.float64).reshape(-1, 3)


def separation_ok(point, existing, min_separation: float) -> bool:
    """True iff `point` keeps at least min_separation to every existing position."""
    pos = _positions_of(existing)
    if pos.shape[0] == 0:
        return True
    p = np.asarray(point, dtype=np.float64).reshape(3)
    d2 = ((pos - p) ** 2).sum(axis=1)
    return bool(d2.min() >= min_separation * min_separation)


def observability_hits(grid: OccupancyGrid, point, directions, max_range: float) -> int:
    """Number of probe directions whose first-return cast hits structure."""
    hit, _, _ = raycast_batch(grid, point, directions, max_range)
    return int(hit.sum())


class _SpatialHash:
    """Uniform hash over cells of size `cell` for exact radius and nearest queries."""

    def __init__(self, cell: float):
        self.cell = cell
        self.cells: dict[tuple[int, int, int], list[int]] = {}
        self.points: list[np.ndarray] = []
        self.key_lo = [0, 0, 0]
        self.key_hi = [0, 0, 0]

    def _key(self, p) -> tuple[int, int, int]:
        return (
            int(math.floor(p[0] / self.cell)),
            int(math.floor(p[1] / self.cell)),
            int(math.floor(p[2] / self.cell)),
        )

    def insert(self, p: np.ndarray) -> int:
        idx = len(self.points)
        key = self._key(p)
        if idx == 0:
            self.key_lo = list(key)
            self.key_hi = list(key)
        else:
            for a in range(3):
                self.key_lo[a] = min(self.key_lo[a], key[a])
                self.key_hi[a] = max(self.key_hi[a], key[a])
        self.points.append(p)
        self.cells.setdefault(key, []).append(idx)
        return idx

    def any_within(self, p, radius: float) -> bool:
        # radius <= cell, so the 27-neighborhood covers every candidate
        kx, ky, kz = self._key(p)
        r2 = radius * radius
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for idx in self.cells.get((kx + dx, ky + dy, kz + dz), ()):
                        q = self.points[idx]
                        if (
                            (q[0] - p[0]) ** 2
                            + (q[1] - p[1]) ** 2
                            + (q[2] - p[2]) ** 2
                        ) < r2:
                            return True
        return False

    @staticmethod
    def _shell_keys(kx: int, ky: int, kz: int, s: int):
        """Cell keys at exact Chebyshev distance s, each yielded once."""
        if s == 0:
            yield (kx, ky, kz)
            return
        for dx in (-s, s):
            for dy in range(-s, s + 1):
                for dz in range(-s, s + 1):
                    yield (kx + dx, ky + dy, kz + dz)
        for dy in (-s, s):
            for dx in range(-s + 1, s):
                for dz in range(-s, s + 1):
                    yield (kx + dx, ky + dy, kz + dz)
        for dz in (-s, s):
            for dx in range(-s + 1, s):
                for dy in range(-s + 1, s):
                    yield (kx + dx, ky + dy, kz + dz)

    def nearest(self, p) -> int:
        """Index of the closest stored point (-1 when empty); expanding shell search."""
        if not self.points:
            return -1
        kx, ky, kz = self._key(p)
        max_shell = 0
        for a, ka in enumerate((kx, ky, kz)):
            max_shell = max(max_shell, abs(ka - self.key_lo[a]), abs(ka - self.key_hi[a]))
        best = -1
        best_dist = math.inf
        for shell in range(max_shell + 1):
            # a point in a cell at Chebyshev shell s is at least (s-1)*cell away,
            # so once the current best beats that bound no farther shell matters
            if best >= 0 and (shell - 1) * self.cell > best_dist:
                break
            for key in self._shell_keys(kx, ky, kz, shell):
                for idx in self.cells.get(key, ()):
                    q = self.points[idx]
                    d = math.sqrt(
                        (q[0] - p[0]) ** 2
                        + (q[1] - p[1]) ** 2
                        + (q[2] - p[2]) ** 2
                    )
                    if d < best_dist or (d == best_dist and idx < best):
                        best = idx
                        best_dist = d
        return best


def _in_free_voxel(grid: OccupancyGrid, p) -> bool:
    i, j, k = grid.voxel_index(p)
    return not bool(grid.occupancy[i, j, k])


def sample_candidates(grid: OccupancyGrid, cfg: SamplerConfig) -> CandidateSet:
    """Grow a tree of accepted positions over the grid's free space.

    Each iteration draws a uniform target in the grid box, steers from the
    nearest accepted position by at most steer_step, and accepts the steered
    point iff it passes clearance, separation, and observability. Acceptance
    counts per window of `window` iterations feed the early-stopping rule.
    Deterministic for a fixed grid and config.
    """
    rng = np.random.default_rng(cfg.seed)
    origin = grid.origin
    extent = grid.max_corner - origin

    def draw() -> np.ndarray:
        return origin + rng.random(3) * extent

    def feasible(p, hash_) -> bool:
        if not _in_free_voxel(grid, p):
            return False
        if hash_ is not None and hash_.any_within(p, cfg.min_separation):
            return False
        if not clearance_ok(grid, p, cfg.clearance):
            return False
        return (
            observability_hits(grid, p, cfg.obs_directions, cfg.obs_range)
            >= cfg.min_hits
        )

    root = None
    for _ in range(10 * cfg.window):
        p = draw()
        if feasible(p, None):
            root = p
            break
    if root is None:
        raise NoFeasibleRegionError("no feasible region")

    hash_ = _SpatialHash(cfg.min_separation)
    hash_.insert(root)
    positions = [root]
    parents = [-1]

    state = StopState()
    accepted_in_window = 0
    iterations = 0
    stopped_early = False
    for it in range(1, cfg.max_iters + 1):
        iterations = it
        target = draw()
        near_idx = hash_.nearest(target)
        near = positions[near_idx]
        delta = target - near
        dist = float(np.linalg.norm(delta))
        if dist > 1e-12:
            p_new = near + delta * (min(cfg.steer_step, dist) / dist)
            if feasible(p_new, hash_):
                hash_.insert(p_new)
                positions.append(p_new)
                parents.append(near_idx)
                accepted_in_window += 1
        if it % cfg.window == 0:
            state.window_counts.append(accepted_in_window)
            accepted_in_window = 0
            if should_stop(state, cfg):
                stopped_early = True
                break

    return CandidateSet(
        np.asarray(positions),
        np.asarray(parents, dtype=np.int64),
        iterations=iterations,
        window_counts=tuple(state.window_counts),
        stopped_early=stopped_early,
    )


def column_density(samples, grid: OccupancyGrid) -> np.ndarray:
    """Per-(x, y) voxel-column counts of samples, for coverage inspection."""
    pos = _positions_of(samples)
    nx, ny, _ = grid.dims
    counts = np.zeros((nx, ny), dtype=np.int64)
    if pos.shape[0]:
        idx = grid.voxel_index(pos)
        np.add.at(counts, (idx[:, 0], idx[:, 1]), 1)
    return counts
