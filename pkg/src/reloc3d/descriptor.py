"""Polar max-height descriptors (Scan Context), ring keys, and the descriptor database."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import Frame, PointCloud
from .grid import OccupancyGrid
from .scansim import SensorModel, synthesize_scan, to_sensor_frame
from .se3 import wrap_pi

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ScanContextParams:
    n_rings: int = 20
    n_sectors: int = 60
    l_max: float = 50.0
    z_offset: float = 0.0

    def __post_init__(self):
        if self.n_rings < 1 or self.n_sectors < 1:
            raise ValueError("bin counts must be positive")
        if not self.l_max > 0.0:
            raise ValueError("l_max must be positive")


@dataclass(frozen=True)
class ScanContext:
    """(n_rings, n_sectors) max-height image; 0.0 marks an empty bin."""

    values: np.ndarray
    params: ScanContextParams

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.shape != (self.params.n_rings, self.params.n_sectors):
            raise ValueError("descriptor shape does not match params")
        if not np.isfinite(v).all():
            raise ValueError("non-finite descriptor")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def encode(cloud: PointCloud, params: ScanContextParams) -> ScanContext:
    """Bin a sensor-frame cloud into rings x sectors, keeping the max height per bin.

    Points at planar range >= l_max are discarded. Ring width is l_max/n_rings,
    sector width 2*pi/n_sectors with azimuth wrapped into [0, 2*pi).
    """
    if cloud.frame is not Frame.SENSOR:
        raise ValueError("expected a sensor-frame cloud")
    xyz = cloud.xyz
    values = np.full((params.n_rings, params.n_sectors), -np.inf)
    if len(cloud):
        rho = np.hypot(xyz[:, 0], xyz[:, 1])
        keep = rho < params.l_max
        rho = rho[keep]
        if rho.size:
            az = np.arctan2(xyz[keep, 1], xyz[keep, 0]) % _TWO_PI
            ring = np.floor(rho / (params.l_max / params.n_rings)).astype(np.int64)
            ring = np.minimum(ring, params.n_rings - 1)
            sector = np.floor(az / (_TWO_PI / params.n_sectors)).astype(np.int64)
            sector = np.minimum(sector, params.n_sectors - 1)
            np.maximum.at(values, (ring, sector), xyz[keep, 2] + params.z_offset)
    values[np.isneginf(values)] = 0.0
    return ScanContext(values, params)


def ring_key(sc: ScanContext) -> np.ndarray:
    """Per-ring occupancy fraction: share of non-empty sectors in each ring."""
    return (sc.values != 0.0).mean(axis=1)


def sc_distance(query: ScanContext, candidate: ScanContext) -> tuple[float, int]:
    """Best circular-shift column-cosine distance and the shift achieving it.

    For shift n, compare query column j with candidate column (j+n) mod n_sectors
    over columns where both are non-empty; the per-shift distance is the mean
    (1 - cosine). No co-non-empty columns gives distance 1. Ties in the minimum
    go to the smallest shift.
    """
    if query.params != candidate.params:
        raise ValueError("incompatible descriptors")
    q = query.values
    c = candidate.values
    ns = query.params.n_sectors
    nq = np.linalg.norm(q, axis=0)
    nc = np.linalg.norm(c, axis=0)
    valid = np.outer(nq > 0.0, nc > 0.0)
    denom = np.outer(nq, nc)
    cos = np.zeros((ns, ns))
    np.divide(q.T @ c, denom, out=cos, where=valid)
    j = np.arange(ns)[:, None]
    k = (j + np.arange(ns)[None, :]) % ns
    cos_by_shift = cos[j, k]
    valid_by_shift = valid[j, k]
    counts = valid_by_shift.sum(axis=0)
    sums = np.where(valid_by_shift, cos_by_shift, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore"):
        d = np.where(counts > 0, 1.0 - sums / np.maximum(counts, 1), 1.0)
    d = np.maximum(d, 0.0)
    best = int(np.argmin(d))
    return float(d[best]), best


def shift_to_yaw(shift: int, n_sectors: int) -> float:
    """Map a best-alignment shift to a yaw estimate in (-pi, pi]."""
    if not 0 <= shift < n_sectors:
        raise ValueError("invalid shift")
    return wrap_pi(_TWO_PI * shift / n_sectors)


@dataclass(frozen=True)
class RetrievalCandidate:
    index: int
    position: np.ndarray
    yaw: float
    distance: float


@dataclass(frozen=True, eq=False)
class DescriptorDatabase:
    """Positions with their descriptors and ring keys, plus build provenance.

    Descriptors and keys are stored float32 (the on-disk precision); entry
    order is the sample order the database was built with.
    """

    positions: np.ndarray  # (n, 3) float64
    descriptors: np.ndarray  # (n, n_rings, n_sectors) float32
    ring_keys: np.ndarray  # (n, n_rings) float32
    params: ScanContextParams
    sensor: SensorModel
    resolution: float

    def __post_init__(self):
        pos = np.ascontiguousarray(np.asarray(self.positions, dtype=np.float64)).reshape(-1, 3)
        desc = np.ascontiguousarray(np.asarray(self.descriptors, dtype=np.float32))
        keys = np.ascontiguousarray(np.asarray(self.ring_keys, dtype=np.float32))
        n = pos.shape[0]
        if desc.shape != (n, self.params.n_rings, self.params.n_sectors):
            raise ValueError("descriptor block shape mismatch")
        if keys.shape != (n, self.params.n_rings):
            raise ValueError("ring key block shape mismatch")
        for a in (pos, desc, keys):
            a.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "descriptors", desc)
        object.__setattr__(self, "ring_keys", keys)

    def __len__(self) -> int:
        return self.positions.shape[0]

    def descriptor(self, i: int) -> ScanContext:
        return ScanContext(self.descriptors[i].astype(np.float64), self.params)


def build_database(
    grid: OccupancyGrid, samples, sensor: SensorModel, params: ScanContextParams
) -> DescriptorDatabase:
    """Synthesize a scan at every sample position and encode it.

    Entry i corresponds to samples[i]; each scan is taken with the sensor's
    fixed mounting orientation and transformed into the sensor frame before
    encoding.
    """
    pos = np.asarray(samples, dtype=np.float64).reshape(-1, 3)
    n = pos.shape[0]
    desc = np.zeros((n, params.n_rings, params.n_sectors), dtype=np.float32)
    keys = np.zeros((n, params.n_rings), dtype=np.float32)
    for i in range(n):
        scan = synthesize_scan(grid, pos[i], sensor)
        local = to_sensor_frame(scan, pos[i], sensor.orientation)
        sc = encode(local, params)
        desc[i] = sc.values.astype(np.float32)
        keys[i] = ring_key(sc).astype(np.float32)
    return DescriptorDatabase(pos, desc, keys, params, sensor, float(grid.resolution))


def _score_block(q: np.ndarray, block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """sc_distance of one query against a (m, n_rings, n_sectors) block.

    Same semantics as the scalar routine, vectorized over candidates: per-shift
    mean (1 - cosine) over co-non-empty columns, 1.0 where no overlap, first
    minimum wins. Returns (distances, shifts) of length m.
    """
    ns = q.shape[1]
    qn = np.linalg.norm(q, axis=0)
    cn = np.linalg.norm(block, axis=1)  # (m, ns)
    num = np.matmul(q.T[None, :, :], block)  # (m, ns, ns): [m, j, i]
    valid = (qn[None, :, None] > 0.0) & (cn[:, None, :] > 0.0)
    denom = qn[None, :, None] * cn[:, None, :]
    cos = np.zeros_like(num)
    np.divide(num, denom, out=cos, where=valid)
    j = np.arange(ns)[:, None]
    k = (j + np.arange(ns)[None, :]) % ns
    cos_by_shift = cos[:, j, k]  # [m, j, shift]
    valid_by_shift = valid[:, j, k]
    counts = valid_by_shift.sum(axis=1)
    sums = np.where(valid_by_shift, cos_by_shift, 0.0).sum(axis=1)
    d = np.where(counts > 0, 1.0 - sums / np.maximum(counts, 1), 1.0)
    d = np.maximum(d, 0.0)
    shifts = np.argmin(d, axis=1)
    return d[np.arange(d.shape[0]), shifts], shifts


def query(
    db: DescriptorDatabase,
    q: ScanContext,
    top_k: int = 5,
    prefilter: int | None = None,
) -> list[RetrievalCandidate]:
    """Two-stage retrieval: ring-key Euclidean prefilter, then full descriptor ranking.

    Returns up to top_k candidates ordered by ascending descriptor distance;
    ties resolve to the smaller database index. With prefilter >= len(db) the
    ranking equals brute force over every entry.
    """
    if len(db) == 0:
        raise ValueError("empty database")
    if q.params != db.params:
        raise ValueError("incompatible descriptors")
    if top_k < 1:
        raise ValueError("top_k must be positive")
    if prefilter is None:
        prefilter = max(10 * top_k, 50)
    if prefilter < top_k:
        raise ValueError("prefilter must be at least top_k")
    qkey = ring_key(q)
    d2 = ((db.ring_keys.astype(np.float64) - qkey) ** 2).sum(axis=1)
    shortlist = np.argsort(d2, kind="stable")[:prefilter]
    scored = []
    chunk = 256
    for s in range(0, len(shortlist), chunk):
        idx = shortlist[s: s + chunk]
        dists, shifts = _score_block(q.values, db.descriptors[idx].astype(np.float64))
        scored.extend(zip(dists.tolist(), idx.tolist(), shifts.tolist()))
    scored.sort(key=lambda s: (s[0], s[1]))
    out = []
    for dist, i, shift in scored[: min(top_k, len(scored))]:
        out.append(
            RetrievalCandidate(
                index=i,
                position=db.positions[i].copy(),
                yaw=shift_to_yaw(shift, db.params.n_sectors),
                distance=dist,
            )
        )
    return out
