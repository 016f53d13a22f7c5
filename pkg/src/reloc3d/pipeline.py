"""Online relocalization: accumulate scans, re-describe, retrieve, refine, gate."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .cloud import Frame, PointCloud, concatenate
from .descriptor import (
    DescriptorDatabase,
    ScanContext,
    ScanContextParams,
    encode,
    query,
)
from .grid import OccupancyGrid
from .registration import (
    IcpConfig,
    RigidTransform,
    fitness_rmse,
    gn_icp,
    target_index,
    voxel_downsample,
)
from .scansim import SensorModel, synthesize_scan, to_sensor_frame
from .se3 import rot_x, rot_y, rot_z


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    sensor: SensorModel = field(default_factory=SensorModel)
    sc: ScanContextParams = field(default_factory=ScanContextParams)
    icp: IcpConfig = field(default_factory=IcpConfig)
    accum_frames: int = 10
    n_candidates: int = 5
    accept_rmse: float = 0.3
    local_resolution: float = 0.2
    query_voxel: float = 0.2
    map_voxel: float = 0.4
    default_roll: float = 0.0
    default_pitch: float = 0.0
    prefilter: int | None = None

    def __post_init__(self):
        if self.accum_frames < 1 or self.n_candidates < 1:
            raise ValueError("frame and candidate counts must be positive")
        if min(self.local_resolution, self.query_voxel, self.map_voxel) <= 0.0:
            raise ValueError("resolutions must be positive")
        if not self.accept_rmse > 0.0:
            raise ValueError("accept_rmse must be positive")


class RelocalizationStatus(Enum):
    ACCEPTED = "accepted"
    FAILED = "failed"


@dataclass(frozen=True)
class StageTimings:
    accumulate: float = 0.0
    encode: float = 0.0
    retrieve: float = 0.0
    downsample: float = 0.0
    icp: tuple[float, ...] = ()

    @property
    def total(self) -> float:
        return self.accumulate + self.encode + self.retrieve + self.downsample + sum(self.icp)


@dataclass(frozen=True)
class RelocalizationOutcome:
    status: RelocalizationStatus
    pose: RigidTransform | None
    candidate_rank_used: int  # 1-based rank of the accepted candidate, 0 if failed
    rmse: float
    timings: StageTimings
    attempts: tuple[float, ...] = ()  # fitness of every refined candidate, in rank order

    @property
    def accepted(self) -> bool:
        return self.status is RelocalizationStatus.ACCEPTED


def accumulate_scans(scans, n_frames: int) -> PointCloud:
    """Concatenate the most recent n_frames sensor-frame scans in arrival order."""
    scans = list(scans)
    if len(scans) < n_frames:
        raise ValueError("insufficient frames")
    recent = scans[-n_frames:]
    for s in recent:
        if s.frame is not Frame.SENSOR:
            raise ValueError("expected sensor-frame scans")
    return concatenate(recent)


def local_occupancy_grid(accumulated: PointCloud, cfg: PipelineConfig) -> OccupancyGrid:
    """Voxelize an accumulated cloud around the sensor origin.

    The grid spans +-max_range from the origin; the origin voxel and its 26
    neighbors are forced free so the virtual rescan can leave the sensor cell.
    """
    if len(accumulated) == 0:
        raise ValueError("empty query")
    r = cfg.local_resolution
    reach = cfg.sensor.max_range
    n = int(math.ceil(2.0 * reach / r - 1e-9))
    origin = np.full(3, -reach)
    occ = np.zeros((n, n, n), dtype=bool)
    xyz = accumulated.xyz
    inside = ((xyz >= origin) & (xyz < origin + n * r)).all(axis=1)
    idx = np.floor((xyz[inside] - origin) / r).astype(np.int64)
    occ[idx[:, 0], idx[:, 1], idx[:, 2]] = True
    c = int(math.floor(reach / r))
    occ[max(c - 1, 0): c + 2, max(c - 1, 0): c + 2, max(c - 1, 0): c + 2] = False
    return OccupancyGrid(origin, r, occ)


def make_query_descriptor(accumulated: PointCloud, cfg: PipelineConfig) -> ScanContext:
    """Re-describe an accumulated cloud exactly the way database entries were built.

    The cloud is voxelized into a local grid, rescanned from the origin with the
    same beam lattice (identity mounting), and the virtual scan is encoded.
    """
    local = local_occupancy_grid(accumulated, cfg)
    model = replace(cfg.sensor, orientation=np.eye(3))
    virtual = synthesize_scan(local, np.zeros(3), model)
    virtual = to_sensor_frame(virtual, np.zeros(3), np.eye(3))
    return encode(virtual, cfg.sc)


def relocalize(
    db: DescriptorDatabase, global_map: PointCloud, scans, cfg: PipelineConfig
) -> RelocalizationOutcome:
    """Full online pass: accumulate, retrieve, then refine candidates in rank order.

    The first candidate whose refined fitness passes accept_rmse wins; if none
    does the outcome is Failed with every attempted fitness recorded.
    """
    if cfg.sc != db.params:
        raise ValueError("config/database mismatch")
    if len(db) == 0:
        raise ValueError("empty database")
    if global_map.frame is not Frame.MAP:
        raise ValueError("expected a map-frame cloud")

    t0 = time.perf_counter()
    accumulated = accumulate_scans(scans, cfg.accum_frames)
    t1 = time.perf_counter()
    q = make_query_descriptor(accumulated, cfg)
    t2 = time.perf_counter()
    candidates = query(db, q, cfg.n_candidates, cfg.prefilter)
    t3 = time.perf_counter()
    query_down = voxel_downsample(accumulated, cfg.query_voxel)
    map_down = voxel_downsample(global_map, cfg.map_voxel)
    map_index = target_index(map_down)
    t4 = time.perf_counter()

    tilt = rot_y(cfg.default_pitch) @ rot_x(cfg.default_roll)
    icp_times: list[float] = []
    attempts: list[float] = []
    for rank, cand in enumerate(candidates, start=1):
        tc = time.perf_counter()
        guess = RigidTransform(rot_z(cand.yaw) @ tilt, cand.position)
        refined = gn_icp(query_down, map_down, guess, cfg.icp, index=map_index)
        rmse = fitness_rmse(
            query_down, map_down, refined.pose, cfg.icp.max_corr_dist, index=map_index
        )
        icp_times.append(time.perf_counter() - tc)
        attempts.append(rmse)
        if rmse <= cfg.accept_rmse:
            timings = StageTimings(
                accumulate=t1 - t0,
                encode=t2 - t1,
                retrieve=t3 - t2,
                downsample=t4 - t3,
                icp=tuple(icp_times),
            )
            return RelocalizationOutcome(
                status=RelocalizationStatus.ACCEPTED,
                pose=refined.pose,
                candidate_rank_used=rank,
                rmse=rmse,
                timings=timings,
                attempts=tuple(attempts),
            )

    timings = StageTimings(
        accumulate=t1 - t0,
        encode=t2 - t1,
        retrieve=t3 - t2,
        downsample=t4 - t3,
        icp=tuple(icp_times),
    )
    return RelocalizationOutcome(
        status=RelocalizationStatus.FAILED,
        pose=None,
        candidate_rank_used=0,
        rmse=min(attempts) if attempts else math.inf,
        timings=timings,
        attempts=tuple(attempts),
    )
