"""Virtual LiDAR: beam lattice generation and first-return scan synthesis."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cloud import Frame, PointCloud
from .grid import OccupancyGrid, raycast_batch

_FULL_TURN_TOL = 1e-9


def _default_orientation():
    return np.eye(3)


@dataclass(frozen=True, eq=False)
class SensorModel:
    """Beam lattice of a spinning/solid-state LiDAR plus its mounting rotation.

    Angles are degrees. Azimuth spanning a full 360 turn is half-open (the
    wrap-around duplicate beam is dropped); elevation rows are inclusive.
    """

    az_fov: tuple[float, float] = (0.0, 360.0)
    az_step: float = 1.0
    el_fov: tuple[float, float] = (-7.0, 52.0)
    el_step: float = 2.0
    max_range: float = 50.0
    orientation: np.ndarray = field(default_factory=_default_orientation)

    def __post_init__(self):
        if not (self.az_step > 0.0 and self.el_step > 0.0):
            raise ValueError("angular steps must be positive")
        if not self.max_range > 0.0:
            raise ValueError("max_range must be positive")
        if self.az_fov[1] < self.az_fov[0] or self.el_fov[1] < self.el_fov[0]:
            raise ValueError("degenerate field of view")
        r = np.ascontiguousarray(np.asarray(self.orientation, dtype=np.float64))
        if r.shape != (3, 3) or np.abs(r.T @ r - np.eye(3)).max() > 1e-9:
            raise ValueError("orientation must be a rotation matrix")
        if np.linalg.det(r) < 0.0:
            raise ValueError("orientation must be proper (det +1)")
        r.setflags(write=False)
        object.__setattr__(self, "orientation", r)
        object.__setattr__(self, "az_fov", (float(self.az_fov[0]), float(self.az_fov[1])))
        object.__setattr__(self, "el_fov", (float(self.el_fov[0]), float(self.el_fov[1])))

    def __eq__(self, other):
        if not isinstance(other, SensorModel):
            return NotImplemented
        return (
            self.az_fov == other.az_fov
            and self.az_step == other.az_step
            and self.el_fov == other.el_fov
            and self.el_step == other.el_step
            and self.max_range == other.max_range
            and np.array_equal(self.orientation, other.orientation)
        )


def _angle_row(lo: float, hi: float, step: float, half_open_turn: bool) -> np.ndarray:
    span = hi - lo
    if half_open_turn and abs(span - 360.0) <= _FULL_TURN_TOL:
        n = int(round(360.0 / step))
    else:
        n = int(math.floor(span / step + 1e-9)) + 1
    return lo + step * np.arange(n)


def beam_directions(model: SensorModel) -> np.ndarray:
    """Unit beam directions in the sensor frame, elevation-major then azimuth."""
    az = np.radians(_angle_row(model.az_fov[0], model.az_fov[1], model.az_step, True))
    el = np.radians(_angle_row(model.el_fov[0], model.el_fov[1], model.el_step, False))
    if az.size == 0 or el.size == 0:
        raise ValueError("empty beam set")
    ce = np.cos(el)[:, None]
    dirs = np.empty((el.size, az.size, 3))
    dirs[:, :, 0] = ce * np.cos(az)[None, :]
    dirs[:, :, 1] = ce * np.sin(az)[None, :]
    dirs[:, :, 2] = np.sin(el)[:, None]
    out = dirs.reshape(-1, 3)
    # floating trig leaves the norms a few ulp off exactly one
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return out


def synthesize_scan(grid: OccupancyGrid, position, model: SensorModel) -> PointCloud:
    """First-return scan from `position`: one ray per beam, hits are voxel centers.

    Returns a map-frame cloud in beam-lattice order with misses omitted.
    """
    p = np.asarray(position, dtype=np.float64).reshape(3)
    if grid.contains(p) and grid.is_occupied(p):
        raise ValueError("occupied origin")
    dirs = beam_directions(model) @ model.orientation.T
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    hit, vox, _ = raycast_batch(grid, p, dirs, model.max_range)
    centers = grid.voxel_center(vox[hit])
    return PointCloud(centers, Frame.MAP)


def to_sensor_frame(cloud: PointCloud, position, orientation) -> PointCloud:
    """Map -> sensor: x_s = R^T (x - p). Point order is preserved."""
    if cloud.frame is not Frame.MAP:
        raise ValueError("expected a map-frame cloud")
    p = np.asarray(position, dtype=np.float64).reshape(3)
    r = np.asarray(orientation, dtype=np.float64)
    return PointCloud((cloud.xyz - p) @ r, Frame.SENSOR)


def to_map_frame(cloud: PointCloud, position, orientation) -> PointCloud:
    """Sensor -> map: x = R x_s + p. Inverse of to_sensor_frame."""
    if cloud.frame is not Frame.SENSOR:
        raise ValueError("expected a sensor-frame cloud")
    p = np.asarray(position, dtype=np.float64).reshape(3)
    r = np.asarray(orientation, dtype=np.float64)
    return PointCloud(cloud.xyz @ r.T + p, Frame.MAP)
