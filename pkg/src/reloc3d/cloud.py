"""Point cloud container with explicit coordinate-frame tags."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np


class Frame(Enum):
    """Coordinate frame a cloud lives in."""

    MAP = "map"
    SENSOR = "sensor"


@dataclass(frozen=True)
class PointCloud:
    """Immutable (N, 3) float64 point set tagged with its frame.

    Construction validates shape and finiteness and freezes the array so
    clouds can be shared across workers without copies.
    """

    xyz: np.ndarray
    frame: Frame

    def __post_init__(self):
        xyz = np.ascontiguousarray(np.asarray(self.xyz, dtype=np.float64))
        if xyz.size == 0:
            xyz = xyz.reshape(0, 3)
        if xyz.ndim != 2 or xyz.shape[1] != 3:
            raise ValueError("invalid point: expected an (N, 3) array")
        if not np.isfinite(xyz).all():
            raise ValueError("invalid point: non-finite coordinate")
        if not isinstance(self.frame, Frame):
            raise ValueError("frame tag not set")
        xyz.setflags(write=False)
        object.__setattr__(self, "xyz", xyz)

    def __len__(self) -> int:
        return self.xyz.shape[0]


def as_xyz(cloud) -> np.ndarray:
    """Accept a PointCloud or raw array-like, return a float64 (N, 3) array."""
    if isinstance(cloud, PointCloud):
        return cloud.xyz
    xyz = np.asarray(cloud, dtype=np.float64)
    if xyz.size == 0:
        return xyz.reshape(0, 3)
    if xyz.ndim != 2 or xyz.shape[1] != 3:
        raise ValueError("invalid point: expected an (N, 3) array")
    return xyz


def concatenate(clouds) -> PointCloud:
    """Stack clouds in order; all inputs must share one frame."""
    clouds = list(clouds)
    if not clouds:
        raise ValueError("nothing to concatenate")
    frame = clouds[0].frame
    if any(c.frame is not frame for c in clouds):
        raise ValueError("frame mismatch")
    return PointCloud(np.vstack([c.xyz for c in clouds]), frame)
