"""File formats: point clouds (text/binary), grids, databases, poses, configs.

Binary formats are little-endian with a 4-byte magic and a u32 version; a wrong
magic and an unknown version raise distinct errors so callers can tell a
corrupted file from a future one.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
import yaml

from .cloud import Frame, PointCloud
from .descriptor import DescriptorDatabase, ScanContextParams
from .grid import OccupancyGrid
from .pipeline import PipelineConfig
from .registration import IcpConfig
from .sampler import CandidateSet, SamplerConfig, fibonacci_directions
from .scansim import SensorModel
from .se3 import RigidTransform, rot_z

CLOUD_MAGIC = b"R3PC"
DB_MAGIC = b"R3DB"
CLOUD_VERSION = 1
DB_VERSION = 1


class FileFormatError(ValueError):
    """Base class for structured-file parsing failures."""


class BadMagicError(FileFormatError):
    """The file does not start with the expected magic bytes."""


class UnsupportedVersionError(FileFormatError):
    """The file's format version is not one this reader understands."""


def _fmt(x: float) -> str:
    # repr gives the shortest digits that parse back to the same float,
    # which keeps write -> read -> write byte-identical
    return repr(float(x))


# ---------------------------------------------------------------- point clouds

def save_cloud_text(path, cloud: PointCloud):
    lines = ["# x y z\n"]
    for x, y, z in cloud.xyz:
        lines.append(f"{_fmt(x)} {_fmt(y)} {_fmt(z)}\n")
    Path(path).write_text("".join(lines))


def load_cloud_text(path, frame: Frame = Frame.MAP) -> PointCloud:
    rows = []
    for ln, line in enumerate(Path(path).read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 3:
            raise FileFormatError(f"line {ln}: expected 'x y z'")
        try:
            rows.append([float(v) for v in parts])
        except ValueError as err:
            raise FileFormatError(f"line {ln}: {err}") from None
    xyz = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    return PointCloud(xyz, frame)


def save_cloud_binary(path, cloud: PointCloud):
    xyz = np.ascontiguousarray(cloud.xyz, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(CLOUD_MAGIC)
        fh.write(struct.pack("<IQ", CLOUD_VERSION, xyz.shape[0]))
        fh.write(xyz.tobytes())


def load_cloud_binary(path, frame: Frame = Frame.MAP) -> PointCloud:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != CLOUD_MAGIC:
        raise BadMagicError("bad magic: not a binary point cloud")
    version, count = struct.unpack_from("<IQ", raw, 4)
    if version != CLOUD_VERSION:
        raise UnsupportedVersionError(f"unsupported point cloud version {version}")
    need = 16 + 24 * count
    if len(raw) < need:
        raise FileFormatError("truncated point cloud")
    xyz = np.frombuffer(raw, dtype="<f8", count=3 * count, offset=16).reshape(-1, 3)
    return PointCloud(xyz.astype(np.float64), frame)


def load_cloud(path, frame: Frame = Frame.MAP) -> PointCloud:
    """Sniff the format by magic bytes; fall back to the text reader."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == CLOUD_MAGIC:
        return load_cloud_binary(path, frame)
    return load_cloud_text(path, frame)


# ---------------------------------------------------------------------- grids

def save_grid_rle(path, grid: OccupancyGrid):
    """Debug export: header line 'ox oy oz r nx ny nz', then 'value run' pairs
    over the C-order flattened occupancy."""
    o = grid.origin
    nx, ny, nz = grid.dims
    lines = [
        f"{_fmt(o[0])} {_fmt(o[1])} {_fmt(o[2])} {_fmt(grid.resolution)} {nx} {ny} {nz}\n"
    ]
    flat = grid.occupancy.reshape(-1)
    if flat.size:
        changes = np.flatnonzero(np.diff(flat.view(np.int8))) + 1
        starts = np.concatenate([[0], changes])
        ends = np.concatenate([changes, [flat.size]])
        for s, e in zip(starts, ends):
            lines.append(f"{int(flat[s])} {e - s}\n")
    Path(path).write_text("".join(lines))


def load_grid_rle(path) -> OccupancyGrid:
    text = [l for l in Path(path).read_text().splitlines() if l.strip()]
    if not text:
        raise FileFormatError("empty grid file")
    head = text[0].split()
    if len(head) != 7:
        raise FileFormatError("bad grid header")
    origin = np.array([float(v) for v in head[:3]])
    res = float(head[3])
    dims = tuple(int(v) for v in head[4:])
    total = dims[0] * dims[1] * dims[2]
    flat = np.zeros(total, dtype=bool)
    pos = 0
    for line in text[1:]:
        v, run = line.split()
        run = int(run)
        if v == "1":
            flat[pos: pos + run] = True
        pos += run
    if pos != total:
        raise FileFormatError("grid run lengths do not cover the volume")
    return OccupancyGrid(origin, res, flat.reshape(dims))


# ----------------------------------------------------------------- candidates

def save_candidates_text(path, candidates: CandidateSet):
    lines = ["# x y z parent\n"]
    for p, parent in zip(candidates.positions, candidates.parents):
        lines.append(f"{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])} {int(parent)}\n")
    Path(path).write_text("".join(lines))


def load_candidates_text(path) -> CandidateSet:
    pos, parents = [], []
    for line in Path(path).read_text().splitlines():
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = body.split()
        if len(parts) != 4:
            raise FileFormatError("expected 'x y z parent'")
        pos.append([float(v) for v in parts[:3]])
        parents.append(int(parts[3]))
    return CandidateSet(
        np.asarray(pos, dtype=np.float64).reshape(-1, 3),
        np.asarray(parents, dtype=np.int64),
    )


def save_density_csv(path, counts: np.ndarray):
    lines = ["ix,iy,count\n"]
    for ix, iy in np.argwhere(counts):
        lines.append(f"{ix},{iy},{counts[ix, iy]}\n")
    Path(path).write_text("".join(lines))


# ---------------------------------------------------------------------- poses

def save_poses_text(path, poses):
    lines = ["# x y z yaw\n"]
    for pose in poses:
        t = pose.translation
        lines.append(f"{_fmt(t[0])} {_fmt(t[1])} {_fmt(t[2])} {_fmt(pose.yaw)}\n")
    Path(path).write_text("".join(lines))


def load_poses_text(path) -> list[RigidTransform]:
    poses = []
    for line in Path(path).read_text().splitlines():
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        parts = [float(v) for v in body.split()]
        if len(parts) != 4:
            raise FileFormatError("expected 'x y z yaw'")
        poses.append(RigidTransform(rot_z(parts[3]), np.array(parts[:3])))
    return poses


# ------------------------------------------------------------------- database

def save_database(path, db: DescriptorDatabase):
    """Layout: magic, u32 version, u32 n_rings, u32 n_sectors, f64 l_max,
    f64 z_offset, 7xf64 sensor (az lo/hi/step, el lo/hi/step, range),
    9xf64 orientation row-major, f64 grid resolution, u64 entry count; then per
    entry 3xf64 position, n_rings xf32 ring key, n_rings*n_sectors xf32
    descriptor row-major."""
    p = db.params
    s = db.sensor
    with open(path, "wb") as fh:
        fh.write(DB_MAGIC)
        fh.write(struct.pack("<I", DB_VERSION))
        fh.write(struct.pack("<II", p.n_rings, p.n_sectors))
        fh.write(struct.pack("<dd", p.l_max, p.z_offset))
        fh.write(
            struct.pack(
                "<7d",
                s.az_fov[0], s.az_fov[1], s.az_step,
                s.el_fov[0], s.el_fov[1], s.el_step,
                s.max_range,
            )
        )
        fh.write(np.ascontiguousarray(s.orientation, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", db.resolution))
        fh.write(struct.pack("<Q", len(db)))
        for i in range(len(db)):
            fh.write(np.ascontiguousarray(db.positions[i], dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(db.ring_keys[i], dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(db.descriptors[i], dtype="<f4").tobytes())


def load_database(path) -> DescriptorDatabase:
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != DB_MAGIC:
        raise BadMagicError("bad magic: not a descriptor database")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != DB_VERSION:
        raise UnsupportedVersionError(f"unsupported database version {version}")
    off = 8
    n_rings, n_sectors = struct.unpack_from("<II", raw, off)
    off += 8
    l_max, z_offset = struct.unpack_from("<dd", raw, off)
    off += 16
    sensor_vals = struct.unpack_from("<7d", raw, off)
    off += 56
    orientation = np.frombuffer(raw, dtype="<f8", count=9, offset=off).reshape(3, 3)
    off += 72
    (resolution,) = struct.unpack_from("<d", raw, off)
    off += 8
    (count,) = struct.unpack_from("<Q", raw, off)
    off += 8
    params = ScanContextParams(n_rings=n_rings, n_sectors=n_sectors, l_max=l_max, z_offset=z_offset)
    sensor = SensorModel(
        az_fov=(sensor_vals[0], sensor_vals[1]),
        az_step=sensor_vals[2],
        el_fov=(sensor_vals[3], sensor_vals[4]),
        el_step=sensor_vals[5],
        max_range=sensor_vals[6],
        orientation=orientation.astype(np.float64),
    )
    entry = 24 + 4 * n_rings + 4 * n_rings * n_sectors
    if len(raw) < off + entry * count:
        raise FileFormatError("truncated database")
    positions = np.zeros((count, 3))
    keys = np.zeros((count, n_rings), dtype=np.float32)
    descs = np.zeros((count, n_rings, n_sectors), dtype=np.float32)
    for i in range(count):
        positions[i] = np.frombuffer(raw, dtype="<f8", count=3, offset=off)
        off += 24
        keys[i] = np.frombuffer(raw, dtype="<f4", count=n_rings, offset=off)
        off += 4 * n_rings
        descs[i] = np.frombuffer(
            raw, dtype="<f4", count=n_rings * n_sectors, offset=off
        ).reshape(n_rings, n_sectors)
        off += 4 * n_rings * n_sectors
    return DescriptorDatabase(positions, descs, keys, params, sensor, resolution)


# --------------------------------------------------------------------- config

def default_config() -> dict:
    """The full configuration tree with library defaults."""
    return {
        "sensor": {
            "az_fov": [0.0, 360.0],
            "az_step": 1.0,
            "el_fov": [-7.0, 52.0],
            "el_step": 2.0,
            "range": 50.0,
        },
        "sc": {"n_rings": 20, "n_sectors": 60, "l_max": 50.0, "z_offset": 0.0},
        "icp": {
            "max_iterations": 50,
            "max_corr_dist": 2.0,
            "translation_eps": 1e-6,
            "rmse_eps": 1e-6,
            "min_correspondences": 20,
        },
        "down": {"query_voxel": 0.2, "map_voxel": 0.4},
        "pipeline": {
            "k_f": 10,
            "k_c": 5,
            "tau": 0.3,
            "resolution": 0.2,
            "default_roll": 0.0,
            "default_pitch": 0.0,
        },
        "sampler": {
            "vehicle_radius": 0.4,
            "safety_margin": 0.3,
            "min_separation": 1.2,
            "obs_directions": 32,
            "obs_range": 50.0,
            "min_hits": 2,
            "steer_step": 2.4,
            "window": 10000,
            "ref_window_start": 5,
            "ref_window_end": 10,
            "stop_ratio": 0.4,
            "max_iters": 500000,
            "seed": 0,
        },
    }


def _merged(defaults: dict, override: dict) -> dict:
    out = dict(defaults)
    for key, val in (override or {}).items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merged(out[key], val)
        else:
            out[key] = val
    return out


def load_config(path) -> dict:
    """YAML config merged over the defaults; unknown sections are rejected."""
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise FileFormatError("config root must be a mapping")
    defaults = default_config()
    unknown = set(data) - set(defaults)
    if unknown:
        raise FileFormatError(f"unknown config sections: {sorted(unknown)}")
    return _merged(defaults, data)


def sensor_from_config(cfg: dict) -> SensorModel:
    s = cfg["sensor"]
    return SensorModel(
        az_fov=tuple(s["az_fov"]),
        az_step=s["az_step"],
        el_fov=tuple(s["el_fov"]),
        el_step=s["el_step"],
        max_range=s["range"],
    )


def pipeline_from_config(cfg: dict) -> PipelineConfig:
    p = cfg["pipeline"]
    return PipelineConfig(
        sensor=sensor_from_config(cfg),
        sc=ScanContextParams(**cfg["sc"]),
        icp=IcpConfig(**cfg["icp"]),
        accum_frames=p["k_f"],
        n_candidates=p["k_c"],
        accept_rmse=p["tau"],
        local_resolution=p["resolution"],
        query_voxel=cfg["down"]["query_voxel"],
        map_voxel=cfg["down"]["map_voxel"],
        default_roll=p["default_roll"],
        default_pitch=p["default_pitch"],
    )


def sampler_from_config(cfg: dict) -> SamplerConfig:
    s = dict(cfg["sampler"])
    n_dirs = s.pop("obs_directions")
    return SamplerConfig(obs_directions=fibonacci_directions(int(n_dirs)), **s)


def save_world_spec(path, spec) -> None:
    data = {
        "extent": list(spec.extent),
        "seed": spec.seed,
        "clutter": spec.clutter,
        "clutter_size": [list(spec.clutter_size[0]), list(spec.clutter_size[1])],
        "primitives": [
            {
                "kind": p.kind,
                "center": list(p.center),
                "size": list(p.size),
                "yaw": p.yaw,
            }
            for p in spec.primitives
        ],
    }
    Path(path).write_text(yaml.safe_dump(data, sort_keys=False))


def load_world_spec(path):
    from .bench import Primitive, WorldSpec

    data = yaml.safe_load(Path(path).read_text())
    if not isinstance(data, dict) or "extent" not in data:
        raise FileFormatError("world spec must be a mapping with an extent")
    prims = tuple(
        Primitive(
            kind=p["kind"],
            center=tuple(p["center"]),
            size=tuple(p["size"]),
            yaw=p.get("yaw", 0.0),
        )
        for p in data.get("primitives", [])
    )
    kwargs = {}
    if "clutter_size" in data:
        lo, hi = data["clutter_size"]
        kwargs["clutter_size"] = (tuple(lo), tuple(hi))
    return WorldSpec(
        extent=tuple(data["extent"]),
        primitives=prims,
        seed=data.get("seed", 0),
        clutter=data.get("clutter", 0),
        **kwargs,
    )
