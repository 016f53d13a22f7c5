"""End-to-end wake-up localization: build the database, then find the sensor.

Offline half: rasterize a room, sample viewpoints under the placement rules,
take a virtual scan at each, and store the descriptors. Online half: drop the
sensor at a pose the database has never seen, with an unknown heading, feed in
a short burst of frames, and read back the 6-DoF pose estimate with its
per-stage timing breakdown.
"""

import math
import time

import numpy as np

from reloc3d import (
    PipelineConfig,
    Primitive,
    SamplerConfig,
    ScanContextParams,
    SensorModel,
    WorldSpec,
    build_database,
    draw_poses,
    generate_world,
    relocalize,
    sample_candidates,
    simulate_observation,
    surface_cloud,
    wrap_pi,
)
from reloc3d.sampler import fibonacci_directions


def room_spec() -> WorldSpec:
    """Compact asymmetric room so the whole demo runs in seconds."""
    prims = [
        Primitive("wall", (7.0, 5.0, 0.1), (14.0, 10.0, 0.2)),
        Primitive("wall", (7.0, 0.2, 2.1), (14.0, 0.4, 3.8)),
        Primitive("wall", (7.0, 9.8, 2.1), (14.0, 0.4, 3.8)),
        Primitive("wall", (0.2, 5.0, 2.1), (0.4, 9.2, 3.8)),
        Primitive("wall", (13.8, 5.0, 2.1), (0.4, 9.2, 3.8)),
        Primitive("wall", (4.0, 6.0, 1.6), (0.4, 5.0, 2.8), yaw=0.15),
        Primitive("box", (10.0, 7.5, 1.2), (1.5, 1.2, 2.2), yaw=0.4),
        Primitive("box", (11.5, 2.5, 1.6), (0.8, 0.8, 3.0), yaw=0.7),
        Primitive("box", (2.5, 2.0, 0.9), (1.8, 1.1, 1.6), yaw=-0.3),
        Primitive("box", (7.5, 3.4, 1.3), (1.0, 1.0, 2.4), yaw=0.2),
    ]
    return WorldSpec(extent=(14.0, 10.0, 4.0), primitives=tuple(prims), seed=3)


def main():
    t0 = time.perf_counter()
    grid = generate_world(room_spec(), resolution=0.2)
    global_map = surface_cloud(grid)

    sampler = SamplerConfig(
        min_separation=1.4,
        obs_directions=fibonacci_directions(16),
        window=400,
        ref_window_start=2,
        ref_window_end=4,
        max_iters=20000,
        seed=9,
    )
    cands = sample_candidates(grid, sampler)
    band = cands.positions[(cands.positions[:, 2] > 0.8) & (cands.positions[:, 2] < 3.0)]

    sensor = SensorModel()
    params = ScanContextParams(z_offset=8.0)
    db = build_database(grid, band, sensor, params)
    print(f"offline: {len(db)} database entries in {time.perf_counter() - t0:.1f} s")

    cfg = PipelineConfig(
        sensor=sensor, sc=params, map_voxel=0.1, accept_rmse=0.2, prefilter=len(db)
    )

    # the sensor wakes up somewhere the database never sampled
    truth = draw_poses(grid, 1, sampler, seed=77, z_range=(1.0, 2.5))[0]
    frames = simulate_observation(grid, truth, sensor, noise_sigma=0.0, seed=11)
    d_db = np.linalg.norm(db.positions - truth.translation, axis=1).min()
    print(f"online: true pose yaw {math.degrees(truth.yaw):+.1f} deg, "
          f"nearest database entry {d_db:.2f} m away")

    out = relocalize(db, global_map, frames, cfg)
    print(f"status {out.status.value}, candidate rank {out.candidate_rank_used}, "
          f"fitness {out.rmse:.3f}")
    if out.pose is not None:
        dp = float(np.linalg.norm(out.pose.translation - truth.translation))
        dpsi = math.degrees(abs(wrap_pi(out.pose.yaw - truth.yaw)))
        print(f"pose error {dp:.3f} m, {dpsi:.2f} deg")

    t = out.timings
    print(f"timings: accumulate {t.accumulate * 1e3:.1f} ms, encode {t.encode * 1e3:.1f} ms, "
          f"retrieve {t.retrieve * 1e3:.1f} ms, downsample {t.downsample * 1e3:.1f} ms, "
          f"icp {sum(t.icp) * 1e3:.0f} ms over {len(t.icp)} attempt(s), "
          f"total {t.total:.2f} s")


if __name__ == "__main__":
    main()
