"""Command line front end: relocalize, simulate, eval."""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bench, io
from .cloud import Frame
from .descriptor import build_database
from .pipeline import relocalize
from .sampler import sample_candidates, column_density


def _load_world_spec(arg: str):
    path = Path(arg)
    if path.exists():
        return io.load_world_spec(path)
    return bench.reference_world(arg)


def _pose_lines(matrix: np.ndarray) -> list[str]:
    return [" ".join(f"{v:.12g}" for v in row) for row in matrix]


def _cmd_relocalize(args) -> int:
    cfg_tree = io.load_config(args.config) if args.config else io.default_config()
    cfg = io.pipeline_from_config(cfg_tree)
    db = io.load_database(args.db)
    global_map = io.load_cloud(args.map, Frame.MAP)
    scans_path = Path(args.scans)
    if scans_path.is_dir():
        files = sorted(p for p in scans_path.iterdir() if p.is_file())
    else:
        files = [scans_path]
    scans = [io.load_cloud(p, Frame.SENSOR) for p in files]
    outcome = relocalize(db, global_map, scans, cfg)

    timings = {
        "accumulate": outcome.timings.accumulate,
        "encode": outcome.timings.encode,
        "retrieve": outcome.timings.retrieve,
        "downsample": outcome.timings.downsample,
        "icp": list(outcome.timings.icp),
        "total": outcome.timings.total,
    }
    pose = outcome.pose.matrix() if outcome.pose is not None else None
    if args.json:
        payload = {
            "status": outcome.status.value,
            "candidate_rank": outcome.candidate_rank_used,
            "rmse": outcome.rmse if math.isfinite(outcome.rmse) else None,
            "pose": pose.tolist() if pose is not None else None,
            "timings": timings,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"status: {outcome.status.value}")
        print(f"candidate rank: {outcome.candidate_rank_used}")
        print(f"rmse: {outcome.rmse:.6f}")
        if pose is not None:
            print("pose (row-major):")
            for line in _pose_lines(pose):
                print("  " + line)
        stage = " ".join(
            f"{k}={timings[k]:.3f}s" for k in ("accumulate", "encode", "retrieve", "downsample")
        )
        icp = ", ".join(f"{t:.3f}s" for t in outcome.timings.icp)
        print(f"timings: {stage} icp=[{icp}] total={timings['total']:.3f}s")
    return 0 if outcome.accepted else 1


def _cmd_simulate(args) -> int:
    spec = _load_world_spec(args.world)
    cfg_tree = io.load_config(args.config) if args.config else io.default_config()
    pipe_cfg = io.pipeline_from_config(cfg_tree)
    samp_cfg = io.sampler_from_config(cfg_tree)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    grid = bench.generate_world(spec, pipe_cfg.local_resolution)
    cloud = bench.map_cloud(grid)
    candidates = sample_candidates(grid, samp_cfg)
    db = build_database(grid, candidates.positions, pipe_cfg.sensor, pipe_cfg.sc)
    poses = bench.draw_poses(grid, args.poses, samp_cfg, seed=samp_cfg.seed + 1)

    io.save_world_spec(out / "world.yaml", spec)
    io.save_grid_rle(out / "grid.txt", grid)
    io.save_cloud_binary(out / "map.r3pc", cloud)
    io.save_candidates_text(out / "candidates.txt", candidates)
    io.save_density_csv(out / "density.csv", column_density(candidates, grid))
    io.save_database(out / "db.r3db", db)
    io.save_poses_text(out / "poses.txt", poses)

    print(f"world: {spec.extent[0]:g} x {spec.extent[1]:g} x {spec.extent[2]:g} m, "
          f"{grid.n_occupied} occupied voxels")
    print(f"samples: {len(candidates)} accepted in {candidates.iterations} iterations"
          f"{' (stopped early)' if candidates.stopped_early else ''}")
    print(f"database: {len(db)} entries -> {out / 'db.r3db'}")
    print(f"poses: {args.poses} -> {out / 'poses.txt'}")
    return 0


def _cmd_eval(args) -> int:
    cfg_tree = io.load_config(args.config) if args.config else io.default_config()
    cfg = io.pipeline_from_config(cfg_tree)
    db = io.load_database(args.db)
    global_map = io.load_cloud(args.map, Frame.MAP)
    spec = _load_world_spec(args.world)
    world = bench.generate_world(spec, cfg.local_resolution)
    poses = io.load_poses_text(args.poses)

    summary, records = bench.evaluate(
        db, global_map, world, poses, cfg,
        trials_per_pose=args.trials,
        noise_sigma=args.noise_sigma,
        master_seed=args.seed,
    )

    def _num(v):
        return v if math.isfinite(v) else None

    trials = []
    for i, r in enumerate(records):
        trials.append(
            {
                "trial": i,
                "gt_position": r.pose.translation.tolist(),
                "gt_yaw": r.pose.yaw,
                "accepted": bool(r.outcome.accepted) if r.outcome else False,
                "d_err": _num(r.d_err),
                "psi_err_deg": _num(r.psi_err_deg),
                "elapsed": r.elapsed,
                "success": r.success,
                "note": r.note,
            }
        )
    report = {
        "summary": {
            "n_trials": summary.n_trials,
            "n_success": summary.n_success,
            "success_rate": _num(summary.success_rate),
            "e_p": _num(summary.e_p),
            "e_psi_deg": _num(summary.e_psi_deg),
            "t_bar": _num(summary.t_bar),
        },
        "trials": trials,
    }
    Path(args.out).write_text(json.dumps(report, indent=2) + "\n")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(trials[0].keys()))
            writer.writeheader()
            writer.writerows(trials)
    print(
        f"trials: {summary.n_trials}  success rate: {summary.success_rate:.1f}%  "
        f"e_p: {summary.e_p:.3f} m  e_psi: {summary.e_psi_deg:.2f} deg  "
        f"t_bar: {summary.t_bar:.2f} s"
    )
    print(f"report -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reloc3d",
        description="LiDAR global relocalization over 3D occupancy grids",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("relocalize", help="relocalize a scan bundle against a database")
    p.add_argument("--db", required=True, help="descriptor database (.r3db)")
    p.add_argument("--map", required=True, help="prior map point cloud")
    p.add_argument("--scans", required=True, help="directory of scan files or one file")
    p.add_argument("--config", help="YAML configuration")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.set_defaults(func=_cmd_relocalize)

    p = sub.add_parser("simulate", help="build offline products for a synthetic world")
    p.add_argument("--world", required=True, help="world spec YAML or a reference name")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="YAML configuration")
    p.add_argument("--poses", type=int, default=20, help="feasible poses to export")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("eval", help="Monte-Carlo evaluation against ground truth")
    p.add_argument("--db", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--world", required=True, help="world spec YAML or a reference name")
    p.add_argument("--poses", required=True, help="ground-truth pose list")
    p.add_argument("--trials", type=int, default=20, help="trials per pose")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="YAML configuration")
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--csv", help="also write per-trial rows as CSV")
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
