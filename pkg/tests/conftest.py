"""Shared fixtures: one small deterministic world with its database and config.

Session-scoped because database construction dominates test runtime; every
test treats these as read-only.
"""
from __future__ import annotations

from dataclasses import replace

import pytest

from reloc3d import (
    PipelineConfig,
    Primitive,
    SamplerConfig,
    ScanContextParams,
    SensorModel,
    WorldSpec,
    build_database,
    fibonacci_directions,
    generate_world,
    sample_candidates,
    surface_cloud,
)


def pytest_configure(config):
    config._criterion_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    # surfaced after the test tally so the release-gate verdicts are readable
    # even when per-test stdout is captured
    lines = getattr(config, "_criterion_lines", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def small_world_spec() -> WorldSpec:
    """14 x 10 x 4 m room with asymmetric furniture; nothing here is special,
    it just has to be cheap to scan and free of flip symmetry."""
    prims = [
        Primitive("wall", (7.0, 5.0, 0.1), (14.0, 10.0, 0.2)),  # floor
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
    return WorldSpec(extent=(14.0, 10.0, 4.0), primitives=tuple(prims), seed=3, clutter=0)


def fast_sampler_config() -> SamplerConfig:
    return replace(
        SamplerConfig(),
        min_separation=1.4,
        obs_directions=fibonacci_directions(16),
        window=400,
        ref_window_start=2,
        ref_window_end=4,
        max_iters=20000,
        seed=9,
    )


@pytest.fixture(scope="session")
def small_grid():
    return generate_world(small_world_spec(), 0.2)


@pytest.fixture(scope="session")
def small_map(small_grid):
    return surface_cloud(small_grid)


@pytest.fixture(scope="session")
def small_samples(small_grid):
    cands = sample_candidates(small_grid, fast_sampler_config())
    z = cands.positions[:, 2]
    return cands.positions[(z >= 0.8) & (z <= 3.0)]


@pytest.fixture(scope="session")
def small_db(small_grid, small_samples):
    params = replace(ScanContextParams(), z_offset=8.0)
    return build_database(small_grid, small_samples, SensorModel(), params)


@pytest.fixture(scope="session")
def small_cfg(small_db):
    return replace(
        PipelineConfig(),
        sc=small_db.params,
        prefilter=len(small_db),
        map_voxel=0.1,
        accept_rmse=0.2,
    )
