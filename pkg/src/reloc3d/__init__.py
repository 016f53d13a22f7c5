"""reloc3d: offline-online LiDAR global relocalization over 3D occupancy grids.

Offline, a prior map is voxelized, viewpoints are sampled under clearance,
separation, and observability constraints, and a database of rotation-
searchable polar descriptors is built from virtual scans. Online, accumulated
scans are re-described the same way, matched against the database, and the
best candidates are refined with Gauss-Newton ICP behind a fitness gate.
"""

from .bench import (
    BenchmarkSetup,
    EvalSummary,
    Primitive,
    TrialRecord,
    WorldSpec,
    benchmark_poses,
    benchmark_setup,
    corridor_world,
    draw_poses,
    evaluate,
    generate_world,
    map_cloud,
    reference_world,
    simulate_observation,
    slope_world,
    summarize,
    surface_cloud,
)
from .cloud import Frame, PointCloud, concatenate
from .descriptor import (
    DescriptorDatabase,
    RetrievalCandidate,
    ScanContext,
    ScanContextParams,
    build_database,
    encode,
    query,
    ring_key,
    sc_distance,
    shift_to_yaw,
)
from .grid import OccupancyGrid, RayHit, build_grid, clearance_ok, raycast_batch, raycast_first_return
from .pipeline import (
    PipelineConfig,
    RelocalizationOutcome,
    RelocalizationStatus,
    StageTimings,
    accumulate_scans,
    local_occupancy_grid,
    make_query_descriptor,
    relocalize,
)
from .registration import (
    IcpConfig,
    RegistrationResult,
    fitness_rmse,
    gn_icp,
    target_index,
    voxel_downsample,
)
from .sampler import (
    CandidateSet,
    NoFeasibleRegionError,
    SamplerConfig,
    StopState,
    column_density,
    fibonacci_directions,
    observability_hits,
    sample_candidates,
    separation_ok,
    should_stop,
)
from .scansim import SensorModel, beam_directions, synthesize_scan, to_map_frame, to_sensor_frame
from .se3 import RigidTransform, rot_x, rot_y, rot_z, se3_exp, so3_exp, wrap_pi

__version__ = "0.1.0"
