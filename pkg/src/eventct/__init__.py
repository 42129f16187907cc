"""Event-based 4D CT: per-voxel attenuation transitions from continuous scans."""

from .core import (
    AcquisitionGeometry,
    EventVolume,
    NumericsError,
    ProjectionSet,
    ReconParams,
    ScalarField3,
    VoxelGrid3,
    WeightVolume,
    index_to_world,
    sample_event_volume,
    world_to_index,
)
from .phantom import (
    FilmRuptureParams,
    FlowSpec,
    PoreRegion,
    build_film_rupture_phantom,
    build_flow_phantom,
    downsample_event_volume,
    refine_grid,
)
from .projector import (
    AffineMotionModel,
    Ray,
    apply_affine_motion,
    forward_project,
    intersection_lengths,
    normalize_exterior,
    project_static,
    trace_ray,
)
from .dyrect import (
    DyrectResult,
    SubsetPlan,
    VoxelCorrectionStats,
    compute_weights,
    correction_terms,
    initial_event_volume,
    make_subsets,
    reconstruct_dyrect,
    update_attenuations,
    update_transition_time,
    voxel_stats,
)
from .baseline import reconstruct_sirt, reconstruct_sliding_window
from .io import read_projections, read_volume, write_projections, write_volume
from .stats import streaming_covariance, two_pass_covariance
from .analysis import (
    AngularBreakdown,
    CooccurrenceHistogram,
    angular_breakdown,
    cooccurrence_hist,
    difference_sinogram,
    estimate_event_time,
    flow_direction,
    mae_transition,
)

__version__ = "0.1.0"

__all__ = [
    "AcquisitionGeometry",
    "AffineMotionModel",
    "AngularBreakdown",
    "CooccurrenceHistogram",
    "DyrectResult",
    "EventVolume",
    "FilmRuptureParams",
    "FlowSpec",
    "NumericsError",
    "PoreRegion",
    "ProjectionSet",
    "Ray",
    "ReconParams",
    "ScalarField3",
    "SubsetPlan",
    "VoxelCorrectionStats",
    "VoxelGrid3",
    "WeightVolume",
    "angular_breakdown",
    "apply_affine_motion",
    "build_film_rupture_phantom",
    "build_flow_phantom",
    "compute_weights",
    "cooccurrence_hist",
    "correction_terms",
    "difference_sinogram",
    "downsample_event_volume",
    "estimate_event_time",
    "flow_direction",
    "forward_project",
    "index_to_world",
    "initial_event_volume",
    "intersection_lengths",
    "make_subsets",
    "mae_transition",
    "normalize_exterior",
    "project_static",
    "read_projections",
    "read_volume",
    "reconstruct_dyrect",
    "reconstruct_sirt",
    "reconstruct_sliding_window",
    "refine_grid",
    "sample_event_volume",
    "streaming_covariance",
    "trace_ray",
    "two_pass_covariance",
    "update_attenuations",
    "update_transition_time",
    "voxel_stats",
    "world_to_index",
    "write_projections",
    "write_volume",
]
