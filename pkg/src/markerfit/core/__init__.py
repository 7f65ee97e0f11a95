"""Core numerics.

- Body model evaluation (skinning, blendshapes, joint regression)
- Latent markers and surface queries
- Energy terms, priors and the dogleg solver
- Shape calibration (Stage I) and per-frame fitting (Stage II)
- Scan-to-model evaluation, synthetic sessions and weight tuning
"""

from .archive import FitArchive, FrameResult
from .body_model import (
    BodyModel,
    JointRole,
    PoseVector,
    forward_kinematics,
    regress_joints,
    shaped_rest,
    skin,
    surface,
    truncate_model,
)
from .dogleg import SolverDiagnostics, SolverOptions, dogleg_minimize, dogleg_step
from .energy import (
    StageTwoWeights,
    Term,
    WeightSchedule,
    marker_count_factor,
    occlusion_factor,
    stage2_weights,
    stage_one_schedule,
    total_energy,
)
from .evaluation import EvalReport, ScanMesh, evaluate_archive, scan_to_model_distance
from .markers import (
    LatentMarker,
    LatentMarkerSet,
    LayoutEntry,
    MarkerLayout,
    attach_latent_markers,
    simulate_markers,
    surface_distance,
)
from .mesh_query import TriangleMesh, closest_points
from .mocap import MarkerFrame, MocapSequence, occlude, select_labels
from .priors import GaussianMixture, PriorStats
from .progress import ProgressCallback, ProgressEvent
from .stage_one import FrameRef, StageIResult, fit_shape_stage, select_calibration_frames
from .stage_two import StageTwoConfig, fit_first_frame, fit_frame, fit_sequence
from .synthetic import MotionScript, SyntheticSession, generate_synthetic_session
from .tuning import SearchSpec, line_search

__all__ = [
    # Body model
    "BodyModel",
    "JointRole",
    "PoseVector",
    "forward_kinematics",
    "regress_joints",
    "shaped_rest",
    "skin",
    "surface",
    "truncate_model",
    "GaussianMixture",
    "PriorStats",
    # Markers and meshes
    "LatentMarker",
    "LatentMarkerSet",
    "LayoutEntry",
    "MarkerLayout",
    "attach_latent_markers",
    "simulate_markers",
    "surface_distance",
    "TriangleMesh",
    "closest_points",
    "MarkerFrame",
    "MocapSequence",
    "occlude",
    "select_labels",
    # Optimization
    "SolverDiagnostics",
    "SolverOptions",
    "dogleg_minimize",
    "dogleg_step",
    "StageTwoWeights",
    "Term",
    "WeightSchedule",
    "marker_count_factor",
    "occlusion_factor",
    "stage2_weights",
    "stage_one_schedule",
    "total_energy",
    "ProgressCallback",
    "ProgressEvent",
    # Fitting
    "FrameRef",
    "StageIResult",
    "fit_shape_stage",
    "select_calibration_frames",
    "StageTwoConfig",
    "fit_first_frame",
    "fit_frame",
    "fit_sequence",
    "FitArchive",
    "FrameResult",
    # Evaluation and tuning
    "EvalReport",
    "ScanMesh",
    "evaluate_archive",
    "scan_to_model_distance",
    "MotionScript",
    "SyntheticSession",
    "generate_synthetic_session",
    "SearchSpec",
    "line_search",
]
