"""Subject calibration: shape, latent markers and calibration-frame poses.

The objective combines the marker data term, shape and pose priors, a
term keeping latent markers at their prescribed distance from the skin and
a term tying them to their initial placement. It is minimized with dogleg
over an annealing schedule that strengthens the data term and relaxes the
regularizers stage by stage. Hand joints stay at the hand mean pose until
the last two stages.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.exceptions import (
    DegenerateAlignmentError,
    InsufficientMarkersError,
    TooFewFramesError,
)
from .alignment import rigid_align
from .body_model import BodyModel, PoseVector, regress_joints
from .dogleg import SolverDiagnostics, SolverOptions, dogleg_minimize
from .energy import (
    Term,
    WeightSchedule,
    marker_count_factor,
    observed_indices,
    stage_one_schedule,
)
from .kinematics import evaluate_points
from .markers import (
    LatentMarkerSet,
    MarkerLayout,
    attach_latent_markers,
    hand_marker_labels,
    placement_drift,
    rest_marker_positions,
    surface_distance_terms,
)
from .mocap import MarkerFrame, MocapSequence
from .problem import (
    ParameterLayout,
    ResidualStack,
    add_marker_data,
    add_pose_priors,
    free_pose_indices,
    pose_columns,
    rest_pose_array,
)
from .progress import ProgressCallback, notify
from .priors import PriorStats

logger = logging.getLogger(__name__)

DEFAULT_CALIBRATION_FRAMES = 12
MIN_VISIBLE_MARKERS = 3
HAND_FREE_STAGES = 2


@dataclass(frozen=True)
class FrameRef:
    """A frame of one of the input sequences."""
    sequence: int
    frame: int


@dataclass
class StageIResult:
    """Calibrated subject.

    Attributes:
        beta: Shape coefficients
        latent: Calibrated latent markers
        poses: One pose per calibration frame
        marker_rms: Per-frame marker RMS, meters
        term_costs: Final weighted cost of every energy term
        weights: Final-stage weights
        body_prior_mode: "gaussian" or "gmm"
        hands_active: Whether hand poses were optimized
        stage_poses: Poses after each annealing stage
        diagnostics: Solver diagnostics per stage
    """
    beta: NDArray[np.float64]
    latent: LatentMarkerSet
    poses: list[PoseVector]
    marker_rms: NDArray[np.float64]
    term_costs: dict[str, float] = field(default_factory=dict)
    weights: dict[str, float] = field(default_factory=dict)
    body_prior_mode: str = "gaussian"
    hands_active: bool = False
    stage_poses: list[list[PoseVector]] = field(default_factory=list)
    diagnostics: list[SolverDiagnostics] = field(default_factory=list)

    @property
    def num_frames(self) -> int:
        return len(self.poses)


def select_calibration_frames(
    sequences: Sequence[MocapSequence],
    count: int = DEFAULT_CALIBRATION_FRAMES,
    seed: int = 0,
) -> list[FrameRef]:
    """Draw distinct frames uniformly over all frames with enough visible markers.

    Raises:
        TooFewFramesError: If fewer than ``count`` eligible frames exist
    """
    if count < 1:
        raise TooFewFramesError("at least one calibration frame is required")
    candidates = []
    for s, sequence in enumerate(sequences):
        visible = (~sequence.missing_mask).sum(axis=1)
        candidates += [FrameRef(s, int(t)) for t in np.flatnonzero(visible >= MIN_VISIBLE_MARKERS)]
    if len(candidates) < count:
        raise TooFewFramesError(
            f"need {count} frames with >= {MIN_VISIBLE_MARKERS} visible markers, "
            f"found {len(candidates)}"
        )
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(candidates), size=count, replace=False))
    return [candidates[i] for i in picked]


def initial_root_pose(
    rest_markers: NDArray[np.float64],
    observed: NDArray[np.float64],
    root_joint: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Root translation and rotation moving rest markers onto observations.

    The root rotates about its rest joint, so the translation is
    t + R j - j for the aligning transform (R, t).
    """
    transform = rigid_align(rest_markers, observed)
    translation = transform.translation + transform.rotation @ root_joint - root_joint
    return translation, transform.rotvec


def fit_shape_stage(
    frames: Sequence[MarkerFrame],
    layout: MarkerLayout,
    model: BodyModel,
    stats: PriorStats,
    schedule: WeightSchedule | None = None,
    *,
    final_weights: Mapping[Term, float] | None = None,
    options: SolverOptions | None = None,
    hands: bool = True,
    initial_beta: ArrayLike | None = None,
    progress: ProgressCallback | None = None,
) -> StageIResult:
    """Jointly estimate shape, latent markers and the calibration-frame poses.

    Args:
        frames: Calibration frames
        layout: Initial marker placement
        model: Body model
        stats: Prior statistics
        schedule: Annealing schedule; built from final_weights and b when None
        final_weights: Final-stage weights before b (defaults to the calibration weights)
        options: Solver settings per stage
        hands: Allow hand poses to move when hand markers exist
        initial_beta: Starting shape, zeros by default
        progress: Called once per annealing stage

    Returns:
        StageIResult

    Raises:
        InsufficientMarkersError: A frame has fewer than 3 visible markers
        SolverDivergedError: The objective became non-finite
    """
    if not frames:
        raise TooFewFramesError("no calibration frames")
    stats.check_model(model)
    beta0 = np.zeros(model.num_shape) if initial_beta is None else np.asarray(initial_beta, float)
    latent = attach_latent_markers(layout, model, beta0)
    options = options or SolverOptions()

    observations = [observed_indices(latent, frame) for frame in frames]
    for frame, (index, _) in zip(frames, observations):
        if index.size < MIN_VISIBLE_MARKERS:
            raise InsufficientMarkersError(
                f"frame {frame.time_index}: {index.size} visible markers, need {MIN_VISIBLE_MARKERS}"
            )
    # b counts the markers seen in the calibration frames, not the whole layout
    session = np.unique(np.concatenate([index for index, _ in observations]))
    b = marker_count_factor(session.size)
    if schedule is None:
        schedule = stage_one_schedule(b, final_weights)

    hands_active = bool(
        hands and model.has_hands and stats.has_hand_prior and hand_marker_labels(latent, model)
    )
    if model.has_hands and not hands_active:
        logger.info("Hand poses held at the mean pose")

    base_pose = rest_pose_array(model, stats.hand_mean_pose)
    poses = _initial_poses(model, latent, beta0, base_pose, observations)
    mixture = stats.body_mixture is not None

    num_frames = len(frames)
    num_markers = len(latent)
    free_all = free_pose_indices(model, hands=hands_active)
    offsets = latent.offsets
    beta = beta0.copy()
    stage_poses: list[list[PoseVector]] = []
    diagnostics: list[SolverDiagnostics] = []
    stack = ResidualStack(0)

    for stage, weights in enumerate(schedule.stage_weights):
        hands_free = hands_active and stage >= schedule.num_stages - HAND_FREE_STAGES
        free = free_all if hands_free else free_pose_indices(model, hands=False)

        params = ParameterLayout()
        beta_block = params.add("beta", model.num_shape)
        offset_block = params.add("offsets", 3 * num_markers)
        pose_blocks = [params.add(f"pose_{f}", free.size) for f in range(num_frames)]
        columns = [pose_columns(model, free, block) for block in pose_blocks]

        responsibilities = None
        if mixture:
            body_index = model.pose_indices(model.body_joints)
            responsibilities = [
                stats.body_mixture.responsibilities(pose[body_index]) for pose in poses
            ]

        def unpack(x: NDArray[np.float64]) -> tuple[NDArray, NDArray, list[NDArray]]:
            full = []
            for f in range(num_frames):
                pose = poses[f].copy()
                pose[free] = x[pose_blocks[f]]
                full.append(pose)
            return x[beta_block], x[offset_block].reshape(num_markers, 3), full

        def residual_fn(x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
            return _build(x).assemble()

        def _build(x: NDArray[np.float64]) -> ResidualStack:
            beta_x, offsets_x, poses_x = unpack(x)
            stack = ResidualStack(params.size)
            anchors = latent.anchors(model, offsets_x)
            zero_phi = np.zeros(model.num_dyn)
            for f in range(num_frames):
                index, observed = observations[f]
                evaluation = evaluate_points(model, anchors, beta_x, poses_x[f], zero_phi)
                add_marker_data(
                    stack,
                    weights.get(Term.DATA, 0.0),
                    evaluation,
                    index,
                    observed,
                    columns[f],
                    beta_block=beta_block,
                    offset_block=offset_block,
                )
                add_pose_priors(
                    stack,
                    model,
                    stats,
                    poses_x[f],
                    columns[f],
                    weights.get(Term.POSE_BODY, 0.0),
                    weights.get(Term.POSE_HAND, 0.0),
                    responsibilities[f] if responsibilities is not None else None,
                    hands=hands_free,
                )
            _add_shape_terms(stack, model, stats, latent, weights, beta_x, offsets_x, beta_block, offset_block)
            return stack

        x0 = np.concatenate([beta, offsets.ravel(), *[pose[free] for pose in poses]])
        x, diag = dogleg_minimize(residual_fn, x0, options)
        beta, offsets, poses = unpack(x)
        stack = _build(x)
        diagnostics.append(diag)
        stage_poses.append([PoseVector.from_array(p) for p in poses])
        logger.info(
            f"Calibration stage {stage + 1}/{schedule.num_stages}: cost {diag.final_cost:.6e} "
            f"after {diag.iterations} iterations ({diag.status})"
        )
        for term, cost in stack.term_costs.items():
            logger.debug(f"  {term.value}: {cost:.6e}")
        notify(progress, "calibrate", stage + 1, schedule.num_stages, f"stage {stage + 1}")

    calibrated = latent.with_offsets(offsets)
    anchors = calibrated.anchors(model)
    rms = []
    for f in range(num_frames):
        index, observed = observations[f]
        positions = evaluate_points(
            model, anchors, beta, poses[f], np.zeros(model.num_dyn), jacobian=False
        ).positions
        rms.append(float(np.sqrt(np.mean(np.sum((positions[index] - observed) ** 2, axis=1)))))

    return StageIResult(
        beta=beta,
        latent=calibrated,
        poses=[PoseVector.from_array(p) for p in poses],
        marker_rms=np.array(rms),
        term_costs={term.value: cost for term, cost in stack.term_costs.items()},
        weights={term.value: float(w) for term, w in schedule.final.items()},
        body_prior_mode=stats.body_prior_mode,
        hands_active=hands_active,
        stage_poses=stage_poses,
        diagnostics=diagnostics,
    )


def _initial_poses(
    model: BodyModel,
    latent: LatentMarkerSet,
    beta: NDArray[np.float64],
    base_pose: NDArray[np.float64],
    observations: list[tuple[NDArray[np.int64], NDArray[np.float64]]],
) -> list[NDArray[np.float64]]:
    rest = rest_marker_positions(latent, model, beta)
    root = regress_joints(model, beta)[0]
    poses = []
    for index, observed in observations:
        pose = base_pose.copy()
        try:
            pose[:3], pose[3:6] = initial_root_pose(rest[index], observed, root)
        except DegenerateAlignmentError as e:
            logger.warning(f"Rigid initialization skipped: {e}")
        poses.append(pose)
    return poses


def _add_shape_terms(
    stack: ResidualStack,
    model: BodyModel,
    stats: PriorStats,
    latent: LatentMarkerSet,
    weights: Mapping[Term, float],
    beta: NDArray[np.float64],
    offsets: NDArray[np.float64],
    beta_block: slice,
    offset_block: slice,
) -> None:
    """Shape prior, skin-distance and placement-drift terms."""
    num_markers = len(latent)
    inv_sigma = 1.0 / np.sqrt(stats.shape_cov_diag)
    jac = stack.new_block(model.num_shape)
    jac[:, beta_block] = np.diag(inv_sigma)
    stack.add(Term.SHAPE, weights.get(Term.SHAPE, 0.0), beta * inv_sigma, jac)

    surface_weight = weights.get(Term.SURFACE, 0.0)
    if surface_weight > 0 and num_markers:
        terms = surface_distance_terms(latent, model, beta, offsets)
        jac = stack.new_block(num_markers)
        jac[:, beta_block] = terms.d_beta
        blocks = np.zeros((num_markers, num_markers, 3))
        blocks[np.arange(num_markers), np.arange(num_markers)] = terms.d_offsets
        jac[:, offset_block] = blocks.reshape(num_markers, 3 * num_markers)
        stack.add(Term.SURFACE, surface_weight, terms.distances - latent.target_distances, jac)

    init_weight = weights.get(Term.INIT, 0.0)
    if init_weight > 0 and num_markers:
        drift = placement_drift(latent, model, beta, offsets)
        jac = stack.new_block(3 * num_markers)
        jac[:, beta_block] = drift.d_beta.reshape(3 * num_markers, -1)
        blocks = np.zeros((num_markers, 3, num_markers, 3))
        blocks[np.arange(num_markers), :, np.arange(num_markers), :] = drift.d_offsets
        jac[:, offset_block] = blocks.reshape(3 * num_markers, 3 * num_markers)
        stack.add(Term.INIT, init_weight, drift.residuals.ravel(), jac)
