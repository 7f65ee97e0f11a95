"""Per-frame pose and soft-tissue fitting against a calibrated subject.

Shape and latent markers are fixed from calibration. The first frame is
initialized rigidly and solved with a graduated body pose prior; every
later frame is warm-started from its predecessor and solved in two steps:
pose alone with the soft-tissue terms removed, then pose and soft tissue
together. Pose priors are amplified by the occlusion factor q of the frame.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Mapping

import numpy as np
from numpy.typing import NDArray

from ..utils.exceptions import InsufficientMarkersError, MarkerFitError, TooFewFramesError
from .alignment import rigid_align
from .archive import FitArchive, FrameResult
from .body_model import BodyModel, PoseVector, regress_joints
from .dogleg import SolverDiagnostics, SolverOptions, dogleg_minimize
from .energy import (
    StageTwoWeights,
    Term,
    dyn_prior_residuals,
    marker_count_factor,
    observed_indices,
    occlusion_factor,
    smoothness_residuals,
    stage2_weights,
)
from .kinematics import evaluate_points
from .markers import hand_marker_labels, rest_marker_positions
from .mocap import MarkerFrame, MocapSequence
from .priors import PriorStats
from .problem import (
    ParameterLayout,
    ResidualStack,
    add_marker_data,
    add_pose_priors,
    free_pose_indices,
    pose_columns,
    rest_pose_array,
    scatter_columns,
)
from .progress import ProgressCallback, notify
from .stage_one import StageIResult

logger = logging.getLogger(__name__)

FIRST_FRAME_FACTORS = (10.0, 5.0, 1.0)
DYNAMIC_TERMS = frozenset({Term.DYNAMICS, Term.VELOCITY_DYNAMICS})


@dataclass(frozen=True)
class StageTwoConfig:
    """Settings of a sequence fit.

    Attributes:
        weights: Base weights; chosen from the profile when None
        profile: "default" or "hands"; picked from the markerset when None
        overrides: Per-term base weight replacements
        dynamics: Fit soft-tissue coefficients
        hands: Allow hand poses to move when hand markers exist
        first_frame_factors: Body prior multipliers of the first-frame runs
        options: Solver settings per run
        two_step: Solve pose alone before adding soft tissue
        use_occlusion_factor: Amplify the pose priors by q
    """
    weights: StageTwoWeights | None = None
    profile: str | None = None
    overrides: Mapping[Term, float] = field(default_factory=dict)
    dynamics: bool = True
    hands: bool = True
    first_frame_factors: tuple[float, ...] = FIRST_FRAME_FACTORS
    options: SolverOptions = field(default_factory=SolverOptions)
    two_step: bool = True
    use_occlusion_factor: bool = True

    def base_weights(self, hand_markers: bool) -> StageTwoWeights:
        if self.weights is not None:
            base = self.weights
        else:
            base = StageTwoWeights.profile(self.profile or ("hands" if hand_markers else "default"))
        return base.with_overrides(self.overrides)


class FrameSolver:
    """Fits frames of one subject; holds everything fixed across frames.

    One instance serves one sequence at a time. The model and calibration
    are only read.

    The marker-count factor b and the occlusion factor q count the session's
    markers: the latent markers among ``session_labels``, or every latent
    marker when no labels are given.
    """

    def __init__(
        self,
        stage1: StageIResult,
        model: BodyModel,
        stats: PriorStats,
        config: StageTwoConfig | None = None,
        session_labels: Iterable[str] | None = None,
    ):
        stats.check_model(model)
        self.model = model
        self.stats = stats
        self.config = config or StageTwoConfig()
        self.beta = np.asarray(stage1.beta, dtype=np.float64)
        self.latent = stage1.latent
        self.anchors = self.latent.anchors(model)
        if session_labels is None:
            self.session_markers = len(self.latent)
        else:
            self.session_markers = len(set(session_labels) & set(self.latent.labels))
        if self.session_markers == 0:
            raise InsufficientMarkersError("the session has none of the calibrated markers")
        self.b = marker_count_factor(self.session_markers)

        hand_markers = bool(hand_marker_labels(self.latent, model))
        self.hands_active = bool(
            self.config.hands and model.has_hands and stats.has_hand_prior and hand_markers
        )
        self.base = self.config.base_weights(hand_markers)
        self.dynamics = self.config.dynamics and model.num_dyn > 0
        self.free = free_pose_indices(model, hands=self.hands_active)
        self.body_free = free_pose_indices(model, hands=False)
        self.body_index = model.pose_indices(model.body_joints)
        self.rest_pose = rest_pose_array(model, stats.hand_mean_pose)
        self.rest_markers = rest_marker_positions(self.latent, model, self.beta)
        self.root_joint = regress_joints(model, self.beta)[0]

    def occlusion(self, visible: int) -> float:
        if not self.config.use_occlusion_factor:
            return 1.0
        return occlusion_factor(self.session_markers - visible, self.session_markers)

    def snapshot(self) -> dict[str, Any]:
        """Settings recorded into archives."""
        options = asdict(self.config.options)
        return {
            "weights": asdict(self.base),
            "options": options,
            "dynamics": self.dynamics,
            "handsActive": self.hands_active,
            "twoStep": self.config.two_step,
            "occlusionFactor": self.config.use_occlusion_factor,
            "firstFrameFactors": list(self.config.first_frame_factors),
            "b": self.b,
        }

    def first_frame_stages(self, weights: Mapping[Term, float]) -> list[dict[Term, float]]:
        """Weights of the first-frame runs: data and a relaxing body pose prior only."""
        return [
            {Term.DATA: weights[Term.DATA], Term.POSE_BODY: weights[Term.POSE_BODY] * factor}
            for factor in self.config.first_frame_factors
        ]

    def first_frame(self, frame: MarkerFrame) -> FrameResult:
        """Rigid initialization, then data and body pose prior with a relaxing prior weight.

        Hand joints stay at the hand mean pose; later frames free them.

        Raises:
            DegenerateAlignmentError: Fewer than 3 visible or collinear markers
            SolverDivergedError: The objective became non-finite
        """
        index, observed = observed_indices(self.latent, frame)
        q = self.occlusion(index.size)
        weights = stage2_weights(self.b, q, self.base)

        pose = self.rest_pose.copy()
        transform = rigid_align(self.rest_markers[index], observed)
        pose[:3] = transform.translation + transform.rotation @ self.root_joint - self.root_joint
        pose[3:6] = transform.rotvec
        phi = np.zeros(self.model.num_dyn)

        runs: list[SolverDiagnostics] = []
        for stage in self.first_frame_stages(weights):
            pose, phi, diag = self._solve(
                index, observed, pose, phi, stage, optimize_phi=False, free=self.body_free
            )
            runs.append(diag)
        return self._result(frame, index, observed, pose, phi, q, runs)

    def next_frame(self, frame: MarkerFrame, previous: FrameResult) -> FrameResult:
        """Warm-started two-step fit; a frame without markers carries the previous solution."""
        index, observed = observed_indices(self.latent, frame)
        if index.size == 0:
            logger.warning(f"Frame {frame.time_index}: all markers missing, previous solution carried")
            return _carried(previous, frame.time_index, "all markers missing")

        q = self.occlusion(index.size)
        weights = stage2_weights(self.b, q, self.base)
        prev_pose = previous.theta.to_array()
        prev_phi = np.asarray(previous.phi, dtype=np.float64)
        pose, phi = prev_pose.copy(), prev_phi.copy()

        runs: list[SolverDiagnostics] = []
        if self.config.two_step or not self.dynamics:
            pose_only = {term: w for term, w in weights.items() if term not in DYNAMIC_TERMS}
            pose, phi, diag = self._solve(
                index, observed, pose, phi, pose_only, optimize_phi=False, prev_pose=prev_pose
            )
            runs.append(diag)
        if self.dynamics:
            pose, phi, diag = self._solve(
                index, observed, pose, phi, weights, optimize_phi=True,
                prev_pose=prev_pose, prev_phi=prev_phi,
            )
            runs.append(diag)
        return self._result(frame, index, observed, pose, phi, q, runs)

    def _solve(
        self,
        index: NDArray[np.int64],
        observed: NDArray[np.float64],
        pose0: NDArray[np.float64],
        phi0: NDArray[np.float64],
        weights: Mapping[Term, float],
        *,
        optimize_phi: bool,
        prev_pose: NDArray[np.float64] | None = None,
        prev_phi: NDArray[np.float64] | None = None,
        free: NDArray[np.int64] | None = None,
    ) -> tuple[NDArray[np.float64], NDArray[np.float64], SolverDiagnostics]:
        model = self.model
        free = self.free if free is None else free
        params = ParameterLayout()
        pose_block = params.add("pose", free.size)
        phi_block = params.add("phi", model.num_dyn) if optimize_phi else None
        columns = pose_columns(model, free, pose_block)

        responsibilities = None
        if self.stats.body_mixture is not None and self.body_index.size:
            responsibilities = self.stats.body_mixture.responsibilities(pose0[self.body_index])

        def unpack(x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
            pose = pose0.copy()
            pose[free] = x[pose_block]
            phi = x[phi_block] if phi_block is not None else phi0
            return pose, phi

        def residual_fn(x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
            pose, phi = unpack(x)
            stack = ResidualStack(params.size)
            evaluation = evaluate_points(model, self.anchors, self.beta, pose, phi)
            add_marker_data(
                stack, weights.get(Term.DATA, 0.0), evaluation, index, observed, columns,
                phi_block=phi_block,
            )
            add_pose_priors(
                stack,
                model,
                self.stats,
                pose,
                columns,
                weights.get(Term.POSE_BODY, 0.0),
                weights.get(Term.POSE_HAND, 0.0),
                responsibilities,
                hands=self.hands_active,
            )
            self._add_temporal_terms(stack, weights, pose, phi, columns, phi_block, prev_pose, prev_phi)
            return stack.assemble()

        x0 = pose0[free] if phi_block is None else np.concatenate([pose0[free], phi0])
        x, diag = dogleg_minimize(residual_fn, x0, self.config.options)
        pose, phi = unpack(x)
        return pose, np.array(phi, dtype=np.float64), diag

    def _add_temporal_terms(
        self,
        stack: ResidualStack,
        weights: Mapping[Term, float],
        pose: NDArray[np.float64],
        phi: NDArray[np.float64],
        columns: NDArray[np.int64],
        phi_block: slice | None,
        prev_pose: NDArray[np.float64] | None,
        prev_phi: NDArray[np.float64] | None,
    ) -> None:
        """Pose velocity (joint rotations only), soft-tissue prior and soft-tissue velocity."""
        velocity = weights.get(Term.VELOCITY_POSE, 0.0)
        if velocity > 0 and prev_pose is not None:
            residuals = smoothness_residuals(pose[3:], prev_pose[3:], "pose")
            jac = stack.new_block(residuals.size)
            scatter_columns(jac, np.eye(residuals.size), np.arange(3, pose.size), columns)
            stack.add(Term.VELOCITY_POSE, velocity, residuals, jac)

        if phi_block is None:
            return
        jac = stack.new_block(phi.size)
        jac[:, phi_block] = np.diag(1.0 / np.sqrt(self.stats.dyn_cov_diag))
        stack.add(Term.DYNAMICS, weights.get(Term.DYNAMICS, 0.0), dyn_prior_residuals(phi, self.stats), jac)
        if prev_phi is not None:
            jac = stack.new_block(phi.size)
            jac[:, phi_block] = np.eye(phi.size)
            stack.add(
                Term.VELOCITY_DYNAMICS,
                weights.get(Term.VELOCITY_DYNAMICS, 0.0),
                smoothness_residuals(phi, prev_phi, "dynamics"),
                jac,
            )

    def _result(
        self,
        frame: MarkerFrame,
        index: NDArray[np.int64],
        observed: NDArray[np.float64],
        pose: NDArray[np.float64],
        phi: NDArray[np.float64],
        q: float,
        runs: list[SolverDiagnostics],
    ) -> FrameResult:
        positions = evaluate_points(
            self.model, self.anchors, self.beta, pose, phi, jacobian=False
        ).positions
        rms = float(np.sqrt(np.mean(np.sum((positions[index] - observed) ** 2, axis=1))))
        return FrameResult(
            theta=PoseVector.from_array(pose),
            phi=phi,
            q_used=q,
            marker_rms=rms,
            converged=all(run.converged for run in runs),
            iterations=sum(run.iterations for run in runs),
            time_index=frame.time_index,
        )


def fit_first_frame(
    frame: MarkerFrame,
    stage1: StageIResult,
    model: BodyModel,
    stats: PriorStats,
    config: StageTwoConfig | None = None,
) -> FrameResult:
    """Fit a frame with no predecessor. See FrameSolver.first_frame."""
    return FrameSolver(stage1, model, stats, config).first_frame(frame)


def fit_frame(
    frame: MarkerFrame,
    previous: FrameResult,
    stage1: StageIResult,
    model: BodyModel,
    stats: PriorStats,
    config: StageTwoConfig | None = None,
) -> FrameResult:
    """Fit a frame warm-started from its predecessor. See FrameSolver.next_frame."""
    return FrameSolver(stage1, model, stats, config).next_frame(frame, previous)


def fit_sequence(
    sequence: MocapSequence,
    stage1: StageIResult,
    model: BodyModel,
    stats: PriorStats,
    config: StageTwoConfig | None = None,
    *,
    model_hash: str = "",
    seed: int = 0,
    progress: ProgressCallback | None = None,
) -> FitArchive:
    """Fit every frame of a sequence in temporal order.

    Frame failures never abort the sequence: the frame is flagged as
    skipped with its error and the last fitted solution is carried over.
    Until a first frame succeeds, every frame is attempted as a first frame.

    Args:
        sequence: Observed markers
        stage1: Calibrated subject
        model: Body model
        stats: Prior statistics
        config: Fit settings
        model_hash: Recorded into the archive
        seed: Recorded into the archive
        progress: Called after every frame

    Returns:
        FitArchive with one entry per input frame

    Raises:
        TooFewFramesError: The sequence has no frames
    """
    if len(sequence) == 0:
        raise TooFewFramesError(f"{sequence.name}: sequence has no frames")
    solver = FrameSolver(stage1, model, stats, config, session_labels=sequence.labels)
    rest = FrameResult(PoseVector.from_array(solver.rest_pose), np.zeros(model.num_dyn))
    results: list[FrameResult] = []
    previous: FrameResult | None = None
    total = len(sequence)
    for t, frame in enumerate(sequence.frames):
        try:
            if previous is None:
                result = solver.first_frame(frame)
            else:
                result = solver.next_frame(frame, previous)
        except (MarkerFitError, np.linalg.LinAlgError) as e:
            logger.warning(f"{sequence.name} frame {t} skipped: {e}")
            result = _carried(previous or rest, frame.time_index, str(e))
        results.append(result)
        if not result.skipped:
            previous = result
        notify(progress, "fit", t + 1, total, sequence.name)

    archive = FitArchive.from_results(
        solver.beta,
        results,
        sequence.frame_rate,
        model.num_dyn,
        model_hash=model_hash,
        solver=solver.snapshot(),
        source=sequence.name,
        seed=seed,
    )
    logger.info(
        f"Fitted {archive.num_frames} frames of {sequence.name}: "
        f"mean RMS {archive.mean_rms * 1000:.3f} mm, {archive.num_skipped} skipped"
    )
    return archive


def _carried(previous: FrameResult, time_index: int, error: str) -> FrameResult:
    return FrameResult(
        theta=previous.theta,
        phi=np.array(previous.phi, dtype=np.float64),
        q_used=previous.q_used,
        converged=False,
        skipped=True,
        error=error,
        time_index=time_index,
    )
