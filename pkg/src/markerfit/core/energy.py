"""Energy terms, weight schedules and balancing factors.

Every term is a residual vector r_t; the objective is sum_t w_t * |r_t|^2
(the Gaussian mixture body prior contributes w * NLL instead). Solvers
scale each residual block by sqrt(w_t).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Literal, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.exceptions import ConfigError, DimensionError, UnknownLabelError
from .body_model import BodyModel, PoseVector
from .markers import LatentMarkerSet, simulate_marker_array
from .mocap import MarkerFrame
from .priors import PriorStats

logger = logging.getLogger(__name__)

REFERENCE_MARKER_COUNT = 46
OCCLUSION_GAIN = 2.5


class Term(str, Enum):
    """Names of the energy terms, as used in configs and reports."""
    DATA = "data"
    SHAPE = "shape"
    POSE_BODY = "pose_body"
    POSE_HAND = "pose_hand"
    INIT = "init"
    SURFACE = "surface"
    VELOCITY_POSE = "velocity_pose"
    DYNAMICS = "dynamics"
    VELOCITY_DYNAMICS = "velocity_dynamics"

    @classmethod
    def parse(cls, name: str) -> Term:
        try:
            return cls(name.strip().lower())
        except ValueError:
            valid = ", ".join(t.value for t in cls)
            raise ConfigError(f"unknown energy term '{name}' (expected one of: {valid})") from None


STAGE_ONE_FINAL: dict[Term, float] = {
    Term.DATA: 600.0,
    Term.SHAPE: 1.25,
    Term.POSE_BODY: 0.375,
    Term.POSE_HAND: 0.125,
    Term.INIT: 37.5,
    Term.SURFACE: 1e4,
}


def marker_count_factor(n: int) -> float:
    """Data-term normalization b = 46 / n for a markerset of n markers."""
    if n < 1:
        raise ValueError("marker count must be >= 1")
    return REFERENCE_MARKER_COUNT / n


def occlusion_factor(missing: int, total: int) -> float:
    """Pose-prior amplification q = 1 + 2.5 * missing / total."""
    if total < 1:
        raise ValueError("session marker count must be >= 1")
    if not 0 <= missing <= total:
        raise ValueError(f"missing count {missing} outside [0, {total}]")
    return 1.0 + OCCLUSION_GAIN * missing / total


def observed_indices(latent: LatentMarkerSet, frame: MarkerFrame) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Latent-set indices and positions of the visible markers of a frame.

    Raises:
        UnknownLabelError: If the frame carries labels outside the latent set
    """
    unknown = frame.labels - set(latent.labels)
    if unknown:
        raise UnknownLabelError(unknown)
    labels = [label for label in latent.labels if label in frame.positions]
    index = np.array([latent.index_of(label) for label in labels], dtype=np.int64)
    observed = np.array([frame.positions[label] for label in labels]).reshape(-1, 3)
    return index, observed


def data_residuals(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
    theta: PoseVector | ArrayLike,
    phi: ArrayLike,
    frame: MarkerFrame,
) -> NDArray[np.float64]:
    """Simulated minus observed position for every visible marker, flattened."""
    index, observed = observed_indices(latent, frame)
    if index.size == 0:
        return np.zeros(0)
    simulated = simulate_marker_array(latent, model, beta, theta, phi)
    return (simulated[index] - observed).ravel()


def shape_prior_residuals(beta: ArrayLike, stats: PriorStats) -> NDArray[np.float64]:
    beta = _vector("beta", beta, stats.shape_cov_diag.size)
    return beta / np.sqrt(stats.shape_cov_diag)


def body_pose_prior_cost(
    theta_body: ArrayLike,
    stats: PriorStats,
    mode: Literal["gaussian", "gmm"] | None = None,
) -> NDArray[np.float64] | float:
    """Body pose prior.

    Args:
        theta_body: Rotation parameters of the non-root body joints
        stats: Prior statistics
        mode: "gaussian" or "gmm"; defaults to the mode the statistics support

    Returns:
        Mahalanobis residuals in Gaussian mode, negative log-likelihood in mixture mode

    Raises:
        ConfigError: If the statistics lack the requested mode
    """
    mode = mode or stats.body_prior_mode
    theta_body = _vector("theta_body", theta_body, stats.body_mean.size)
    if mode == "gmm":
        if stats.body_mixture is None:
            raise ConfigError("mixture body prior requested but the model has no mixture stats")
        return stats.body_mixture.negative_log_likelihood(theta_body)
    if mode != "gaussian":
        raise ConfigError(f"unknown body prior mode '{mode}'")
    return (theta_body - stats.body_mean) / np.sqrt(stats.body_cov_diag)


def body_prior_surrogate(
    theta_body: ArrayLike,
    stats: PriorStats,
    responsibilities: NDArray[np.float64],
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Gauss-Newton surrogate of the mixture NLL at fixed responsibilities.

    Returns:
        Residuals sqrt(g_k) L_k^-1 (x - mu_k) stacked over components and
        their Jacobian with respect to x
    """
    if stats.body_mixture is None:
        raise ConfigError("mixture body prior requested but the model has no mixture stats")
    mixture = stats.body_mixture
    scale = np.sqrt(responsibilities)[:, None]
    residuals = (scale * mixture.whitened(theta_body)).ravel()
    jacobian = (scale[:, :, None] * mixture.whiteners).reshape(-1, mixture.dim)
    return residuals, jacobian


def hand_pose_prior_residuals(theta_hands: ArrayLike, stats: PriorStats) -> NDArray[np.float64]:
    """Projected, whitened deviation of the hand pose from the mean hand pose.

    Raises:
        ConfigError: If there is no hand prior (model without hand joints)
    """
    if not stats.has_hand_prior:
        raise ConfigError("model has no hand joints or hand prior")
    assert stats.hand_mean_pose is not None and stats.hand_projection is not None
    assert stats.hand_cov_diag is not None
    theta_hands = _vector("theta_hands", theta_hands, stats.hand_mean_pose.size)
    projected = stats.hand_projection @ (theta_hands - stats.hand_mean_pose)
    return projected / np.sqrt(stats.hand_cov_diag)


def dyn_prior_residuals(phi: ArrayLike, stats: PriorStats) -> NDArray[np.float64]:
    phi = _vector("phi", phi, stats.dyn_cov_diag.size)
    return phi / np.sqrt(stats.dyn_cov_diag)


def smoothness_residuals(
    current: ArrayLike,
    previous: ArrayLike | None,
    kind: Literal["pose", "dynamics"] = "pose",
) -> NDArray[np.float64]:
    """First-order temporal difference; empty on the first frame."""
    if kind not in ("pose", "dynamics"):
        raise ValueError(f"unknown smoothness kind '{kind}'")
    current = np.asarray(current, dtype=np.float64).ravel()
    if previous is None:
        return np.zeros(0)
    previous = np.asarray(previous, dtype=np.float64).ravel()
    if previous.shape != current.shape:
        raise DimensionError(f"previous {kind}", current.shape, previous.shape)
    return current - previous


@dataclass(frozen=True)
class WeightSchedule:
    """Per-stage term weights of an annealed optimization.

    Attributes:
        stage_weights: One term-to-weight map per stage, first to last
        s_factor: Ratio between consecutive stages
        constant_terms: Terms whose weight never changes
    """
    stage_weights: tuple[Mapping[Term, float], ...]
    s_factor: float = 2.0
    constant_terms: frozenset[Term] = field(default_factory=lambda: frozenset({Term.SURFACE}))

    def __post_init__(self) -> None:
        if not self.stage_weights:
            raise ConfigError("weight schedule needs at least one stage")
        for weights in self.stage_weights:
            if any(w < 0 for w in weights.values()):
                raise ConfigError("weights must be non-negative")

    @property
    def num_stages(self) -> int:
        return len(self.stage_weights)

    @property
    def final(self) -> Mapping[Term, float]:
        return self.stage_weights[-1]


def stage_one_schedule(
    b: float,
    final: Mapping[Term, float] | None = None,
    s_factor: float = 2.0,
    stages: int = 4,
    constant_terms: frozenset[Term] = frozenset({Term.SURFACE}),
) -> WeightSchedule:
    """Annealing schedule ending at the calibration weights.

    The data term grows by s_factor per stage, every other non-constant
    term shrinks by it; the data weight is multiplied by b throughout.

    Args:
        b: Marker-count factor
        final: Final-stage weights before b; defaults to STAGE_ONE_FINAL
        s_factor: Ratio between stages
        stages: Number of stages
        constant_terms: Terms held fixed across stages
    """
    if stages < 1 or s_factor <= 0:
        raise ConfigError("annealing needs >= 1 stage and a positive factor")
    base = dict(STAGE_ONE_FINAL if final is None else final)
    schedule = []
    for k in range(stages):
        exponent = stages - 1 - k
        weights: dict[Term, float] = {}
        for term, value in base.items():
            if term in constant_terms:
                weights[term] = value
            elif term == Term.DATA:
                weights[term] = value * b / s_factor**exponent
            else:
                weights[term] = value * s_factor**exponent
        schedule.append(weights)
    return WeightSchedule(tuple(schedule), s_factor, frozenset(constant_terms))


@dataclass(frozen=True)
class StageTwoWeights:
    """Base per-frame weights; data is scaled by b and the pose priors by q."""
    data: float = 400.0
    pose_body: float = 1.6
    pose_hand: float = 1.0
    velocity_pose: float = 2.5
    dynamics: float = 1.0
    velocity_dynamics: float = 6.0

    @classmethod
    def hands(cls) -> StageTwoWeights:
        """Profile used when the markerset includes hand markers."""
        return cls(data=150.0, pose_body=1.5, pose_hand=1.5)

    @classmethod
    def profile(cls, name: str) -> StageTwoWeights:
        if name == "default":
            return cls()
        if name == "hands":
            return cls.hands()
        raise ConfigError(f"unknown weight profile '{name}' (expected 'default' or 'hands')")

    def with_overrides(self, overrides: Mapping[Term, float]) -> StageTwoWeights:
        names = {f.name for f in fields(self)}
        changes = {}
        for term, value in overrides.items():
            if term.value not in names:
                continue
            changes[term.value] = float(value)
        return replace(self, **changes)

    def resolve(self, b: float, q: float) -> dict[Term, float]:
        return {
            Term.DATA: self.data * b,
            Term.POSE_BODY: self.pose_body * q,
            Term.POSE_HAND: self.pose_hand * q,
            Term.VELOCITY_POSE: self.velocity_pose,
            Term.DYNAMICS: self.dynamics,
            Term.VELOCITY_DYNAMICS: self.velocity_dynamics,
        }


def stage2_weights(b: float, q: float, base: StageTwoWeights | None = None) -> dict[Term, float]:
    """Per-frame weights for given marker-count and occlusion factors."""
    if b <= 0:
        raise ValueError("b must be positive")
    if not 1.0 <= q <= 1.0 + OCCLUSION_GAIN:
        raise ValueError(f"q must lie in [1, {1.0 + OCCLUSION_GAIN}]")
    return (base or StageTwoWeights()).resolve(b, q)


def total_energy(
    residuals: Mapping[Term, ArrayLike],
    weights: Mapping[Term, float],
    costs: Mapping[Term, float] | None = None,
) -> float:
    """Weighted sum of squared residuals plus weighted scalar costs."""
    total = 0.0
    for term, r in residuals.items():
        r = np.asarray(r, dtype=np.float64)
        total += weights.get(term, 0.0) * float(r @ r)
    for term, cost in (costs or {}).items():
        total += weights.get(term, 0.0) * float(cost)
    return total


def _vector(name: str, values: ArrayLike, expected: int) -> NDArray[np.float64]:
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size != expected:
        raise DimensionError(name, (expected,), arr.shape)
    return arr
