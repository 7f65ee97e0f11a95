"""Prior statistics for shape, body pose, hand pose and soft tissue."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg
from scipy.special import logsumexp

from ..utils.exceptions import DimensionError, InvalidModelError
from .body_model import BodyModel

HAND_PCA_DIM = 24
MIXTURE_WEIGHT_TOLERANCE = 1e-9


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    """Full-covariance Gaussian mixture.

    Attributes:
        weights: (C,) mixing weights summing to 1
        means: (C, D)
        covariances: (C, D, D) symmetric positive definite
    """
    weights: NDArray[np.float64]
    means: NDArray[np.float64]
    covariances: NDArray[np.float64]

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=np.float64).ravel()
        means = np.asarray(self.means, dtype=np.float64)
        covs = np.asarray(self.covariances, dtype=np.float64)
        c = weights.size
        if means.ndim != 2 or means.shape[0] != c:
            raise DimensionError("mixture means", f"({c}, D)", means.shape)
        d = means.shape[1]
        if covs.shape != (c, d, d):
            raise DimensionError("mixture covariances", (c, d, d), covs.shape)
        if np.any(weights <= 0) or abs(weights.sum() - 1.0) > MIXTURE_WEIGHT_TOLERANCE:
            raise InvalidModelError("mixture weights must be positive and sum to 1")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", covs)
        self.cholesky  # validates positive definiteness

    @property
    def num_components(self) -> int:
        return int(self.weights.size)

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    @cached_property
    def cholesky(self) -> NDArray[np.float64]:
        """Lower Cholesky factors L_k with L_k L_k^T = covariance_k."""
        try:
            return np.stack([linalg.cholesky(cov, lower=True) for cov in self.covariances])
        except linalg.LinAlgError as e:
            raise InvalidModelError(f"mixture covariance is not positive definite: {e}") from e

    @cached_property
    def whiteners(self) -> NDArray[np.float64]:
        """Inverse Cholesky factors; whiteners[k] @ (x - mean_k) has unit covariance."""
        eye = np.eye(self.dim)
        return np.stack([linalg.solve_triangular(chol, eye, lower=True) for chol in self.cholesky])

    @cached_property
    def log_normalizers(self) -> NDArray[np.float64]:
        """log w_k - 0.5 log det(cov_k) - D/2 log(2 pi)."""
        logdet = 2.0 * np.sum(np.log(np.diagonal(self.cholesky, axis1=1, axis2=2)), axis=1)
        return np.log(self.weights) - 0.5 * logdet - 0.5 * self.dim * np.log(2.0 * np.pi)

    def whitened(self, x: ArrayLike) -> NDArray[np.float64]:
        """Per-component whitened deviations, (C, D)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise DimensionError("mixture input", (self.dim,), x.shape)
        return np.einsum("kab,kb->ka", self.whiteners, x[None, :] - self.means)

    def component_log_likelihoods(self, x: ArrayLike) -> NDArray[np.float64]:
        z = self.whitened(x)
        return self.log_normalizers - 0.5 * np.sum(z * z, axis=1)

    def negative_log_likelihood(self, x: ArrayLike) -> float:
        return float(-logsumexp(self.component_log_likelihoods(x)))

    def responsibilities(self, x: ArrayLike) -> NDArray[np.float64]:
        log_p = self.component_log_likelihoods(x)
        return np.exp(log_p - logsumexp(log_p))


@dataclass(frozen=True, eq=False)
class PriorStats:
    """Prior statistics bundled with a body model.

    Attributes:
        shape_cov_diag: (S,) variances of the shape coefficients
        body_mean: Mean of the body pose parameters, (B,)
        body_cov_diag: Variances of the body pose parameters, (B,)
        body_mixture: Optional Gaussian mixture over body pose parameters
        hand_projection: (H_low, H) projection of centered hand poses, or None
        hand_cov_diag: (H_low,) variances in the projected space, or None
        hand_mean_pose: (H,) mean hand pose, or None
        dyn_cov_diag: (D,) variances of the soft-tissue coefficients
    """
    shape_cov_diag: NDArray[np.float64]
    body_mean: NDArray[np.float64]
    body_cov_diag: NDArray[np.float64]
    dyn_cov_diag: NDArray[np.float64]
    body_mixture: GaussianMixture | None = None
    hand_projection: NDArray[np.float64] | None = None
    hand_cov_diag: NDArray[np.float64] | None = None
    hand_mean_pose: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        for name in ("shape_cov_diag", "body_mean", "body_cov_diag", "dyn_cov_diag"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64).ravel())
        for name in ("shape_cov_diag", "body_cov_diag", "dyn_cov_diag"):
            if np.any(getattr(self, name) <= 0):
                raise InvalidModelError(f"{name} must be strictly positive")
        if self.body_mean.shape != self.body_cov_diag.shape:
            raise DimensionError("body_mean", self.body_cov_diag.shape, self.body_mean.shape)
        if self.body_mixture is not None and self.body_mixture.dim != self.body_mean.size:
            raise DimensionError("body_mixture", self.body_mean.size, self.body_mixture.dim)

        hand = (self.hand_projection, self.hand_cov_diag, self.hand_mean_pose)
        if any(h is not None for h in hand):
            if any(h is None for h in hand):
                raise InvalidModelError("hand prior needs projection, covariance and mean pose")
            projection = np.asarray(self.hand_projection, dtype=np.float64)
            cov = np.asarray(self.hand_cov_diag, dtype=np.float64).ravel()
            mean = np.asarray(self.hand_mean_pose, dtype=np.float64).ravel()
            if projection.shape != (cov.size, mean.size):
                raise DimensionError("hand_projection", (cov.size, mean.size), projection.shape)
            if np.any(cov <= 0):
                raise InvalidModelError("hand_cov_diag must be strictly positive")
            object.__setattr__(self, "hand_projection", projection)
            object.__setattr__(self, "hand_cov_diag", cov)
            object.__setattr__(self, "hand_mean_pose", mean)

    @property
    def body_prior_mode(self) -> str:
        return "gmm" if self.body_mixture is not None else "gaussian"

    @property
    def has_hand_prior(self) -> bool:
        return self.hand_projection is not None

    @classmethod
    def default(cls, model: BodyModel) -> PriorStats:
        """Unit-variance priors matching the model's dimensions."""
        body_dim = 3 * model.body_joints.size
        hand = {}
        if model.has_hands:
            hand_dim = 3 * model.hand_joints.size
            low = min(HAND_PCA_DIM, hand_dim)
            hand = {
                "hand_projection": np.eye(hand_dim)[:low],
                "hand_cov_diag": np.ones(low),
                "hand_mean_pose": np.zeros(hand_dim),
            }
        return cls(
            shape_cov_diag=np.ones(model.num_shape),
            body_mean=np.zeros(body_dim),
            body_cov_diag=np.ones(body_dim),
            dyn_cov_diag=np.ones(model.num_dyn),
            **hand,
        )

    def check_model(self, model: BodyModel) -> None:
        """Raise DimensionError unless the statistics fit the model."""
        if self.shape_cov_diag.size != model.num_shape:
            raise DimensionError("shape_cov_diag", model.num_shape, self.shape_cov_diag.size)
        if self.dyn_cov_diag.size != model.num_dyn:
            raise DimensionError("dyn_cov_diag", model.num_dyn, self.dyn_cov_diag.size)
        if self.body_mean.size != 3 * model.body_joints.size:
            raise DimensionError("body_mean", 3 * model.body_joints.size, self.body_mean.size)
        if self.hand_mean_pose is not None and self.hand_mean_pose.size != 3 * model.hand_joints.size:
            raise DimensionError(
                "hand_mean_pose", 3 * model.hand_joints.size, self.hand_mean_pose.size
            )

    def truncated(self, shape_dim: int, dyn_dim: int) -> PriorStats:
        """Statistics for a model keeping only the leading components."""
        return PriorStats(
            shape_cov_diag=self.shape_cov_diag[:shape_dim],
            body_mean=self.body_mean,
            body_cov_diag=self.body_cov_diag,
            dyn_cov_diag=self.dyn_cov_diag[:dyn_dim],
            body_mixture=self.body_mixture,
            hand_projection=self.hand_projection,
            hand_cov_diag=self.hand_cov_diag,
            hand_mean_pose=self.hand_mean_pose,
        )
