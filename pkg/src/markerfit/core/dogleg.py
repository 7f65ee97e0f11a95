"""Powell dogleg trust-region solver for nonlinear least squares.

Minimizes |r(x)|^2 given a callable returning the residual vector and its
Jacobian. Steps are accepted only when they decrease the objective, so the
accepted cost sequence is non-increasing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import linalg

from ..utils.exceptions import ConfigError, JacobianShapeError, SolverDivergedError

logger = logging.getLogger(__name__)

ResidualFunction = Callable[[NDArray[np.float64]], tuple[NDArray[np.float64], NDArray[np.float64]]]


@dataclass(frozen=True)
class SolverOptions:
    """Trust-region settings.

    Attributes:
        max_iterations: Maximum number of trial steps
        gradient_tolerance: Stop when |J^T r|_inf falls below this
        step_tolerance: Stop when a step is this small relative to |x|
        initial_trust_radius: Starting trust-region radius
        max_trust_radius: Upper bound on the radius
        verbosity: 0 silent, 1 per-iteration debug logging
    """
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    step_tolerance: float = 1e-10
    initial_trust_radius: float = 1.0
    max_trust_radius: float = 1e4
    verbosity: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 0:
            raise ConfigError("max_iterations must be >= 0")
        if self.gradient_tolerance <= 0 or self.step_tolerance <= 0:
            raise ConfigError("solver tolerances must be > 0")
        if self.initial_trust_radius <= 0 or self.max_trust_radius < self.initial_trust_radius:
            raise ConfigError("trust radius must be positive and below max_trust_radius")


@dataclass
class SolverDiagnostics:
    """What happened during one solver run.

    status is one of "zero_residual", "gradient", "step", "max_iterations".
    """
    iterations: int = 0
    accepted_steps: int = 0
    initial_cost: float = 0.0
    final_cost: float = 0.0
    gradient_norm: float = 0.0
    status: str = "max_iterations"
    cost_history: list[float] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status != "max_iterations"


def dogleg_step(
    jacobian: NDArray[np.float64],
    residuals: NDArray[np.float64],
    gradient: NDArray[np.float64],
    radius: float,
) -> NDArray[np.float64]:
    """Dogleg step for min |r + J h| subject to |h| <= radius."""
    gauss_newton = linalg.lstsq(jacobian, -residuals, lapack_driver="gelsd")[0]
    if np.linalg.norm(gauss_newton) <= radius:
        return gauss_newton

    jg = jacobian @ gradient
    curvature = float(jg @ jg)
    g2 = float(gradient @ gradient)
    if curvature <= 0.0:
        return -radius * gradient / math.sqrt(g2)
    cauchy = -(g2 / curvature) * gradient
    cauchy_norm = np.linalg.norm(cauchy)
    if cauchy_norm >= radius:
        return radius * cauchy / cauchy_norm

    # |cauchy + tau (gauss_newton - cauchy)| = radius, tau in [0, 1]
    d = gauss_newton - cauchy
    a = float(d @ d)
    b = 2.0 * float(cauchy @ d)
    c = float(cauchy @ cauchy) - radius * radius
    tau = (-b + math.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a)
    return cauchy + tau * d


def dogleg_minimize(
    residual_and_jacobian: ResidualFunction,
    initial_params: ArrayLike,
    options: SolverOptions | None = None,
) -> tuple[NDArray[np.float64], SolverDiagnostics]:
    """Minimize |r(x)|^2 with Powell's dogleg method.

    Args:
        residual_and_jacobian: x -> (r, J) with J of shape (len(r), len(x))
        initial_params: Starting point
        options: Solver settings

    Returns:
        Tuple of (solution, diagnostics)

    Raises:
        SolverDivergedError: Non-finite residuals or Jacobian at the start
        JacobianShapeError: Jacobian shape does not match residuals and parameters

    Example:
        >>> A = np.array([[1.0, 0.0], [0.0, 2.0], [1.0, 1.0]])
        >>> b = np.array([1.0, 2.0, 3.0])
        >>> x, diag = dogleg_minimize(lambda x: (A @ x - b, A), np.zeros(2))
    """
    options = options or SolverOptions()
    x = np.array(initial_params, dtype=np.float64).ravel()
    r, jac = _evaluate(residual_and_jacobian, x)
    if not (np.all(np.isfinite(r)) and np.all(np.isfinite(jac))):
        raise SolverDivergedError("non-finite residuals at the initial point")

    cost = float(r @ r)
    diagnostics = SolverDiagnostics(initial_cost=cost, final_cost=cost, cost_history=[cost])
    if r.size == 0 or cost == 0.0 or x.size == 0:
        diagnostics.status = "zero_residual"
        return x, diagnostics

    debug = options.verbosity > 0 and logger.isEnabledFor(logging.DEBUG)
    radius = options.initial_trust_radius
    gradient = jac.T @ r
    for _ in range(options.max_iterations):
        grad_norm = float(np.max(np.abs(gradient)))
        if grad_norm <= options.gradient_tolerance:
            diagnostics.status = "gradient"
            break

        step = dogleg_step(jac, r, gradient, radius)
        step_norm = float(np.linalg.norm(step))
        if step_norm <= options.step_tolerance * (np.linalg.norm(x) + options.step_tolerance):
            diagnostics.status = "step"
            break

        diagnostics.iterations += 1
        predicted_r = r + jac @ step
        predicted = cost - float(predicted_r @ predicted_r)
        trial = x + step
        r_new, jac_new = _evaluate(residual_and_jacobian, trial)
        finite = bool(np.all(np.isfinite(r_new)) and np.all(np.isfinite(jac_new)))
        cost_new = float(r_new @ r_new) if finite else math.inf
        actual = cost - cost_new
        rho = actual / predicted if predicted > 0 else -1.0

        if finite and actual > 0:
            x, r, jac, cost = trial, r_new, jac_new, cost_new
            gradient = jac.T @ r
            diagnostics.accepted_steps += 1
            diagnostics.cost_history.append(cost)

        if rho < 0.25:
            radius = 0.25 * step_norm
        elif rho > 0.75 and step_norm >= 0.99 * radius:
            radius = min(2.0 * radius, options.max_trust_radius)

        if debug:
            logger.debug(
                f"dogleg it={diagnostics.iterations} cost={cost:.6e} rho={rho:.3f} "
                f"|h|={step_norm:.3e} radius={radius:.3e}"
            )

        if cost == 0.0:
            diagnostics.status = "gradient"
            break
        if radius <= options.step_tolerance * (np.linalg.norm(x) + options.step_tolerance):
            diagnostics.status = "step"
            break
    else:
        diagnostics.status = "max_iterations"

    diagnostics.final_cost = cost
    diagnostics.gradient_norm = float(np.max(np.abs(gradient))) if gradient.size else 0.0
    return x, diagnostics


def _evaluate(fun: ResidualFunction, x: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    r, jac = fun(x)
    r = np.asarray(r, dtype=np.float64).ravel()
    jac = np.asarray(jac, dtype=np.float64)
    if jac.shape != (r.size, x.size):
        raise JacobianShapeError(
            f"Jacobian shape {jac.shape} does not match residuals ({r.size}) x params ({x.size})"
        )
    return r, jac
