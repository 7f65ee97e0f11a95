"""Tests for the dogleg solver and rigid alignment."""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from markerfit.core.alignment import RigidTransform, rigid_align
from markerfit.core.dogleg import SolverOptions, dogleg_minimize, dogleg_step
from markerfit.utils.exceptions import (
    ConfigError,
    DegenerateAlignmentError,
    JacobianShapeError,
    SolverDivergedError,
)


def rosenbrock(x):
    residuals = np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])
    jacobian = np.array([[-20.0 * x[0], 10.0], [-1.0, 0.0]])
    return residuals, jacobian


class TestDogleg:
    """Trust-region least squares."""

    def test_linear_problem(self):
        """A linear problem reaches the least-squares solution."""
        rng = np.random.default_rng(0)
        a = rng.normal(size=(20, 4))
        b = rng.normal(size=20)
        x, diagnostics = dogleg_minimize(lambda x: (a @ x - b, a), np.zeros(4))
        np.testing.assert_allclose(x, np.linalg.lstsq(a, b, rcond=None)[0], atol=1e-8)
        assert diagnostics.converged

    def test_rosenbrock(self):
        """The classic banana valley is solved from the standard start."""
        x, diagnostics = dogleg_minimize(rosenbrock, [-1.2, 1.0])
        np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-6)
        assert diagnostics.final_cost < 1e-12

    def test_cost_never_increases(self):
        """Only improving steps are accepted."""
        _, diagnostics = dogleg_minimize(rosenbrock, [-1.2, 1.0], SolverOptions(initial_trust_radius=5.0))
        history = np.array(diagnostics.cost_history)
        assert np.all(np.diff(history) <= 0)
        assert diagnostics.accepted_steps == len(history) - 1

    def test_zero_residual_start(self):
        """Starting at an exact solution returns immediately."""
        x, diagnostics = dogleg_minimize(rosenbrock, [1.0, 1.0])
        np.testing.assert_array_equal(x, [1.0, 1.0])
        assert diagnostics.status == "zero_residual"
        assert diagnostics.iterations == 0

    def test_iteration_cap(self):
        """max_iterations bounds the number of trial steps."""
        _, diagnostics = dogleg_minimize(rosenbrock, [-1.2, 1.0], SolverOptions(max_iterations=2))
        assert diagnostics.iterations <= 2
        assert not diagnostics.converged

    def test_jacobian_shape(self):
        """A Jacobian of the wrong shape is reported."""
        with pytest.raises(JacobianShapeError):
            dogleg_minimize(lambda x: (x, np.eye(3)), np.zeros(2))

    def test_non_finite_start(self):
        """NaN residuals at the start cannot be optimized."""
        with pytest.raises(SolverDivergedError):
            dogleg_minimize(lambda x: (x + np.nan, np.eye(2)), np.zeros(2))

    def test_invalid_options(self):
        """Tolerances must be positive."""
        with pytest.raises(ConfigError):
            SolverOptions(gradient_tolerance=0.0)
        with pytest.raises(ConfigError):
            SolverOptions(initial_trust_radius=10.0, max_trust_radius=1.0)

    def test_step_inside_radius(self):
        """A short Gauss-Newton step is taken as is."""
        jac = np.eye(2)
        r = np.array([0.1, -0.2])
        np.testing.assert_allclose(dogleg_step(jac, r, jac.T @ r, radius=1.0), -r)

    def test_step_clipped_to_radius(self):
        """Long steps end on the trust-region boundary."""
        jac = np.diag([1.0, 10.0])
        r = np.array([5.0, 3.0])
        step = dogleg_step(jac, r, jac.T @ r, radius=0.5)
        assert np.linalg.norm(step) == pytest.approx(0.5)


class TestRigidAlign:
    """Kabsch alignment of correspondences."""

    def test_recovers_transform(self):
        """A known rotation and translation are recovered exactly."""
        rng = np.random.default_rng(1)
        source = rng.normal(size=(10, 3))
        rotation = Rotation.from_rotvec([0.3, -0.5, 1.1]).as_matrix()
        target = source @ rotation.T + np.array([1.0, 2.0, -0.5])
        transform = rigid_align(source, target)
        np.testing.assert_allclose(transform.rotation, rotation, atol=1e-10)
        np.testing.assert_allclose(transform.translation, [1.0, 2.0, -0.5], atol=1e-10)
        np.testing.assert_allclose(transform.rotvec, [0.3, -0.5, 1.1], atol=1e-10)

    def test_reflection_avoided(self):
        """Mirrored targets still give a proper rotation."""
        rng = np.random.default_rng(2)
        source = rng.normal(size=(8, 3))
        target = source * np.array([1.0, 1.0, -1.0])
        transform = rigid_align(source, target)
        assert np.linalg.det(transform.rotation) == pytest.approx(1.0)

    def test_too_few_points(self):
        """Two correspondences do not fix a rotation."""
        with pytest.raises(DegenerateAlignmentError):
            rigid_align(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_collinear(self):
        """Points on a line do not fix a rotation."""
        line = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
        with pytest.raises(DegenerateAlignmentError, match="collinear"):
            rigid_align(line, line)

    def test_identity_apply(self):
        """The identity transform leaves points alone."""
        points = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(RigidTransform.identity().apply(points), points)
