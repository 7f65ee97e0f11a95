"""Tests for energy terms, weight schedules and prior statistics."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from markerfit.core.energy import (
    STAGE_ONE_FINAL,
    StageTwoWeights,
    Term,
    body_pose_prior_cost,
    body_prior_surrogate,
    data_residuals,
    dyn_prior_residuals,
    hand_pose_prior_residuals,
    marker_count_factor,
    observed_indices,
    occlusion_factor,
    shape_prior_residuals,
    smoothness_residuals,
    stage2_weights,
    stage_one_schedule,
    total_energy,
)
from markerfit.core.markers import attach_latent_markers, simulate_markers
from markerfit.core.mocap import MarkerFrame
from markerfit.core.priors import GaussianMixture, PriorStats
from markerfit.utils.exceptions import ConfigError, DimensionError, InvalidModelError, UnknownLabelError

from .helpers import central_difference


def mixture(dim: int = 3) -> GaussianMixture:
    rng = np.random.default_rng(4)
    means = rng.normal(size=(2, dim))
    a = rng.normal(size=(2, dim, dim))
    covs = np.einsum("kij,klj->kil", a, a) + 0.5 * np.eye(dim)
    return GaussianMixture(np.array([0.3, 0.7]), means, covs)


class TestBalancingFactors:
    """Marker-count and occlusion factors."""

    def test_reference_markerset(self):
        """46 markers give b = 1."""
        assert marker_count_factor(46) == 1.0

    def test_smaller_markerset(self):
        """Fewer markers weigh each one more."""
        assert marker_count_factor(37) == pytest.approx(46 / 37)

    def test_no_markers(self):
        """An empty markerset has no factor."""
        with pytest.raises(ValueError):
            marker_count_factor(0)

    def test_occlusion_range(self):
        """q grows linearly from 1 to 3.5."""
        assert occlusion_factor(0, 40) == 1.0
        assert occlusion_factor(40, 40) == pytest.approx(3.5)
        assert occlusion_factor(10, 40) == pytest.approx(1.625)

    def test_occlusion_out_of_range(self):
        """More missing than total markers is rejected."""
        with pytest.raises(ValueError):
            occlusion_factor(41, 40)


class TestTermNames:
    """Parsing term names from configs."""

    def test_parse_normalizes(self):
        """Case and surrounding whitespace are ignored."""
        assert Term.parse("  Velocity_Pose ") is Term.VELOCITY_POSE

    def test_parse_unknown(self):
        """Unknown names list the valid ones."""
        with pytest.raises(ConfigError, match="pose_body"):
            Term.parse("elbow")


class TestStageOneSchedule:
    """Annealed calibration weights."""

    def test_final_stage_matches_calibration_weights(self):
        """The last stage is the calibration weight set with data times b."""
        schedule = stage_one_schedule(b=2.0)
        final = schedule.final
        assert final[Term.DATA] == pytest.approx(1200.0)
        for term in (Term.SHAPE, Term.POSE_BODY, Term.POSE_HAND, Term.INIT, Term.SURFACE):
            assert final[term] == pytest.approx(STAGE_ONE_FINAL[term])

    def test_annealing_direction(self):
        """Data grows and priors shrink by the factor each stage."""
        schedule = stage_one_schedule(b=1.0, s_factor=2.0, stages=4)
        assert schedule.num_stages == 4
        first = schedule.stage_weights[0]
        assert first[Term.DATA] == pytest.approx(600.0 / 8)
        assert first[Term.SHAPE] == pytest.approx(1.25 * 8)
        assert first[Term.INIT] == pytest.approx(37.5 * 8)
        for weights in schedule.stage_weights:
            assert weights[Term.SURFACE] == 1e4

    def test_negative_weight_rejected(self):
        """Weights must be non-negative."""
        with pytest.raises(ConfigError):
            stage_one_schedule(b=1.0, final={Term.DATA: -1.0})

    def test_needs_a_stage(self):
        """Zero stages is a config error."""
        with pytest.raises(ConfigError):
            stage_one_schedule(b=1.0, stages=0)


class TestStageTwoWeights:
    """Per-frame weights."""

    def test_resolve(self):
        """Data scales with b and both pose priors with q."""
        weights = stage2_weights(b=2.0, q=1.5)
        assert weights == {
            Term.DATA: 800.0,
            Term.POSE_BODY: pytest.approx(2.4),
            Term.POSE_HAND: 1.5,
            Term.VELOCITY_POSE: 2.5,
            Term.DYNAMICS: 1.0,
            Term.VELOCITY_DYNAMICS: 6.0,
        }

    def test_hand_profile(self):
        """The hand profile lowers data and raises hand prior weights."""
        hands = StageTwoWeights.profile("hands")
        assert (hands.data, hands.pose_body, hands.pose_hand) == (150.0, 1.5, 1.5)
        assert StageTwoWeights.profile("default") == StageTwoWeights()

    def test_unknown_profile(self):
        """Only two profiles exist."""
        with pytest.raises(ConfigError):
            StageTwoWeights.profile("fingers")

    def test_overrides_ignore_calibration_terms(self):
        """Terms without a per-frame weight are skipped."""
        weights = StageTwoWeights().with_overrides({Term.DATA: 10.0, Term.SHAPE: 99.0})
        assert weights.data == 10.0
        assert weights == StageTwoWeights(data=10.0)

    def test_q_out_of_range(self):
        """q outside [1, 3.5] is rejected."""
        with pytest.raises(ValueError):
            stage2_weights(b=1.0, q=0.5)


class TestResiduals:
    """Individual residual blocks."""

    def test_total_energy(self):
        """Weighted squared norms plus weighted scalar costs."""
        total = total_energy(
            {Term.DATA: [1.0, 2.0], Term.SHAPE: [3.0]},
            {Term.DATA: 2.0, Term.POSE_BODY: 0.5},
            costs={Term.POSE_BODY: 3.0},
        )
        assert total == pytest.approx(2.0 * 5.0 + 0.5 * 3.0)

    def test_smoothness_first_frame(self):
        """No previous frame, no residual."""
        assert smoothness_residuals([1.0, 2.0], None).size == 0

    def test_smoothness_difference(self):
        """Residual is current minus previous."""
        np.testing.assert_allclose(smoothness_residuals([1.0, 2.0], [0.5, 3.0], "dynamics"), [0.5, -1.0])

    def test_smoothness_mismatch(self):
        """Vectors of different length are rejected."""
        with pytest.raises(DimensionError):
            smoothness_residuals([1.0, 2.0], [1.0])

    def test_shape_and_dynamics_priors(self):
        """Coefficients are whitened by their variances."""
        stats = PriorStats(
            shape_cov_diag=[4.0, 1.0],
            body_mean=[0.0],
            body_cov_diag=[1.0],
            dyn_cov_diag=[0.25],
        )
        np.testing.assert_allclose(shape_prior_residuals([2.0, 3.0], stats), [1.0, 3.0])
        np.testing.assert_allclose(dyn_prior_residuals([1.0], stats), [2.0])
        with pytest.raises(DimensionError):
            shape_prior_residuals([1.0], stats)

    def test_gaussian_body_prior(self):
        """Gaussian mode returns Mahalanobis residuals."""
        stats = PriorStats(
            shape_cov_diag=[1.0], body_mean=[1.0, 0.0], body_cov_diag=[4.0, 1.0], dyn_cov_diag=[1.0]
        )
        np.testing.assert_allclose(body_pose_prior_cost([3.0, -1.0], stats), [1.0, -1.0])
        with pytest.raises(ConfigError):
            body_pose_prior_cost([3.0, -1.0], stats, mode="gmm")

    def test_hand_prior_needs_hands(self, toy_model):
        """Models without hand joints have no hand prior."""
        with pytest.raises(ConfigError):
            hand_pose_prior_residuals(np.zeros(6), PriorStats.default(toy_model))

    def test_hand_prior(self, hand_toy):
        """The default hand prior whitens the full hand pose."""
        model, stats = hand_toy
        assert stats.has_hand_prior
        theta = np.arange(3 * model.hand_joints.size, dtype=float)
        np.testing.assert_allclose(hand_pose_prior_residuals(theta, stats), theta)

    def test_data_residuals_vanish_at_truth(self, toy_model, toy_layout, subject_beta):
        """Observing the simulated markers gives zero residual."""
        latent = attach_latent_markers(toy_layout, toy_model, subject_beta)
        rng = np.random.default_rng(3)
        theta = 0.1 * rng.normal(size=toy_model.num_pose_params)
        phi = rng.normal(size=toy_model.num_dyn)
        simulated = simulate_markers(latent, toy_model, subject_beta, theta, phi)
        hidden = latent.labels[0]
        frame = MarkerFrame(
            0,
            {k: v for k, v in simulated.items() if k != hidden},
            missing=frozenset({hidden}),
        )
        residuals = data_residuals(latent, toy_model, subject_beta, theta, phi, frame)
        assert residuals.shape == (3 * (len(latent) - 1),)
        np.testing.assert_allclose(residuals, 0.0, atol=1e-12)

    def test_unknown_frame_label(self, toy_model, toy_layout, subject_beta):
        """Frame labels outside the marker set are reported."""
        latent = attach_latent_markers(toy_layout, toy_model, subject_beta)
        frame = MarkerFrame(0, {"XYZ": np.zeros(3)})
        with pytest.raises(UnknownLabelError) as info:
            observed_indices(latent, frame)
        assert info.value.labels == ["XYZ"]


class TestGaussianMixture:
    """Mixture body prior."""

    def test_single_component_matches_scipy(self):
        """One component reduces to a multivariate normal."""
        cov = np.array([[2.0, 0.3], [0.3, 1.0]])
        gmm = GaussianMixture(np.array([1.0]), np.array([[0.5, -0.5]]), cov[None])
        x = np.array([0.1, 0.7])
        expected = -multivariate_normal(mean=[0.5, -0.5], cov=cov).logpdf(x)
        assert gmm.negative_log_likelihood(x) == pytest.approx(expected)

    def test_responsibilities_sum_to_one(self):
        """Posterior component weights form a distribution."""
        gmm = mixture()
        resp = gmm.responsibilities(np.array([0.2, -0.1, 0.4]))
        assert resp.shape == (2,)
        assert resp.sum() == pytest.approx(1.0)
        assert np.all(resp > 0)

    def test_invalid_weights(self):
        """Weights must sum to one."""
        with pytest.raises(InvalidModelError):
            GaussianMixture(np.array([0.5, 0.6]), np.zeros((2, 2)), np.stack([np.eye(2)] * 2))

    def test_not_positive_definite(self):
        """Singular covariances are rejected."""
        with pytest.raises(InvalidModelError, match="positive definite"):
            GaussianMixture(np.array([1.0]), np.zeros((1, 2)), np.zeros((1, 2, 2)))

    def test_surrogate_jacobian(self):
        """The surrogate Jacobian matches central differences."""
        gmm = mixture()
        stats = PriorStats(
            shape_cov_diag=[1.0], body_mean=np.zeros(3), body_cov_diag=np.ones(3), dyn_cov_diag=[1.0],
            body_mixture=gmm,
        )
        x = np.array([0.3, -0.2, 0.1])
        resp = gmm.responsibilities(x)
        residuals, jacobian = body_prior_surrogate(x, stats, resp)
        assert residuals.shape == (6,)
        numeric = central_difference(lambda y: body_prior_surrogate(y, stats, resp)[0], x)
        np.testing.assert_allclose(jacobian, numeric, atol=1e-7)
        assert body_pose_prior_cost(x, stats) == pytest.approx(gmm.negative_log_likelihood(x))


class TestPriorStats:
    """Validation and truncation of prior statistics."""

    def test_variances_positive(self):
        """Zero variances are rejected."""
        with pytest.raises(InvalidModelError):
            PriorStats(shape_cov_diag=[0.0], body_mean=[0.0], body_cov_diag=[1.0], dyn_cov_diag=[1.0])

    def test_partial_hand_prior(self):
        """Hand statistics come as a complete set."""
        with pytest.raises(InvalidModelError):
            PriorStats(
                shape_cov_diag=[1.0], body_mean=[0.0], body_cov_diag=[1.0], dyn_cov_diag=[1.0],
                hand_cov_diag=[1.0],
            )

    def test_default_matches_model(self, toy_model, toy_stats):
        """Default statistics fit the model they were built for."""
        toy_stats.check_model(toy_model)
        assert toy_stats.body_prior_mode == "gaussian"
        assert not toy_stats.has_hand_prior

    def test_truncated(self, toy_stats):
        """Leading shape and soft-tissue variances are kept."""
        short = toy_stats.truncated(2, 1)
        assert short.shape_cov_diag.size == 2
        assert short.dyn_cov_diag.size == 1
        np.testing.assert_array_equal(short.body_mean, toy_stats.body_mean)
