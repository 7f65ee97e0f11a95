"""Tests for rotations, body model evaluation and point Jacobians."""

import numpy as np
import pytest
from scipy import sparse
from scipy.spatial.transform import Rotation

from markerfit.core.body_model import (
    BodyModel,
    JointRole,
    PoseVector,
    forward_kinematics,
    regress_joints,
    sanitize_skin_weights,
    shaped_rest,
    surface,
    truncate_model,
)
from markerfit.core.kinematics import SurfaceAnchors, evaluate_points, face_frames
from markerfit.core.rotation import rodrigues, rodrigues_jacobian, rotation_log, skew, vee
from markerfit.utils.exceptions import DimensionError, InvalidModelError

from .helpers import central_difference, random_instance, random_model


def brute_force_surface(model, beta, theta, phi):
    """Per-vertex skinning with 4x4 joint transforms composed along the chain."""
    pose = PoseVector.from_array(theta)
    k = model.num_joints
    rotations = [Rotation.from_rotvec(r).as_matrix() for r in pose.joint_rotations]
    rest = model.template_vertices + np.einsum("ncs,s->nc", model.shape_basis, beta)
    joints = model.joint_regressor.toarray() @ rest
    feature = np.concatenate([np.zeros(0)] + [(rotations[j] - np.eye(3)).ravel() for j in range(1, k)])
    deformed = (
        rest
        + np.einsum("ncf,f->nc", model.pose_basis, feature)
        + np.einsum("ncd,d->nc", model.dyn_basis, phi)
    )
    world = []
    for j in range(k):
        local = np.eye(4)
        local[:3, :3] = rotations[j]
        if j == 0:
            local[:3, 3] = joints[0] + pose.translation
            world.append(local)
        else:
            p = model.parents[j]
            local[:3, 3] = joints[j] - joints[p]
            world.append(world[p] @ local)
    out = np.zeros_like(deformed)
    for i, vertex in enumerate(deformed):
        for j in range(k):
            w = model.skin_weights[i, j]
            if w == 0:
                continue
            offset = np.append(vertex - joints[j], 1.0)
            out[i] += w * (world[j] @ offset)[:3]
    return out


class TestRotation:
    """Axis-angle helpers."""

    def test_rodrigues_identity(self):
        """Zero rotation is the identity."""
        np.testing.assert_allclose(rodrigues(np.zeros(3)), np.eye(3))

    def test_rodrigues_matches_scipy(self):
        """Random rotation vectors agree with scipy."""
        rng = np.random.default_rng(0)
        v = rng.normal(size=(50, 3))
        np.testing.assert_allclose(rodrigues(v), Rotation.from_rotvec(v).as_matrix(), atol=1e-12)

    def test_rodrigues_small_angle(self):
        """Taylor branch stays accurate below the threshold."""
        v = np.array([1e-8, -2e-8, 3e-8])
        np.testing.assert_allclose(rodrigues(v), Rotation.from_rotvec(v).as_matrix(), atol=1e-15)

    @pytest.mark.parametrize("scale", [1e-9, 1e-3, 1.0, 2.5])
    def test_rodrigues_jacobian_finite_difference(self, scale):
        """dR/dv matches central differences at several angles."""
        rng = np.random.default_rng(1)
        v = scale * rng.normal(size=3)
        numeric = central_difference(rodrigues, v)
        analytic = np.moveaxis(rodrigues_jacobian(v), 0, -1)
        np.testing.assert_allclose(analytic, numeric, atol=1e-7)

    def test_rotation_log_inverts_rodrigues(self):
        """log(exp(v)) == v for angles below pi."""
        rng = np.random.default_rng(2)
        v = rng.normal(size=(20, 3))
        v *= (rng.random((20, 1)) * 3.0) / np.linalg.norm(v, axis=1, keepdims=True)
        np.testing.assert_allclose(rotation_log(rodrigues(v)), v, atol=1e-10)

    def test_skew_vee_roundtrip(self):
        """vee undoes skew and skew implements the cross product."""
        a, b = np.array([1.0, 2.0, 3.0]), np.array([-0.5, 0.2, 4.0])
        np.testing.assert_allclose(vee(skew(a)), a)
        np.testing.assert_allclose(skew(a) @ b, np.cross(a, b))


class TestBodyModelValidation:
    """Structural checks at construction."""

    def _parts(self):
        n, k = 4, 2
        return dict(
            template_vertices=np.eye(4, 3),
            faces=np.array([[0, 1, 2], [0, 2, 3]]),
            parents=np.array([-1, 0]),
            skin_weights=np.tile([0.5, 0.5], (n, 1)),
            joint_regressor=sparse.csr_matrix(np.full((k, n), 0.25)),
            shape_basis=np.zeros((n, 3, 1)),
            pose_basis=np.zeros((n, 3, 9)),
            dyn_basis=np.zeros((n, 3, 0)),
            joint_roles=(JointRole.ROOT, JointRole.BODY),
        )

    def test_valid_model(self):
        """A consistent model builds and reports its dimensions."""
        model = BodyModel(**self._parts())
        assert model.num_vertices == 4
        assert model.num_joints == 2
        assert model.num_pose_params == 9
        assert model.num_dyn == 0

    def test_rows_must_sum_to_one(self):
        """Skinning rows off by more than the tolerance are rejected."""
        parts = self._parts()
        parts["skin_weights"] = np.tile([0.5, 0.4], (4, 1))
        with pytest.raises(InvalidModelError, match="sum to 1"):
            BodyModel(**parts)

    def test_parent_ordering(self):
        """parents[j] must precede j."""
        parts = self._parts()
        parts["parents"] = np.array([-1, 1])
        with pytest.raises(InvalidModelError, match="parents"):
            BodyModel(**parts)

    def test_root_role_only_on_joint_zero(self):
        """A second root is rejected."""
        parts = self._parts()
        parts["joint_roles"] = (JointRole.ROOT, JointRole.ROOT)
        with pytest.raises(InvalidModelError, match="root"):
            BodyModel(**parts)

    def test_pose_basis_extent(self):
        """The pose basis must have 9(K-1) columns."""
        parts = self._parts()
        parts["pose_basis"] = np.zeros((4, 3, 3))
        with pytest.raises(DimensionError):
            BodyModel(**parts)

    def test_too_many_influences(self):
        """More than four nonzero weights per row is rejected."""
        n, k = 3, 5
        with pytest.raises(InvalidModelError, match="nonzeros"):
            BodyModel(
                template_vertices=np.eye(3),
                faces=np.array([[0, 1, 2]]),
                parents=np.array([-1, 0, 1, 2, 3]),
                skin_weights=np.full((n, k), 0.2),
                joint_regressor=sparse.csr_matrix(np.full((k, n), 1 / 3)),
                shape_basis=np.zeros((n, 3, 0)),
                pose_basis=np.zeros((n, 3, 36)),
                dyn_basis=np.zeros((n, 3, 0)),
                joint_roles=(JointRole.ROOT,) + (JointRole.BODY,) * 4,
            )

    def test_sanitize_truncates_to_four(self):
        """Extra influences are dropped, rows renormalized and counted."""
        weights = np.array([[0.3, 0.25, 0.2, 0.15, 0.1], [1.0, 0.0, 0.0, 0.0, 0.0]])
        cleaned, truncated = sanitize_skin_weights(weights)
        assert truncated == 1
        assert np.count_nonzero(cleaned[0]) == 4
        assert cleaned[0, 4] == 0.0
        np.testing.assert_allclose(cleaned.sum(axis=1), 1.0)

    def test_toy_model_roles(self, hand_toy):
        """The hand toy lists body joints and hand joints, left first."""
        model, stats = hand_toy
        assert model.body_joints.tolist() == [1, 2, 3]
        assert model.hand_joints.tolist() == [4, 5]
        assert model.has_hands
        assert stats.has_hand_prior


class TestSurface:
    """S(beta, theta, phi) against a brute-force reference."""

    def test_matches_brute_force(self):
        """100 random toy instances agree to 1e-10."""
        rng = np.random.default_rng(3)
        for _ in range(100):
            n = int(rng.integers(5, 51))
            k = int(rng.integers(1, 5))
            model = random_model(rng, n=n, k=k)
            beta, theta, phi = random_instance(rng, model)
            expected = brute_force_surface(model, beta, theta, phi)
            np.testing.assert_allclose(surface(model, beta, theta, phi), expected, atol=1e-10)

    def test_rest_pose_is_shaped_template(self, toy_model, subject_beta):
        """Zero pose and soft tissue leave the shaped rest mesh in place."""
        theta = np.zeros(toy_model.num_pose_params)
        phi = np.zeros(toy_model.num_dyn)
        np.testing.assert_allclose(
            surface(toy_model, subject_beta, theta, phi), shaped_rest(toy_model, subject_beta), atol=1e-12
        )

    def test_translation_moves_rigidly(self, toy_model):
        """The root translation shifts every vertex."""
        theta = np.zeros(toy_model.num_pose_params)
        theta[:3] = [0.1, -0.2, 0.3]
        beta = np.zeros(toy_model.num_shape)
        phi = np.zeros(toy_model.num_dyn)
        moved = surface(toy_model, beta, theta, phi) - toy_model.template_vertices
        np.testing.assert_allclose(moved, np.tile([0.1, -0.2, 0.3], (toy_model.num_vertices, 1)), atol=1e-12)

    def test_wrong_beta_length(self, toy_model):
        """A shape vector of the wrong length raises DimensionError."""
        with pytest.raises(DimensionError, match="beta"):
            shaped_rest(toy_model, np.zeros(toy_model.num_shape + 1))

    def test_wrong_pose_length(self, toy_model):
        """Pose vectors not of length 3K+3 are rejected."""
        with pytest.raises(DimensionError):
            surface(toy_model, np.zeros(toy_model.num_shape), np.zeros(9), np.zeros(toy_model.num_dyn))

    def test_pose_vector_roundtrip(self):
        """from_array and to_array are inverse."""
        values = np.arange(12.0)
        pose = PoseVector.from_array(values)
        assert pose.num_joints == 3
        np.testing.assert_array_equal(pose.to_array(), values)

    def test_pose_vector_bad_length(self):
        """Lengths that are not 3K+3 raise."""
        with pytest.raises(DimensionError):
            PoseVector.from_array(np.zeros(7))

    def test_forward_kinematics_root_about_rest_joint(self):
        """The root joint stays at its rest location plus translation."""
        joints = np.array([[1.0, 2.0, 3.0], [1.0, 2.0, 4.0]])
        theta = np.array([0.5, 0.0, 0.0, 0.0, 0.0, np.pi / 2, 0.0, 0.0, 0.0])
        transforms = forward_kinematics([-1, 0], theta, joints)
        np.testing.assert_allclose(transforms.posed_joints[0], [1.5, 2.0, 3.0])
        np.testing.assert_allclose(transforms.posed_joints[1], [1.5, 2.0, 4.0], atol=1e-12)
        np.testing.assert_allclose(transforms.apply(0, joints[0]), transforms.posed_joints[0])

    def test_truncate_model_prefix(self, toy_model):
        """Dropping trailing components equals zeroing their coefficients."""
        small = truncate_model(toy_model, 2, 1)
        assert small.num_shape == 2
        assert small.num_dyn == 1
        rng = np.random.default_rng(4)
        beta, theta, phi = random_instance(rng, small)
        full_beta = np.concatenate([beta, np.zeros(toy_model.num_shape - 2)])
        full_phi = np.concatenate([phi, np.zeros(toy_model.num_dyn - 1)])
        np.testing.assert_allclose(
            surface(small, beta, theta, phi), surface(toy_model, full_beta, theta, full_phi), atol=1e-12
        )

    def test_truncate_model_too_many(self, toy_model):
        """Asking for more components than exist raises."""
        with pytest.raises(DimensionError):
            truncate_model(toy_model, toy_model.num_shape + 1, 0)

    def test_regressed_joints_follow_shape(self, toy_model):
        """The first shape component widens the tube without moving ring centers."""
        beta = np.zeros(toy_model.num_shape)
        beta[0] = 2.0
        np.testing.assert_allclose(regress_joints(toy_model, beta), regress_joints(toy_model, 0 * beta), atol=1e-12)


class TestPointJacobians:
    """Analytic derivatives of anchored points against central differences."""

    def _anchors(self, model, rng, count=6):
        faces = model.faces[rng.choice(model.faces.shape[0], size=count, replace=False)]
        bary = rng.random((count, 3)) + 0.1
        bary /= bary.sum(axis=1, keepdims=True)
        offsets = 0.02 * rng.normal(size=(count, 3))
        return SurfaceAnchors(faces, bary, offsets)

    def test_vertex_anchors_equal_surface(self, toy_model):
        """One-hot anchors reproduce the model surface."""
        rng = np.random.default_rng(5)
        beta, theta, phi = random_instance(rng, toy_model)
        anchors = SurfaceAnchors.at_vertices(np.arange(toy_model.num_vertices))
        evaluation = evaluate_points(toy_model, anchors, beta, theta, phi, jacobian=False)
        np.testing.assert_allclose(evaluation.positions, surface(toy_model, beta, theta, phi), atol=1e-12)

    def test_face_frames_orthonormal(self):
        """Frames are rotations with the normal along the winding."""
        triangles = np.array([[[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]])
        frame = face_frames(triangles)[0]
        np.testing.assert_allclose(frame.T @ frame, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(frame[:, 2], [0, 0, 1])

    def test_jacobians_match_finite_differences(self):
        """Pose, shape, soft-tissue and offset derivatives on 20 random instances."""
        rng = np.random.default_rng(6)
        for _ in range(20):
            model = random_model(rng, n=20, k=int(rng.integers(1, 5)))
            anchors = self._anchors(model, rng)
            beta, theta, phi = random_instance(rng, model)
            ev = evaluate_points(model, anchors, beta, theta, phi)

            def at(b=beta, t=theta, f=phi, o=anchors.offsets):
                moved = SurfaceAnchors(anchors.vertex_indices, anchors.barycentric, o)
                return evaluate_points(model, moved, b, t, f, jacobian=False).positions

            checks = [
                (ev.d_pose, central_difference(lambda t: at(t=t), theta)),
                (ev.d_beta, central_difference(lambda b: at(b=b), beta)),
                (ev.d_phi, central_difference(lambda f: at(f=f), phi)),
            ]
            for analytic, numeric in checks:
                scale = max(1.0, np.abs(numeric).max())
                assert np.abs(analytic - numeric).max() / scale < 1e-5

            numeric_offsets = central_difference(lambda o: at(o=o), anchors.offsets)
            for p in range(anchors.count):
                np.testing.assert_allclose(ev.d_offsets[p], numeric_offsets[p, :, p, :], atol=1e-6)

    def test_rest_shape_derivative(self):
        """d_rest_beta differentiates the shaped rest point including the offset frame."""
        rng = np.random.default_rng(7)
        model = random_model(rng, n=20, k=3)
        anchors = self._anchors(model, rng)
        beta, theta, phi = random_instance(rng, model)
        ev = evaluate_points(model, anchors, beta, theta, phi)
        numeric = central_difference(
            lambda b: evaluate_points(model, anchors, b, theta, phi, jacobian=False).rest_positions, beta
        )
        np.testing.assert_allclose(ev.d_rest_beta, numeric, atol=1e-6)
