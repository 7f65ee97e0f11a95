"""Tests for least-squares problem plumbing and motion scripts."""

import numpy as np
import pytest

from markerfit.core.energy import Term
from markerfit.core.problem import (
    ParameterLayout,
    ResidualStack,
    free_pose_indices,
    pose_columns,
    rest_pose_array,
)
from markerfit.core.synthetic import JointWave, MotionScript, TranslationStep
from markerfit.utils.exceptions import InvalidScriptError, SolverError


class TestParameterLayout:
    """ParameterLayout."""

    def test_contiguous_slices(self):
        """Blocks follow one another."""
        layout = ParameterLayout()
        layout.add("beta", 4)
        layout.add("pose", 9)
        assert layout["beta"] == slice(0, 4)
        assert layout["pose"] == slice(4, 13)
        assert layout.size == 13


class TestResidualStack:
    """ResidualStack."""

    def test_weights_scale_by_square_root(self):
        """Residuals and Jacobians are scaled by sqrt(weight); the cost is weight * |r|^2."""
        stack = ResidualStack(2)
        jac = stack.new_block(2)
        jac[:] = np.eye(2)
        stack.add(Term.DATA, 4.0, np.array([1.0, 2.0]), jac)
        residuals, jacobian = stack.assemble()
        np.testing.assert_allclose(residuals, [2.0, 4.0])
        np.testing.assert_allclose(jacobian, 2.0 * np.eye(2))
        assert stack.term_costs[Term.DATA] == pytest.approx(20.0)

    def test_zero_weight_is_dropped(self):
        """A term with zero weight contributes nothing."""
        stack = ResidualStack(3)
        stack.add(Term.SHAPE, 0.0, np.ones(3), stack.new_block(3))
        residuals, jacobian = stack.assemble()
        assert residuals.shape == (0,)
        assert jacobian.shape == (0, 3)
        assert stack.term_costs == {}

    def test_explicit_cost(self):
        """A given cost replaces weight * |r|^2 and accumulates per term."""
        stack = ResidualStack(1)
        stack.add(Term.POSE_BODY, 1.0, np.ones(1), stack.new_block(1), cost=5.0)
        stack.add(Term.POSE_BODY, 1.0, np.ones(1), stack.new_block(1), cost=2.0)
        assert stack.term_costs[Term.POSE_BODY] == pytest.approx(7.0)


class TestPoseIndices:
    """Free pose entries and their parameter columns."""

    def test_body_only(self, toy_model):
        """Translation, root and body joints are free; nothing else."""
        free = free_pose_indices(toy_model, hands=False)
        assert free[:6].tolist() == [0, 1, 2, 3, 4, 5]
        assert free.size == 6 + 3 * toy_model.body_joints.size

    def test_hands_add_entries(self, hand_toy):
        """Freeing the hands adds three entries per hand joint."""
        model = hand_toy[0]
        without = free_pose_indices(model, hands=False)
        with_hands = free_pose_indices(model, hands=True)
        assert with_hands.size == without.size + 3 * model.hand_joints.size
        assert np.all(np.diff(with_hands) > 0)

    def test_columns(self, toy_model):
        """Free entries map to consecutive columns after the block start; fixed ones to -1."""
        free = np.array([0, 2], dtype=np.int64)
        columns = pose_columns(toy_model, free, slice(5, 7))
        assert columns[0] == 5
        assert columns[2] == 6
        assert columns[1] == -1

    def test_rest_pose_uses_hand_mean(self, hand_toy):
        """The rest pose is zero except for the hand mean."""
        model = hand_toy[0]
        mean = np.full(3 * model.hand_joints.size, 0.1)
        pose = rest_pose_array(model, mean)
        hand_index = model.pose_indices(model.hand_joints)
        np.testing.assert_allclose(pose[hand_index], 0.1)
        assert np.count_nonzero(pose) == hand_index.size


class TestMotionScriptValidation:
    """MotionScript.validate()."""

    def test_valid_script(self, toy_model):
        """A wave on an existing joint passes."""
        MotionScript(num_frames=5, waves=(JointWave(joint=1, axis=0, amplitude=0.2),)).validate(toy_model)

    @pytest.mark.parametrize(
        "script, message",
        [
            (MotionScript(num_frames=0), "at least one frame"),
            (MotionScript(num_frames=3, frame_rate=0.0), "frame_rate"),
            (MotionScript(num_frames=3, waves=(JointWave(joint=99, axis=0, amplitude=0.1),)), "wave joint 99"),
            (MotionScript(num_frames=3, waves=(JointWave(joint=1, axis=3, amplitude=0.1),)), "axis"),
            (MotionScript(num_frames=3, steps=(TranslationStep(frame=3, offset=(0.0, 0.0, 0.1)),)), "frame 3"),
            (MotionScript(num_frames=3, dyn_amplitude=float("nan")), "finite"),
        ],
    )
    def test_invalid_scripts(self, toy_model, script, message):
        """Each malformed script raises InvalidScriptError, a SolverError."""
        with pytest.raises(InvalidScriptError, match=message) as info:
            script.validate(toy_model)
        assert isinstance(info.value, SolverError)
