"""Shared plumbing for assembling least-squares problems.

A problem is a list of weighted residual blocks, each with a dense
Jacobian over the full parameter vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .body_model import BodyModel
from .energy import (
    Term,
    body_pose_prior_cost,
    body_prior_surrogate,
    hand_pose_prior_residuals,
)
from .kinematics import PointEvaluation
from .priors import PriorStats


@dataclass
class ParameterLayout:
    """Named contiguous slices of a flat parameter vector."""
    slices: dict[str, slice] = field(default_factory=dict)
    size: int = 0

    def add(self, name: str, length: int) -> slice:
        block = slice(self.size, self.size + length)
        self.slices[name] = block
        self.size += length
        return block

    def __getitem__(self, name: str) -> slice:
        return self.slices[name]


class ResidualStack:
    """Accumulates sqrt(weight)-scaled residual blocks and their Jacobians."""

    def __init__(self, num_params: int):
        self.num_params = num_params
        self._residuals: list[NDArray[np.float64]] = []
        self._jacobians: list[NDArray[np.float64]] = []
        self.term_costs: dict[Term, float] = {}

    def new_block(self, rows: int) -> NDArray[np.float64]:
        """Zero Jacobian block to be filled by the caller."""
        return np.zeros((rows, self.num_params))

    def add(
        self,
        term: Term,
        weight: float,
        residuals: NDArray[np.float64],
        jacobian: NDArray[np.float64],
        cost: float | None = None,
    ) -> None:
        """Append a block; cost overrides the recorded weight * |r|^2."""
        if residuals.size == 0 or weight == 0.0:
            return
        scale = np.sqrt(weight)
        self._residuals.append(scale * residuals)
        self._jacobians.append(scale * jacobian)
        if cost is None:
            cost = weight * float(residuals @ residuals)
        self.term_costs[term] = self.term_costs.get(term, 0.0) + cost

    def assemble(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        if not self._residuals:
            return np.zeros(0), np.zeros((0, self.num_params))
        return np.concatenate(self._residuals), np.vstack(self._jacobians)


def free_pose_indices(model: BodyModel, hands: bool) -> NDArray[np.int64]:
    """Pose-vector indices optimized: translation, root, body joints and optionally hands."""
    joints = [0, *model.body_joints.tolist()]
    if hands:
        joints += model.hand_joints.tolist()
    joints = sorted(joints)
    return np.concatenate([np.arange(3), model.pose_indices(np.array(joints, dtype=np.int64))])


def rest_pose_array(model: BodyModel, hand_mean: NDArray[np.float64] | None) -> NDArray[np.float64]:
    """Zero pose with the hand joints at the hand mean pose."""
    pose = np.zeros(model.num_pose_params)
    if model.has_hands and hand_mean is not None:
        pose[model.pose_indices(model.hand_joints)] = hand_mean
    return pose


def pose_columns(model: BodyModel, free: NDArray[np.int64], block: slice) -> NDArray[np.int64]:
    """Column of every pose-vector entry in the parameter vector, -1 when fixed."""
    columns = np.full(model.num_pose_params, -1, dtype=np.int64)
    columns[free] = np.arange(block.start, block.start + free.size)
    return columns


def scatter_columns(
    jacobian: NDArray[np.float64],
    local: NDArray[np.float64],
    pose_index: NDArray[np.int64],
    columns: NDArray[np.int64],
) -> None:
    """Add derivatives with respect to pose entries into their parameter columns."""
    cols = columns[pose_index]
    mask = cols >= 0
    jacobian[:, cols[mask]] += local[:, mask]


def add_marker_data(
    stack: ResidualStack,
    weight: float,
    evaluation: PointEvaluation,
    index: NDArray[np.int64],
    observed: NDArray[np.float64],
    columns: NDArray[np.int64],
    beta_block: slice | None = None,
    offset_block: slice | None = None,
    phi_block: slice | None = None,
) -> None:
    """Data term: simulated minus observed positions of the visible markers."""
    n = index.size
    if n == 0:
        return
    residuals = (evaluation.positions[index] - observed).ravel()
    jac = stack.new_block(3 * n)
    if beta_block is not None and evaluation.d_beta is not None:
        jac[:, beta_block] = evaluation.d_beta[index].reshape(3 * n, -1)
    if offset_block is not None and evaluation.d_offsets is not None:
        num_markers = evaluation.positions.shape[0]
        offsets = np.zeros((n, 3, num_markers, 3))
        offsets[np.arange(n), :, index, :] = evaluation.d_offsets[index]
        jac[:, offset_block] = offsets.reshape(3 * n, 3 * num_markers)
    if phi_block is not None and evaluation.d_phi is not None:
        jac[:, phi_block] = evaluation.d_phi[index].reshape(3 * n, -1)
    if evaluation.d_pose is not None:
        d_pose = evaluation.d_pose[index].reshape(3 * n, -1)
        scatter_columns(jac, d_pose, np.arange(d_pose.shape[1]), columns)
    stack.add(Term.DATA, weight, residuals, jac)


def add_pose_priors(
    stack: ResidualStack,
    model: BodyModel,
    stats: PriorStats,
    pose: NDArray[np.float64],
    columns: NDArray[np.int64],
    body_weight: float,
    hand_weight: float,
    responsibilities: NDArray[np.float64] | None = None,
    hands: bool = False,
) -> None:
    """Body pose prior and, when hands are free, the hand pose prior.

    With responsibilities the body prior enters as the mixture surrogate;
    the recorded term cost is then the weighted negative log-likelihood.
    """
    body_index = model.pose_indices(model.body_joints)
    if body_index.size and body_weight > 0:
        theta_body = pose[body_index]
        if responsibilities is not None:
            residuals, local = body_prior_surrogate(theta_body, stats, responsibilities)
        else:
            residuals = np.asarray(body_pose_prior_cost(theta_body, stats, "gaussian"))
            local = np.diag(1.0 / np.sqrt(stats.body_cov_diag))
        cost = None
        if responsibilities is not None:
            cost = body_weight * float(body_pose_prior_cost(theta_body, stats, "gmm"))
        jac = stack.new_block(residuals.size)
        scatter_columns(jac, local, body_index, columns)
        stack.add(Term.POSE_BODY, body_weight, residuals, jac, cost)

    if hands and model.has_hands and stats.has_hand_prior and hand_weight > 0:
        hand_index = model.pose_indices(model.hand_joints)
        residuals = hand_pose_prior_residuals(pose[hand_index], stats)
        local = stats.hand_projection / np.sqrt(stats.hand_cov_diag)[:, None]
        jac = stack.new_block(residuals.size)
        scatter_columns(jac, local, hand_index, columns)
        stack.add(Term.POSE_HAND, hand_weight, residuals, jac)
