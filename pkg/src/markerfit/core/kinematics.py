"""Posed positions of surface-anchored points and their analytic Jacobians.

A point is anchored on the model by three vertex indices with barycentric
weights, optionally displaced by an offset expressed in the local frame of
the triangle spanned by those vertices on the shaped rest mesh. Model
vertices are anchors with one-hot weights; latent markers are face anchors
with offsets. Skinning weights are interpolated with the same barycentric
weights so that every anchored point deforms smoothly with the surface.

Pose derivatives use world angular velocities of each joint axis: rotating
joint m moves every point skinned to a descendant of m about the posed
location of m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.exceptions import DimensionError
from .body_model import (
    BodyModel,
    PoseVector,
    as_pose,
    check_coefficients,
    forward_kinematics,
    shaped_rest,
)
from .rotation import rodrigues, rodrigues_jacobian, skew, vee


@dataclass(frozen=True)
class SurfaceAnchors:
    """Points attached to the model surface.

    Attributes:
        vertex_indices: Anchor vertices per point, (P, 3)
        barycentric: Interpolation weights per point, (P, 3)
        offsets: Local-frame offsets (tangent, bitangent, normal), (P, 3), or None
    """
    vertex_indices: NDArray[np.int64]
    barycentric: NDArray[np.float64]
    offsets: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        idx = np.asarray(self.vertex_indices, dtype=np.int64)
        bary = np.asarray(self.barycentric, dtype=np.float64)
        if idx.ndim != 2 or idx.shape[1] != 3 or bary.shape != idx.shape:
            raise DimensionError("anchors", "(P, 3)", (idx.shape, bary.shape))
        object.__setattr__(self, "vertex_indices", idx)
        object.__setattr__(self, "barycentric", bary)
        if self.offsets is not None:
            offsets = np.asarray(self.offsets, dtype=np.float64)
            if offsets.shape != idx.shape:
                raise DimensionError("offsets", idx.shape, offsets.shape)
            object.__setattr__(self, "offsets", offsets)

    @classmethod
    def at_vertices(cls, indices: ArrayLike) -> SurfaceAnchors:
        """Anchors sitting exactly on the given model vertices."""
        idx = np.asarray(indices, dtype=np.int64).ravel()
        bary = np.zeros((idx.size, 3))
        bary[:, 0] = 1.0
        return cls(np.repeat(idx[:, None], 3, axis=1), bary)

    @property
    def count(self) -> int:
        return int(self.vertex_indices.shape[0])


@dataclass(frozen=True)
class PointEvaluation:
    """Positions of anchored points and, optionally, their derivatives.

    d_pose is with respect to the flat pose vector (translation first),
    d_offsets with respect to each point's own local offset.
    rest_positions are the points on the shaped rest mesh (zero pose,
    zero soft tissue) and d_rest_beta their shape derivative.
    """
    positions: NDArray[np.float64]
    rest_positions: NDArray[np.float64]
    frames: NDArray[np.float64] | None = None
    d_pose: NDArray[np.float64] | None = None
    d_beta: NDArray[np.float64] | None = None
    d_phi: NDArray[np.float64] | None = None
    d_offsets: NDArray[np.float64] | None = None
    d_rest_beta: NDArray[np.float64] | None = None


def face_frames(triangles: NDArray[np.float64]) -> NDArray[np.float64]:
    """Orthonormal frames [t1, t2, n] (as columns) of triangles (P, 3, 3).

    t1 follows the first edge, n is the face normal (right-handed winding)
    and t2 = n x t1.
    """
    e1 = triangles[:, 1] - triangles[:, 0]
    e2 = triangles[:, 2] - triangles[:, 0]
    t1 = _normalize(e1)
    n = _normalize(np.cross(e1, e2))
    t2 = np.cross(n, t1)
    return np.stack([t1, t2, n], axis=-1)


def frame_offset_jacobian(
    triangles: NDArray[np.float64],
    offsets: NDArray[np.float64],
) -> NDArray[np.float64]:
    """d(F o)/d(triangle vertices) for fixed local offsets o.

    Returns:
        Array (P, 3, 9); column 3*k + c is vertex k, coordinate c.
    """
    e1 = triangles[:, 1] - triangles[:, 0]
    e2 = triangles[:, 2] - triangles[:, 0]
    c = np.cross(e1, e2)
    t1 = _normalize(e1)
    n = _normalize(c)

    dt1_de1 = _normalize_jacobian(e1)
    dn_dc = _normalize_jacobian(c)
    dn_de1 = dn_dc @ -skew(e2)
    dn_de2 = dn_dc @ skew(e1)
    n_x = skew(n)
    t1_x = skew(t1)
    dt2_de1 = n_x @ dt1_de1 - t1_x @ dn_de1
    dt2_de2 = -t1_x @ dn_de2

    o = offsets[:, :, None, None]
    d_e1 = o[:, 0] * dt1_de1 + o[:, 1] * dt2_de1 + o[:, 2] * dn_de1
    d_e2 = o[:, 1] * dt2_de2 + o[:, 2] * dn_de2
    return np.concatenate([-(d_e1 + d_e2), d_e1, d_e2], axis=2)


def evaluate_points(
    model: BodyModel,
    anchors: SurfaceAnchors,
    beta: ArrayLike,
    theta: PoseVector | ArrayLike,
    phi: ArrayLike,
    jacobian: bool = True,
) -> PointEvaluation:
    """Posed positions of anchored points.

    Args:
        model: Body model
        anchors: Points to evaluate
        beta: Shape coefficients
        theta: Pose vector
        phi: Soft-tissue coefficients
        jacobian: Also compute analytic derivatives

    Returns:
        PointEvaluation
    """
    beta = check_coefficients("beta", beta, model.num_shape)
    phi = check_coefficients("phi", phi, model.num_dyn)
    pose = as_pose(theta)
    if pose.num_joints != model.num_joints:
        raise DimensionError("theta", model.num_pose_params, 3 * pose.num_joints + 3)

    idx = anchors.vertex_indices
    bary = anchors.barycentric
    p = anchors.count
    k = model.num_joints

    v_shaped = shaped_rest(model, beta)
    local = rodrigues(pose.joint_rotations)
    feature = (local[1:] - np.eye(3)).reshape(-1)

    shape_p = np.einsum("pk,pkcs->pcs", bary, model.shape_basis[idx])
    pose_p = np.einsum("pk,pkcs->pcs", bary, model.pose_basis[idx])
    dyn_p = np.einsum("pk,pkcs->pcs", bary, model.dyn_basis[idx])
    rest = np.einsum("pk,pkc->pc", bary, v_shaped[idx])

    frames = None
    if anchors.offsets is not None:
        triangles = v_shaped[idx]
        frames = face_frames(triangles)
        rest = rest + np.einsum("pab,pb->pa", frames, anchors.offsets)
    x = rest + pose_p @ feature + dyn_p @ phi

    rest_joints = np.asarray(model.joint_regressor @ v_shaped)
    transforms = forward_kinematics(model.parents, pose, rest_joints)
    omega = np.einsum("pk,pkj->pj", bary, model.skin_weights[idx])
    blend = np.einsum("pj,jab->pab", omega, transforms.rotations)
    positions = np.einsum("pab,pb->pa", blend, x) + omega @ transforms.translations

    if not jacobian:
        return PointEvaluation(positions=positions, rest_positions=rest, frames=frames)

    d_rest_beta = shape_p.copy()
    if anchors.offsets is not None:
        tri_shape = model.shape_basis[idx].reshape(p, 9, model.num_shape)
        d_frame = frame_offset_jacobian(v_shaped[idx], anchors.offsets)
        d_rest_beta += d_frame @ tri_shape

    rg = transforms.rotations
    posed_joints = transforms.posed_joints

    # Pose: translation, then joint axes
    d_pose = np.zeros((p, 3, model.num_pose_params))
    d_pose[:, :, :3] = np.eye(3)

    y = np.einsum("jab,pb->pja", rg, x) + transforms.translations[None]
    desc = model.descendants.astype(np.float64)
    reach = omega @ desc.T
    lever = np.einsum("pj,mj,pja->pma", omega, desc, y) - reach[:, :, None] * posed_joints[None]

    d_local = rodrigues_jacobian(pose.joint_rotations, local)
    local_w = vee(d_local @ np.swapaxes(local, -1, -2)[:, None])
    parent_rot = np.empty_like(rg)
    parent_rot[0] = np.eye(3)
    parent_rot[1:] = rg[model.parents[1:]]
    world_w = np.einsum("mbc,mac->mab", parent_rot, local_w)
    d_theta = np.cross(world_w[None, :, :, :], lever[:, :, None, :])  # (P, K, axis, 3)
    d_theta = np.transpose(d_theta, (0, 3, 1, 2)).copy()

    if k > 1:
        basis = pose_p.reshape(p, 3, k - 1, 9)
        d_feature = d_local[1:].reshape(k - 1, 3, 9)
        dx_dtheta = np.einsum("pcjn,jan->pcja", basis, d_feature)
        d_theta[:, :, 1:, :] += np.einsum("pab,pbja->paja", blend, dx_dtheta)
    d_pose[:, :, 3:] = d_theta.reshape(p, 3, 3 * k)

    # Shape: through the deformed point and through the joint locations
    joint_shape = model.joint_shape_basis
    d_posed_joints = np.empty_like(joint_shape)
    d_posed_joints[0] = joint_shape[0]
    for j in range(1, k):
        par = model.parents[j]
        d_posed_joints[j] = d_posed_joints[par] + rg[par] @ (joint_shape[j] - joint_shape[par])
    d_beta = (
        np.einsum("pab,pbs->pas", blend, d_rest_beta)
        - np.einsum("pj,jab,jbs->pas", omega, rg, joint_shape)
        + np.einsum("pj,jas->pas", omega, d_posed_joints)
    )

    d_phi = np.einsum("pab,pbd->pad", blend, dyn_p)
    d_offsets = None if frames is None else blend @ frames

    return PointEvaluation(
        positions=positions,
        rest_positions=rest,
        frames=frames,
        d_pose=d_pose,
        d_beta=d_beta,
        d_phi=d_phi,
        d_offsets=d_offsets,
        d_rest_beta=d_rest_beta,
    )


def surface_jacobians(
    model: BodyModel,
    beta: ArrayLike,
    theta: PoseVector | ArrayLike,
    phi: ArrayLike,
) -> PointEvaluation:
    """All posed vertices with derivatives with respect to beta, theta and phi."""
    anchors = SurfaceAnchors.at_vertices(np.arange(model.num_vertices))
    return evaluate_points(model, anchors, beta, theta, phi, jacobian=True)


def _normalize(v: NDArray[np.float64]) -> NDArray[np.float64]:
    length = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(length > 0, length, 1.0)


def _normalize_jacobian(v: NDArray[np.float64]) -> NDArray[np.float64]:
    """d(v / |v|)/dv = (I - u u^T) / |v|."""
    length = np.linalg.norm(v, axis=-1)
    u = _normalize(v)
    proj = np.eye(3) - u[:, :, None] * u[:, None, :]
    return proj / np.where(length > 0, length, 1.0)[:, None, None]
