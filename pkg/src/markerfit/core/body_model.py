"""Parametric body surface model.

Evaluates S(beta, theta, phi): additive shape, pose and soft-tissue
blendshapes on a template mesh, joint regression from the shaped mesh,
forward kinematics over the joint tree and linear blend skinning.

Pose vectors are laid out as [translation(3), joint_0(3), ..., joint_K-1(3)].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import sparse

from ..utils.exceptions import DimensionError, InvalidModelError
from .rotation import rodrigues

logger = logging.getLogger(__name__)

MAX_INFLUENCES = 4
ROW_SUM_TOLERANCE = 1e-9


class JointRole(str, Enum):
    """Role of a joint in the kinematic tree."""
    ROOT = "root"
    BODY = "body"
    HAND_LEFT = "hand_left"
    HAND_RIGHT = "hand_right"

    @property
    def is_hand(self) -> bool:
        return self in (JointRole.HAND_LEFT, JointRole.HAND_RIGHT)


@dataclass(frozen=True, eq=False)
class BodyModel:
    """Immutable rigged body model.

    Attributes:
        template_vertices: Rest template, (N, 3) meters
        faces: Triangle vertex indices, (F, 3)
        parents: Parent index per joint, root = -1, (K,)
        skin_weights: Linear blend skinning weights, (N, K)
        joint_regressor: Sparse (K, N) map from vertices to joints
        shape_basis: (N, 3, S)
        pose_basis: (N, 3, 9 * (K - 1))
        dyn_basis: (N, 3, D)
        joint_roles: Role per joint
        joint_names: Name per joint
        name: Model identifier
    """
    template_vertices: NDArray[np.float64]
    faces: NDArray[np.int64]
    parents: NDArray[np.int64]
    skin_weights: NDArray[np.float64]
    joint_regressor: sparse.csr_matrix
    shape_basis: NDArray[np.float64]
    pose_basis: NDArray[np.float64]
    dyn_basis: NDArray[np.float64]
    joint_roles: tuple[JointRole, ...]
    joint_names: tuple[str, ...] = field(default=())
    name: str = "model"

    def __post_init__(self) -> None:
        template = _frozen(self.template_vertices, np.float64)
        n = template.shape[0]
        if template.ndim != 2 or template.shape[1] != 3:
            raise DimensionError("template_vertices", "(N, 3)", template.shape)

        faces = _frozen(self.faces, np.int64)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise DimensionError("faces", "(F, 3)", faces.shape)
        if faces.size and (faces.min() < 0 or faces.max() >= n):
            raise InvalidModelError("faces reference vertices outside the template")

        parents = _frozen(self.parents, np.int64)
        k = parents.shape[0]
        if k == 0 or parents[0] != -1:
            raise InvalidModelError("joint 0 must be the single root (parent -1)")
        for j in range(1, k):
            if not 0 <= parents[j] < j:
                raise InvalidModelError(
                    f"parents[{j}] = {parents[j]} breaks the ordering parents[j] < j"
                )

        weights = _frozen(self.skin_weights, np.float64)
        if weights.shape != (n, k):
            raise DimensionError("skin_weights", (n, k), weights.shape)
        if np.any(weights < 0):
            raise InvalidModelError("skin_weights must be non-negative")
        if np.any(np.abs(weights.sum(axis=1) - 1.0) > ROW_SUM_TOLERANCE):
            raise InvalidModelError("skin_weights rows must sum to 1")
        if np.any(np.count_nonzero(weights, axis=1) > MAX_INFLUENCES):
            raise InvalidModelError(f"skin_weights rows must have <= {MAX_INFLUENCES} nonzeros")

        regressor = sparse.csr_matrix(self.joint_regressor, dtype=np.float64)
        if regressor.shape != (k, n):
            raise DimensionError("joint_regressor", (k, n), regressor.shape)
        row_sums = np.asarray(regressor.sum(axis=1)).ravel()
        if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOLERANCE):
            raise InvalidModelError("joint_regressor rows must sum to 1")

        shape_basis = _frozen(self.shape_basis, np.float64)
        pose_basis = _frozen(self.pose_basis, np.float64)
        dyn_basis = _frozen(self.dyn_basis, np.float64)
        for label, basis in (("shape_basis", shape_basis), ("dyn_basis", dyn_basis)):
            if basis.ndim != 3 or basis.shape[:2] != (n, 3):
                raise DimensionError(label, "(N, 3, dim)", basis.shape)
        if pose_basis.shape != (n, 3, 9 * (k - 1)):
            raise DimensionError("pose_basis", (n, 3, 9 * (k - 1)), pose_basis.shape)

        roles = tuple(JointRole(r) for r in self.joint_roles)
        if len(roles) != k:
            raise DimensionError("joint_roles", k, len(roles))
        if roles[0] != JointRole.ROOT or JointRole.ROOT in roles[1:]:
            raise InvalidModelError("exactly joint 0 must carry the root role")
        names = tuple(self.joint_names) or tuple(f"joint_{j}" for j in range(k))
        if len(names) != k:
            raise DimensionError("joint_names", k, len(names))

        object.__setattr__(self, "template_vertices", template)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "skin_weights", weights)
        object.__setattr__(self, "joint_regressor", regressor)
        object.__setattr__(self, "shape_basis", shape_basis)
        object.__setattr__(self, "pose_basis", pose_basis)
        object.__setattr__(self, "dyn_basis", dyn_basis)
        object.__setattr__(self, "joint_roles", roles)
        object.__setattr__(self, "joint_names", names)

    @property
    def num_vertices(self) -> int:
        return int(self.template_vertices.shape[0])

    @property
    def num_joints(self) -> int:
        return int(self.parents.shape[0])

    @property
    def num_shape(self) -> int:
        return int(self.shape_basis.shape[2])

    @property
    def num_pose_features(self) -> int:
        return int(self.pose_basis.shape[2])

    @property
    def num_dyn(self) -> int:
        return int(self.dyn_basis.shape[2])

    @property
    def num_pose_params(self) -> int:
        """Length of the pose vector, 3 * K + 3."""
        return 3 * self.num_joints + 3

    @cached_property
    def body_joints(self) -> NDArray[np.int64]:
        """Non-root joints with the body role."""
        return np.array(
            [j for j, r in enumerate(self.joint_roles) if r == JointRole.BODY], dtype=np.int64
        )

    @cached_property
    def hand_joints(self) -> NDArray[np.int64]:
        """Hand joints, left hand first, each side in index order."""
        left = [j for j, r in enumerate(self.joint_roles) if r == JointRole.HAND_LEFT]
        right = [j for j, r in enumerate(self.joint_roles) if r == JointRole.HAND_RIGHT]
        return np.array(left + right, dtype=np.int64)

    @property
    def has_hands(self) -> bool:
        return self.hand_joints.size > 0

    @cached_property
    def joint_shape_basis(self) -> NDArray[np.float64]:
        """d(joints)/d(beta), shape (K, 3, S)."""
        flat = self.shape_basis.reshape(self.num_vertices, -1)
        return np.asarray(self.joint_regressor @ flat).reshape(self.num_joints, 3, self.num_shape)

    @cached_property
    def descendants(self) -> NDArray[np.bool_]:
        """desc[m, j] is True when joint m is j or one of its ancestors."""
        k = self.num_joints
        desc = np.eye(k, dtype=bool)
        for j in range(1, k):
            desc[:, j] |= desc[:, self.parents[j]]
        return desc

    def pose_indices(self, joints: ArrayLike) -> NDArray[np.int64]:
        """Flat pose-vector indices of the rotation parameters of the given joints."""
        joints = np.asarray(joints, dtype=np.int64)
        return (3 + 3 * joints[:, None] + np.arange(3)[None, :]).ravel()

    def dominant_joints(self) -> NDArray[np.int64]:
        """Joint with the largest skinning weight for every vertex."""
        return np.argmax(self.skin_weights, axis=1)


@dataclass(frozen=True)
class PoseVector:
    """Root translation plus per-joint axis-angle rotations."""
    translation: NDArray[np.float64]
    joint_rotations: NDArray[np.float64]

    def __post_init__(self) -> None:
        translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        rotations = np.asarray(self.joint_rotations, dtype=np.float64)
        if rotations.ndim != 2 or rotations.shape[1] != 3:
            raise DimensionError("joint_rotations", "(K, 3)", rotations.shape)
        if not (np.all(np.isfinite(translation)) and np.all(np.isfinite(rotations))):
            raise ValueError("pose parameters must be finite")
        object.__setattr__(self, "translation", translation)
        object.__setattr__(self, "joint_rotations", rotations)

    @classmethod
    def zeros(cls, num_joints: int) -> PoseVector:
        return cls(np.zeros(3), np.zeros((num_joints, 3)))

    @classmethod
    def from_array(cls, values: ArrayLike) -> PoseVector:
        arr = np.asarray(values, dtype=np.float64).ravel()
        if arr.size < 6 or arr.size % 3:
            raise DimensionError("pose vector", "3 * K + 3", arr.size)
        return cls(arr[:3], arr[3:].reshape(-1, 3))

    def to_array(self) -> NDArray[np.float64]:
        return np.concatenate([self.translation, self.joint_rotations.ravel()])

    @property
    def num_joints(self) -> int:
        return int(self.joint_rotations.shape[0])


@dataclass(frozen=True)
class JointTransforms:
    """World transforms of every joint.

    A rest-pose point x attached to joint j maps to rotations[j] @ x + translations[j].
    """
    rotations: NDArray[np.float64]
    translations: NDArray[np.float64]
    posed_joints: NDArray[np.float64]

    def apply(self, joint: int, points: ArrayLike) -> NDArray[np.float64]:
        pts = np.asarray(points, dtype=np.float64)
        return pts @ self.rotations[joint].T + self.translations[joint]


def as_pose(theta: PoseVector | ArrayLike) -> PoseVector:
    if isinstance(theta, PoseVector):
        return theta
    return PoseVector.from_array(theta)


def check_coefficients(name: str, values: ArrayLike, expected: int) -> NDArray[np.float64]:
    """Validate a coefficient vector and return it as float64."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != expected:
        raise DimensionError(name, (expected,), arr.shape)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def shaped_rest(model: BodyModel, beta: ArrayLike) -> NDArray[np.float64]:
    """Template plus shape blendshapes.

    Raises:
        DimensionError: If beta does not have S entries
    """
    beta = check_coefficients("beta", beta, model.num_shape)
    return model.template_vertices + model.shape_basis @ beta


def pose_feature(theta: PoseVector | ArrayLike) -> NDArray[np.float64]:
    """Concatenated (R_j - I), row-major, over non-root joints."""
    pose = as_pose(theta)
    rotations = rodrigues(pose.joint_rotations[1:])
    return (rotations - np.eye(3)).reshape(-1)


def deformed_template(
    model: BodyModel,
    beta: ArrayLike,
    theta: PoseVector | ArrayLike,
    phi: ArrayLike,
) -> NDArray[np.float64]:
    """Template with shape, pose and soft-tissue blendshapes applied."""
    pose = as_pose(theta)
    if pose.num_joints != model.num_joints:
        raise DimensionError("theta", model.num_pose_params, 3 * pose.num_joints + 3)
    phi = check_coefficients("phi", phi, model.num_dyn)
    return (
        shaped_rest(model, beta)
        + model.pose_basis @ pose_feature(pose)
        + model.dyn_basis @ phi
    )


def regress_joints(model: BodyModel, beta: ArrayLike) -> NDArray[np.float64]:
    """Rest joint locations J(beta), shape (K, 3)."""
    return np.asarray(model.joint_regressor @ shaped_rest(model, beta))


def forward_kinematics(
    parents: ArrayLike,
    theta: PoseVector | ArrayLike,
    rest_joints: ArrayLike,
) -> JointTransforms:
    """World rigid transforms of every joint.

    The root rotates about its rest location and is translated by the pose
    translation; each child composes its local rotation after its parent's.

    Args:
        parents: Parent index per joint (root = -1, parents[j] < j)
        theta: Pose vector
        rest_joints: Rest joint locations, (K, 3)

    Returns:
        JointTransforms mapping rest-pose points to posed positions
    """
    pose = as_pose(theta)
    parents = np.asarray(parents, dtype=np.int64)
    joints = np.asarray(rest_joints, dtype=np.float64)
    k = parents.shape[0]
    if pose.num_joints != k or joints.shape != (k, 3):
        raise DimensionError("forward_kinematics inputs", k, (pose.num_joints, joints.shape))

    local = rodrigues(pose.joint_rotations)
    rotations = np.empty((k, 3, 3))
    posed = np.empty((k, 3))
    rotations[0] = local[0]
    posed[0] = joints[0] + pose.translation
    for j in range(1, k):
        p = parents[j]
        rotations[j] = rotations[p] @ local[j]
        posed[j] = posed[p] + rotations[p] @ (joints[j] - joints[p])
    translations = posed - np.einsum("kab,kb->ka", rotations, joints)
    return JointTransforms(rotations, translations, posed)


def skin(
    deformed: ArrayLike,
    transforms: JointTransforms,
    weights: ArrayLike,
) -> NDArray[np.float64]:
    """Linear blend skinning of rest-pose vertices."""
    verts = np.asarray(deformed, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    blended_rot = np.einsum("nk,kab->nab", w, transforms.rotations)
    blended_t = w @ transforms.translations
    return np.einsum("nab,nb->na", blended_rot, verts) + blended_t


def surface(
    model: BodyModel,
    beta: ArrayLike,
    theta: PoseVector | ArrayLike,
    phi: ArrayLike,
) -> NDArray[np.float64]:
    """Posed model vertices S(beta, theta, phi), shape (N, 3)."""
    pose = as_pose(theta)
    deformed = deformed_template(model, beta, pose, phi)
    transforms = forward_kinematics(model.parents, pose, regress_joints(model, beta))
    return skin(deformed, transforms, model.skin_weights)


def sanitize_skin_weights(weights: ArrayLike) -> tuple[NDArray[np.float64], int]:
    """Keep the four largest influences per vertex and renormalize rows.

    Returns:
        Tuple of (weights, number of rows that were truncated)
    """
    w = np.array(weights, dtype=np.float64)
    w[w < 0] = 0.0
    counts = np.count_nonzero(w, axis=1)
    over = np.flatnonzero(counts > MAX_INFLUENCES)
    for row in over:
        keep = np.argsort(w[row])[::-1][:MAX_INFLUENCES]
        trimmed = np.zeros_like(w[row])
        trimmed[keep] = w[row, keep]
        w[row] = trimmed
    sums = w.sum(axis=1, keepdims=True)
    if np.any(sums <= 0):
        raise InvalidModelError("skin_weights rows must have positive mass")
    w /= sums
    if over.size:
        logger.warning(
            f"Truncated {over.size} skin-weight rows to {MAX_INFLUENCES} influences"
        )
    return w, int(over.size)


def truncate_model(model: BodyModel, shape_dim: int, dyn_dim: int) -> BodyModel:
    """Model keeping only the leading shape and soft-tissue components.

    Raises:
        DimensionError: If a requested count exceeds the model's
    """
    if not 0 <= shape_dim <= model.num_shape:
        raise DimensionError("shape_dim", f"<= {model.num_shape}", shape_dim)
    if not 0 <= dyn_dim <= model.num_dyn:
        raise DimensionError("dyn_dim", f"<= {model.num_dyn}", dyn_dim)
    return BodyModel(
        template_vertices=model.template_vertices,
        faces=model.faces,
        parents=model.parents,
        skin_weights=model.skin_weights,
        joint_regressor=model.joint_regressor,
        shape_basis=model.shape_basis[:, :, :shape_dim],
        pose_basis=model.pose_basis,
        dyn_basis=model.dyn_basis[:, :, :dyn_dim],
        joint_roles=model.joint_roles,
        joint_names=model.joint_names,
        name=f"{model.name}_s{shape_dim}_d{dyn_dim}",
    )


def _frozen(values: ArrayLike, dtype: type) -> NDArray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr
