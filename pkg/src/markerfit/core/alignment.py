"""Least-squares rigid alignment of point correspondences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.exceptions import DegenerateAlignmentError, DimensionError
from .rotation import rotation_log

COLLINEAR_TOLERANCE = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """x -> rotation @ x + translation."""
    rotation: NDArray[np.float64]
    translation: NDArray[np.float64]

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(3), np.zeros(3))

    def apply(self, points: ArrayLike) -> NDArray[np.float64]:
        return np.asarray(points, dtype=np.float64) @ self.rotation.T + self.translation

    @property
    def rotvec(self) -> NDArray[np.float64]:
        return rotation_log(self.rotation)


def rigid_align(source: ArrayLike, target: ArrayLike) -> RigidTransform:
    """Rotation (det +1) and translation minimizing sum |R s + t - d|^2.

    Raises:
        DegenerateAlignmentError: Fewer than 3 points or collinear source points
    """
    src = np.asarray(source, dtype=np.float64)
    dst = np.asarray(target, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 3:
        raise DimensionError("correspondences", "(P, 3) twice", (src.shape, dst.shape))
    if src.shape[0] < 3:
        raise DegenerateAlignmentError(f"need >= 3 correspondences, got {src.shape[0]}")

    src_mean = src.mean(axis=0)
    dst_mean = dst.mean(axis=0)
    src_c = src - src_mean
    dst_c = dst - dst_mean
    spread = np.linalg.svd(src_c, compute_uv=False)
    if spread[0] == 0.0 or spread[1] <= COLLINEAR_TOLERANCE * max(spread[0], 1.0):
        raise DegenerateAlignmentError("correspondences are collinear")

    u, _, vt = np.linalg.svd(dst_c.T @ src_c)
    d = np.sign(np.linalg.det(u @ vt))
    correction = np.diag([1.0, 1.0, d if d != 0 else 1.0])
    rotation = u @ correction @ vt
    return RigidTransform(rotation, dst_mean - rotation @ src_mean)
