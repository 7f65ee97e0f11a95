"""Axis-angle rotation utilities.

Rotations are parametrized with exponential coordinates (axis-angle
vectors). All functions are vectorized over leading dimensions.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial.transform import Rotation

SMALL_ANGLE = 1e-6


def skew(v: ArrayLike) -> NDArray[np.float64]:
    """Cross-product matrix [v]x such that [v]x @ u == cross(v, u).

    Args:
        v: Array of shape (..., 3)

    Returns:
        Array of shape (..., 3, 3)
    """
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(m: NDArray[np.float64]) -> NDArray[np.float64]:
    """Inverse of skew for skew-symmetric matrices of shape (..., 3, 3)."""
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def rodrigues(axis_angle: ArrayLike) -> NDArray[np.float64]:
    """Rotation matrix from axis-angle vector(s).

    Uses R = I + a [v]x + b [v]x^2 with a = sin(t)/t, b = (1 - cos t)/t^2
    and Taylor expansions of a and b near t = 0.

    Args:
        axis_angle: Array of shape (3,) or (..., 3), radians

    Returns:
        Rotation matrices of shape (..., 3, 3)

    Example:
        >>> rodrigues([0.0, 0.0, 0.0])
        array([[1., 0., 0.],
               [0., 1., 0.],
               [0., 0., 1.]])
    """
    v = np.asarray(axis_angle, dtype=np.float64)
    theta2 = np.sum(v * v, axis=-1)
    theta = np.sqrt(theta2)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    k = skew(v)
    eye = np.broadcast_to(np.eye(3), k.shape)
    return eye + a[..., None, None] * k + b[..., None, None] * (k @ k)


def rodrigues_jacobian(
    axis_angle: ArrayLike,
    rotation: NDArray[np.float64] | None = None,
) -> NDArray[np.float64]:
    """Derivatives of rodrigues() with respect to each axis-angle component.

    Args:
        axis_angle: Array of shape (..., 3)
        rotation: Precomputed rodrigues(axis_angle), optional

    Returns:
        Array of shape (..., 3, 3, 3) where out[..., i, :, :] = dR/dv_i
    """
    v = np.asarray(axis_angle, dtype=np.float64)
    R = rodrigues(v) if rotation is None else rotation
    theta2 = np.sum(v * v, axis=-1)
    eye = np.eye(3)
    basis = skew(eye)  # (3, 3, 3): basis[i] = [e_i]x

    # Closed form: dR/dv_i = (v_i [v]x + [v x (I - R) e_i]x) R / |v|^2
    k = skew(v)
    cols = np.swapaxes(eye - R, -1, -2)  # cols[..., i, :] = (I - R) e_i
    crossed = np.cross(v[..., None, :], cols)
    numer = v[..., :, None, None] * k[..., None, :, :] + skew(crossed)
    safe = np.where(theta2 < SMALL_ANGLE**2, 1.0, theta2)
    exact = (numer @ R[..., None, :, :]) / safe[..., None, None, None]

    # First-order expansion about the identity
    approx = basis + 0.5 * (basis @ k[..., None, :, :] + k[..., None, :, :] @ basis)
    small = np.asarray(theta2 < SMALL_ANGLE**2)[..., None, None, None]
    return np.where(small, approx, exact)


def rotation_log(matrix: ArrayLike) -> NDArray[np.float64]:
    """Axis-angle vector(s) of rotation matrix/matrices."""
    m = np.asarray(matrix, dtype=np.float64)
    flat = m.reshape(-1, 3, 3)
    out = Rotation.from_matrix(flat).as_rotvec()
    return out.reshape(m.shape[:-2] + (3,))
