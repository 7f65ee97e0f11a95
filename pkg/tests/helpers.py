"""Test helpers: random models and finite differences."""

from __future__ import annotations

import numpy as np
from scipy import sparse

from markerfit.core.body_model import BodyModel, JointRole


def random_model(rng: np.random.Generator, n: int = 30, k: int = 4, s: int = 3, d: int = 2) -> BodyModel:
    """Small random chain model with valid weights and regressor."""
    template = rng.normal(size=(n, 3))
    faces = np.array([[i, (i + 1) % n, (i + 2) % n] for i in range(n)])
    parents = np.array([-1] + [int(rng.integers(0, j)) for j in range(1, k)])
    weights = np.zeros((n, k))
    for row in weights:
        picked = rng.choice(k, size=min(k, 3), replace=False)
        row[picked] = rng.random(picked.size) + 0.1
    weights /= weights.sum(axis=1, keepdims=True)
    regressor = rng.random((k, n))
    regressor /= regressor.sum(axis=1, keepdims=True)
    return BodyModel(
        template_vertices=template,
        faces=faces,
        parents=parents,
        skin_weights=weights,
        joint_regressor=sparse.csr_matrix(regressor),
        shape_basis=0.1 * rng.normal(size=(n, 3, s)),
        pose_basis=0.05 * rng.normal(size=(n, 3, 9 * (k - 1))),
        dyn_basis=0.05 * rng.normal(size=(n, 3, d)),
        joint_roles=(JointRole.ROOT,) + (JointRole.BODY,) * (k - 1),
        name="random",
    )


def random_instance(rng: np.random.Generator, model: BodyModel):
    """Random (beta, theta, phi) for a model."""
    beta = rng.normal(size=model.num_shape)
    theta = np.concatenate([rng.normal(size=3), 0.5 * rng.normal(size=3 * model.num_joints)])
    phi = rng.normal(size=model.num_dyn)
    return beta, theta, phi


def central_difference(fun, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Jacobian of fun at x by central differences, shape fun(x).shape + x.shape."""
    x = np.asarray(x, dtype=np.float64)
    base = np.asarray(fun(x))
    out = np.zeros(base.shape + x.shape)
    for i in np.ndindex(x.shape):
        step = np.zeros_like(x)
        step[i] = h
        out[(...,) + i] = (np.asarray(fun(x + step)) - np.asarray(fun(x - step))) / (2 * h)
    return out
