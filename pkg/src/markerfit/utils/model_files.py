"""Body model files: a JSON manifest plus one little-endian blob per array.

Arrays are stored as 32-bit floats by default. Skinning weights, regressor
rows and mixture weights are renormalized in double precision on load.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from pydantic import ValidationError
from scipy import sparse

from ..core.body_model import BodyModel, JointRole, sanitize_skin_weights
from ..core.priors import GaussianMixture, PriorStats
from ..models import JointSpec, ModelDimensions, ModelManifest
from .blob_files import read_blob, write_blob
from .exceptions import InvalidModelError, ModelFileError
from .yaml_utils import atomic_write_text, dump_model

logger = logging.getLogger(__name__)

RENORMALIZE_TOLERANCE = 1e-5


def load_model(path: Path) -> tuple[BodyModel, PriorStats]:
    """Load a body model and its prior statistics.

    Args:
        path: Manifest file

    Returns:
        Tuple of (model, prior statistics)

    Raises:
        ModelFileError: Unreadable manifest, bad blob, or inconsistent dimensions
    """
    path = Path(path)
    manifest = _read_manifest(path)
    root = path.parent
    dims = manifest.dimensions
    n, k, s, d = dims.num_vertices, dims.num_joints, dims.num_shape, dims.num_dyn
    if dims.num_pose_features != 9 * (k - 1):
        raise ModelFileError(
            f"numPoseFeatures is {dims.num_pose_features}, expected 9 * (numJoints - 1) = {9 * (k - 1)}",
            str(path),
        )

    def blob(name: str, shape: tuple[int, ...]) -> NDArray:
        return read_blob(root, name, manifest.blobs[name], ModelFileError, shape)

    weights = _renormalized_rows(blob("skin_weights", (n, k)).astype(np.float64), "skin_weights", path)
    weights, _ = sanitize_skin_weights(weights)
    regressor = _renormalized_rows(
        blob("joint_regressor", (k, n)).astype(np.float64), "joint_regressor", path
    )
    body_dim = 3 * sum(1 for j in manifest.joints if j.role == "body")

    try:
        model = BodyModel(
            template_vertices=blob("template", (n, 3)),
            faces=blob("faces", (dims.num_faces, 3)),
            parents=np.array([j.parent for j in manifest.joints]),
            skin_weights=weights,
            joint_regressor=sparse.csr_matrix(regressor),
            shape_basis=blob("shape_basis", (n, 3, s)),
            pose_basis=blob("pose_basis", (n, 3, dims.num_pose_features)),
            dyn_basis=blob("dyn_basis", (n, 3, d)),
            joint_roles=tuple(JointRole(j.role) for j in manifest.joints),
            joint_names=tuple(j.name for j in manifest.joints),
            name=manifest.name,
        )
        mixture = None
        if dims.num_mixture:
            c = dims.num_mixture
            mix_weights = blob("mixture_weights", (c,)).astype(np.float64)
            mixture = GaussianMixture(
                weights=mix_weights / mix_weights.sum(),
                means=blob("mixture_means", (c, body_dim)),
                covariances=blob("mixture_covariances", (c, body_dim, body_dim)),
            )
        hand = {}
        if dims.hand_pca_dim:
            hand_dim = 3 * sum(1 for j in manifest.joints if j.role.startswith("hand"))
            hand = {
                "hand_projection": blob("hand_projection", (dims.hand_pca_dim, hand_dim)),
                "hand_cov_diag": blob("hand_cov_diag", (dims.hand_pca_dim,)),
                "hand_mean_pose": blob("hand_mean_pose", (hand_dim,)),
            }
        stats = PriorStats(
            shape_cov_diag=blob("shape_cov_diag", (s,)),
            body_mean=blob("body_mean", (body_dim,)),
            body_cov_diag=blob("body_cov_diag", (body_dim,)),
            dyn_cov_diag=blob("dyn_cov_diag", (d,)),
            body_mixture=mixture,
            **hand,
        )
        stats.check_model(model)
    except (InvalidModelError, ValueError) as e:
        raise ModelFileError(f"inconsistent model data: {e}", str(path))
    logger.debug(f"Loaded model '{model.name}': {n} vertices, {k} joints, {s} shape, {d} dynamics")
    return model, stats


def save_model(path: Path, model: BodyModel, stats: PriorStats, dtype: str = "<f4") -> None:
    """Write a manifest and its blobs into the manifest's directory."""
    path = Path(path)
    root = path.parent
    stats.check_model(model)
    arrays: dict[str, tuple[NDArray, str]] = {
        "template": (model.template_vertices, dtype),
        "faces": (model.faces, "<i4"),
        "skin_weights": (model.skin_weights, dtype),
        "joint_regressor": (model.joint_regressor.toarray(), dtype),
        "shape_basis": (model.shape_basis, dtype),
        "pose_basis": (model.pose_basis, dtype),
        "dyn_basis": (model.dyn_basis, dtype),
        "shape_cov_diag": (stats.shape_cov_diag, dtype),
        "body_mean": (stats.body_mean, dtype),
        "body_cov_diag": (stats.body_cov_diag, dtype),
        "dyn_cov_diag": (stats.dyn_cov_diag, dtype),
    }
    num_mixture = 0
    if stats.body_mixture is not None:
        mixture = stats.body_mixture
        num_mixture = mixture.num_components
        arrays.update(
            {
                "mixture_weights": (mixture.weights, dtype),
                "mixture_means": (mixture.means, dtype),
                "mixture_covariances": (mixture.covariances, dtype),
            }
        )
    hand_pca_dim = 0
    if stats.has_hand_prior:
        hand_pca_dim = int(stats.hand_cov_diag.size)  # type: ignore[union-attr]
        arrays.update(
            {
                "hand_projection": (stats.hand_projection, dtype),
                "hand_cov_diag": (stats.hand_cov_diag, dtype),
                "hand_mean_pose": (stats.hand_mean_pose, dtype),
            }
        )

    prefix = path.stem
    blobs = {name: write_blob(root, f"{prefix}.{name}", values, kind) for name, (values, kind) in arrays.items()}
    manifest = ModelManifest(
        name=model.name,
        dimensions=ModelDimensions(
            num_vertices=model.num_vertices,
            num_faces=int(model.faces.shape[0]),
            num_joints=model.num_joints,
            num_shape=model.num_shape,
            num_dyn=model.num_dyn,
            num_pose_features=model.num_pose_features,
            num_mixture=num_mixture,
            hand_pca_dim=hand_pca_dim,
        ),
        joints=[
            JointSpec(name=name, parent=int(parent), role=role.value)
            for name, parent, role in zip(model.joint_names, model.parents, model.joint_roles)
        ],
        blobs=blobs,
    )
    atomic_write_text(path, json.dumps(dump_model(manifest), indent=2) + "\n")


def model_hash(model: BodyModel, stats: PriorStats | None = None) -> str:
    """Content digest of a model (and its priors), independent of file layout."""
    digest = hashlib.sha256()
    parts: list[NDArray] = [
        model.template_vertices,
        model.faces,
        model.parents,
        model.skin_weights,
        model.joint_regressor.toarray(),
        model.shape_basis,
        model.pose_basis,
        model.dyn_basis,
    ]
    if stats is not None:
        parts += [stats.shape_cov_diag, stats.body_mean, stats.body_cov_diag, stats.dyn_cov_diag]
    for part in parts:
        array = np.ascontiguousarray(part)
        digest.update(str(array.shape).encode())
        digest.update(array.tobytes())
    digest.update(",".join(role.value for role in model.joint_roles).encode())
    return digest.hexdigest()[:16]


def _read_manifest(path: Path) -> ModelManifest:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ModelFileError("model file not found", str(path))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFileError(f"unreadable manifest: {e}", str(path))
    try:
        return ModelManifest.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "manifest"
        raise ModelFileError(f"{where}: {first['msg']}", str(path))


def _renormalized_rows(values: NDArray[np.float64], name: str, path: Path) -> NDArray[np.float64]:
    sums = values.sum(axis=1, keepdims=True)
    if np.any(np.abs(sums - 1.0) > RENORMALIZE_TOLERANCE):
        raise ModelFileError(f"{name} rows must sum to 1", str(path))
    return values / sums

