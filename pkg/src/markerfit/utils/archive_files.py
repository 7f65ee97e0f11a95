"""Fit archive files: a JSON manifest plus one blob per array.

Flags (converged, skipped) are stored as 32-bit integers. Float arrays are
32-bit by default; pass ``dtype="<f8"`` for bit-exact storage.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from ..core.archive import ARCHIVE_SCHEMA_VERSION, FitArchive
from ..models import ArchiveManifest
from .blob_files import read_blob, write_blob
from .exceptions import ArchiveError
from .yaml_utils import atomic_write_text, dump_model

logger = logging.getLogger(__name__)

ARCHIVE_SUFFIX = ".archive.json"


def archive_path(out_dir: Path, name: str) -> Path:
    return Path(out_dir) / f"{name}{ARCHIVE_SUFFIX}"


def write_archive(path: Path, archive: FitArchive, dtype: str = "<f4") -> None:
    """Write the manifest at ``path`` and its blobs alongside."""
    path = Path(path)
    root = path.parent
    prefix = path.name.removesuffix(".json")
    arrays = {
        "beta": (archive.beta, dtype),
        "poses": (archive.poses, dtype),
        "phis": (archive.phis, dtype),
        "q": (archive.q, dtype),
        "marker_rms": (archive.marker_rms, dtype),
        "converged": (archive.converged, "<i4"),
        "skipped": (archive.skipped, "<i4"),
    }
    blobs = {name: write_blob(root, f"{prefix}.{name}", values, kind) for name, (values, kind) in arrays.items()}
    manifest = ArchiveManifest(
        schema_version=archive.schema_version,
        model_hash=archive.model_hash,
        frame_rate=archive.frame_rate,
        num_frames=archive.num_frames,
        num_pose_params=int(archive.poses.shape[1]),
        num_dyn=int(archive.phis.shape[1]),
        num_shape=int(archive.beta.size),
        source=archive.source,
        seed=archive.seed,
        solver=archive.solver,
        errors=archive.errors,
        blobs=blobs,
    )
    atomic_write_text(path, json.dumps(dump_model(manifest), indent=2) + "\n")
    logger.debug(f"Wrote archive {path} ({archive.num_frames} frames)")


def read_archive(path: Path, expected_hash: str | None = None) -> FitArchive:
    """Read an archive.

    Args:
        path: Manifest file
        expected_hash: Hash of the model about to be used with the archive;
            a mismatch is logged, not raised

    Raises:
        ArchiveError: Unreadable manifest, bad blob or inconsistent shapes
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ArchiveError("archive not found", str(path))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArchiveError(f"unreadable manifest: {e}", str(path))
    try:
        manifest = ArchiveManifest.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "manifest"
        raise ArchiveError(f"{where}: {first['msg']}", str(path))
    if manifest.schema_version > ARCHIVE_SCHEMA_VERSION:
        raise ArchiveError(
            f"schema version {manifest.schema_version} is newer than supported ({ARCHIVE_SCHEMA_VERSION})",
            str(path),
        )

    t, p, d = manifest.num_frames, manifest.num_pose_params, manifest.num_dyn
    root = path.parent

    def blob(name: str, shape: tuple[int, ...]) -> np.ndarray:
        return read_blob(root, name, manifest.blobs[name], ArchiveError, shape)

    try:
        archive = FitArchive(
            beta=blob("beta", (manifest.num_shape,)),
            poses=blob("poses", (t, p)),
            phis=blob("phis", (t, d)),
            q=blob("q", (t,)),
            marker_rms=blob("marker_rms", (t,)),
            frame_rate=manifest.frame_rate,
            model_hash=manifest.model_hash,
            converged=blob("converged", (t,)) != 0,
            skipped=blob("skipped", (t,)) != 0,
            errors=dict(manifest.errors),
            solver=manifest.solver,
            source=manifest.source,
            seed=manifest.seed,
            schema_version=manifest.schema_version,
        )
    except ValueError as e:
        raise ArchiveError(f"inconsistent archive: {e}", str(path))
    if expected_hash is not None:
        check_model_hash(archive, expected_hash, str(path))
    return archive


def check_model_hash(archive: FitArchive, expected: str, where: str = "archive") -> bool:
    """Warn when an archive was fitted with a different model."""
    if archive.model_hash and expected and archive.model_hash != expected:
        logger.warning(f"{where}: fitted with model {archive.model_hash}, now used with {expected}")
        return False
    return True
