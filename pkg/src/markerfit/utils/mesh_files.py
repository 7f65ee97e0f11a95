"""Scan and fitted-mesh files (OBJ and PLY), read and written through trimesh.

Scans of a sequence live in one directory, one file per graded frame, with
the frame index as the trailing number of the file name (``scan_00012.obj``).
"""

from __future__ import annotations

import logging
import re
from pathlib import Path

import numpy as np
import trimesh

from ..core.evaluation import ScanMesh
from ..core.mesh_query import TriangleMesh
from .exceptions import MeshFileError
from .yaml_utils import atomic_write_bytes

logger = logging.getLogger(__name__)

MESH_SUFFIXES = (".obj", ".ply")

_FRAME_NUMBER = re.compile(r"(\d+)$")


def read_mesh(path: Path, time_index: int | None = None) -> ScanMesh:
    """Read a triangle mesh in meters.

    Args:
        path: OBJ or PLY file
        time_index: Frame the mesh belongs to; parsed from the file name when None

    Raises:
        MeshFileError: Unsupported extension, unreadable file or no faces
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in MESH_SUFFIXES:
        raise MeshFileError(f"unsupported mesh type '{suffix}' (use .obj or .ply)", str(path))
    if not path.is_file():
        raise MeshFileError("mesh file not found", str(path))
    try:
        loaded = trimesh.load_mesh(str(path), file_type=suffix[1:], process=False, maintain_order=True)
    except (ValueError, IndexError, KeyError, TypeError, UnicodeDecodeError, OSError) as e:
        raise MeshFileError(f"cannot parse mesh: {e}", str(path))
    faces = np.asarray(getattr(loaded, "faces", np.zeros((0, 3))), dtype=np.int64).reshape(-1, 3)
    if faces.shape[0] == 0:
        raise MeshFileError("mesh has no faces", str(path))
    if time_index is None:
        time_index = frame_number(path)
    try:
        return ScanMesh(np.asarray(loaded.vertices, dtype=np.float64), faces, time_index=time_index)
    except ValueError as e:
        raise MeshFileError(str(e), str(path))


def write_mesh(path: Path, mesh: TriangleMesh) -> None:
    """Write a mesh; the extension picks OBJ or PLY (ASCII)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in MESH_SUFFIXES:
        raise MeshFileError(f"unsupported mesh type '{suffix}' (use .obj or .ply)", str(path))
    solid = trimesh.Trimesh(vertices=mesh.vertices, faces=mesh.faces, process=False)
    if suffix == ".obj":
        data = solid.export(file_type="obj", include_normals=False, include_texture=False, digits=10)
    else:
        data = solid.export(file_type="ply", encoding="ascii")
    atomic_write_bytes(path, data.encode("utf-8") if isinstance(data, str) else data)


def frame_number(path: Path) -> int:
    """Trailing integer of a file stem (``scan_00012.obj`` is frame 12)."""
    match = _FRAME_NUMBER.search(Path(path).stem)
    if match is None:
        raise MeshFileError("file name carries no frame number", str(path))
    return int(match.group(1))


def scan_path(directory: Path, time_index: int, suffix: str = ".obj", prefix: str = "scan") -> Path:
    return Path(directory) / f"{prefix}_{time_index:05d}{suffix}"


def load_scans(directory: Path) -> list[ScanMesh]:
    """Read every OBJ/PLY scan of a directory, ordered by frame.

    Raises:
        MeshFileError: Missing directory, no scans, or two scans of one frame
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise MeshFileError("scan directory not found", str(directory))
    paths = [p for p in directory.iterdir() if p.suffix.lower() in MESH_SUFFIXES]
    if not paths:
        raise MeshFileError("no .obj or .ply scans", str(directory))
    scans = sorted((read_mesh(p) for p in paths), key=lambda s: s.time_index)
    times = [s.time_index for s in scans]
    if len(set(times)) != len(times):
        raise MeshFileError("more than one scan per frame", str(directory))
    logger.debug(f"Loaded {len(scans)} scans from {directory}")
    return scans


def save_scans(directory: Path, scans: list[ScanMesh], suffix: str = ".obj") -> list[Path]:
    paths = []
    for scan in scans:
        path = scan_path(directory, scan.time_index, suffix)
        write_mesh(path, scan)
        paths.append(path)
    return paths
