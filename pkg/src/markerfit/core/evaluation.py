"""Scan-to-model distance.

Points are sampled area-uniformly on the ground-truth scan and each is
matched to its closest point on the fitted surface. Distances are computed
in meters and reported in millimeters.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from trimesh.sample import sample_surface

from ..utils.exceptions import DimensionError
from .archive import FitArchive
from .body_model import BodyModel, surface
from .mesh_query import TriangleMesh, closest_points, closest_points_exhaustive

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_COUNT = 10000


@dataclass(frozen=True, eq=False)
class ScanMesh(TriangleMesh):
    """Ground-truth surface of one frame, meters."""
    time_index: int = 0


@dataclass(frozen=True)
class FrameDistance:
    """Scan-to-model distance of one frame, millimeters."""
    time_index: int
    mean_mm: float
    std_mm: float
    point_count: int


@dataclass
class EvalReport:
    """Distances of one or more frames sampled with one seed."""
    frames: list[FrameDistance] = field(default_factory=list)
    seed: int = 0
    point_count: int = DEFAULT_SAMPLE_COUNT
    source: str = ""

    @property
    def mean_mm(self) -> float:
        """Mean over frames of the per-frame mean distance."""
        if not self.frames:
            return float("nan")
        return float(np.mean([f.mean_mm for f in self.frames]))

    @property
    def std_mm(self) -> float:
        """Spread of the per-frame means."""
        if not self.frames:
            return float("nan")
        return float(np.std([f.mean_mm for f in self.frames]))

    def rows(self) -> list[dict[str, float | int | str]]:
        return [
            {
                "source": self.source,
                "frame": f.time_index,
                "meanMm": f.mean_mm,
                "stdMm": f.std_mm,
                "points": f.point_count,
                "seed": self.seed,
            }
            for f in self.frames
        ]


def sample_surface_points(mesh: TriangleMesh, count: int, seed: int = 0) -> NDArray[np.float64]:
    """Draw points uniformly by area with ``trimesh.sample.sample_surface``.

    Raises:
        EmptyMeshError: If the mesh has no positive area
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    mesh.require_area()
    if count == 0:
        return np.zeros((0, 3))
    points, _ = sample_surface(mesh.as_trimesh, count, seed=seed)
    return np.asarray(points, dtype=np.float64)


def scan_to_model_distance(
    scan: ScanMesh,
    fitted: TriangleMesh,
    count: int = DEFAULT_SAMPLE_COUNT,
    seed: int = 0,
    exhaustive: bool = False,
) -> EvalReport:
    """Mean distance from scan samples to the fitted surface.

    Measured scan to model only; swapping the meshes gives a different number.

    Args:
        scan: Ground-truth mesh
        fitted: Reconstructed mesh
        count: Number of scan samples
        seed: Sampling seed
        exhaustive: Test every triangle instead of the BVH

    Raises:
        EmptyMeshError: Either mesh has no positive area
    """
    fitted.require_area()
    points = sample_surface_points(scan, count, seed)
    query = closest_points_exhaustive if exhaustive else closest_points
    distances = query(fitted, points).distances * 1000.0
    frame = FrameDistance(
        time_index=scan.time_index,
        mean_mm=float(distances.mean()) if count else 0.0,
        std_mm=float(distances.std()) if count else 0.0,
        point_count=count,
    )
    return EvalReport([frame], seed=seed, point_count=count)


def fitted_mesh(model: BodyModel, archive: FitArchive, t: int) -> TriangleMesh:
    """Posed surface of frame t of an archive."""
    vertices = surface(model, archive.beta, archive.poses[t], archive.phis[t])
    return TriangleMesh(vertices, model.faces)


def evaluate_archive(
    archive: FitArchive,
    model: BodyModel,
    scans: Sequence[ScanMesh],
    count: int = DEFAULT_SAMPLE_COUNT,
    seed: int = 0,
    frames: ArrayLike | None = None,
) -> EvalReport:
    """Distances of every scan to the archive frame with the scan's time index.

    Args:
        archive: Fitted sequence
        model: Model the archive was fitted with
        scans: Ground-truth meshes
        count: Samples per scan
        seed: Sampling seed, shared by all frames
        frames: Only grade scans at these time indices

    Raises:
        DimensionError: A scan's time index is outside the archive
    """
    keep = None if frames is None else set(np.asarray(frames, dtype=np.int64).tolist())
    report = EvalReport(seed=seed, point_count=count, source=archive.source)
    for scan in scans:
        if keep is not None and scan.time_index not in keep:
            continue
        if not 0 <= scan.time_index < archive.num_frames:
            raise DimensionError("scan time index", f"[0, {archive.num_frames})", scan.time_index)
        result = scan_to_model_distance(scan, fitted_mesh(model, archive, scan.time_index), count, seed)
        report.frames.extend(result.frames)
    logger.info(f"{archive.source or 'archive'}: {len(report.frames)} frames, mean {report.mean_mm:.3f} mm")
    return report
