"""Pydantic schemas of every document markerfit reads or writes."""

from .archive import ArchiveManifest
from .blobs import BlobRef
from .body_model import JointSpec, ModelDimensions, ModelManifest
from .calibration import CalibratedMarker, CalibrationDocument, CalibrationFrame
from .config import (
    TERM_NAMES,
    LogGrid,
    MotionDocument,
    RunConfig,
    SearchDocument,
    SolverSettings,
    SplitSettings,
)
from .layout import LayoutDocument, LayoutMarker
from .mocap import MarkerJsonDocument

__all__ = [
    # Files
    "ArchiveManifest",
    "BlobRef",
    "CalibratedMarker",
    "CalibrationDocument",
    "CalibrationFrame",
    "JointSpec",
    "LayoutDocument",
    "LayoutMarker",
    "MarkerJsonDocument",
    "ModelDimensions",
    "ModelManifest",
    # Configuration
    "TERM_NAMES",
    "LogGrid",
    "MotionDocument",
    "RunConfig",
    "SearchDocument",
    "SolverSettings",
    "SplitSettings",
]
