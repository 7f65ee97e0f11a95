"""File formats and helpers.

File readers and writers live in their own modules (``c3d``, ``marker_json``,
``model_files`` ...); import them directly. Only the exception hierarchy is
re-exported here.
"""

from .exceptions import (
    ArchiveError,
    C3DError,
    CalibrationFileError,
    ConfigError,
    FormatError,
    LayoutError,
    MarkerFitError,
    MarkerJsonError,
    MeshFileError,
    ModelFileError,
    SolverError,
)

__all__ = [
    "ArchiveError",
    "C3DError",
    "CalibrationFileError",
    "ConfigError",
    "FormatError",
    "LayoutError",
    "MarkerFitError",
    "MarkerJsonError",
    "MeshFileError",
    "ModelFileError",
    "SolverError",
]
