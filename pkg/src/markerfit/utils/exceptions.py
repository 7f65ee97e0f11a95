"""Custom exceptions for markerfit.

Every error raised on purpose by the package derives from MarkerFitError so
that the CLI can map failures to exit codes in one place.
"""

from __future__ import annotations


class MarkerFitError(Exception):
    """Base exception for all markerfit errors."""

    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class ConfigError(MarkerFitError):
    """Raised when run configuration is invalid or cannot be resolved."""
    pass


class FormatError(MarkerFitError):
    """Base exception for malformed input files."""

    def __init__(self, message: str, path: str | None = None, details: dict | None = None):
        super().__init__(message, details)
        self.path = path

    def __str__(self) -> str:
        if self.path:
            return f"{self.path}: {self.message}"
        return self.message


class C3DError(FormatError):
    """Raised when a C3D file cannot be parsed or written."""
    pass


class MarkerJsonError(FormatError):
    """Raised when a marker JSON document is malformed.

    Attributes:
        field: Offending field name, when known
        line: Line number in the source document, when known
    """

    def __init__(
        self,
        message: str,
        path: str | None = None,
        field: str | None = None,
        line: int | None = None,
    ):
        super().__init__(message, path)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        location = []
        if self.path:
            location.append(self.path)
        if self.line is not None:
            location.append(f"line {self.line}")
        if self.field:
            location.append(f"field '{self.field}'")
        prefix = ", ".join(location)
        return f"{prefix}: {self.message}" if prefix else self.message


class ModelFileError(FormatError):
    """Raised when a body model file is missing, truncated or inconsistent."""
    pass


class ArchiveError(FormatError):
    """Raised when a fit archive cannot be read or written."""
    pass


class MeshFileError(FormatError):
    """Raised when a mesh file (OBJ/PLY) cannot be parsed."""
    pass


class LayoutError(FormatError):
    """Raised when a marker layout file is malformed."""
    pass


class CalibrationFileError(FormatError):
    """Raised when a calibration file is malformed or does not fit the model."""
    pass


class DimensionError(MarkerFitError, ValueError):
    """Raised when an array has the wrong length or shape."""

    def __init__(self, name: str, expected: object, actual: object):
        super().__init__(
            f"{name}: expected shape {expected}, got {actual}",
            {"name": name, "expected": expected, "actual": actual},
        )
        self.name = name
        self.expected = expected
        self.actual = actual


class InvalidModelError(MarkerFitError, ValueError):
    """Raised when body model data violates a structural invariant."""
    pass


class AttachmentError(MarkerFitError):
    """Raised when a layout entry cannot be attached to the mesh."""
    pass


class UnknownLabelError(MarkerFitError):
    """Raised when frames carry labels missing from the marker set."""

    def __init__(self, labels: list[str] | set[str] | frozenset[str]):
        ordered = sorted(labels)
        super().__init__(f"Unknown marker labels: {', '.join(ordered)}", {"labels": ordered})
        self.labels = ordered


class EmptyMeshError(MarkerFitError):
    """Raised when a mesh has no faces or zero area."""
    pass


class SolverError(MarkerFitError):
    """Base exception for optimization failures."""
    pass


class SolverDivergedError(SolverError):
    """Raised when residuals become non-finite."""
    pass


class JacobianShapeError(SolverError):
    """Raised when the Jacobian does not match the residual and parameter sizes."""
    pass


class InsufficientMarkersError(SolverError):
    """Raised when a frame has too few visible markers to fit."""
    pass


class DegenerateAlignmentError(SolverError):
    """Raised when a rigid alignment is underdetermined."""
    pass


class InvalidScriptError(SolverError):
    """Raised when a synthetic motion script is malformed."""
    pass


class TooFewFramesError(SolverError):
    """Raised when a sequence has too few frames to calibrate or fit."""
    pass
