"""C3D marker files, read and written with the ``c3d`` package.

Only 3D points are kept; analog channels are skipped. Files are written
as floating-point point data in millimeters with no analog channels.
"""

from __future__ import annotations

import io
import logging
import math
import struct
from pathlib import Path

import c3d
import numpy as np

from ..core.mocap import MocapSequence, unit_scale
from .exceptions import C3DError
from .yaml_utils import atomic_write_bytes

logger = logging.getLogger(__name__)

MAX_LABEL_LENGTH = 32
MAX_POINTS = 255
MAX_FRAMES = 65535
DEFAULT_UNITS = "mm"
WRITE_UNITS = "mm"

# errors the c3d package raises on malformed input
_DECODE_ERRORS = (AssertionError, ValueError, TypeError, KeyError, IndexError, EOFError, OSError, struct.error)


def parse_c3d(data: bytes, path: str | None = None) -> MocapSequence:
    """Decode a C3D file into a sequence in meters.

    Markers with a negative residual, or with non-finite coordinates, are
    missing.

    Args:
        data: File contents
        path: Source path, used in error messages and provenance

    Raises:
        C3DError: Undecodable file, truncated frames, no frames, a bad
            frame rate, or labels that do not match the point count
    """
    try:
        reader = c3d.Reader(io.BytesIO(data))
        declared = reader.header.last_frame - reader.header.first_frame + 1
        labels = [label.strip() for label in reader.point_labels]
        num_points = int(reader.point_used)
        rate = float(reader.point_rate)
        units_param = reader.get("POINT:UNITS")
        units = units_param.string_value.strip().lower() if units_param is not None else ""
        frames = [points[:, :4].copy() for _, points, _ in reader.read_frames()]
    except _DECODE_ERRORS as e:
        raise C3DError(f"not a readable C3D file: {e}", path)

    if len(labels) < num_points:
        raise C3DError(f"{num_points} points but only {len(labels)} labels", path)
    labels = labels[:num_points]
    if any(not label for label in labels):
        raise C3DError("blank point label", path)
    duplicates = sorted({label for label in labels if labels.count(label) > 1})
    if duplicates:
        raise C3DError(f"duplicate point labels: {', '.join(duplicates)}", path)
    if not (math.isfinite(rate) and rate > 0):
        raise C3DError(f"frame rate must be positive and finite, got {rate}", path)
    units = units or DEFAULT_UNITS
    try:
        to_meters = unit_scale(units)
    except ValueError as e:
        raise C3DError(str(e), path)
    if not frames:
        raise C3DError("file holds no frames", path)
    if len(frames) != declared:
        raise C3DError(f"truncated data section: header declares {declared} frames, {len(frames)} decoded", path)

    values = np.stack(frames).astype(np.float64)
    xyz = values[..., :3]
    missing = (values[..., 3] < 0) | ~np.isfinite(xyz).all(axis=2)
    positions = xyz * to_meters
    positions[missing] = np.nan

    source = {"format": "c3d"}
    if path:
        source.update(path=path, name=Path(path).stem)
    logger.debug(f"Decoded C3D {path or '<bytes>'}: {len(frames)} frames, {num_points} points, units {units}")
    try:
        return MocapSequence(tuple(labels), positions, rate, units, source)
    except ValueError as e:
        raise C3DError(str(e), path)


def write_c3d(sequence: MocapSequence) -> bytes:
    """Encode a sequence as a floating-point C3D file in millimeters.

    Raises:
        C3DError: No frames or markers, labels too long or non-ASCII,
            too many points or frames
    """
    labels = list(sequence.labels)
    if not labels:
        raise C3DError("sequence has no markers to write")
    for label in labels:
        if len(label) > MAX_LABEL_LENGTH:
            raise C3DError(f"label '{label}' is longer than {MAX_LABEL_LENGTH} characters")
        if not label.isascii():
            raise C3DError(f"label '{label}' is not ASCII")
    if len(labels) > MAX_POINTS:
        raise C3DError(f"{len(labels)} markers exceed the {MAX_POINTS} points one file can label")
    num_frames = len(sequence)
    if num_frames == 0:
        raise C3DError("sequence has no frames to write")
    if num_frames > MAX_FRAMES:
        raise C3DError(f"{num_frames} frames exceed the {MAX_FRAMES} a C3D header can count")

    to_units = 1.0 / unit_scale(WRITE_UNITS)
    missing = sequence.missing_mask
    points = np.zeros((num_frames, len(labels), 5), dtype=np.float32)
    points[..., :3] = np.where(missing[..., None], 0.0, sequence.positions * to_units)
    points[..., 3] = np.where(missing, -1.0, 0.0)

    writer = c3d.Writer(point_rate=float(sequence.frame_rate), analog_rate=0.0, point_scale=-1.0)
    for frame in points:
        writer.add_frames((frame, ()))
    writer.set_point_labels(labels)
    writer.set_analog_labels(None)
    buffer = io.BytesIO()
    writer.write(buffer)
    return buffer.getvalue()


def read_c3d(path: Path) -> MocapSequence:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise C3DError(f"cannot read file: {e}", str(path))
    return parse_c3d(data, str(path))


def save_c3d(path: Path, sequence: MocapSequence) -> None:
    atomic_write_bytes(Path(path), write_c3d(sequence))
