"""Marker sequence files, dispatched on extension."""

from __future__ import annotations

import glob
import logging
from pathlib import Path

from ..core.mocap import MocapSequence, select_labels
from .c3d import read_c3d, save_c3d
from .exceptions import FormatError
from .marker_json import load_json_markers, save_json_markers

logger = logging.getLogger(__name__)

SEQUENCE_SUFFIXES = (".c3d", ".json")


def read_sequence(path: Path) -> MocapSequence:
    """Read a ``.c3d`` or ``.json`` marker file.

    Raises:
        FormatError: Unknown extension or malformed file
    """
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".c3d":
        return read_c3d(path)
    if suffix == ".json":
        return load_json_markers(path)
    raise FormatError(f"unsupported marker file type '{suffix}' (use .c3d or .json)", str(path))


def write_sequence(path: Path, sequence: MocapSequence) -> None:
    """Write a marker file in the units the sequence was captured in."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".c3d":
        save_c3d(path, sequence)
    elif suffix == ".json":
        save_json_markers(path, sequence, units=sequence.units)
    else:
        raise FormatError(f"unsupported marker file type '{suffix}' (use .c3d or .json)", str(path))


def expand_inputs(patterns: list[str]) -> list[Path]:
    """Expand input globs into marker files, sorted within each pattern.

    Raises:
        FormatError: If a pattern matches no marker file
    """
    paths: list[Path] = []
    for pattern in patterns:
        matches = sorted(
            Path(p) for p in glob.glob(pattern, recursive=True)
            if Path(p).suffix.lower() in SEQUENCE_SUFFIXES
        )
        if not matches:
            raise FormatError("no .c3d or .json files match", pattern)
        paths += [p for p in matches if p not in paths]
    return paths


def restrict_to_layout(sequence: MocapSequence, labels: tuple[str, ...]) -> MocapSequence:
    """Drop labels that the layout does not know, with a warning."""
    unknown = sorted(set(sequence.labels) - set(labels))
    if not unknown:
        return sequence
    logger.warning(f"{sequence.name}: ignoring {len(unknown)} labels not in the layout: {', '.join(unknown)}")
    return select_labels(sequence, labels)
