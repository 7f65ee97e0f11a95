"""JSON marker sequences.

``{"fps": 120, "units": "mm", "labels": [...], "frames": [[[x, y, z] | null, ...], ...]}``

Readers convert to meters; the writer emits meters unless asked otherwise,
so a write/read cycle reproduces positions exactly.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError

from ..core.mocap import MocapSequence, unit_scale
from ..models import MarkerJsonDocument
from .exceptions import MarkerJsonError
from .yaml_utils import atomic_write_text


def read_json_markers(text: str, path: str | None = None) -> MocapSequence:
    """Parse a JSON marker document.

    Raises:
        MarkerJsonError: Invalid JSON or schema violation, with the line and
            field involved when they can be located
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise MarkerJsonError(e.msg, path, line=e.lineno)
    if not isinstance(data, dict):
        raise MarkerJsonError("expected a JSON object at the top level", path, line=1)
    try:
        document = MarkerJsonDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        loc = first["loc"]
        field = ".".join(str(p) for p in loc) or None
        line = _key_line(text, str(loc[0])) if loc else None
        raise MarkerJsonError(first["msg"], path, field=field, line=line)

    scale = unit_scale(document.units)
    positions = np.full((len(document.frames), len(document.labels), 3), np.nan)
    for t, frame in enumerate(document.frames):
        for i, point in enumerate(frame):
            if point is not None:
                positions[t, i] = point
    source = dict(document.source)
    if path:
        source.setdefault("path", path)
        source.setdefault("name", Path(path).stem)
    return MocapSequence(tuple(document.labels), positions * scale, document.fps, document.units, source)


def write_json_markers(sequence: MocapSequence, units: str = "m") -> str:
    """Serialize a sequence; missing markers become null."""
    to_units = 1.0 / unit_scale(units)
    missing = sequence.missing_mask
    values = sequence.positions * to_units
    frames = [
        [None if missing[t, i] else [float(c) for c in values[t, i]] for i in range(sequence.num_markers)]
        for t in range(len(sequence))
    ]
    document: dict[str, Any] = {
        "fps": sequence.frame_rate,
        "units": units,
        "labels": list(sequence.labels),
        "frames": frames,
    }
    if sequence.source:
        document["source"] = dict(sequence.source)
    return json.dumps(document) + "\n"


def load_json_markers(path: Path) -> MocapSequence:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise MarkerJsonError(f"cannot read file: {e}", str(path))
    return read_json_markers(text, str(path))


def save_json_markers(path: Path, sequence: MocapSequence, units: str = "m") -> None:
    atomic_write_text(Path(path), write_json_markers(sequence, units))


def _key_line(text: str, key: str) -> int | None:
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    if match is None:
        return None
    return text.count("\n", 0, match.start()) + 1
