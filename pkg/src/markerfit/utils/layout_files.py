"""Marker layout files (YAML or JSON). Offsets are millimeters on disk."""

from __future__ import annotations

from pathlib import Path

from pydantic import ValidationError

from ..core.markers import LayoutEntry, MarkerLayout
from ..models import LayoutDocument, LayoutMarker
from .exceptions import ConfigError, LayoutError
from .yaml_utils import dump_model, load_yaml, save_json, save_yaml

MM = 1000.0


def load_layout(path: Path) -> MarkerLayout:
    """Load a layout.

    Raises:
        LayoutError: Missing file, invalid document or duplicate labels
    """
    path = Path(path)
    try:
        data = load_yaml(path)
    except ConfigError as e:
        raise LayoutError(e.message, str(path))
    try:
        document = LayoutDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "layout"
        raise LayoutError(f"{where}: {first['msg']}", str(path))
    return layout_from_document(document)


def layout_from_document(document: LayoutDocument) -> MarkerLayout:
    return MarkerLayout(
        tuple(
            LayoutEntry(
                label=m.label,
                vertex=m.vertex,
                face=m.face,
                barycentric=m.barycentric,
                offset=m.offset_mm / MM,
            )
            for m in document.markers
        ),
        name=document.name,
    )


def layout_document(layout: MarkerLayout) -> LayoutDocument:
    return LayoutDocument(
        name=layout.name,
        markers=[
            LayoutMarker(
                label=e.label,
                vertex=e.vertex,
                face=e.face,
                barycentric=e.barycentric,
                offset_mm=e.offset * MM,
            )
            for e in layout.entries
        ],
    )


def save_layout(path: Path, layout: MarkerLayout) -> None:
    path = Path(path)
    data = dump_model(layout_document(layout))
    if path.suffix.lower() == ".json":
        save_json(path, data)
    else:
        save_yaml(path, data, comment=f"Marker layout '{layout.name}', offsets in millimeters")
