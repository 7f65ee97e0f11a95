"""Marker layout documents."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

DEFAULT_OFFSET_MM = 9.5


class LayoutMarker(BaseModel):
    """One marker placement; offsets are given in millimeters."""
    model_config = ConfigDict(populate_by_name=True)

    label: str = Field(..., min_length=1)
    vertex: int | None = Field(None, ge=0)
    face: int | None = Field(None, ge=0)
    barycentric: tuple[float, float, float] | None = None
    offset_mm: float = Field(DEFAULT_OFFSET_MM, alias="offsetMm", ge=0)

    @model_validator(mode="after")
    def one_anchor(self) -> LayoutMarker:
        if (self.vertex is None) == (self.face is None):
            raise ValueError(f"marker '{self.label}' needs exactly one of vertex or face")
        if self.face is not None and self.barycentric is None:
            raise ValueError(f"marker '{self.label}' face anchor needs barycentric coordinates")
        return self


class LayoutDocument(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    name: str = "layout"
    markers: list[LayoutMarker] = Field(..., min_length=1)

    @model_validator(mode="after")
    def unique_labels(self) -> LayoutDocument:
        labels = [m.label for m in self.markers]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise ValueError(f"duplicate labels: {', '.join(duplicates)}")
        return self
