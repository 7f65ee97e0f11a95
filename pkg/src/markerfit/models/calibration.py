"""Calibration file: the result of subject calibration."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

CALIBRATION_SCHEMA_VERSION = 1


class CalibratedMarker(BaseModel):
    """A latent marker; offsets are in the anchor triangle's local frame, meters."""
    model_config = ConfigDict(populate_by_name=True)

    label: str = Field(..., min_length=1)
    face: int = Field(..., ge=0)
    barycentric: tuple[float, float, float]
    offset: tuple[float, float, float]
    init_offset: tuple[float, float, float] = Field(..., alias="initOffset")
    init_position: tuple[float, float, float] = Field(..., alias="initPosition")
    target_distance: float = Field(..., alias="targetDistance", ge=0)
    nearest_vertex: int = Field(-1, alias="nearestVertex")


class CalibrationFrame(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    sequence: int = Field(..., ge=0)
    frame: int = Field(..., ge=0)
    source: str = ""


class CalibrationDocument(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(CALIBRATION_SCHEMA_VERSION, alias="schemaVersion")
    model_hash: str = Field("", alias="modelHash")
    seed: int = 0
    beta: list[float]
    markers: list[CalibratedMarker] = Field(..., min_length=1)
    frames: list[CalibrationFrame] = Field(default_factory=list)
    poses: list[list[float]] = Field(default_factory=list)
    marker_rms: list[float] = Field(default_factory=list, alias="markerRms")
    term_costs: dict[str, float] = Field(default_factory=dict, alias="termCosts")
    weights: dict[str, float] = Field(default_factory=dict)
    body_prior_mode: str = Field("gaussian", alias="bodyPriorMode")
    hands_active: bool = Field(False, alias="handsActive")

    @model_validator(mode="after")
    def per_frame_lengths(self) -> CalibrationDocument:
        if self.poses and len(self.poses) != len(self.marker_rms):
            raise ValueError(f"{len(self.poses)} poses but {len(self.marker_rms)} RMS values")
        labels = [m.label for m in self.markers]
        if len(set(labels)) != len(labels):
            raise ValueError("marker labels must be unique")
        return self
