"""Fit archive manifest."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator

from .blobs import BlobRef

ARCHIVE_BLOBS = ("beta", "poses", "phis", "q", "marker_rms", "converged", "skipped")


class ArchiveManifest(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(..., alias="schemaVersion", ge=1)
    model_hash: str = Field("", alias="modelHash")
    frame_rate: float = Field(..., alias="frameRate", gt=0)
    num_frames: int = Field(..., alias="numFrames", ge=1)
    num_pose_params: int = Field(..., alias="numPoseParams", ge=6)
    num_dyn: int = Field(..., alias="numDyn", ge=0)
    num_shape: int = Field(..., alias="numShape", ge=0)
    source: str = ""
    seed: int = 0
    solver: dict[str, Any] = Field(default_factory=dict)
    errors: dict[int, str] = Field(default_factory=dict)
    blobs: dict[str, BlobRef]

    @field_validator("blobs")
    @classmethod
    def all_blobs(cls, v: dict[str, BlobRef]) -> dict[str, BlobRef]:
        missing = [name for name in ARCHIVE_BLOBS if name not in v]
        if missing:
            raise ValueError(f"missing blobs: {', '.join(missing)}")
        return v
