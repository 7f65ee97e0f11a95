"""JSON marker sequence document.

Schema: ``{fps, units, labels[], frames[][ [x,y,z] | null ]}``.
"""

from __future__ import annotations

import math
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class MarkerJsonDocument(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    fps: float = Field(..., gt=0)
    units: Literal["m", "cm", "mm"] = "m"
    labels: list[str]
    frames: list[list[tuple[float, float, float] | None]]
    source: dict[str, str] = Field(default_factory=dict)

    @field_validator("labels")
    @classmethod
    def unique_labels(cls, v: list[str]) -> list[str]:
        if any(not label for label in v):
            raise ValueError("labels must be non-empty")
        if len(set(v)) != len(v):
            raise ValueError("labels must be unique")
        return v

    @field_validator("frames")
    @classmethod
    def finite_positions(
        cls, v: list[list[tuple[float, float, float] | None]]
    ) -> list[list[tuple[float, float, float] | None]]:
        for t, frame in enumerate(v):
            for point in frame:
                if point is not None and not all(math.isfinite(c) for c in point):
                    raise ValueError(f"frame {t}: non-finite position, use null for missing markers")
        return v

    @model_validator(mode="after")
    def frame_widths(self) -> MarkerJsonDocument:
        for t, frame in enumerate(self.frames):
            if len(frame) != len(self.labels):
                raise ValueError(f"frame {t} has {len(frame)} entries for {len(self.labels)} labels")
        return self
