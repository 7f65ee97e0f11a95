"""Binary blob references shared by model files and fit archives."""

from __future__ import annotations

from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

BlobDType = Literal["<f4", "<f8", "<i4"]


class BlobRef(BaseModel):
    """A little-endian array stored next to a JSON manifest.

    ``count`` is the number of elements; the file holds exactly
    ``count * itemsize`` bytes.
    """
    model_config = ConfigDict(populate_by_name=True)

    path: str = Field(..., min_length=1)
    count: int = Field(..., ge=0)
    shape: list[int] = Field(default_factory=list)
    dtype: BlobDType = "<f4"

    @field_validator("path")
    @classmethod
    def relative_path(cls, v: str) -> str:
        if v.startswith(("/", "\\")) or ".." in v.replace("\\", "/").split("/"):
            raise ValueError("blob path must be relative and stay inside the manifest directory")
        return v

    @field_validator("shape")
    @classmethod
    def non_negative_shape(cls, v: list[int]) -> list[int]:
        if any(n < 0 for n in v):
            raise ValueError("shape entries must be >= 0")
        return v

    @property
    def itemsize(self) -> int:
        return np.dtype(self.dtype).itemsize

    @property
    def nbytes(self) -> int:
        return self.count * self.itemsize
