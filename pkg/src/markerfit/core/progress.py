"""Progress reporting hooks for long-running fits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable


@dataclass(frozen=True)
class ProgressEvent:
    """A unit of work finished.

    Attributes:
        stage: "calibrate", "fit", "tune", ...
        step: Completed units so far
        total: Total units, 0 when unknown
        message: Short human-readable description
    """
    stage: str
    step: int
    total: int = 0
    message: str = ""


ProgressCallback = Callable[[ProgressEvent], None]


def notify(callback: ProgressCallback | None, stage: str, step: int, total: int = 0, message: str = "") -> None:
    if callback is not None:
        callback(ProgressEvent(stage, step, total, message))
