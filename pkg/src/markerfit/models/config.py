"""Run configuration and tuning documents.

Every CLI flag has a RunConfig field; a config file fills them and flags
given on the command line win.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

TERM_NAMES = (
    "data",
    "shape",
    "pose_body",
    "pose_hand",
    "init",
    "surface",
    "velocity_pose",
    "dynamics",
    "velocity_dynamics",
)


def _check_terms(weights: dict[str, float]) -> dict[str, float]:
    unknown = sorted(set(weights) - set(TERM_NAMES))
    if unknown:
        raise ValueError(f"unknown weight terms: {', '.join(unknown)}")
    if any(w < 0 for w in weights.values()):
        raise ValueError("weights must be >= 0")
    return weights


class SolverSettings(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    max_iterations: int = Field(200, alias="maxIterations", ge=0)
    gradient_tolerance: float = Field(1e-8, alias="gradientTolerance", gt=0)
    step_tolerance: float = Field(1e-10, alias="stepTolerance", gt=0)
    initial_trust_radius: float = Field(1.0, alias="initialTrustRadius", gt=0)
    max_trust_radius: float = Field(1e4, alias="maxTrustRadius", gt=0)


class RunConfig(BaseModel):
    """Settings shared by calibrate and fit."""
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    model: str | None = None
    layout: str | None = None
    calibration: str | None = None
    inputs: list[str] = Field(default_factory=list)
    out: str = "out"
    seed: int = 0
    frames: int = Field(12, ge=1)
    jobs: int = Field(1, ge=1)
    dynamics: bool = True
    hands: bool = True
    weights: dict[str, float] = Field(default_factory=dict)
    weight_profile: Literal["default", "hands"] | None = Field(None, alias="weightProfile")
    frame_rate: float | None = Field(None, alias="frameRate", gt=0)
    export_mesh: bool = Field(False, alias="exportMesh")
    solver: SolverSettings = Field(default_factory=SolverSettings)

    @field_validator("weights")
    @classmethod
    def known_terms(cls, v: dict[str, float]) -> dict[str, float]:
        return _check_terms(v)


class LogGrid(BaseModel):
    center: float = Field(..., gt=0)
    decades: float = Field(1.0, gt=0)
    points: int = Field(5, ge=1)


class SplitSettings(BaseModel):
    """Either explicit frame lists or a count of leading training frames."""
    model_config = ConfigDict(populate_by_name=True)

    train_frames: int | None = Field(None, alias="trainFrames", ge=1)
    train: list[int] | None = None
    validation: list[int] | None = None

    @model_validator(mode="after")
    def one_form(self) -> SplitSettings:
        explicit = self.train is not None or self.validation is not None
        if explicit == (self.train_frames is not None):
            raise ValueError("give either trainFrames or train/validation lists")
        if explicit and (not self.train or not self.validation):
            raise ValueError("train and validation lists must both be non-empty")
        if explicit and set(self.train or []) & set(self.validation or []):
            raise ValueError("train and validation frames overlap")
        return self


class SearchDocument(BaseModel):
    """A tuning run: a line search over one weight, or a component-count sweep."""
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    mode: Literal["line", "sweep"] = "line"
    stage: Literal["calibrate", "fit"] = "calibrate"
    term: str = "data"
    grid: list[float] | None = None
    log_grid: LogGrid | None = Field(None, alias="logGrid")
    fixed: dict[str, float] = Field(default_factory=dict)
    trials: int = Field(4, ge=1)
    seed: int = 0
    split: SplitSettings
    model: str
    layout: str
    sequence: str
    scans: str
    calibration: str | None = None
    sample_count: int = Field(10000, alias="sampleCount", ge=1)
    calibration_frames: int = Field(12, alias="calibrationFrames", ge=1)
    counts: list[tuple[int, int]] = Field(default_factory=list)
    model_pattern: str | None = Field(None, alias="modelPattern")
    solver: SolverSettings = Field(default_factory=SolverSettings)

    @field_validator("fixed")
    @classmethod
    def known_fixed(cls, v: dict[str, float]) -> dict[str, float]:
        return _check_terms(v)

    @model_validator(mode="after")
    def grid_or_counts(self) -> SearchDocument:
        if self.term not in TERM_NAMES:
            raise ValueError(f"unknown term '{self.term}'")
        if self.mode == "line":
            if (self.grid is None) == (self.log_grid is None):
                raise ValueError("line search needs exactly one of grid or logGrid")
            if self.grid is not None and (not self.grid or any(v <= 0 for v in self.grid)):
                raise ValueError("grid must be non-empty with positive values")
            if self.stage == "fit" and self.calibration is None:
                raise ValueError("a per-frame search needs a calibration file")
        elif not self.counts:
            raise ValueError("a component sweep needs counts")
        return self


class WaveDocument(BaseModel):
    joint: int = Field(..., ge=0)
    axis: int = Field(..., ge=0, le=2)
    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0
    offset: float = 0.0


class StepDocument(BaseModel):
    frame: int = Field(..., ge=0)
    offset: tuple[float, float, float]


class MotionDocument(BaseModel):
    """Procedural motion for synthetic sessions."""
    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    name: str = "synthetic"
    num_frames: int = Field(..., alias="numFrames", ge=1)
    frame_rate: float = Field(60.0, alias="frameRate", gt=0)
    waves: list[WaveDocument] = Field(default_factory=list)
    root_start: tuple[float, float, float] = Field((0.0, 0.0, 0.0), alias="rootStart")
    root_velocity: tuple[float, float, float] = Field((0.0, 0.0, 0.0), alias="rootVelocity")
    steps: list[StepDocument] = Field(default_factory=list)
    dyn_amplitude: float = Field(0.0, alias="dynAmplitude")
    dyn_frequency: float = Field(2.0, alias="dynFrequency")
