"""Weight line search and component-count sweep graded by scan-to-model distance.

A line search varies one term's weight over a grid, keeps every other
weight fixed, fits on training data and scores on held-out frames only.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Literal, Mapping, Protocol, Sequence

import numpy as np

from ..utils.exceptions import ConfigError, MarkerFitError, ModelFileError
from .body_model import BodyModel, surface, truncate_model
from .dogleg import SolverOptions
from .energy import STAGE_ONE_FINAL, Term
from .evaluation import DEFAULT_SAMPLE_COUNT, ScanMesh, evaluate_archive, scan_to_model_distance
from .markers import MarkerLayout
from .mesh_query import TriangleMesh
from .mocap import MocapSequence
from .priors import PriorStats
from .stage_one import StageIResult, fit_shape_stage, select_calibration_frames
from .stage_two import FrameSolver, StageTwoConfig, fit_sequence

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 4

FitProcedure = Callable[[Mapping[Term, float], int], Any]
ScoreFunction = Callable[[Any], float]


@dataclass(frozen=True)
class DataSplit:
    """Frame indices used for fitting and for grading; never overlapping."""
    train: tuple[int, ...]
    validation: tuple[int, ...]

    def __post_init__(self) -> None:
        train = tuple(int(i) for i in self.train)
        validation = tuple(int(i) for i in self.validation)
        if not train or not validation:
            raise ConfigError("split needs training and validation frames")
        overlap = sorted(set(train) & set(validation))
        if overlap:
            raise ConfigError(f"training and validation frames overlap: {overlap[:10]}")
        object.__setattr__(self, "train", train)
        object.__setattr__(self, "validation", validation)

    @classmethod
    def leading(cls, num_frames: int, train_frames: int) -> DataSplit:
        """First ``train_frames`` frames train, the rest validate."""
        if not 0 < train_frames < num_frames:
            raise ConfigError(f"train_frames must lie in (0, {num_frames}), got {train_frames}")
        return cls(tuple(range(train_frames)), tuple(range(train_frames, num_frames)))


@dataclass(frozen=True)
class SearchSpec:
    """One line search.

    Attributes:
        term: Weight being searched
        grid: Candidate weights, in search order
        fixed: Weights of other terms
        stage: "calibrate" searches calibration weights, "fit" per-frame weights
        trials: Seeded repetitions averaged per grid point
        seed: First trial seed; the confirming run uses seed + trials
    """
    term: Term
    grid: tuple[float, ...]
    fixed: Mapping[Term, float] = field(default_factory=dict)
    stage: Literal["calibrate", "fit"] = "calibrate"
    trials: int = DEFAULT_TRIALS
    seed: int = 0

    def __post_init__(self) -> None:
        grid = tuple(float(v) for v in self.grid)
        if not grid:
            raise ConfigError("search grid is empty")
        if any(not (v > 0 and math.isfinite(v)) for v in grid):
            raise ConfigError("search grid values must be positive and finite")
        if self.term in self.fixed:
            raise ConfigError(f"'{self.term.value}' is both searched and fixed")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.stage not in ("calibrate", "fit"):
            raise ConfigError(f"unknown search stage '{self.stage}'")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "fixed", dict(self.fixed))

    @classmethod
    def log_grid(cls, term: Term, center: float, decades: float = 1.0, points: int = 5, **kwargs: Any) -> SearchSpec:
        """Logarithmic grid spanning ``decades`` either side of ``center``."""
        if center <= 0 or points < 1:
            raise ConfigError("log grid needs a positive center and >= 1 point")
        grid = center * np.logspace(-decades, decades, points)
        return cls(term=term, grid=tuple(grid.tolist()), **kwargs)

    def weights_for(self, value: float) -> dict[Term, float]:
        return {**self.fixed, self.term: value}


@dataclass(frozen=True)
class ScoreRow:
    """Score of one grid point; inf when any trial failed."""
    value: float
    score: float
    trial_scores: tuple[float, ...]
    failures: int = 0


@dataclass
class LineSearchResult:
    term: Term
    best_index: int
    rows: list[ScoreRow]
    confirmation: float = float("nan")

    @property
    def best(self) -> float:
        return self.rows[self.best_index].value

    @property
    def best_row(self) -> ScoreRow:
        return self.rows[self.best_index]

    def table(self) -> list[dict[str, Any]]:
        return [
            {
                "term": self.term.value,
                "value": row.value,
                "score": row.score,
                "trials": len(row.trial_scores),
                "failures": row.failures,
                "best": i == self.best_index,
            }
            for i, row in enumerate(self.rows)
        ]


def line_search(spec: SearchSpec, fit: FitProcedure, score: ScoreFunction) -> LineSearchResult:
    """Fit and score every grid value; pick the lowest mean score.

    A failed fit scores inf for that grid value. Equal scores go to the
    smaller data weight or the larger regularizer weight, then to the
    earlier grid value.

    Args:
        spec: What to search
        fit: (weights, seed) -> fitted result
        score: fitted result -> validation error

    Returns:
        LineSearchResult with one row per grid value in grid order
    """
    rows = []
    for value in spec.grid:
        weights = spec.weights_for(value)
        scores, failures = [], 0
        for trial in range(spec.trials):
            try:
                scores.append(float(score(fit(weights, spec.seed + trial))))
            except (MarkerFitError, np.linalg.LinAlgError) as e:
                logger.warning(f"{spec.term.value}={value:g} trial {trial} failed: {e}")
                scores.append(math.inf)
                failures += 1
        mean = math.inf if failures else float(np.mean(scores))
        rows.append(ScoreRow(value, mean, tuple(scores), failures))
        logger.info(f"{spec.term.value}={value:g}: score {mean:.4f}")

    best = min(range(len(rows)), key=lambda i: (rows[i].score, _conservative_key(spec.term, rows[i].value)))
    result = LineSearchResult(spec.term, best, rows)
    if math.isfinite(rows[best].score):
        try:
            result.confirmation = float(score(fit(spec.weights_for(rows[best].value), spec.seed + spec.trials)))
        except (MarkerFitError, np.linalg.LinAlgError) as e:
            logger.warning(f"Confirmation run failed: {e}")
            result.confirmation = math.inf
    return result


def _conservative_key(term: Term, value: float) -> float:
    # min() keeps the first of equal keys, so identical values fall back to grid order
    return value if term == Term.DATA else -value


@dataclass
class TuningData:
    """Everything a tuning objective fits and grades on.

    Only scans at validation frames are ever graded.
    """
    sequence: MocapSequence
    scans: Sequence[ScanMesh]
    layout: MarkerLayout
    split: DataSplit
    sample_count: int = DEFAULT_SAMPLE_COUNT
    eval_seed: int = 0
    calibration_frames: int = 12
    options: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self) -> None:
        n = len(self.sequence)
        for i in (*self.split.train, *self.split.validation):
            if not 0 <= i < n:
                raise ConfigError(f"split frame {i} outside the sequence of {n} frames")
        by_time = {scan.time_index for scan in self.scans}
        missing = [i for i in self.split.validation if i not in by_time]
        if missing:
            raise ConfigError(f"no scan for validation frames {missing[:10]}")

    @property
    def validation_scans(self) -> list[ScanMesh]:
        keep = set(self.split.validation)
        return [scan for scan in self.scans if scan.time_index in keep]

    def training_sequence(self) -> MocapSequence:
        rows = np.asarray(self.split.train, dtype=np.int64)
        return MocapSequence(
            self.sequence.labels,
            self.sequence.positions[rows],
            self.sequence.frame_rate,
            self.sequence.units,
            self.sequence.source,
        )


def calibration_objective(
    data: TuningData,
    model: BodyModel,
    stats: PriorStats,
) -> tuple[FitProcedure, ScoreFunction]:
    """Calibrate on training frames; grade first-frame fits of validation frames.

    Weights are final calibration weights before b; unspecified terms keep
    their defaults.
    """
    train = data.training_sequence()

    def fit(weights: Mapping[Term, float], seed: int) -> StageIResult:
        refs = select_calibration_frames([train], data.calibration_frames, seed)
        frames = [train.frame(ref.frame) for ref in refs]
        return fit_shape_stage(
            frames,
            data.layout,
            model,
            stats,
            final_weights={**STAGE_ONE_FINAL, **weights},
            options=data.options,
        )

    def score(stage1: StageIResult) -> float:
        solver = FrameSolver(
            stage1, model, stats, StageTwoConfig(options=data.options), session_labels=data.sequence.labels
        )
        distances = []
        for scan in data.validation_scans:
            result = solver.first_frame(data.sequence.frame(scan.time_index))
            vertices = surface(model, stage1.beta, result.theta, result.phi)
            report = scan_to_model_distance(
                scan, TriangleMesh(vertices, model.faces), data.sample_count, data.eval_seed
            )
            distances.append(report.mean_mm)
        return float(np.mean(distances))

    return fit, score


def sequence_objective(
    data: TuningData,
    stage1: StageIResult,
    model: BodyModel,
    stats: PriorStats,
) -> tuple[FitProcedure, ScoreFunction]:
    """Fit the whole sequence with per-frame weight overrides; grade validation frames.

    The sequence is fitted in full to keep temporal warm starts intact; the
    score reads validation frames only.
    """

    def fit(weights: Mapping[Term, float], seed: int) -> Any:
        config = StageTwoConfig(overrides=dict(weights), options=data.options)
        return fit_sequence(data.sequence, stage1, model, stats, config, seed=seed)

    def score(archive: Any) -> float:
        report = evaluate_archive(
            archive,
            model,
            data.validation_scans,
            data.sample_count,
            data.eval_seed,
            frames=data.split.validation,
        )
        return report.mean_mm

    return fit, score


class ModelFamily(Protocol):
    """Models of one family at varying component counts."""

    def get(self, shape_dim: int, dyn_dim: int) -> tuple[BodyModel, PriorStats]: ...


@dataclass(frozen=True)
class TruncatedFamily:
    """Leading components of one master model."""
    model: BodyModel
    stats: PriorStats

    def get(self, shape_dim: int, dyn_dim: int) -> tuple[BodyModel, PriorStats]:
        return truncate_model(self.model, shape_dim, dyn_dim), self.stats.truncated(shape_dim, dyn_dim)


@dataclass(frozen=True)
class FileFamily:
    """One model file per count, located by a pattern with {shape} and {dyn} fields."""
    pattern: str

    def get(self, shape_dim: int, dyn_dim: int) -> tuple[BodyModel, PriorStats]:
        from ..utils.model_files import load_model

        path = Path(self.pattern.format(shape=shape_dim, dyn=dyn_dim))
        if not path.exists():
            raise ModelFileError(f"no model file for {shape_dim} shape / {dyn_dim} dynamics components", str(path))
        return load_model(path)


@dataclass(frozen=True)
class SweepRow:
    shape_dim: int
    dyn_dim: int
    score: float
    best: bool = False


def component_count_sweep(
    family: ModelFamily,
    counts: Sequence[tuple[int, int]],
    data: TuningData,
    seed: int = 0,
) -> list[SweepRow]:
    """Validation error of the default calibration at every (shape, dynamics) count.

    Raises:
        ModelFileError: A model of the family is missing
    """
    if not counts:
        raise ConfigError("component sweep needs at least one count")
    scores = []
    for shape_dim, dyn_dim in counts:
        model, stats = family.get(shape_dim, dyn_dim)
        fit, score = calibration_objective(data, model, stats)
        try:
            value = float(score(fit({}, seed)))
        except (MarkerFitError, np.linalg.LinAlgError) as e:
            if isinstance(e, ModelFileError):
                raise
            logger.warning(f"Sweep at {shape_dim}/{dyn_dim} failed: {e}")
            value = math.inf
        scores.append(value)
        logger.info(f"Components {shape_dim}/{dyn_dim}: score {value:.4f}")
    best = int(np.argmin(scores))
    return [
        SweepRow(s, d, value, i == best) for i, ((s, d), value) in enumerate(zip(counts, scores))
    ]
