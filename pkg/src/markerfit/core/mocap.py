"""Labeled marker observations.

Positions are stored in meters as a (T, L, 3) array; missing observations
are NaN. ``units`` remembers the unit of the source file so writers can
reproduce it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.exceptions import DimensionError

UNIT_SCALES: dict[str, float] = {"m": 1.0, "cm": 0.01, "mm": 0.001}


def unit_scale(units: str) -> float:
    """Factor converting ``units`` to meters.

    Raises:
        ValueError: For unknown units
    """
    key = units.strip().lower()
    if key not in UNIT_SCALES:
        raise ValueError(f"unsupported units '{units}' (expected one of {sorted(UNIT_SCALES)})")
    return UNIT_SCALES[key]


@dataclass(frozen=True, eq=False)
class MarkerFrame:
    """Observed markers at one time index.

    Attributes:
        time_index: Frame number within the sequence
        positions: Label to position (meters) for visible markers
        missing: Labels not observed in this frame
    """
    time_index: int
    positions: Mapping[str, NDArray[np.float64]]
    missing: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        positions = {
            label: np.asarray(p, dtype=np.float64).reshape(3) for label, p in self.positions.items()
        }
        missing = frozenset(self.missing)
        overlap = missing.intersection(positions)
        if overlap:
            raise ValueError(f"labels both observed and missing: {sorted(overlap)}")
        for label, p in positions.items():
            if not np.all(np.isfinite(p)):
                raise ValueError(f"marker '{label}' position is not finite")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "missing", missing)

    @property
    def visible_labels(self) -> tuple[str, ...]:
        return tuple(self.positions)

    @property
    def labels(self) -> frozenset[str]:
        return frozenset(self.positions) | self.missing


@dataclass(frozen=True, eq=False)
class MocapSequence:
    """Marker trajectories of one capture.

    Attributes:
        labels: Marker labels, shared by all frames
        positions: (T, L, 3) meters, NaN where missing
        frame_rate: Frames per second
        units: Units of the source file
        source: Free-form provenance (dataset, subject, path)
    """
    labels: tuple[str, ...]
    positions: NDArray[np.float64]
    frame_rate: float
    units: str = "m"
    source: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        labels = tuple(self.labels)
        positions = np.array(self.positions, dtype=np.float64)
        if positions.ndim != 3 or positions.shape[1:] != (len(labels), 3):
            raise DimensionError("positions", f"(T, {len(labels)}, 3)", positions.shape)
        if len(set(labels)) != len(labels):
            raise ValueError("sequence labels must be unique")
        if not (np.isfinite(self.frame_rate) and self.frame_rate > 0):
            raise ValueError("frame_rate must be positive and finite")
        unit_scale(self.units)
        # a marker is either fully observed or fully missing
        partial = np.isnan(positions).any(axis=2)
        positions[partial] = np.nan
        positions.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "frame_rate", float(self.frame_rate))
        object.__setattr__(self, "source", dict(self.source))

    def __len__(self) -> int:
        return int(self.positions.shape[0])

    @property
    def name(self) -> str:
        return self.source.get("name") or self.source.get("path") or "sequence"

    @property
    def num_markers(self) -> int:
        return len(self.labels)

    @property
    def missing_mask(self) -> NDArray[np.bool_]:
        """(T, L) True where a marker is missing."""
        return np.isnan(self.positions[:, :, 0])

    def frame(self, t: int) -> MarkerFrame:
        mask = self.missing_mask[t]
        return MarkerFrame(
            time_index=t,
            positions={
                label: self.positions[t, i] for i, label in enumerate(self.labels) if not mask[i]
            },
            missing=frozenset(label for i, label in enumerate(self.labels) if mask[i]),
        )

    @property
    def frames(self) -> list[MarkerFrame]:
        return [self.frame(t) for t in range(len(self))]

    @classmethod
    def from_frames(
        cls,
        labels: Iterable[str],
        frames: Iterable[MarkerFrame],
        frame_rate: float,
        units: str = "m",
        source: dict[str, str] | None = None,
    ) -> MocapSequence:
        labels = tuple(labels)
        rows = []
        for frame in frames:
            row = np.full((len(labels), 3), np.nan)
            for i, label in enumerate(labels):
                if label in frame.positions:
                    row[i] = frame.positions[label]
            rows.append(row)
        positions = np.stack(rows) if rows else np.zeros((0, len(labels), 3))
        return cls(labels, positions, frame_rate, units, source or {})


def occlude(
    sequence: MocapSequence,
    labels: Iterable[str],
    frames: ArrayLike | None = None,
) -> MocapSequence:
    """Copy of the sequence with the given markers missing in the given frames.

    Args:
        sequence: Source sequence
        labels: Labels to hide
        frames: Frame indices; all frames when None
    """
    labels = list(labels)
    unknown = sorted(set(labels) - set(sequence.labels))
    if unknown:
        raise KeyError(f"unknown labels: {unknown}")
    positions = np.array(sequence.positions)
    cols = [sequence.labels.index(label) for label in labels]
    rows = np.arange(len(sequence)) if frames is None else np.asarray(frames, dtype=np.int64)
    positions[np.ix_(rows, cols)] = np.nan
    return MocapSequence(
        sequence.labels, positions, sequence.frame_rate, sequence.units, sequence.source
    )


def select_labels(sequence: MocapSequence, labels: Iterable[str]) -> MocapSequence:
    """Copy of the sequence keeping only the given labels, in sequence order."""
    keep = set(labels)
    cols = [i for i, label in enumerate(sequence.labels) if label in keep]
    return MocapSequence(
        tuple(sequence.labels[i] for i in cols),
        sequence.positions[:, cols],
        sequence.frame_rate,
        sequence.units,
        sequence.source,
    )
