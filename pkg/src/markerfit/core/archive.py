"""Per-sequence fit record: one shape vector plus per-frame pose and soft tissue."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.exceptions import DimensionError
from .body_model import PoseVector

ARCHIVE_SCHEMA_VERSION = 1


@dataclass(frozen=True, eq=False)
class FrameResult:
    """Outcome of fitting one frame.

    Attributes:
        theta: Fitted pose
        phi: Fitted soft-tissue coefficients
        q_used: Occlusion factor applied to the pose priors
        marker_rms: RMS distance of visible markers, meters (NaN when skipped)
        converged: Every solver run stopped on a tolerance
        skipped: No fit was possible; the previous solution was carried over
        error: Reason for skipping
        iterations: Dogleg iterations over all solver runs
        time_index: Frame index in the source sequence
    """
    theta: PoseVector
    phi: NDArray[np.float64]
    q_used: float = 1.0
    marker_rms: float = float("nan")
    converged: bool = True
    skipped: bool = False
    error: str | None = None
    iterations: int = 0
    time_index: int = 0


@dataclass
class FitArchive:
    """Fitted parameters of one mocap sequence.

    Attributes:
        beta: Subject shape, stored once
        poses: (T, 3K+3) pose vectors
        phis: (T, D) soft-tissue coefficients
        q: (T,) occlusion factors
        marker_rms: (T,) per-frame marker RMS in meters
        frame_rate: Source frame rate in Hz
        model_hash: Digest of the body model used
        converged: (T,) solver convergence flags
        skipped: (T,) frames carried over from their predecessor
        errors: Frame index to error message for skipped frames
        solver: Snapshot of solver settings and weights
        source: Input file or sequence name
        seed: Seed of the run
    """
    beta: NDArray[np.float64]
    poses: NDArray[np.float64]
    phis: NDArray[np.float64]
    q: NDArray[np.float64]
    marker_rms: NDArray[np.float64]
    frame_rate: float
    model_hash: str = ""
    converged: NDArray[np.bool_] | None = None
    skipped: NDArray[np.bool_] | None = None
    errors: dict[int, str] = field(default_factory=dict)
    solver: dict[str, Any] = field(default_factory=dict)
    source: str = ""
    seed: int = 0
    schema_version: int = ARCHIVE_SCHEMA_VERSION

    def __post_init__(self) -> None:
        self.beta = np.asarray(self.beta, dtype=np.float64).ravel()
        self.poses = np.atleast_2d(np.asarray(self.poses, dtype=np.float64))
        self.phis = np.asarray(self.phis, dtype=np.float64)
        self.q = np.asarray(self.q, dtype=np.float64).ravel()
        self.marker_rms = np.asarray(self.marker_rms, dtype=np.float64).ravel()
        n = self.poses.shape[0]
        if self.phis.ndim != 2 or self.phis.shape[0] != n:
            raise DimensionError("phis", (n, "D"), self.phis.shape)
        if self.converged is None:
            self.converged = np.ones(n, dtype=bool)
        if self.skipped is None:
            self.skipped = np.zeros(n, dtype=bool)
        self.converged = np.asarray(self.converged, dtype=bool).ravel()
        self.skipped = np.asarray(self.skipped, dtype=bool).ravel()
        for name in ("q", "marker_rms", "converged", "skipped"):
            values = getattr(self, name)
            if values.shape != (n,):
                raise DimensionError(name, (n,), values.shape)
        if self.frame_rate <= 0:
            raise ValueError("frame_rate must be positive")

    @property
    def num_frames(self) -> int:
        return int(self.poses.shape[0])

    @property
    def num_skipped(self) -> int:
        return int(self.skipped.sum())

    @property
    def mean_rms(self) -> float:
        """Mean marker RMS over fitted frames, NaN when none was fitted."""
        fitted = self.marker_rms[~self.skipped]
        fitted = fitted[np.isfinite(fitted)]
        return float(fitted.mean()) if fitted.size else float("nan")

    def pose(self, t: int) -> PoseVector:
        return PoseVector.from_array(self.poses[t])

    def frame(self, t: int) -> FrameResult:
        return FrameResult(
            theta=self.pose(t),
            phi=self.phis[t].copy(),
            q_used=float(self.q[t]),
            marker_rms=float(self.marker_rms[t]),
            converged=bool(self.converged[t]),
            skipped=bool(self.skipped[t]),
            error=self.errors.get(t),
            time_index=t,
        )

    @classmethod
    def from_results(
        cls,
        beta: ArrayLike,
        results: list[FrameResult],
        frame_rate: float,
        num_dyn: int,
        **metadata: Any,
    ) -> FitArchive:
        """Collect frame results in order."""
        if not results:
            raise ValueError("archive needs at least one frame")
        return cls(
            beta=np.asarray(beta, dtype=np.float64),
            poses=np.stack([r.theta.to_array() for r in results]),
            phis=np.stack([np.asarray(r.phi, dtype=np.float64).reshape(num_dyn) for r in results]),
            q=np.array([r.q_used for r in results]),
            marker_rms=np.array([r.marker_rms for r in results]),
            frame_rate=frame_rate,
            converged=np.array([r.converged for r in results]),
            skipped=np.array([r.skipped for r in results]),
            errors={i: r.error for i, r in enumerate(results) if r.error},
            **metadata,
        )
