"""Synthetic capture sessions with known ground truth.

A motion script describes joint rotations as sums of sinusoids plus a root
trajectory. Running it through the body model yields marker observations
(optionally noisy), exact surface meshes standing in for scans, and the
generating parameters for grading.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..utils.exceptions import InvalidScriptError
from .body_model import BodyModel, surface
from .evaluation import ScanMesh
from .markers import LatentMarkerSet, MarkerLayout, attach_latent_markers, simulate_marker_array
from .mocap import MocapSequence

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class JointWave:
    """rotation[joint, axis] += offset + amplitude * sin(2 pi frequency t + phase)."""
    joint: int
    axis: int
    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0
    offset: float = 0.0


@dataclass(frozen=True)
class TranslationStep:
    """Root translation jump applied from ``frame`` on."""
    frame: int
    offset: tuple[float, float, float]


@dataclass(frozen=True)
class MotionScript:
    """Procedural motion.

    Attributes:
        num_frames: Sequence length
        frame_rate: Frames per second
        waves: Sinusoidal joint rotations, radians
        root_start: Root translation at frame 0, meters
        root_velocity: Root velocity, meters per second
        steps: Root translation jumps
        dyn_amplitude: Amplitude of every soft-tissue coefficient
        dyn_frequency: Frequency of the soft-tissue oscillation, Hz
        name: Sequence name
    """
    num_frames: int
    frame_rate: float = 60.0
    waves: tuple[JointWave, ...] = ()
    root_start: tuple[float, float, float] = (0.0, 0.0, 0.0)
    root_velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    steps: tuple[TranslationStep, ...] = ()
    dyn_amplitude: float = 0.0
    dyn_frequency: float = 2.0
    name: str = "synthetic"

    def validate(self, model: BodyModel) -> None:
        """Raise InvalidScriptError unless the script can drive the model."""
        if self.num_frames < 1:
            raise InvalidScriptError("script needs at least one frame")
        if not self.frame_rate > 0:
            raise InvalidScriptError("frame_rate must be positive")
        for wave in self.waves:
            if not 0 <= wave.joint < model.num_joints:
                raise InvalidScriptError(f"wave joint {wave.joint} outside [0, {model.num_joints})")
            if wave.axis not in (0, 1, 2):
                raise InvalidScriptError(f"wave axis must be 0, 1 or 2, got {wave.axis}")
            values = (wave.amplitude, wave.frequency, wave.phase, wave.offset)
            if not np.all(np.isfinite(values)):
                raise InvalidScriptError(f"wave on joint {wave.joint} has non-finite parameters")
        for step in self.steps:
            if not 0 <= step.frame < self.num_frames:
                raise InvalidScriptError(f"translation step at frame {step.frame} outside the script")
        if not np.all(np.isfinite([*self.root_start, *self.root_velocity, self.dyn_amplitude])):
            raise InvalidScriptError("root trajectory and dynamics must be finite")

    @property
    def times(self) -> NDArray[np.float64]:
        return np.arange(self.num_frames) / self.frame_rate

    def poses(self, model: BodyModel, hand_mean: ArrayLike | None = None) -> NDArray[np.float64]:
        """(T, 3K+3) pose vectors; hand joints start from ``hand_mean``."""
        self.validate(model)
        t = self.times
        poses = np.zeros((self.num_frames, model.num_pose_params))
        if hand_mean is not None and model.has_hands:
            poses[:, model.pose_indices(model.hand_joints)] = np.asarray(hand_mean, dtype=np.float64)
        poses[:, :3] = np.asarray(self.root_start) + t[:, None] * np.asarray(self.root_velocity)
        for step in self.steps:
            poses[step.frame:, :3] += np.asarray(step.offset, dtype=np.float64)
        for wave in self.waves:
            column = 3 + 3 * wave.joint + wave.axis
            poses[:, column] += wave.offset + wave.amplitude * np.sin(
                2.0 * np.pi * wave.frequency * t + wave.phase
            )
        return poses

    def dynamics(self, model: BodyModel) -> NDArray[np.float64]:
        """(T, D) soft-tissue coefficients, each component phase-shifted."""
        t = self.times
        shifts = np.arange(model.num_dyn)
        return self.dyn_amplitude * np.sin(
            2.0 * np.pi * self.dyn_frequency * t[:, None] + shifts[None, :]
        )

    @classmethod
    def rest(cls, num_frames: int = 1, frame_rate: float = 60.0) -> MotionScript:
        """Motionless rest pose."""
        return cls(num_frames=num_frames, frame_rate=frame_rate, name="rest")

    @classmethod
    def walk(
        cls,
        model: BodyModel,
        num_frames: int = 50,
        frame_rate: float = 60.0,
        amplitude: float = 0.3,
        speed: float = 0.5,
        dyn_amplitude: float = 0.0,
    ) -> MotionScript:
        """Swinging body joints while the root moves forward.

        Joint swings alternate between the x and z axes and shrink along the
        chain; the root also turns slowly about the vertical axis.
        """
        waves = [JointWave(joint=0, axis=1, amplitude=0.2 * amplitude, frequency=0.5)]
        for rank, joint in enumerate(model.body_joints.tolist()):
            waves.append(
                JointWave(
                    joint=joint,
                    axis=0 if rank % 2 == 0 else 2,
                    amplitude=amplitude / (1.0 + 0.5 * rank),
                    frequency=1.0,
                    phase=0.7 * rank,
                )
            )
        return cls(
            num_frames=num_frames,
            frame_rate=frame_rate,
            waves=tuple(waves),
            root_velocity=(speed, 0.0, 0.0),
            dyn_amplitude=dyn_amplitude,
            name="walk",
        )


@dataclass(eq=False)
class SyntheticSession:
    """Generated observations with the parameters that produced them."""
    sequence: MocapSequence
    scans: list[ScanMesh]
    beta: NDArray[np.float64]
    poses: NDArray[np.float64]
    phis: NDArray[np.float64]
    latent: LatentMarkerSet
    noise: float = 0.0
    seed: int = 0
    clean_positions: NDArray[np.float64] = field(default_factory=lambda: np.zeros((0, 0, 3)))

    def __len__(self) -> int:
        return len(self.sequence)


def generate_synthetic_session(
    model: BodyModel,
    beta: ArrayLike,
    script: MotionScript,
    layout: MarkerLayout,
    noise: float = 0.0,
    seed: int = 0,
    hand_mean: ArrayLike | None = None,
) -> SyntheticSession:
    """Simulate markers and scans from known parameters.

    Args:
        model: Body model
        beta: Generating shape
        script: Motion to perform
        layout: Marker placement, attached on the shaped rest mesh
        noise: Standard deviation of isotropic Gaussian marker noise, meters
        seed: Noise seed
        hand_mean: Hand pose used for hand joints

    Raises:
        InvalidScriptError: The script cannot drive the model
    """
    if noise < 0:
        raise InvalidScriptError("noise must be >= 0")
    beta = np.asarray(beta, dtype=np.float64)
    poses = script.poses(model, hand_mean)
    phis = script.dynamics(model)
    latent = attach_latent_markers(layout, model, beta)

    rng = np.random.default_rng(seed)
    clean = np.stack(
        [simulate_marker_array(latent, model, beta, poses[t], phis[t]) for t in range(script.num_frames)]
    )
    observed = clean + rng.normal(0.0, noise, size=clean.shape) if noise > 0 else clean.copy()
    scans = [
        ScanMesh(surface(model, beta, poses[t], phis[t]), model.faces, time_index=t)
        for t in range(script.num_frames)
    ]
    sequence = MocapSequence(
        latent.labels,
        observed,
        script.frame_rate,
        units="m",
        source={"name": script.name, "seed": str(seed)},
    )
    logger.debug(f"Generated {script.num_frames} frames of '{script.name}' with noise {noise}")
    return SyntheticSession(
        sequence=sequence,
        scans=scans,
        beta=beta,
        poses=poses,
        phis=phis,
        latent=latent,
        noise=noise,
        seed=seed,
        clean_positions=clean,
    )
