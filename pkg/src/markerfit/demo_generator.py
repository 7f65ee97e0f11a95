"""Demo data generator.

Builds a toy body model (a capped tube with a four-joint spine and optional
hand joints), a 32-marker layout on it, and synthetic sessions with
ground-truth scans, then writes everything in the on-disk formats every
command reads:

    model/toy-tube.json (+ blobs)   body model and priors
    layout.yaml                     marker layout
    sequences/walk.c3d, bend.json   marker sequences
    scans/walk/scan_*.obj           ground-truth surfaces of walk
    truth.json                      generating shape and poses
    run.toml, search.yaml           example configs
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray
from scipy import sparse

from .core.body_model import BodyModel, JointRole
from .core.markers import LayoutEntry, MarkerLayout
from .core.priors import PriorStats
from .core.synthetic import JointWave, MotionScript, TranslationStep, generate_synthetic_session
from .models import MotionDocument
from .utils.c3d import save_c3d
from .utils.exceptions import ConfigError
from .utils.layout_files import save_layout
from .utils.marker_json import save_json_markers
from .utils.mesh_files import save_scans
from .utils.model_files import model_hash, save_model
from .utils.yaml_utils import atomic_write_text, save_json, save_yaml

RING_SPACING = 0.1
RING_COUNT = 17
RING_SIZE = 8
RADIUS = 0.15
JOINT_HEIGHTS = (0.0, 0.4, 0.8, 1.2)
BONE_HALF_LENGTH = 0.4
MARKER_BANDS = (1, 3, 5, 7, 9, 11, 13, 15)
MARKER_SEGMENTS = (0, 2, 4, 6)
MARKER_DIRECTIONS = ("E", "N", "W", "S")
HAND_RINGS_FROM = 14
LEFT_SEGMENTS = (3, 4, 5)
RIGHT_SEGMENTS = (7, 0, 1)
HAND_WEIGHT = 0.7


def build_toy_model(
    num_shape: int = 4,
    num_dyn: int = 2,
    hands: bool = False,
    name: str = "toy-tube",
) -> tuple[BodyModel, PriorStats]:
    """Toy tube model with unit-variance priors.

    Rings of 8 vertices every 10 cm up to 1.6 m, radius 15 cm, closed by
    two cap vertices. Joints sit at 0, 0.4, 0.8 and 1.2 m; with ``hands``
    two extra joints drive the left and right halves of the top 20 cm.
    """
    template, faces = _tube()
    n = template.shape[0]
    heights = template[:, 2]
    radial = np.zeros_like(template)
    radial[:, :2] = template[:, :2] / RADIUS

    roles = [JointRole.ROOT] + [JointRole.BODY] * (len(JOINT_HEIGHTS) - 1)
    parents = [-1] + list(range(len(JOINT_HEIGHTS) - 1))
    names = ["pelvis", "spine", "chest", "neck"]
    if hands:
        roles += [JointRole.HAND_LEFT, JointRole.HAND_RIGHT]
        parents += [3, 3]
        names += ["hand_left", "hand_right"]
    k = len(roles)

    centers = np.array(JOINT_HEIGHTS) + 0.5 * BONE_HALF_LENGTH
    weights = np.zeros((n, k))
    weights[:, : len(JOINT_HEIGHTS)] = np.clip(
        1.0 - np.abs(heights[:, None] - centers[None, :]) / BONE_HALF_LENGTH, 0.0, None
    )
    weights[heights < centers[0], 0] = 1.0
    weights /= weights.sum(axis=1, keepdims=True)

    regressor = np.zeros((k, n))
    for j, z in enumerate(JOINT_HEIGHTS):
        ring = int(round(z / RING_SPACING))
        regressor[j, ring * RING_SIZE : (ring + 1) * RING_SIZE] = 1.0 / RING_SIZE
    if hands:
        for j, segments in ((4, LEFT_SEGMENTS), (5, RIGHT_SEGMENTS)):
            members = [r * RING_SIZE + s for r in range(HAND_RINGS_FROM, RING_COUNT) for s in segments]
            weights[members] *= 1.0 - HAND_WEIGHT
            weights[members, j] = HAND_WEIGHT
            ring = [HAND_RINGS_FROM * RING_SIZE + s for s in segments]
            regressor[j, ring] = 1.0 / len(ring)

    shape_basis = np.zeros((n, 3, num_shape))
    profiles = [
        0.05 * radial,
        0.05 * np.outer(heights / 1.6, [0.0, 0.0, 1.0]),
        0.05 * radial * (heights / 1.6)[:, None],
        0.03 * radial * np.array([0.0, 1.0, 0.0]),
    ]
    for c in range(num_shape):
        if c < len(profiles):
            shape_basis[:, :, c] = profiles[c]
        else:
            shape_basis[:, :, c] = 0.02 * radial * np.cos((c - 2) * np.pi * heights / 1.6)[:, None]

    pose_basis = np.zeros((n, 3, 9 * (k - 1)))
    for j in range(1, len(JOINT_HEIGHTS)):
        bump = np.exp(-(((heights - JOINT_HEIGHTS[j]) / 0.1) ** 2))
        pose_basis[:, :, 9 * (j - 1)] = 0.02 * radial * bump[:, None]

    dyn_basis = np.zeros((n, 3, num_dyn))
    for d in range(num_dyn):
        center = 0.3 + (0.4 * d) % 1.2
        bump = np.exp(-(((heights - center) / 0.15) ** 2))
        direction = radial if d % 2 == 0 else np.outer(np.ones(n), [0.0, 0.0, 1.0])
        dyn_basis[:, :, d] = 0.01 * direction * bump[:, None]

    model = BodyModel(
        template_vertices=template,
        faces=faces,
        parents=np.array(parents),
        skin_weights=weights,
        joint_regressor=sparse.csr_matrix(regressor),
        shape_basis=shape_basis,
        pose_basis=pose_basis,
        dyn_basis=dyn_basis,
        joint_roles=tuple(roles),
        joint_names=tuple(names),
        name=name,
    )
    return model, PriorStats.default(model)


def build_toy_layout(offset: float = 0.0095) -> MarkerLayout:
    """32 markers: four per marker band, at the centroid of a band triangle."""
    third = 1.0 / 3.0
    entries = []
    for band in MARKER_BANDS:
        for segment, direction in zip(MARKER_SEGMENTS, MARKER_DIRECTIONS):
            entries.append(
                LayoutEntry(
                    label=f"{direction}{band:02d}",
                    face=_band_face(band, segment),
                    barycentric=(third, third, third),
                    offset=offset,
                )
            )
    return MarkerLayout(tuple(entries), name="toy-32")


def toy_beta(model: BodyModel, seed: int = 0, scale: float = 0.8) -> NDArray[np.float64]:
    """A plausible subject shape."""
    return scale * np.random.default_rng(seed).standard_normal(model.num_shape)


def motion_script(document: MotionDocument) -> MotionScript:
    return MotionScript(
        num_frames=document.num_frames,
        frame_rate=document.frame_rate,
        waves=tuple(
            JointWave(w.joint, w.axis, w.amplitude, w.frequency, w.phase, w.offset)
            for w in document.waves
        ),
        root_start=document.root_start,
        root_velocity=document.root_velocity,
        steps=tuple(TranslationStep(s.frame, s.offset) for s in document.steps),
        dyn_amplitude=document.dyn_amplitude,
        dyn_frequency=document.dyn_frequency,
        name=document.name,
    )


def bend_script(num_frames: int = 40, frame_rate: float = 60.0) -> MotionScript:
    """Forward bend of the spine with a sideways step halfway."""
    return MotionScript(
        num_frames=num_frames,
        frame_rate=frame_rate,
        waves=(
            JointWave(joint=1, axis=1, amplitude=0.25, frequency=0.75),
            JointWave(joint=2, axis=1, amplitude=0.2, frequency=0.75, phase=0.3),
            JointWave(joint=3, axis=0, amplitude=0.15, frequency=1.5),
        ),
        root_start=(0.0, 0.0, 0.05),
        steps=(TranslationStep(frame=num_frames // 2, offset=(0.0, 0.02, 0.0)),),
        dyn_amplitude=0.5,
        name="bend",
    )


@dataclass
class DemoFiles:
    """Paths written by ``generate_demo``."""
    root: Path
    model: Path
    layout: Path
    sequences: list[Path] = field(default_factory=list)
    scans: Path | None = None
    truth: Path | None = None
    run_config: Path | None = None
    search: Path | None = None


def generate_demo(
    output_dir: Path,
    *,
    frames: int = 60,
    hands: bool = False,
    seed: int = 0,
    noise: float = 0.0,
    scan_every: int = 10,
    motion: MotionDocument | None = None,
) -> DemoFiles:
    """Write a complete demo data set under ``output_dir``.

    ``motion`` replaces the built-in walk; its frame count wins over ``frames``.

    Raises:
        ConfigError: Fewer than two frames requested
        InvalidScriptError: The motion cannot drive the toy model
    """
    if motion is not None:
        frames = motion.num_frames
    if frames < 2:
        raise ConfigError("the demo needs at least two frames")
    root = Path(output_dir)
    model, stats = build_toy_model(hands=hands)
    layout = build_toy_layout()
    beta = toy_beta(model, seed)

    files = DemoFiles(root=root, model=root / "model" / f"{model.name}.json", layout=root / "layout.yaml")
    save_model(files.model, model, stats)
    save_layout(files.layout, layout)

    script = motion_script(motion) if motion is not None else MotionScript.walk(
        model, num_frames=frames, dyn_amplitude=0.5
    )
    walk = generate_synthetic_session(
        model, beta, script, layout, noise, seed,
        hand_mean=stats.hand_mean_pose,
    )
    bend = generate_synthetic_session(
        model, beta, bend_script(max(frames * 2 // 3, 1)), layout, noise, seed + 1,
        hand_mean=stats.hand_mean_pose,
    )
    sequences = root / "sequences"
    save_c3d(sequences / "walk.c3d", walk.sequence)
    save_json_markers(sequences / "bend.json", bend.sequence)
    files.sequences = [sequences / "walk.c3d", sequences / "bend.json"]

    files.scans = root / "scans" / "walk"
    save_scans(files.scans, walk.scans[:: max(scan_every, 1)])

    files.truth = root / "truth.json"
    save_json(
        files.truth,
        {
            "modelHash": model_hash(model, stats),
            "seed": seed,
            "noise": noise,
            "beta": beta.tolist(),
            "walk": {"poses": walk.poses.tolist(), "phis": walk.phis.tolist()},
            "bend": {"poses": bend.poses.tolist(), "phis": bend.phis.tolist()},
        },
    )

    files.run_config = root / "run.toml"
    atomic_write_text(
        files.run_config,
        "\n".join(
            [
                f'model = "{files.model.as_posix()}"',
                f'layout = "{files.layout.as_posix()}"',
                f'inputs = ["{sequences.as_posix()}/*"]',
                f'out = "{(root / "out").as_posix()}"',
                f"seed = {seed}",
                "frames = 12",
                "",
                "[solver]",
                "maxIterations = 100",
                "",
            ]
        ),
    )
    files.search = root / "search.yaml"
    half = frames // 2
    scanned = [scan.time_index for scan in walk.scans[:: max(scan_every, 1)]]
    validation = [t for t in scanned if t >= half] or scanned[-1:]
    train = [t for t in range(half) if t not in validation] or [t for t in range(frames) if t not in validation]
    save_yaml(
        files.search,
        {
            "mode": "line",
            "stage": "calibrate",
            "term": "shape",
            "logGrid": {"center": 1.25, "decades": 1.0, "points": 3},
            "trials": 2,
            "seed": seed,
            "split": {"train": train, "validation": validation},
            "model": files.model.as_posix(),
            "layout": files.layout.as_posix(),
            "sequence": (sequences / "walk.c3d").as_posix(),
            "scans": files.scans.as_posix(),
            "sampleCount": 2000,
            "calibrationFrames": min(12, len(train)),
        },
        comment="Line search over the calibration shape weight",
    )
    return files


def _tube() -> tuple[NDArray[np.float64], NDArray[np.int64]]:
    angles = 2.0 * np.pi * np.arange(RING_SIZE) / RING_SIZE
    rings = [
        np.column_stack([RADIUS * np.cos(angles), RADIUS * np.sin(angles), np.full(RING_SIZE, r * RING_SPACING)])
        for r in range(RING_COUNT)
    ]
    bottom = RING_COUNT * RING_SIZE
    top = bottom + 1
    vertices = np.vstack(rings + [[0.0, 0.0, 0.0], [0.0, 0.0, (RING_COUNT - 1) * RING_SPACING]])

    faces = []
    for band in range(RING_COUNT - 1):
        for s in range(RING_SIZE):
            a = band * RING_SIZE + s
            c = band * RING_SIZE + (s + 1) % RING_SIZE
            d = c + RING_SIZE
            e = a + RING_SIZE
            faces += [(a, c, d), (a, d, e)]
    last = (RING_COUNT - 1) * RING_SIZE
    for s in range(RING_SIZE):
        nxt = (s + 1) % RING_SIZE
        faces.append((bottom, nxt, s))
        faces.append((top, last + s, last + nxt))
    return vertices, np.array(faces, dtype=np.int64)


def _band_face(band: int, segment: int) -> int:
    return 2 * (band * RING_SIZE + segment)
