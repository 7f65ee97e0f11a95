"""Calibration files: subject shape and latent markers from shape calibration."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from pydantic import ValidationError

from ..core.body_model import BodyModel, PoseVector
from ..core.markers import LatentMarker, LatentMarkerSet, nearest_vertices
from ..core.stage_one import FrameRef, StageIResult
from ..models import CalibratedMarker, CalibrationDocument, CalibrationFrame
from .exceptions import AttachmentError, CalibrationFileError
from .yaml_utils import dump_model, save_json

logger = logging.getLogger(__name__)


def calibration_document(
    result: StageIResult,
    model: BodyModel,
    *,
    model_hash: str = "",
    seed: int = 0,
    frames: Sequence[FrameRef] = (),
    sources: Sequence[str] = (),
) -> CalibrationDocument:
    """Describe a calibration, including each marker's nearest rest vertex."""
    nearest = nearest_vertices(result.latent, model, result.beta)
    return CalibrationDocument(
        model_hash=model_hash,
        seed=seed,
        beta=[float(b) for b in result.beta],
        markers=[
            CalibratedMarker(
                label=m.label,
                face=m.anchor_face,
                barycentric=tuple(float(v) for v in m.anchor_bary),
                offset=tuple(float(v) for v in m.rest_offset),
                init_offset=tuple(float(v) for v in m.init_offset),
                init_position=tuple(float(v) for v in m.init_position),
                target_distance=m.target_distance,
                nearest_vertex=int(v),
            )
            for m, v in zip(result.latent, nearest)
        ],
        frames=[
            CalibrationFrame(
                sequence=ref.sequence,
                frame=ref.frame,
                source=sources[ref.sequence] if ref.sequence < len(sources) else "",
            )
            for ref in frames
        ],
        poses=[[float(v) for v in pose.to_array()] for pose in result.poses],
        marker_rms=[float(r) for r in result.marker_rms],
        term_costs=dict(result.term_costs),
        weights=dict(result.weights),
        body_prior_mode=result.body_prior_mode,
        hands_active=result.hands_active,
    )


def save_calibration(path: Path, result: StageIResult, model: BodyModel, **metadata: Any) -> None:
    """Write a calibration as JSON; ``metadata`` goes to ``calibration_document``."""
    save_json(Path(path), dump_model(calibration_document(result, model, **metadata)))


def load_calibration(path: Path, model: BodyModel | None = None) -> tuple[StageIResult, CalibrationDocument]:
    """Read a calibration back into a Stage I result.

    Args:
        path: Calibration JSON file
        model: When given, shape length and anchor faces are checked against it

    Raises:
        CalibrationFileError: Unreadable or invalid file, or a model mismatch
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise CalibrationFileError("calibration file not found", str(path))
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CalibrationFileError(f"unreadable calibration: {e}", str(path))
    try:
        document = CalibrationDocument.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "calibration"
        raise CalibrationFileError(f"{where}: {first['msg']}", str(path))

    if model is not None:
        if len(document.beta) != model.num_shape:
            raise CalibrationFileError(
                f"beta has {len(document.beta)} coefficients, model has {model.num_shape}", str(path)
            )
        faces = max(m.face for m in document.markers)
        if faces >= model.faces.shape[0]:
            raise CalibrationFileError(f"marker face {faces} outside the model mesh", str(path))
        if any(len(p) != model.num_pose_params for p in document.poses):
            raise CalibrationFileError(
                f"calibration poses must have {model.num_pose_params} parameters", str(path)
            )

    try:
        latent = LatentMarkerSet(
            tuple(
                LatentMarker(
                    label=m.label,
                    anchor_face=m.face,
                    anchor_bary=np.array(m.barycentric),
                    rest_offset=np.array(m.offset),
                    init_position=np.array(m.init_position),
                    target_distance=m.target_distance,
                    init_offset=np.array(m.init_offset),
                )
                for m in document.markers
            )
        )
        poses = [PoseVector.from_array(p) for p in document.poses]
    except (ValueError, AttachmentError) as e:
        raise CalibrationFileError(str(e), str(path))
    result = StageIResult(
        beta=np.array(document.beta, dtype=np.float64),
        latent=latent,
        poses=poses,
        marker_rms=np.array(document.marker_rms, dtype=np.float64),
        term_costs=dict(document.term_costs),
        weights=dict(document.weights),
        body_prior_mode=document.body_prior_mode,
        hands_active=document.hands_active,
    )
    logger.debug(f"Loaded calibration {path}: {len(latent)} markers, {len(poses)} frames")
    return result, document
