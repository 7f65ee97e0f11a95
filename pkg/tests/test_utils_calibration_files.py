"""Tests for calibration files."""

import json

import numpy as np
import pytest

from markerfit.core.body_model import PoseVector
from markerfit.core.stage_one import FrameRef, StageIResult
from markerfit.utils.calibration_files import load_calibration, save_calibration
from markerfit.utils.exceptions import CalibrationFileError


@pytest.fixture
def result(walk_session):
    return StageIResult(
        beta=walk_session.beta,
        latent=walk_session.latent,
        poses=[PoseVector.from_array(walk_session.poses[t]) for t in (0, 5)],
        marker_rms=np.array([0.001, 0.002]),
        term_costs={"data": 0.5, "shape": 0.25},
        weights={"data": 862.5, "shape": 1.25},
    )


@pytest.fixture
def saved(tmp_path, result, toy_model):
    path = tmp_path / "calibration.json"
    save_calibration(
        path,
        result,
        toy_model,
        model_hash="abc123",
        seed=7,
        frames=[FrameRef(0, 0), FrameRef(1, 5)],
        sources=["walk.c3d", "bend.json"],
    )
    return path


class TestCalibrationRoundTrip:
    """Save then load a calibration."""

    def test_result_survives(self, saved, result, toy_model):
        """Shape, latent markers and per-frame values come back."""
        loaded, _ = load_calibration(saved, toy_model)
        assert np.allclose(loaded.beta, result.beta)
        assert loaded.latent.labels == result.latent.labels
        for original, back in zip(result.latent, loaded.latent):
            assert back.anchor_face == original.anchor_face
            assert np.allclose(back.anchor_bary, original.anchor_bary)
            assert np.allclose(back.rest_offset, original.rest_offset)
            assert back.target_distance == pytest.approx(original.target_distance)
        assert len(loaded.poses) == 2
        assert np.allclose(loaded.poses[1].to_array(), result.poses[1].to_array())
        assert np.allclose(loaded.marker_rms, [0.001, 0.002])
        assert loaded.term_costs == {"data": 0.5, "shape": 0.25}

    def test_metadata(self, saved, toy_model):
        """Model hash, seed and frame sources are recorded."""
        _, document = load_calibration(saved, toy_model)
        assert document.model_hash == "abc123"
        assert document.seed == 7
        assert [(f.sequence, f.frame, f.source) for f in document.frames] == [
            (0, 0, "walk.c3d"),
            (1, 5, "bend.json"),
        ]

    def test_nearest_vertex_recorded(self, saved, toy_model):
        """Every marker names a vertex of its anchor triangle."""
        _, document = load_calibration(saved, toy_model)
        for marker in document.markers:
            assert marker.nearest_vertex in toy_model.faces[marker.face]

    def test_camel_case_on_disk(self, saved):
        """Fields are written with camelCase keys."""
        data = json.loads(saved.read_text())
        assert "modelHash" in data and "markerRms" in data
        assert "initPosition" in data["markers"][0]

    def test_without_model(self, saved):
        """Loading without a model skips the model checks."""
        loaded, _ = load_calibration(saved)
        assert len(loaded.latent) == 32


class TestCalibrationErrors:
    """Invalid or mismatched calibration files."""

    def test_missing_file(self, tmp_path):
        """A missing file is reported."""
        with pytest.raises(CalibrationFileError) as exc_info:
            load_calibration(tmp_path / "absent.json")
        assert "not found" in str(exc_info.value)

    def test_not_json(self, tmp_path):
        """Unparseable content is reported."""
        path = tmp_path / "calibration.json"
        path.write_text("{")
        with pytest.raises(CalibrationFileError) as exc_info:
            load_calibration(path)
        assert "unreadable" in str(exc_info.value)

    def test_beta_length(self, saved, toy_model):
        """The shape vector must match the model."""
        data = json.loads(saved.read_text())
        data["beta"].append(0.0)
        saved.write_text(json.dumps(data))
        with pytest.raises(CalibrationFileError) as exc_info:
            load_calibration(saved, toy_model)
        assert "beta has 5 coefficients" in str(exc_info.value)

    def test_face_outside_mesh(self, saved, toy_model):
        """Anchor faces must exist on the model."""
        data = json.loads(saved.read_text())
        data["markers"][0]["face"] = int(toy_model.faces.shape[0])
        saved.write_text(json.dumps(data))
        with pytest.raises(CalibrationFileError) as exc_info:
            load_calibration(saved, toy_model)
        assert "outside the model mesh" in str(exc_info.value)

    def test_pose_rms_lengths(self, saved):
        """Each calibration pose has one RMS value."""
        data = json.loads(saved.read_text())
        data["markerRms"] = [0.001]
        saved.write_text(json.dumps(data))
        with pytest.raises(CalibrationFileError):
            load_calibration(saved)

    def test_invalid_barycentric(self, saved):
        """Barycentric coordinates must sum to one."""
        data = json.loads(saved.read_text())
        data["markers"][0]["barycentric"] = [0.5, 0.5, 0.5]
        saved.write_text(json.dumps(data))
        with pytest.raises(CalibrationFileError):
            load_calibration(saved)
