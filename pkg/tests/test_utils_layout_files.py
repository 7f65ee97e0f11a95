"""Tests for marker layout files."""

import pytest
import yaml

from markerfit.core.markers import LayoutEntry, MarkerLayout
from markerfit.utils.exceptions import LayoutError
from markerfit.utils.layout_files import load_layout, save_layout


def small_layout():
    return MarkerLayout(
        (
            LayoutEntry("C7", vertex=12, offset=0.0095),
            LayoutEntry("STRN", face=40, barycentric=(0.2, 0.3, 0.5), offset=0.012),
        ),
        name="small",
    )


class TestLayoutFiles:
    """Layout documents in YAML and JSON."""

    @pytest.mark.parametrize("suffix", [".yaml", ".json"])
    def test_round_trip(self, tmp_path, suffix):
        """Anchors, labels and offsets come back in order."""
        path = tmp_path / f"layout{suffix}"
        save_layout(path, small_layout())
        layout = load_layout(path)
        assert layout.name == "small"
        assert layout.labels == ("C7", "STRN")
        first, second = layout.entries
        assert first.vertex == 12 and first.face is None
        assert second.face == 40
        assert second.barycentric == pytest.approx((0.2, 0.3, 0.5))
        assert second.offset == pytest.approx(0.012)

    def test_offsets_in_millimeters_on_disk(self, tmp_path):
        """Offsets are written in millimeters."""
        path = tmp_path / "layout.yaml"
        save_layout(path, small_layout())
        data = yaml.safe_load(path.read_text())
        assert data["markers"][0]["offsetMm"] == pytest.approx(9.5)
        assert path.read_text().startswith("# Marker layout 'small'")

    def test_default_offset(self, tmp_path):
        """Markers without an offset sit 9.5 mm off the skin."""
        path = tmp_path / "layout.yaml"
        path.write_text("markers:\n  - label: LASI\n    vertex: 3\n")
        layout = load_layout(path)
        assert layout.entries[0].offset == pytest.approx(0.0095)

    def test_toy_layout(self, tmp_path, toy_layout):
        """The demo layout survives a round trip."""
        path = tmp_path / "toy.yaml"
        save_layout(path, toy_layout)
        assert load_layout(path).labels == toy_layout.labels


class TestLayoutErrors:
    """Invalid layout documents."""

    def test_missing_file(self, tmp_path):
        """A missing file is a LayoutError."""
        with pytest.raises(LayoutError) as exc_info:
            load_layout(tmp_path / "absent.yaml")
        assert "not found" in str(exc_info.value).lower()

    def test_duplicate_labels(self, tmp_path):
        """Duplicate labels are rejected by name."""
        path = tmp_path / "layout.yaml"
        path.write_text(
            "markers:\n"
            "  - {label: C7, vertex: 1}\n"
            "  - {label: C7, vertex: 2}\n"
        )
        with pytest.raises(LayoutError) as exc_info:
            load_layout(path)
        assert "duplicate labels: C7" in str(exc_info.value)

    def test_both_anchors(self, tmp_path):
        """A marker cannot have both a vertex and a face."""
        path = tmp_path / "layout.yaml"
        path.write_text("markers:\n  - {label: C7, vertex: 1, face: 2, barycentric: [1, 0, 0]}\n")
        with pytest.raises(LayoutError) as exc_info:
            load_layout(path)
        assert "exactly one of vertex or face" in str(exc_info.value)

    def test_face_needs_barycentric(self, tmp_path):
        """A face anchor without barycentric coordinates is rejected."""
        path = tmp_path / "layout.json"
        path.write_text('{"markers": [{"label": "C7", "face": 2}]}')
        with pytest.raises(LayoutError):
            load_layout(path)

    def test_no_markers(self, tmp_path):
        """A layout needs at least one marker."""
        path = tmp_path / "layout.yaml"
        path.write_text("name: empty\nmarkers: []\n")
        with pytest.raises(LayoutError) as exc_info:
            load_layout(path)
        assert "markers" in str(exc_info.value)
