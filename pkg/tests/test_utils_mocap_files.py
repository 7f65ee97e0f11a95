"""Tests for C3D and JSON marker files."""

import logging

import numpy as np
import pytest

from markerfit.core.mocap import MocapSequence, occlude
from markerfit.utils.c3d import (
    parse_c3d,
    read_c3d,
    save_c3d,
    write_c3d,
)
from markerfit.utils.exceptions import C3DError, FormatError, MarkerJsonError
from markerfit.utils.marker_json import read_json_markers, write_json_markers
from markerfit.utils.mocap_files import expand_inputs, read_sequence, restrict_to_layout, write_sequence


def capture(units: str = "mm") -> MocapSequence:
    rng = np.random.default_rng(0)
    positions = rng.uniform(-1.0, 1.5, size=(5, 3, 3))
    seq = MocapSequence(("LASI", "RASI", "C7"), positions, 120.0, units)
    return occlude(seq, ["RASI"], frames=[1, 2])


class TestC3D:
    """Reading and writing C3D."""

    def test_float_round_trip(self, tmp_path):
        """Positions survive at float32 precision and missing markers stay missing."""
        original = capture()
        path = tmp_path / "trial.c3d"
        save_c3d(path, original)
        loaded = read_c3d(path)
        assert loaded.labels == original.labels
        assert loaded.units == "mm"
        assert loaded.frame_rate == pytest.approx(120.0)
        np.testing.assert_array_equal(loaded.missing_mask, original.missing_mask)
        np.testing.assert_allclose(loaded.positions, original.positions, atol=1e-6, equal_nan=True)
        assert loaded.name == "trial"
        assert loaded.source["format"] == "c3d"

    def test_meters_written_as_millimeters(self, tmp_path):
        """A sequence in meters is stored in millimeters and reads back at the same positions."""
        original = capture(units="m")
        loaded = parse_c3d(write_c3d(original))
        assert loaded.units == "mm"
        np.testing.assert_allclose(loaded.positions, original.positions, atol=1e-6, equal_nan=True)

    def test_short_file(self):
        """Bytes that are not a C3D file are rejected."""
        with pytest.raises(C3DError, match="not a readable C3D file"):
            parse_c3d(b"\x02\x50")

    def test_truncated_data(self):
        """A file cut inside the frame data is rejected."""
        data = write_c3d(capture())
        with pytest.raises(C3DError):
            parse_c3d(data[: len(data) - 512])

    def test_empty_sequence_refused_on_write(self):
        """A sequence without frames is rejected before anything is written."""
        empty = MocapSequence(("A",), np.zeros((0, 1, 3)), 100.0, "mm")
        with pytest.raises(C3DError, match="no frames"):
            write_c3d(empty)

    def test_empty_sequence_leaves_no_file(self, tmp_path):
        """save_c3d does not create a file it cannot read back."""
        empty = MocapSequence(("A",), np.zeros((0, 1, 3)), 100.0, "mm")
        with pytest.raises(C3DError):
            save_c3d(tmp_path / "empty.c3d", empty)
        assert not (tmp_path / "empty.c3d").exists()

    def test_long_label(self):
        """Labels longer than 32 characters cannot be written."""
        seq = MocapSequence(("X" * 33,), np.zeros((1, 1, 3)), 100.0)
        with pytest.raises(C3DError, match="longer than 32"):
            write_c3d(seq)

    def test_too_many_points(self):
        """More than 255 labels cannot be written."""
        labels = tuple(f"M{i}" for i in range(256))
        seq = MocapSequence(labels, np.zeros((1, 256, 3)), 100.0)
        with pytest.raises(C3DError, match="255"):
            write_c3d(seq)

    def test_read_missing_file(self, tmp_path):
        """Unreadable files become format errors naming the path."""
        with pytest.raises(C3DError) as info:
            read_c3d(tmp_path / "absent.c3d")
        assert "absent.c3d" in str(info.value)


class TestMarkerJson:
    """JSON marker documents."""

    def test_round_trip_exact(self):
        """Writing meters and reading back is exact."""
        original = capture(units="m")
        loaded = read_json_markers(write_json_markers(original))
        np.testing.assert_array_equal(loaded.positions, original.positions)
        assert loaded.frame_rate == 120.0

    def test_units_and_nulls(self):
        """Millimeter documents are converted and null means missing."""
        text = '{"fps": 50, "units": "mm", "labels": ["A", "B"], "frames": [[[1, 2, 3], null]]}'
        seq = read_json_markers(text, "walk.json")
        np.testing.assert_allclose(seq.positions[0, 0], [0.001, 0.002, 0.003])
        assert seq.missing_mask[0, 1]
        assert seq.units == "mm"
        assert seq.name == "walk"

    def test_syntax_error_line(self):
        """Malformed JSON reports the line."""
        text = '{\n  "fps": 50,\n  "labels": [\n}'
        with pytest.raises(MarkerJsonError) as info:
            read_json_markers(text, "bad.json")
        assert info.value.line == 4
        assert str(info.value).startswith("bad.json, line 4:")

    def test_schema_error_field_and_line(self):
        """Schema violations name the field and its line."""
        text = '{\n  "labels": ["A"],\n  "fps": -5,\n  "frames": []\n}'
        with pytest.raises(MarkerJsonError) as info:
            read_json_markers(text, "bad.json")
        assert info.value.field == "fps"
        assert info.value.line == 3
        assert "field 'fps'" in str(info.value)

    def test_frame_width(self):
        """Frames need one entry per label."""
        text = '{"fps": 50, "labels": ["A", "B"], "frames": [[[1, 2, 3]]]}'
        with pytest.raises(MarkerJsonError, match="1 entries for 2 labels"):
            read_json_markers(text)

    def test_duplicate_labels(self):
        """Labels are unique."""
        text = '{"fps": 50, "labels": ["A", "A"], "frames": []}'
        with pytest.raises(MarkerJsonError) as info:
            read_json_markers(text)
        assert info.value.field == "labels"

    def test_top_level_array(self):
        """The document is an object."""
        with pytest.raises(MarkerJsonError, match="JSON object"):
            read_json_markers("[1, 2]")


class TestSequenceFiles:
    """Extension dispatch and input globs."""

    def test_convert_keeps_units(self, tmp_path):
        """c3d to json to c3d keeps units, labels and positions."""
        first = tmp_path / "a.c3d"
        save_c3d(first, capture())
        seq = read_sequence(first)
        write_sequence(tmp_path / "a.json", seq)
        again = read_sequence(tmp_path / "a.json")
        assert again.units == "mm"
        write_sequence(tmp_path / "b.c3d", again)
        again_c3d = read_sequence(tmp_path / "b.c3d")
        assert again_c3d.units == "mm"
        assert again_c3d.labels == seq.labels
        np.testing.assert_allclose(again_c3d.positions, seq.positions, atol=1e-6, equal_nan=True)

    def test_unknown_extension(self, tmp_path):
        """Only .c3d and .json are marker files."""
        with pytest.raises(FormatError, match="unsupported"):
            read_sequence(tmp_path / "walk.trc")
        with pytest.raises(FormatError, match="unsupported"):
            write_sequence(tmp_path / "walk.trc", capture())

    def test_expand_inputs(self, tmp_path):
        """Globs are expanded, filtered by extension and deduplicated."""
        for name in ("b.c3d", "a.json", "notes.txt"):
            (tmp_path / name).write_text("")
        pattern = str(tmp_path / "*")
        paths = expand_inputs([pattern, str(tmp_path / "a.json")])
        assert [p.name for p in paths] == ["a.json", "b.c3d"]

    def test_expand_no_match(self, tmp_path):
        """A pattern matching nothing is an error."""
        with pytest.raises(FormatError, match="no .c3d or .json"):
            expand_inputs([str(tmp_path / "*.c3d")])

    def test_restrict_to_layout(self, caplog):
        """Labels the layout does not know are dropped with a warning."""
        with caplog.at_level(logging.WARNING):
            seq = restrict_to_layout(capture(), ("LASI", "C7"))
        assert seq.labels == ("LASI", "C7")
        assert "RASI" in caplog.text
