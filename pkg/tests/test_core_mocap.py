"""Tests for marker frames and sequences."""

import numpy as np
import pytest

from markerfit.core.mocap import MarkerFrame, MocapSequence, occlude, select_labels, unit_scale
from markerfit.utils.exceptions import DimensionError


def sequence(num_frames: int = 4) -> MocapSequence:
    positions = np.arange(num_frames * 3 * 3, dtype=float).reshape(num_frames, 3, 3)
    return MocapSequence(("A", "B", "C"), positions, 100.0, "mm", {"name": "trial"})


class TestUnits:
    """Unit names and scale factors."""

    def test_known_units(self):
        """Scales convert to meters, case-insensitively."""
        assert unit_scale("MM") == 0.001
        assert unit_scale("cm") == 0.01
        assert unit_scale(" m ") == 1.0

    def test_unknown_units(self):
        """Imperial units are not supported."""
        with pytest.raises(ValueError, match="inch"):
            unit_scale("inch")


class TestMarkerFrame:
    """One time index of observations."""

    def test_labels_include_missing(self):
        """Visible and missing labels together form the frame's labels."""
        frame = MarkerFrame(3, {"A": [0.0, 1.0, 2.0]}, missing=frozenset({"B"}))
        assert frame.visible_labels == ("A",)
        assert frame.labels == {"A", "B"}

    def test_observed_and_missing(self):
        """A label cannot be both observed and missing."""
        with pytest.raises(ValueError, match="both"):
            MarkerFrame(0, {"A": np.zeros(3)}, missing=frozenset({"A"}))

    def test_non_finite_position(self):
        """Missing markers are declared, not encoded as NaN."""
        with pytest.raises(ValueError, match="finite"):
            MarkerFrame(0, {"A": [np.nan, 0.0, 0.0]})


class TestMocapSequence:
    """Whole captures."""

    def test_partial_observation_is_missing(self):
        """A NaN in any coordinate hides the whole marker."""
        positions = np.ones((2, 2, 3))
        positions[1, 0, 2] = np.nan
        seq = MocapSequence(("A", "B"), positions, 60.0)
        assert np.isnan(seq.positions[1, 0]).all()
        np.testing.assert_array_equal(seq.missing_mask, [[False, False], [True, False]])

    def test_frame_view(self):
        """Frames list the missing labels."""
        seq = occlude(sequence(), ["B"], frames=[2])
        frame = seq.frame(2)
        assert frame.time_index == 2
        assert frame.missing == {"B"}
        np.testing.assert_array_equal(frame.positions["C"], seq.positions[2, 2])

    def test_shape_mismatch(self):
        """Position columns must match the labels."""
        with pytest.raises(DimensionError):
            MocapSequence(("A",), np.zeros((3, 2, 3)), 100.0)

    def test_duplicate_labels(self):
        """Labels are unique."""
        with pytest.raises(ValueError, match="unique"):
            MocapSequence(("A", "A"), np.zeros((1, 2, 3)), 100.0)

    @pytest.mark.parametrize("rate", [0.0, -1.0, float("inf"), float("nan")])
    def test_frame_rate_positive(self, rate):
        """Zero, negative and non-finite frame rates are rejected."""
        with pytest.raises(ValueError, match="frame_rate"):
            MocapSequence(("A",), np.zeros((1, 1, 3)), rate)

    def test_positions_read_only(self):
        """Sequences are immutable."""
        with pytest.raises(ValueError):
            sequence().positions[0, 0, 0] = 1.0

    def test_from_frames(self):
        """Frames rebuild the sequence they came from."""
        original = occlude(sequence(), ["A"], frames=[0, 3])
        rebuilt = MocapSequence.from_frames(original.labels, original.frames, 100.0, "mm")
        np.testing.assert_array_equal(rebuilt.missing_mask, original.missing_mask)
        np.testing.assert_array_equal(
            np.nan_to_num(rebuilt.positions), np.nan_to_num(original.positions)
        )

    def test_name(self):
        """The name comes from the provenance."""
        assert sequence().name == "trial"
        assert MocapSequence(("A",), np.zeros((1, 1, 3)), 1.0).name == "sequence"


class TestEditing:
    """Occlusion and label selection."""

    def test_occlude_all_frames(self):
        """Without frames, the marker disappears everywhere."""
        seq = occlude(sequence(), ["C"])
        assert seq.missing_mask[:, 2].all()
        assert not seq.missing_mask[:, :2].any()

    def test_occlude_unknown(self):
        """Unknown labels are a KeyError."""
        with pytest.raises(KeyError):
            occlude(sequence(), ["Z"])

    def test_select_labels_keeps_sequence_order(self):
        """Selection order does not reorder the columns."""
        seq = select_labels(sequence(), ["C", "A", "Z"])
        assert seq.labels == ("A", "C")
        np.testing.assert_array_equal(seq.positions[:, 1], sequence().positions[:, 2])
        assert seq.units == "mm"
