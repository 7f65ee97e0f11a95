"""Tests for config document loading and atomic writes."""

import json

import pytest

from markerfit.models import RunConfig
from markerfit.utils.exceptions import ConfigError
from markerfit.utils.yaml_utils import (
    atomic_write_text,
    load_document,
    load_run_config,
    load_yaml,
    parse_document,
    save_json,
    save_yaml,
)


class TestYamlUtils:
    """Test YAML loading and saving."""

    def test_load_save_yaml_roundtrip(self, tmp_path):
        """Saving and loading YAML preserves data and key order."""
        data = {"model": "toy.json", "weights": {"shape": 2.5, "data": 600.0}, "inputs": ["a.c3d"]}
        path = tmp_path / "run.yaml"
        save_yaml(path, data)
        loaded = load_yaml(path)
        assert loaded == data
        assert list(loaded["weights"]) == ["shape", "data"]

    def test_load_nonexistent_file(self, tmp_path):
        """Loading a missing file raises ConfigError."""
        with pytest.raises(ConfigError) as exc_info:
            load_yaml(tmp_path / "nonexistent.yaml")
        assert "not found" in str(exc_info.value).lower()

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("model: [unclosed\n")
        with pytest.raises(ConfigError) as exc_info:
            load_yaml(path)
        assert "Invalid YAML" in str(exc_info.value)

    def test_top_level_must_be_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- a\n- b\n")
        with pytest.raises(ConfigError) as exc_info:
            load_yaml(path)
        assert "mapping" in str(exc_info.value)

    def test_empty_file(self, tmp_path):
        """An empty document is an empty mapping."""
        path = tmp_path / "empty.yaml"
        path.write_text("")
        assert load_yaml(path) == {}

    def test_save_with_comment(self, tmp_path):
        """Saving YAML with a header comment."""
        path = tmp_path / "test.yaml"
        save_yaml(path, {"name": "test"}, comment="This is a test file")
        content = path.read_text()
        assert content.startswith("# This is a test file")
        assert load_yaml(path) == {"name": "test"}


class TestConfigDocuments:
    """YAML, JSON and TOML run configs."""

    def test_formats_agree(self, tmp_path):
        """The three formats load the same run config."""
        (tmp_path / "run.toml").write_text(
            'model = "toy.json"\nframes = 8\n\n[weights]\nshape = 2.5\n\n[solver]\nmaxIterations = 50\n'
        )
        (tmp_path / "run.yaml").write_text(
            "model: toy.json\nframes: 8\nweights:\n  shape: 2.5\nsolver:\n  maxIterations: 50\n"
        )
        (tmp_path / "run.json").write_text(
            json.dumps({"model": "toy.json", "frames": 8, "weights": {"shape": 2.5}, "solver": {"maxIterations": 50}})
        )
        configs = [load_run_config(tmp_path / name) for name in ("run.toml", "run.yaml", "run.json")]
        assert configs[0] == configs[1] == configs[2]
        assert configs[0].solver.max_iterations == 50
        assert configs[0].weights == {"shape": 2.5}

    def test_unsupported_suffix(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[x]\n")
        with pytest.raises(ConfigError) as exc_info:
            load_document(path)
        assert "unsupported config format" in str(exc_info.value)

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("model = \n")
        with pytest.raises(ConfigError) as exc_info:
            load_document(path)
        assert "Invalid TOML" in str(exc_info.value)

    def test_error_names_source_and_field(self):
        """Validation errors carry the source and the offending field."""
        with pytest.raises(ConfigError) as exc_info:
            parse_document(RunConfig, {"jobs": 0}, "run.toml")
        assert str(exc_info.value).startswith("run.toml: jobs:")
        assert exc_info.value.details["errors"]

    def test_unknown_key(self, tmp_path):
        """Misspelled settings are rejected."""
        path = tmp_path / "run.yaml"
        path.write_text("modle: toy.json\n")
        with pytest.raises(ConfigError) as exc_info:
            load_run_config(path)
        assert "modle" in str(exc_info.value)


class TestAtomicWrites:
    """Outputs are replaced in one step."""

    def test_creates_parents_and_leaves_no_temp(self, tmp_path):
        path = tmp_path / "out" / "deep" / "result.txt"
        atomic_write_text(path, "first")
        atomic_write_text(path, "second")
        assert path.read_text() == "second"
        assert [p.name for p in path.parent.iterdir()] == ["result.txt"]

    def test_json_allows_nan(self, tmp_path):
        """Skipped frames are written as NaN."""
        path = tmp_path / "rows.json"
        save_json(path, {"rms": float("nan")})
        assert "NaN" in path.read_text()
