"""Config document loading and atomic file writes.

Config files may be YAML, JSON or TOML; the extension decides. Outputs are
written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import json
import os
import tempfile
import tomllib
from pathlib import Path
from typing import Any, TypeVar

import yaml
from pydantic import BaseModel, ValidationError

from ..models import MotionDocument, RunConfig, SearchDocument
from .exceptions import ConfigError

T = TypeVar("T", bound=BaseModel)

CONFIG_SUFFIXES = (".yaml", ".yml", ".json", ".toml")


def load_yaml(path: Path) -> dict[str, Any]:
    """Load a YAML (or JSON) file as a dictionary.

    Raises:
        ConfigError: If the file is missing, invalid or not a mapping
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            content = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"File not found: {path}")
    except (yaml.YAMLError, UnicodeDecodeError) as e:
        raise ConfigError(f"Invalid YAML in {path}: {e}")
    if content is None:
        return {}
    if not isinstance(content, dict):
        raise ConfigError(f"{path}: expected a mapping at the top level")
    return content


def load_toml(path: Path) -> dict[str, Any]:
    try:
        with open(path, "rb") as f:
            return tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"File not found: {path}")
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}")


def load_document(path: Path) -> dict[str, Any]:
    """Load a config mapping, choosing the parser by extension."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in CONFIG_SUFFIXES:
        raise ConfigError(f"{path}: unsupported config format (use {', '.join(CONFIG_SUFFIXES)})")
    if suffix == ".toml":
        return load_toml(path)
    return load_yaml(path)


def parse_document(model: type[T], data: dict[str, Any], source: Path | str) -> T:
    """Validate a mapping against a schema; errors name the offending field."""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"]) or "document"
        raise ConfigError(f"{source}: {where}: {first['msg']}", {"errors": e.errors()})


def load_run_config(path: Path) -> RunConfig:
    return parse_document(RunConfig, load_document(path), path)


def load_search_document(path: Path) -> SearchDocument:
    return parse_document(SearchDocument, load_document(path), path)


def load_motion_document(path: Path) -> MotionDocument:
    return parse_document(MotionDocument, load_document(path), path)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write bytes to path via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def save_json(path: Path, data: Any) -> None:
    atomic_write_text(path, json.dumps(data, indent=2, allow_nan=True) + "\n")


def save_yaml(path: Path, data: dict[str, Any], comment: str | None = None) -> None:
    """Save a dictionary as YAML, keeping key order."""
    text = yaml.safe_dump(
        data,
        default_flow_style=False,
        allow_unicode=True,
        sort_keys=False,
        width=120,
        indent=2,
    )
    if comment:
        text = f"# {comment}\n#\n{text}"
    atomic_write_text(path, text)


def dump_model(model: BaseModel) -> dict[str, Any]:
    """camelCase, JSON-ready dictionary of a schema instance."""
    return model.model_dump(by_alias=True, mode="json")
