"""Builds models, layouts, sequences and solver settings from a run config.

Centralizes what calibrate and fit share so both resolve flags and
config files the same way.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Iterable

from ..core.body_model import BodyModel
from ..core.dogleg import SolverOptions
from ..core.energy import STAGE_ONE_FINAL, Term
from ..core.markers import MarkerLayout
from ..core.mocap import MocapSequence
from ..core.priors import PriorStats
from ..core.stage_two import StageTwoConfig
from ..models import RunConfig
from ..utils.exceptions import ConfigError
from ..utils.layout_files import load_layout
from ..utils.mocap_files import expand_inputs, read_sequence, restrict_to_layout
from ..utils.model_files import load_model, model_hash
from ..utils.yaml_utils import load_run_config, parse_document

logger = logging.getLogger(__name__)

CALIBRATION_FILE = "calibration.json"


def parse_weight_overrides(items: Iterable[str]) -> dict[str, float]:
    """Parse repeated ``KEY=VAL`` options into term weights.

    Raises:
        ConfigError: Malformed item, unknown term or negative weight
    """
    weights: dict[str, float] = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"weight override '{item}' is not KEY=VAL")
        term = Term.parse(key)
        try:
            weight = float(value)
        except ValueError:
            raise ConfigError(f"weight override '{item}': '{value}' is not a number") from None
        if weight < 0:
            raise ConfigError(f"weight override '{item}': weights must be >= 0")
        weights[term.value] = weight
    return weights


class RunFactory:
    """Resolved run configuration plus loaders for what it points at.

    Examples:
        factory = RunFactory.from_options(Path("run.toml"), seed=3)
        model, stats, digest = factory.load_model()
        sequences = factory.load_sequences(factory.load_layout())
    """

    def __init__(self, config: RunConfig):
        self.config = config
        self._model: tuple[BodyModel, PriorStats, str] | None = None
        self._layout: MarkerLayout | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> RunFactory:
        return cls(load_run_config(Path(path)))

    @classmethod
    def from_options(cls, config_path: Path | None = None, **flags: Any) -> RunFactory:
        """Merge a config file with command-line flags; flags given win.

        Flags left at None keep the file value. Weight overrides are merged
        per term.

        Raises:
            ConfigError: Invalid config file or flag values
        """
        base = load_run_config(config_path) if config_path else RunConfig()
        overrides = {key: value for key, value in flags.items() if value is not None}
        weights = overrides.pop("weights", None)
        data = {**base.model_dump(), **overrides}
        if weights:
            data["weights"] = {**base.weights, **weights}
        return cls(parse_document(RunConfig, data, config_path or "options"))

    def require(self, name: str) -> str:
        value = getattr(self.config, name)
        if not value:
            raise ConfigError(f"no {name} given (use --{name} or set '{name}' in the config file)")
        return value

    def load_model(self) -> tuple[BodyModel, PriorStats, str]:
        """Body model, priors and model hash; loaded once."""
        if self._model is None:
            model, stats = load_model(Path(self.require("model")))
            self._model = (model, stats, model_hash(model, stats))
            logger.info(f"Model {model.name}: {model.num_vertices} vertices, {model.num_joints} joints")
        return self._model

    def load_layout(self) -> MarkerLayout:
        if self._layout is None:
            self._layout = load_layout(Path(self.require("layout")))
        return self._layout

    def input_paths(self) -> list[Path]:
        if not self.config.inputs:
            raise ConfigError("no input sequences given")
        return expand_inputs(self.config.inputs)

    def load_sequence(self, path: Path, layout: MarkerLayout) -> MocapSequence:
        """Read one input, drop labels unknown to the layout, apply the frame-rate override."""
        sequence = restrict_to_layout(read_sequence(path), layout.labels)
        rate = self.config.frame_rate
        if rate is not None and rate != sequence.frame_rate:
            logger.info(f"{sequence.name}: frame rate {sequence.frame_rate:g} Hz overridden to {rate:g} Hz")
            sequence = MocapSequence(sequence.labels, sequence.positions, rate, sequence.units, sequence.source)
        return sequence

    def load_sequences(self, layout: MarkerLayout) -> list[tuple[Path, MocapSequence]]:
        return [(path, self.load_sequence(path, layout)) for path in self.input_paths()]

    @property
    def out_dir(self) -> Path:
        return Path(self.config.out)

    def calibration_path(self) -> Path:
        """Where calibrate writes and fit reads the calibration."""
        if self.config.calibration:
            return Path(self.config.calibration)
        return self.out_dir / CALIBRATION_FILE

    def term_weights(self) -> dict[Term, float]:
        return {Term.parse(name): value for name, value in self.config.weights.items()}

    def stage_one_weights(self) -> dict[Term, float]:
        """Calibration weights with the overrides that apply to calibration."""
        overrides = self.term_weights()
        ignored = sorted(term.value for term in overrides if term not in STAGE_ONE_FINAL)
        if ignored:
            logger.warning(f"Calibration ignores weights for: {', '.join(ignored)}")
        return {**STAGE_ONE_FINAL, **{t: w for t, w in overrides.items() if t in STAGE_ONE_FINAL}}

    def solver_options(self, verbose: bool = False) -> SolverOptions:
        settings = self.config.solver
        return SolverOptions(
            max_iterations=settings.max_iterations,
            gradient_tolerance=settings.gradient_tolerance,
            step_tolerance=settings.step_tolerance,
            initial_trust_radius=settings.initial_trust_radius,
            max_trust_radius=settings.max_trust_radius,
            verbosity=1 if verbose else 0,
        )

    def stage_two_config(self, verbose: bool = False) -> StageTwoConfig:
        return StageTwoConfig(
            profile=self.config.weight_profile,
            overrides=self.term_weights(),
            dynamics=self.config.dynamics,
            hands=self.config.hands,
            options=self.solver_options(verbose),
        )
