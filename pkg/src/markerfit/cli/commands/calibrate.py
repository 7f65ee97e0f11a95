"""Calibrate command: subject shape and latent markers from a few frames."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer
from rich import box
from rich.table import Table

from ...core.stage_one import StageIResult, fit_shape_stage, select_calibration_frames
from ...utils.calibration_files import save_calibration
from ...utils.exceptions import MarkerFitError
from ...utils.logging_setup import configure_logging
from ..console import console, fail, progress_reporter
from ..factory import RunFactory, parse_weight_overrides

logger = logging.getLogger(__name__)


def calibrate(
    inputs: Optional[list[str]] = typer.Argument(None, help="Marker files or globs (.c3d, .json)"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Run config file (TOML, YAML or JSON)"),
    model: Optional[str] = typer.Option(None, "--model", "-m", help="Body model manifest"),
    layout: Optional[str] = typer.Option(None, "--layout", "-l", help="Marker layout file"),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="Output directory"),
    calibration: Optional[str] = typer.Option(None, "--calibration", help="Calibration file to write"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Frame selection seed"),
    frames: Optional[int] = typer.Option(None, "--frames", "-n", help="Number of calibration frames"),
    hands: Optional[bool] = typer.Option(None, "--hands/--no-hands", help="Fit hand poses when hand markers exist"),
    weights: Optional[list[str]] = typer.Option(None, "--weights", "-w", help="Weight override KEY=VAL, repeatable"),
    frame_rate: Optional[float] = typer.Option(None, "--frame-rate", help="Override the input frame rate (Hz)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="No progress bar"),
) -> None:
    """Estimate body shape and marker placement from randomly chosen frames.

    Examples:
        markerfit calibrate data/*.c3d -m model/toy-tube.json -l layout.yaml -o out
        markerfit calibrate -c run.toml --frames 20 --weights shape=2.5
    """
    configure_logging(verbose)
    try:
        factory = RunFactory.from_options(
            config,
            inputs=inputs or None,
            model=model,
            layout=layout,
            out=out,
            calibration=calibration,
            seed=seed,
            frames=frames,
            hands=hands,
            weights=parse_weight_overrides(weights) if weights else None,
            frame_rate=frame_rate,
        )
        run = factory.config
        body, stats, digest = factory.load_model()
        marker_layout = factory.load_layout()
        loaded = factory.load_sequences(marker_layout)
        sequences = [sequence for _, sequence in loaded]

        if run.frames == 1:
            logger.warning("Calibrating from a single frame; shape is poorly constrained")
        refs = select_calibration_frames(sequences, run.frames, run.seed)
        chosen = [sequences[ref.sequence].frame(ref.frame) for ref in refs]
        console.print(
            f"[dim]Calibrating on {len(chosen)} frames from {len(sequences)} sequences "
            f"with {len(marker_layout)} markers[/dim]"
        )

        with progress_reporter(not quiet) as progress:
            result = fit_shape_stage(
                chosen,
                marker_layout,
                body,
                stats,
                final_weights=factory.stage_one_weights(),
                options=factory.solver_options(verbose),
                hands=run.hands,
                progress=progress,
            )

        path = factory.calibration_path()
        save_calibration(
            path,
            result,
            body,
            model_hash=digest,
            seed=run.seed,
            frames=refs,
            sources=[str(p) for p, _ in loaded],
        )
    except (MarkerFitError, OSError) as e:
        fail(e)

    _print_summary(result)
    console.print(f"[green]✓ Calibration written to {path}[/green]")


def _print_summary(result: StageIResult) -> None:
    table = Table(title="Calibration", box=box.ROUNDED)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")
    rms = result.marker_rms * 1000.0
    table.add_row("Frames", str(result.num_frames))
    table.add_row("Markers", str(len(result.latent)))
    table.add_row("Marker RMS mean (mm)", f"{np.mean(rms):.3f}")
    table.add_row("Marker RMS max (mm)", f"{np.max(rms):.3f}")
    table.add_row("|beta|", f"{np.linalg.norm(result.beta):.4f}")
    table.add_row("Body prior", result.body_prior_mode)
    table.add_row("Hands", "fitted" if result.hands_active else "held")
    console.print(table)

    if result.term_costs:
        costs = Table(title="Final term costs", box=box.ROUNDED)
        costs.add_column("Term", style="cyan")
        costs.add_column("Weight", justify="right")
        costs.add_column("Cost", justify="right")
        for term, cost in result.term_costs.items():
            weight = result.weights.get(term)
            costs.add_row(term, "" if weight is None else f"{weight:g}", f"{cost:.6g}")
        console.print(costs)
