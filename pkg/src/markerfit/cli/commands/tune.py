"""Tune command: weight line searches and component-count sweeps."""

from __future__ import annotations

import csv
import io
import logging
import math
from pathlib import Path
from typing import Any

import typer
from rich import box
from rich.table import Table

from ...core.dogleg import SolverOptions
from ...core.energy import Term
from ...core.tuning import (
    DataSplit,
    FileFamily,
    SearchSpec,
    TruncatedFamily,
    TuningData,
    calibration_objective,
    component_count_sweep,
    line_search,
    sequence_objective,
)
from ...models import SearchDocument
from ...utils.calibration_files import load_calibration
from ...utils.exceptions import MarkerFitError
from ...utils.layout_files import load_layout
from ...utils.logging_setup import configure_logging
from ...utils.mesh_files import load_scans
from ...utils.mocap_files import read_sequence, restrict_to_layout
from ...utils.model_files import load_model
from ...utils.yaml_utils import atomic_write_text, load_search_document, save_json
from ..console import console, fail

logger = logging.getLogger(__name__)


def tune(
    search: Path = typer.Argument(..., help="Search document (YAML, JSON or TOML)"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Directory for tune.json and tune.csv"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Line-search one energy weight, or sweep model component counts.

    Fits on training frames and scores scan-to-model distance on held-out
    frames only.

    Examples:
        markerfit tune search.yaml -o out/tune
    """
    configure_logging(verbose)
    try:
        document = load_search_document(search)
        rows, summary = run_search(document)
        out.mkdir(parents=True, exist_ok=True)
        save_json(out / "tune.json", {**summary, "rows": rows})
        atomic_write_text(out / "tune.csv", rows_to_csv(rows))
    except (MarkerFitError, OSError) as e:
        fail(e)

    _print_rows(rows, summary)
    console.print(f"[green]✓ Results written to {out / 'tune.json'} and {out / 'tune.csv'}[/green]")


def run_search(document: SearchDocument) -> tuple[list[dict[str, Any]], dict[str, Any]]:
    """Execute a search document; returns the score table and a summary."""
    model, stats = load_model(Path(document.model))
    layout = load_layout(Path(document.layout))
    sequence = restrict_to_layout(read_sequence(Path(document.sequence)), layout.labels)
    scans = load_scans(Path(document.scans))
    split_settings = document.split
    if split_settings.train_frames is not None:
        split = DataSplit.leading(len(sequence), split_settings.train_frames)
    else:
        split = DataSplit(tuple(split_settings.train or ()), tuple(split_settings.validation or ()))
    solver = document.solver
    data = TuningData(
        sequence=sequence,
        scans=scans,
        layout=layout,
        split=split,
        sample_count=document.sample_count,
        eval_seed=document.seed,
        calibration_frames=document.calibration_frames,
        options=SolverOptions(
            max_iterations=solver.max_iterations,
            gradient_tolerance=solver.gradient_tolerance,
            step_tolerance=solver.step_tolerance,
            initial_trust_radius=solver.initial_trust_radius,
            max_trust_radius=solver.max_trust_radius,
        ),
    )
    logger.info(f"Tuning on {len(split.train)} training and {len(split.validation)} validation frames")

    if document.mode == "sweep":
        family = FileFamily(document.model_pattern) if document.model_pattern else TruncatedFamily(model, stats)
        sweep = component_count_sweep(family, document.counts, data, document.seed)
        rows = [
            {"shapeDim": r.shape_dim, "dynDim": r.dyn_dim, "score": r.score, "best": r.best} for r in sweep
        ]
        best = next(r for r in sweep if r.best)
        return rows, {"mode": "sweep", "bestShapeDim": best.shape_dim, "bestDynDim": best.dyn_dim}

    term = Term.parse(document.term)
    common: dict[str, Any] = {
        "fixed": {Term.parse(name): value for name, value in document.fixed.items()},
        "stage": document.stage,
        "trials": document.trials,
        "seed": document.seed,
    }
    if document.log_grid is not None:
        grid = document.log_grid
        spec = SearchSpec.log_grid(term, grid.center, grid.decades, grid.points, **common)
    else:
        spec = SearchSpec(term=term, grid=tuple(document.grid or ()), **common)

    if spec.stage == "calibrate":
        fit, score = calibration_objective(data, model, stats)
    else:
        stage1, _ = load_calibration(Path(str(document.calibration)), model)
        fit, score = sequence_objective(data, stage1, model, stats)
    result = line_search(spec, fit, score)
    summary = {
        "mode": "line",
        "stage": spec.stage,
        "term": term.value,
        "best": result.best,
        "bestScore": result.best_row.score,
        "confirmation": result.confirmation,
    }
    return result.table(), summary


def rows_to_csv(rows: list[dict[str, Any]]) -> str:
    if not rows:
        return ""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buffer.getvalue()


def _print_rows(rows: list[dict[str, Any]], summary: dict[str, Any]) -> None:
    table = Table(title=f"Tuning ({summary['mode']})", box=box.ROUNDED)
    if not rows:
        console.print(table)
        return
    for name in rows[0]:
        table.add_column(name, justify="left" if name == "term" else "right")
    for row in rows:
        cells = []
        for value in row.values():
            if isinstance(value, bool):
                cells.append("★" if value else "")
            elif isinstance(value, float):
                cells.append("inf" if math.isinf(value) else f"{value:.4g}")
            else:
                cells.append(str(value))
        table.add_row(*cells)
    console.print(table)
    if summary["mode"] == "line":
        console.print(
            f"Best {summary['term']} = {summary['best']:g}, "
            f"confirmation score {summary['confirmation']:.4f}"
        )
