"""Fit command: per-frame pose and soft tissue for a batch of sequences.

Sequences run concurrently up to ``--jobs``. A failing sequence is
reported and the batch continues; the exit code says whether everything,
something or nothing was fitted.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import typer
from rich import box
from rich.markup import escape
from rich.table import Table

from ...core.archive import FitArchive
from ...core.body_model import BodyModel
from ...core.evaluation import fitted_mesh
from ...core.markers import MarkerLayout
from ...core.priors import PriorStats
from ...core.progress import ProgressCallback
from ...core.stage_one import StageIResult
from ...core.stage_two import StageTwoConfig, fit_sequence
from ...utils.archive_files import archive_path, write_archive
from ...utils.calibration_files import load_calibration
from ...utils.exceptions import ConfigError, MarkerFitError, SolverError
from ...utils.logging_setup import configure_logging
from ...utils.mesh_files import write_mesh
from ..console import EXIT_OK, EXIT_PARTIAL, console, exit_code_for, fail, progress_reporter
from ..factory import RunFactory, parse_weight_overrides

logger = logging.getLogger(__name__)


@dataclass
class SequenceOutcome:
    """Result of one input of the batch."""
    path: Path
    archive: FitArchive | None = None
    output: Path | None = None
    error: MarkerFitError | OSError | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class BatchFit:
    """Everything one sequence fit needs, shared by the worker threads."""
    factory: RunFactory
    layout: MarkerLayout
    stage1: StageIResult
    model: BodyModel
    stats: PriorStats
    config: StageTwoConfig
    digest: str
    export_mesh: bool = False
    progress: ProgressCallback | None = None

    def run(self, path: Path) -> SequenceOutcome:
        try:
            return self._fit(path)
        except (MarkerFitError, OSError) as e:
            logger.error(f"{path}: {e}")
            return SequenceOutcome(path, error=e)

    def _fit(self, path: Path) -> SequenceOutcome:
        sequence = self.factory.load_sequence(path, self.layout)
        archive = fit_sequence(
            sequence,
            self.stage1,
            self.model,
            self.stats,
            self.config,
            model_hash=self.digest,
            seed=self.factory.config.seed,
            progress=self.progress,
        )
        if archive.num_skipped == archive.num_frames:
            first = next(iter(archive.errors.values()), "no frame could be fitted")
            raise SolverError(f"{sequence.name}: every frame was skipped ({first})")
        out_dir = self.factory.out_dir
        output = archive_path(out_dir, path.stem)
        write_archive(output, archive)
        if self.export_mesh:
            mesh_dir = out_dir / "meshes" / path.stem
            for t in range(archive.num_frames):
                write_mesh(mesh_dir / f"{path.stem}_{t:05d}.obj", fitted_mesh(self.model, archive, t))
            logger.info(f"Exported {archive.num_frames} meshes to {mesh_dir}")
        return SequenceOutcome(path, archive=archive, output=output)


def fit(
    inputs: Optional[list[str]] = typer.Argument(None, help="Marker files or globs (.c3d, .json)"),
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="Run config file (TOML, YAML or JSON)"),
    model: Optional[str] = typer.Option(None, "--model", "-m", help="Body model manifest"),
    layout: Optional[str] = typer.Option(None, "--layout", "-l", help="Marker layout file"),
    calibration: Optional[str] = typer.Option(
        None, "--calibration", help="Calibration file (default OUT/calibration.json)"
    ),
    out: Optional[str] = typer.Option(None, "--out", "-o", help="Output directory"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Seed recorded into the archives"),
    jobs: Optional[int] = typer.Option(None, "--jobs", "-j", help="Sequences fitted concurrently"),
    dynamics: Optional[bool] = typer.Option(None, "--dynamics/--no-dynamics", help="Fit soft-tissue coefficients"),
    hands: Optional[bool] = typer.Option(None, "--hands/--no-hands", help="Fit hand poses when hand markers exist"),
    weights: Optional[list[str]] = typer.Option(None, "--weights", "-w", help="Weight override KEY=VAL, repeatable"),
    weight_profile: Optional[str] = typer.Option(None, "--weight-profile", help="default or hands"),
    frame_rate: Optional[float] = typer.Option(None, "--frame-rate", help="Override the input frame rate (Hz)"),
    export_mesh: Optional[bool] = typer.Option(None, "--export-mesh/--no-export-mesh", help="Write one OBJ per frame"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="No progress bar"),
) -> None:
    """Fit pose and soft tissue to every frame of every input sequence.

    Writes OUT/<name>.archive.json per sequence. Exit code 1 when some
    sequences failed, 2 or 3 when all did.

    Examples:
        markerfit fit data/*.c3d -m model/toy-tube.json -l layout.yaml -o out
        markerfit fit -c run.toml --no-dynamics --jobs 4 --export-mesh
    """
    configure_logging(verbose)
    try:
        factory = RunFactory.from_options(
            config,
            inputs=inputs or None,
            model=model,
            layout=layout,
            calibration=calibration,
            out=out,
            seed=seed,
            jobs=jobs,
            dynamics=dynamics,
            hands=hands,
            weights=parse_weight_overrides(weights) if weights else None,
            weight_profile=weight_profile,
            frame_rate=frame_rate,
            export_mesh=export_mesh,
        )
        run = factory.config
        body, stats, digest = factory.load_model()
        marker_layout = factory.load_layout()
        stage1, document = load_calibration(factory.calibration_path(), body)
        if document.model_hash and document.model_hash != digest:
            logger.warning(
                f"Calibration was made with model {document.model_hash}, fitting with {digest}"
            )
        paths = factory.input_paths()
        _check_unique_stems(paths)
        stage_two = factory.stage_two_config(verbose)
    except (MarkerFitError, OSError) as e:
        fail(e)

    console.print(f"[dim]Fitting {len(paths)} sequences with {run.jobs} jobs[/dim]")
    with progress_reporter(not quiet) as progress:
        batch = BatchFit(
            factory, marker_layout, stage1, body, stats, stage_two, digest, run.export_mesh, progress
        )
        if run.jobs > 1 and len(paths) > 1:
            with ThreadPoolExecutor(max_workers=run.jobs) as pool:
                outcomes = list(pool.map(batch.run, paths))
        else:
            outcomes = [batch.run(path) for path in paths]

    _print_summary(outcomes)
    code = batch_exit_code(outcomes)
    if code != EXIT_OK:
        raise typer.Exit(code=code)


def batch_exit_code(outcomes: list[SequenceOutcome]) -> int:
    """0 when all succeeded, 1 when some failed, the failure's code when all failed."""
    failures = [o for o in outcomes if not o.ok]
    if not failures:
        return EXIT_OK
    if len(failures) < len(outcomes):
        return EXIT_PARTIAL
    return max(exit_code_for(o.error) for o in failures if o.error is not None)


def _check_unique_stems(paths: list[Path]) -> None:
    stems = [p.stem for p in paths]
    clashes = sorted({s for s in stems if stems.count(s) > 1})
    if clashes:
        raise ConfigError(f"inputs share output names: {', '.join(clashes)}")


def _print_summary(outcomes: list[SequenceOutcome]) -> None:
    table = Table(title="Fit summary", box=box.ROUNDED)
    table.add_column("Sequence", style="cyan")
    table.add_column("Frames", justify="right")
    table.add_column("Skipped", justify="right")
    table.add_column("RMS mean (mm)", justify="right")
    table.add_column("q mean", justify="right")
    table.add_column("q max", justify="right")
    table.add_column("Status")

    frames = skipped = 0
    for outcome in outcomes:
        archive = outcome.archive
        if archive is None:
            table.add_row(outcome.path.name, "-", "-", "-", "-", "-", f"[red]{escape(str(outcome.error))}[/red]")
            continue
        frames += archive.num_frames
        skipped += archive.num_skipped
        table.add_row(
            outcome.path.name,
            str(archive.num_frames),
            str(archive.num_skipped),
            f"{archive.mean_rms * 1000:.3f}",
            f"{np.mean(archive.q):.3f}",
            f"{np.max(archive.q):.3f}",
            f"[green]{outcome.output.name if outcome.output else ''}[/green]",
        )
    console.print(table)
    done = sum(o.ok for o in outcomes)
    console.print(f"{done}/{len(outcomes)} sequences fitted, {frames} frames, {skipped} skipped")
