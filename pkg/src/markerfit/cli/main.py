"""CLI entry point for markerfit."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Optional

import typer
from rich import box
from rich.table import Table

from ..core.evaluation import DEFAULT_SAMPLE_COUNT, EvalReport, evaluate_archive
from ..demo_generator import generate_demo
from ..utils.archive_files import ARCHIVE_SUFFIX, read_archive
from ..utils.exceptions import MarkerFitError
from ..utils.logging_setup import configure_logging
from ..utils.mesh_files import load_scans
from ..utils.mocap_files import read_sequence, write_sequence
from ..utils.model_files import load_model, model_hash
from ..utils.yaml_utils import atomic_write_text, load_motion_document, save_json
from .commands.calibrate import calibrate
from .commands.fit import fit
from .commands.tune import rows_to_csv, tune
from .console import console, fail

app = typer.Typer(help="Body shape, pose and soft-tissue motion from sparse optical markers")

app.command()(calibrate)
app.command()(fit)
app.command()(tune)


@app.command()
def convert(
    source: Path = typer.Argument(..., help="Input marker file (.c3d or .json)"),
    target: Path = typer.Argument(..., help="Output marker file (.c3d or .json)"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Convert marker files between C3D and JSON.

    Examples:
        markerfit convert walk.c3d walk.json
    """
    configure_logging(verbose)
    try:
        sequence = read_sequence(source)
        write_sequence(target, sequence)
    except (MarkerFitError, OSError) as e:
        fail(e)
    console.print(
        f"[green]✓ {source} → {target}[/green] "
        f"({len(sequence)} frames, {sequence.num_markers} markers, {sequence.units})"
    )


@app.command()
def evaluate(
    archives: list[Path] = typer.Argument(..., help="Fit archives (*.archive.json)"),
    model: Path = typer.Option(..., "--model", "-m", help="Body model manifest the archives were fitted with"),
    scans: Path = typer.Option(..., "--scans", "-s", help="Scan directory, or a parent of per-archive directories"),
    samples: int = typer.Option(DEFAULT_SAMPLE_COUNT, "--samples", help="Points sampled per scan"),
    seed: int = typer.Option(0, "--seed", help="Sampling seed"),
    out: Path = typer.Option(Path("out"), "--out", "-o", help="Directory for evaluation.json and evaluation.csv"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Mean scan-to-model distance of fitted archives, in millimeters.

    For an archive ``walk.archive.json`` the scans are read from
    ``SCANS/walk`` when that directory exists, else from ``SCANS``.

    Examples:
        markerfit evaluate out/walk.archive.json -m model/toy-tube.json -s scans
    """
    configure_logging(verbose)
    try:
        body, stats = load_model(model)
        digest = model_hash(body, stats)
        reports: list[EvalReport] = []
        for path in archives:
            archive = read_archive(path, expected_hash=digest)
            stem = path.name.removesuffix(ARCHIVE_SUFFIX)
            directory = scans / stem if (scans / stem).is_dir() else scans
            report = evaluate_archive(archive, body, load_scans(directory), samples, seed)
            report.source = stem
            reports.append(report)
        rows = [row for report in reports for row in report.rows()]
        out.mkdir(parents=True, exist_ok=True)
        save_json(
            out / "evaluation.json",
            {
                "seed": seed,
                "samples": samples,
                "archives": [_report_summary(r) for r in reports],
                "rows": rows,
            },
        )
        atomic_write_text(out / "evaluation.csv", rows_to_csv(rows))
    except (MarkerFitError, OSError) as e:
        fail(e)

    table = Table(title="Scan-to-model distance", box=box.ROUNDED)
    table.add_column("Archive", style="cyan")
    table.add_column("Frames", justify="right")
    table.add_column("Mean (mm)", justify="right")
    table.add_column("Std (mm)", justify="right")
    for report in reports:
        table.add_row(report.source, str(len(report.frames)), f"{report.mean_mm:.2f}", f"{report.std_mm:.2f}")
    console.print(table)


@app.command()
def demo(
    output_dir: Path = typer.Argument(Path("demo"), help="Directory to write the demo data into"),
    frames: int = typer.Option(60, "--frames", help="Frames of the walk sequence"),
    hands: bool = typer.Option(False, "--hands/--no-hands", help="Give the toy model hand joints"),
    seed: int = typer.Option(0, "--seed", help="Shape and noise seed"),
    noise: float = typer.Option(0.0, "--noise", help="Marker noise standard deviation (m)"),
    motion: Optional[Path] = typer.Option(None, "--motion", help="Motion document replacing the walk"),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
) -> None:
    """Write a toy body model, layout, synthetic sequences and scans.

    Examples:
        markerfit demo demo/
        markerfit demo demo/ --motion sway.yaml --noise 0.001
        markerfit calibrate -c demo/run.toml && markerfit fit -c demo/run.toml
    """
    configure_logging(verbose)
    try:
        document = load_motion_document(motion) if motion else None
        files = generate_demo(output_dir, frames=frames, hands=hands, seed=seed, noise=noise, motion=document)
    except (MarkerFitError, OSError) as e:
        fail(e)

    console.print(f"[bold green]✓ Demo data written to {files.root}[/bold green]\n")
    table = Table(box=box.ROUNDED)
    table.add_column("File", style="cyan")
    table.add_column("Contents")
    table.add_row(str(files.model), "toy body model and priors")
    table.add_row(str(files.layout), "marker layout")
    for path in files.sequences:
        table.add_row(str(path), "synthetic marker sequence")
    table.add_row(str(files.scans), "ground-truth scans of walk")
    table.add_row(str(files.run_config), "run config for calibrate and fit")
    table.add_row(str(files.search), "search document for tune")
    console.print(table)


def _report_summary(report: EvalReport) -> dict[str, Any]:
    return {
        "source": report.source,
        "frames": len(report.frames),
        "meanMm": report.mean_mm,
        "stdMm": report.std_mm,
    }


def main() -> None:
    app()


if __name__ == "__main__":
    main()
