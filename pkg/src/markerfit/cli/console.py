"""Shared console, exit codes and progress display of the commands."""

from __future__ import annotations

import threading
from contextlib import contextmanager
from typing import Iterator, NoReturn

import typer
from rich.console import Console
from rich.markup import escape
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn

from ..core.progress import ProgressCallback, ProgressEvent
from ..utils.exceptions import MarkerFitError, SolverError

console = Console()

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_SOLVER = 2
EXIT_IO = 3


def exit_code_for(error: BaseException) -> int:
    """Solver failures exit 2; file, config and model problems exit 3."""
    if isinstance(error, SolverError):
        return EXIT_SOLVER
    return EXIT_IO


def fail(error: MarkerFitError | OSError) -> NoReturn:
    """Print an error and leave with its exit code."""
    label = "Solver error" if isinstance(error, SolverError) else "Error"
    console.print(f"[red]{label}: {escape(str(error))}[/red]", highlight=False)
    raise typer.Exit(code=exit_code_for(error))


@contextmanager
def progress_reporter(enabled: bool = True) -> Iterator[ProgressCallback | None]:
    """Rich progress bars fed by ProgressEvents, one bar per stage and message."""
    if not enabled:
        yield None
        return
    progress = Progress(
        TextColumn("{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    )
    tasks: dict[tuple[str, str], int] = {}
    lock = threading.Lock()

    def update(event: ProgressEvent) -> None:
        key = (event.stage, event.message)
        with lock:
            if key not in tasks:
                name = f"{event.stage} {event.message}".strip()
                tasks[key] = progress.add_task(name, total=event.total or None)
        progress.update(tasks[key], completed=event.step)

    with progress:
        yield update
