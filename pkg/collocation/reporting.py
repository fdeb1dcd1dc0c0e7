"""CSV artifact writers.

All files use ',' separators, '\\n' line endings and floats in scientific
notation with 17 significant digits. A path of None or "-" writes to stdout.
"""

import csv
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from collocation.models import CollocationProblem, CollocationSolution
from collocation.postprocess import VolterraOperator
from collocation.results import NondivergenceDiagnostic, OptimumCheck, SweepResult

logger = logging.getLogger(__name__)

PathLike = Union[str, Path, None]


def fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return f"{float(value):.17e}"


@contextmanager
def _writer(path: PathLike):
    if path is None or str(path) == "-":
        yield csv.writer(sys.stdout, lineterminator="\n")
        return
    with open(path, "w", newline="") as f:
        yield csv.writer(f, lineterminator="\n")
    logger.info(f"Wrote {path}")


def samples_path(path: PathLike) -> Optional[Path]:
    """Sibling file for the y_h sample grid of a solve (``out.csv`` -> ``out_yh.csv``).

    None when the solution goes to stdout; one CSV per stream.
    """
    if path is None or str(path) == "-":
        return None
    path = Path(path)
    return path.with_name(f"{path.stem}_yh{path.suffix or '.csv'}")


def write_solution_csv(path: PathLike, sol: CollocationSolution) -> None:
    points = sol.collocation_points()
    with _writer(path) as writer:
        writer.writerow(["n", "i", "t", "Z"])
        for n in range(sol.mesh.N):
            for i in range(sol.params.m):
                writer.writerow([n, i + 1, fmt(points[n, i]), fmt(sol.Z[n, i])])


def write_samples_csv(
    path: PathLike, problem: CollocationProblem, sol: CollocationSolution, samples: int = 101
) -> None:
    """z_h and y_h on the grid T k / samples, k = 1..samples."""
    operator = VolterraOperator(problem, sol)
    T = problem.mesh.T
    with _writer(path) as writer:
        writer.writerow(["t", "z_h", "y_h"])
        for k in range(1, samples + 1):
            t = T * k / samples
            writer.writerow([fmt(t), fmt(sol.evaluate(t)), fmt(operator(t))])


def write_sweep_csv(path: PathLike, result: SweepResult, timings: bool = False) -> None:
    """One row per (h, c); the runtime column only when ``timings`` is set."""
    header = ["case", "m", "h", "c", "relative_error", "status", "message"]
    if timings:
        header.append("runtime")
    with _writer(path) as writer:
        writer.writerow(header)
        for row in result.rows:
            cells = [row.case, row.m, fmt(row.h), fmt(row.c), fmt(row.relative_error), row.status, row.message]
            if timings:
                cells.append(fmt(row.runtime))
            writer.writerow(cells)


def write_optima_csv(path: PathLike, checks: Sequence[OptimumCheck]) -> None:
    with _writer(path) as writer:
        writer.writerow(["h", "kind", "error", "c", "expected_error", "expected_c", "status"])
        for check in checks:
            writer.writerow([
                fmt(check.h),
                check.kind,
                fmt(check.error),
                fmt(check.c),
                fmt(check.expected_error),
                fmt(check.expected_c),
                "pass" if check.passed else "fail",
            ])


def write_key_value_csv(path: PathLike, rows: Iterable[Tuple[str, str]]) -> None:
    with _writer(path) as writer:
        writer.writerow(["key", "value"])
        for key, value in rows:
            writer.writerow([key, value])


def write_probe_csv(path: PathLike, diagnostic: NondivergenceDiagnostic) -> None:
    """(h0, value) rows; gaps are empty, escaped roots are 'inf'."""
    with _writer(path) as writer:
        writer.writerow(["h0", "value", "verdict"])
        for h0, value in zip(diagnostic.schedule, diagnostic.values):
            cell = "inf" if value is not None and np.isinf(value) else fmt(value)
            writer.writerow([fmt(h0), cell, diagnostic.verdict.value])


def read_solution_csv(path: Union[str, Path]) -> List[Tuple[int, int, float, float]]:
    """Rows (n, i, t, Z) of a solution CSV."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        next(reader)
        return [(int(n), int(i), float(t), float(z)) for n, i, t, z in reader]
