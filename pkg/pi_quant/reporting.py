"""CSV and JSON renderings of lab and benchmark results.

Every CSV starts with a ``# schema: <name>/<version>`` line and every JSON
document carries a ``"schema"`` key.
"""

import csv
import io
import json
import sys
from typing import Any, Iterable, Optional, Sequence, TextIO

import numpy as np

from pi_quant.containers import PathLike, atomic_write_bytes
from pi_quant.models import AblationRow, DescentRun, ErrorStats, GridReport, TrainingRun

SCHEMA_VERSION = 1


def schema_id(name: str) -> str:
    return f"pi_quant.{name}/{SCHEMA_VERSION}"


def csv_text(name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    buffer.write(f"# schema: {schema_id(name)}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def json_text(name: str, payload: dict) -> str:
    return json.dumps({"schema": schema_id(name), **payload}, indent=2) + "\n"


def emit(text: str, output: Optional[PathLike] = None, stream: Optional[TextIO] = None) -> None:
    """Write to ``output`` atomically, or to ``stream`` (stdout) when no path is given."""
    if output:
        atomic_write_bytes(output, text.encode("utf-8"))
    else:
        (stream or sys.stdout).write(text)


def stats_rows(stats: Sequence[ErrorStats]) -> tuple[list[str], list[list[Any]]]:
    header = ["lambda", "dist", "n", "mean_x", "mean_y", "max", "bound", "bound_grid"]
    rows = [[s.lambda_, s.distribution.value, s.sample_count, s.mean_abs_err_x, s.mean_abs_err_y,
             s.max_abs_err, s.bound_decimal, s.bound_grid] for s in stats]
    return header, rows


def grid_rows(report: GridReport) -> tuple[list[str], list[list[Any]]]:
    rows = []
    for ix in range(report.resolution):
        for iy in range(report.resolution):
            rows.append([ix, iy, float(report.mean_err[ix, iy]), int(report.density[ix, iy])])
    return ["cell_x", "cell_y", "mean_err", "density"], rows


def ablation_rows(table: Sequence[AblationRow]) -> tuple[list[str], list[list[Any]]]:
    header = ["variant", "dist", "pibar", "mean_error", "mean_sq_error"]
    rows = [[r.variant, r.distribution.value, r.pibar, r.mean_error, r.mean_sq_error] for r in table]
    return header, rows


def trajectory_rows(samples: np.ndarray) -> tuple[list[str], list[list[Any]]]:
    return ["theta", "x", "y"], [[float(t), float(x), float(y)] for t, x, y in samples]


def descent_rows(runs: Sequence[DescentRun]) -> tuple[list[str], list[list[Any]]]:
    rows = []
    for run in runs:
        for step, (x, y, f) in enumerate(run.trajectory):
            rows.append([step, x, y, f, run.optimizer, run.start_id])
    return ["step", "x", "y", "f", "optimizer", "start_id"], rows


def training_rows(runs: Sequence[TrainingRun]) -> tuple[list[str], list[list[Any]]]:
    rows = []
    for run in runs:
        lam = "" if run.lambda_ is None else run.lambda_
        for epoch, loss in enumerate(run.losses):
            rows.append([epoch, loss, run.optimizer, lam, run.seed])
    return ["epoch", "loss", "optimizer", "lambda", "seed"], rows


def render(name: str, header: Sequence[str], rows: Sequence[Sequence[Any]], fmt: str,
           extra: Optional[dict] = None) -> str:
    """CSV text, or a JSON object with ``columns`` and ``rows`` plus ``extra`` keys."""
    if fmt == "json":
        return json_text(name, {**(extra or {}), "columns": list(header), "rows": [list(r) for r in rows]})
    return csv_text(name, header, rows)
