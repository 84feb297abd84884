"""
Result files: CSV tables, YAML metadata echo and whitespace-separated plot data.
Every file is written to a temporary sibling first and atomically renamed.
"""

import csv
import io
import math
import os
from enum import StrEnum
from pathlib import Path
from typing import Iterable, Sequence

import yaml

from .project_logger import getMainLogger

_logger = getMainLogger()


def atomic_write_text(path: str | Path, text: str) -> Path:
    """
    Write [text] to [path] via a temporary file in the same directory and os.replace
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        with open(tmp, "w", newline="") as file:
            file.write(text)
            file.flush()
            os.fsync(file.fileno())
        os.replace(tmp, path)
    except BaseException:
        tmp.unlink(missing_ok=True)
        raise
    return path


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return atomic_write_text(path, buffer.getvalue())


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_meta(path: str | Path, content: dict) -> Path:
    """
    YAML echo of the validated configuration plus run information
    """
    return atomic_write_text(path, yaml.safe_dump(content, sort_keys=False))


class PlotKind(StrEnum):
    LOGLOG = "loglog"
    CURVE = "curve"


def emit_plot_data(records: Sequence, kind: PlotKind, path: str | Path) -> int:
    """
    Write plot data and return the number of rows.

    loglog: [records] are (r, R, estimate), rows `log(r/R) log(value) stderr/value`;
    zero estimates are left out with a warning line.
    curve: [records] are (x, estimate), rows `x value stderr`.
    """
    kind = PlotKind(kind)
    if not records:
        raise ValueError("No results to plot")
    lines = []
    if kind == PlotKind.LOGLOG:
        lines.append("# log(r/R) log(value) relative_error")
        for r, R, est in records:
            if est.value <= 0:
                _logger.warning(f"Zero estimate at r={r}, R={R} left out of the log-log data")
                lines.append(f"# skipped r={r} R={R}: zero estimate")
                continue
            lines.append(
                f"{math.log(r / R)!r} {math.log(est.value)!r} {est.stderr / est.value!r}"
            )
    else:
        lines.append("# x value stderr")
        for x, est in records:
            lines.append(f"{float(x)!r} {est.value!r} {est.stderr!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return sum(1 for line in lines if not line.startswith("#"))


def read_plot_data(path: str | Path) -> list[tuple[float, ...]]:
    """Rows of a .dat file, comment lines skipped"""
    rows = []
    for line in Path(path).read_text().splitlines():
        if line.strip() and not line.startswith("#"):
            rows.append(tuple(float(v) for v in line.split()))
    return rows
