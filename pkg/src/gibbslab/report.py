"""CSV and SVG output for the experiment commands."""

from __future__ import annotations

import csv
import math
import warnings
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "gibbslab-csv-1"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return ""
        return repr(value)
    return str(value)


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    """Write ``rows`` with a leading ``schema`` column; missing values stay empty."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["schema"] + columns)
        for row in rows:
            writer.writerow([SCHEMA_VERSION] + [_fmt(row.get(c)) for c in columns])


def read_csv(path: Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def loglog_slope(x, y) -> float | None:
    """Least-squares slope of ``log y`` against ``log x``; ``None`` if undefined."""
    pts = [(a, b) for a, b in zip(x, y) if a is not None and b is not None and a > 0 and b > 0]
    if len(pts) < 2:
        return None
    lx, ly = np.log(np.array(pts, dtype=float)).T
    return float(np.polyfit(lx, ly, 1)[0])


def write_loglog_svg(path: Path, x, series: dict, xlabel: str, title: str) -> bool:
    """Log-log line chart, one line per non-empty series.  Failures only warn."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        matplotlib.rcParams["svg.hashsalt"] = "gibbslab"
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for name, ys in series.items():
            pts = [(a, b) for a, b in zip(x, ys) if b is not None and b > 0]
            if len(pts) < 2:
                continue
            xs, vs = zip(*pts)
            ax.loglog(xs, vs, marker="o", ms=3, label=name)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("value")
        ax.set_title(title)
        if ax.lines:
            ax.legend(fontsize=8)
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        return True
    except Exception as exc:  # plotting never decides the exit status
        warnings.warn(f"could not write {path}: {exc}")
        return False
