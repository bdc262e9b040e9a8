"""Static SVG convergence plots: median over seeds with an interquartile band."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

HEADER = ("seed", "algorithm", "queries", "f", "event", "ms")
STYLES = ("linear", "log")
MAX_GRID = 2000


class PlotError(ValueError):
    pass


def read_trajectories(paths: Iterable) -> dict:
    """Return ``{algorithm: {seed: (queries, f)}}``; every file must carry the exact header."""
    series: dict = {}
    paths = [Path(p) for p in paths]
    if not paths:
        raise PlotError("no trajectory files")
    for path in paths:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(rows[0]) != HEADER:
            raise PlotError(f"{path}: inconsistent header {rows[0] if rows else []!r}, expected {list(HEADER)}")
        for row in rows[1:]:
            if len(row) != len(HEADER):
                raise PlotError(f"{path}: malformed row {row!r}")
            seed, alg, q, f = int(row[0]), row[1], int(row[2]), float(row[3])
            qs, fs = series.setdefault(alg, {}).setdefault(seed, ([], []))
            qs.append(q)
            fs.append(f)
    return {a: {s: (np.array(q), np.array(f)) for s, (q, f) in d.items()} for a, d in series.items()}


def step_values(q: np.ndarray, f: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Value of the last record at or before each grid point; the last value is held afterwards."""
    idx = np.searchsorted(q, grid, side="right") - 1
    return f[np.clip(idx, 0, len(f) - 1)]


def band(per_seed: dict):
    """Common query grid with the median, 25th and 75th percentile curves."""
    grid = np.unique(np.concatenate([q for q, _ in per_seed.values()]))
    if len(grid) > MAX_GRID:
        grid = np.unique(grid[np.linspace(0, len(grid) - 1, MAX_GRID).round().astype(int)])
    vals = np.stack([step_values(q, f, grid) for q, f in per_seed.values()])
    lo, med, hi = np.percentile(vals, [25, 50, 75], axis=0)
    return grid, med, lo, hi


def emit_plot(paths, out_path, style: str = "linear", title: Optional[str] = None,
              f_ref: Optional[float] = None) -> Path:
    """Write an SVG with one median curve per algorithm; ``style="log"`` plots ``f - f_ref`` on a log axis.

    ``paths`` may be a directory (all ``*.csv`` except ``summary.csv``) or a
    list of files.  Output bytes depend only on the input data.
    """
    if style not in STYLES:
        raise PlotError(f"unknown style {style!r}; expected one of {STYLES}")
    if isinstance(paths, (str, Path)):
        if not Path(paths).is_dir():
            raise PlotError(f"{paths}: not a directory")
        paths = sorted(p for p in Path(paths).glob("*.csv") if p.name != "summary.csv")
    data = read_trajectories(paths)
    if style == "log" and f_ref is None:
        f_ref = min(float(f.min()) for d in data.values() for _, f in d.values())

    with plt.rc_context({"svg.hashsalt": "zoncf", "svg.fonttype": "none", "path.simplify": False}):
        fig, ax = plt.subplots(figsize=(6, 4))
        for alg in sorted(data):
            grid, med, lo, hi = band(data[alg])
            if style == "log":
                med, lo, hi = (np.maximum(v - f_ref, 1e-16) for v in (med, lo, hi))
            (line,) = ax.plot(grid, med, label=alg, linewidth=1.2)
            if len(data[alg]) > 1:
                ax.fill_between(grid, lo, hi, color=line.get_color(), alpha=0.2, linewidth=0)
        if style == "log":
            ax.set_yscale("log")
            ax.set_ylabel("f - f_ref")
        else:
            ax.set_ylabel("f")
        ax.set_xlabel("function queries")
        if title:
            ax.set_title(title)
        ax.legend()
        fig.tight_layout()
        buf = io.BytesIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(buf.getvalue())
    return out
