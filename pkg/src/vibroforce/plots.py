"""Deterministic SVG line charts, each written next to the CSV it was drawn from."""
from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .series_io import write_table  # noqa: E402

__all__ = ["emit_line_plot", "emit_plots"]

# fixed hash salt and no timestamp make repeated renders byte-identical
_RC = {"svg.hashsalt": "vibroforce", "svg.fonttype": "path", "path.simplify": False}


def emit_line_plot(stem, x: np.ndarray, series: Mapping[str, np.ndarray], *, xlabel: str = "t",
                   ylabel: str = "", title: str = "", logx: bool = False, logy: bool = False,
                   styles: Mapping[str, str] | None = None) -> list[Path]:
    """Write ``<stem>.csv`` (x plus one column per series) and ``<stem>.svg``.

    Legend entries are the series names, in insertion order.
    """
    stem = Path(stem)
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0 or not series:
        raise ValueError("nothing to plot")
    names = list(series)
    cols = [np.asarray(series[n], dtype=float).ravel() for n in names]
    if any(c.shape != x.shape for c in cols):
        raise ValueError("every series must match the x samples")
    if xlabel in names:
        raise ValueError(f"series name {xlabel!r} clashes with the x column")
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = write_table(stem.with_suffix(".csv"), [xlabel, *names],
                           [[xi, *row] for xi, row in zip(x, np.column_stack(cols))])
    styles = dict(styles or {})
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(8, 4.5))
        for name, col in zip(names, cols):
            ax.plot(x, col, styles.get(name, "-"), label=name, linewidth=1.0)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        if logx:
            ax.set_xscale("log")
        if logy:
            ax.set_yscale("log")
        ax.grid(True, linewidth=0.3)
        ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        svg_path = stem.with_suffix(".svg")
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return [svg_path, csv_path]


def emit_plots(bundles: Sequence[dict], out_dir) -> list[Path]:
    """Render several bundles; each is the keyword set of :func:`emit_line_plot` plus ``name``."""
    out_dir = Path(out_dir)
    files: list[Path] = []
    for b in bundles:
        b = dict(b)
        name = b.pop("name")
        files += emit_line_plot(out_dir / name, b.pop("x"), b.pop("series"), **b)
    return files
