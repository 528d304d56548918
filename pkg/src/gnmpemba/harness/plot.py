"""SVG figures from the CSV outputs (optional; needs matplotlib)."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .io import read_timeseries


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_timeseries(csv_path, svg_path=None, columns=None) -> Path:
    """Line plot of the harmonic and distance columns on a semi-log axis."""
    plt = _pyplot()
    data = read_timeseries(csv_path)
    svg_path = Path(svg_path or Path(csv_path).with_suffix(".svg"))
    cols = columns or [c for c in data if c.startswith("mhat_") or c in ("M", "Mhat")]
    fig, ax = plt.subplots(figsize=(7, 4))
    for c in cols:
        y = np.asarray(data[c])
        if np.any(y > 0):
            ax.semilogy(data["t"], np.where(y > 0, y, np.nan), label=c, lw=1)
    ax.set_xlabel("t")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return svg_path


def plot_phase_map(csv_path, svg_path=None) -> Path:
    """Heatmap of the phase labels in a scan CSV."""
    plt = _pyplot()
    with open(csv_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    svg_path = Path(svg_path or Path(csv_path).with_suffix(".svg"))
    mus = sorted({float(r["mu"]) for r in rows})
    gs = sorted({float(r["g"]) for r in rows})
    kinds = {"DP": 0, "OP": 1, "CP": 2}
    grid = np.full((len(gs), len(mus)), np.nan)
    fig, ax = plt.subplots(figsize=(5, 4))
    for r in rows:
        i, k = gs.index(float(r["g"])), mus.index(float(r["mu"]))
        grid[i, k] = kinds.get(r["kind"], np.nan)
        ax.text(k, i, r["label"], ha="center", va="center", fontsize=7)
    ax.imshow(grid, origin="lower", cmap="viridis", vmin=0, vmax=2, aspect="auto")
    ax.set_xticks(range(len(mus)), [f"{m:g}" for m in mus])
    ax.set_yticks(range(len(gs)), [f"{g:g}" for g in gs])
    ax.set_xlabel("mu")
    ax.set_ylabel("g")
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return svg_path


def plot_any(path) -> list[Path]:
    """Plot one CSV, or every CSV in a directory."""
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    out = []
    for f in files:
        with open(f, newline="") as fh:
            header = next(csv.reader(fh), [])
        if "label" in header:
            out.append(plot_phase_map(f))
        elif header and header[0] == "t":
            out.append(plot_timeseries(f))
    return out
