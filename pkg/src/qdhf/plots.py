"""Figure and delimited-grid exports for archives, benches and sweeps."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .archive import Archive


def export_heatmap(archive: Archive, out_dir, basename: str = "heatmap", title: Optional[str] = None):
    """Write an archive's objective grid as CSV (blank = empty cell) plus an
    SVG heatmap with the measure bounds on the axes."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = archive.objective_grid
    csv_path = out / f"{basename}.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for i in range(grid.shape[0]):
            writer.writerow(
                ["" if grid[i, j] == -np.inf else repr(float(grid[i, j])) for j in range(grid.shape[1])]
            )

    masked = np.ma.masked_where(grid == -np.inf, grid)
    fig, ax = plt.subplots(figsize=(5.2, 4.4))
    low, high = archive.bounds.low, archive.bounds.high
    mesh = ax.imshow(
        masked.T,
        origin="lower",
        extent=(low[0], high[0], low[1], high[1]),
        aspect="auto",
        cmap="viridis",
        vmin=0.0,
        vmax=max(1.0, float(masked.max()) if masked.count() else 1.0),
    )
    space = archive.measure_key
    ax.set_xlabel(f"{space} measure 0")
    ax.set_ylabel(f"{space} measure 1")
    if title:
        ax.set_title(title)
    fig.colorbar(mesh, ax=ax, label="objective")
    svg_path = out / f"{basename}.svg"
    fig.savefig(svg_path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return csv_path, svg_path


def save_bench_figure(summary: Sequence[dict], path):
    """Bar chart of final QD scores (archive and all-solutions) per strategy."""
    strategies = [entry["strategy"] for entry in summary]
    x = np.arange(len(strategies))
    width = 0.38
    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(strategies), 4.2))
    for offset, name, label in (
        (-width / 2, "qd_score_archive", "archive"),
        (width / 2, "qd_score_all", "all solutions"),
    ):
        means = [entry["metrics"][name]["mean"] for entry in summary]
        stds = [entry["metrics"][name]["std"] for entry in summary]
        ax.bar(x + offset, means, width, yerr=stds, capsize=3, label=label)
    ax.set_xticks(x)
    ax.set_xticklabels(strategies, rotation=30, ha="right")
    ax.set_ylabel("QD score")
    task = summary[0]["task"] if summary else ""
    ax.set_title(f"{task}: QD score by strategy")
    ax.legend()
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return Path(path)


def save_sweep_figure(rows: Sequence[dict], path):
    """Two panels: QD score vs budget per strategy, and QD score vs metric
    validation accuracy across every run."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.2, 4.0))
    strategies = sorted({row["strategy"] for row in rows})
    for strategy in strategies:
        budgets = sorted({row["budget"] for row in rows if row["strategy"] == strategy})
        means = []
        for b in budgets:
            vals = [
                row["qd_score_all"]
                for row in rows
                if row["strategy"] == strategy and row["budget"] == b
            ]
            means.append(np.mean(vals))
        ax1.plot(budgets, means, marker="o", label=strategy)
    ax1.set_xscale("log")
    ax1.set_xlabel("judgment budget")
    ax1.set_ylabel("QD score (all solutions)")
    ax1.legend()

    for strategy in strategies:
        accs = [r["val_acc"] for r in rows if r["strategy"] == strategy and r["val_acc"] is not None]
        qds = [r["qd_score_all"] for r in rows if r["strategy"] == strategy and r["val_acc"] is not None]
        ax2.scatter(accs, qds, s=18, label=strategy)
    ax2.set_xlabel("validation accuracy")
    ax2.set_ylabel("QD score (all solutions)")
    ax2.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", bbox_inches="tight")
    plt.close(fig)
    return Path(path)
