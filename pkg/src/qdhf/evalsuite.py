"""Archive scoring, per-iteration metric rows and trial aggregation."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .archive import Archive, Individual, MeasureBounds, cell_indices


def qd_score(archive: Archive) -> float:
    """100 * summed elite objectives / total cells."""
    grid = archive.objective_grid
    vals = grid[grid > -np.inf]
    return 100.0 * float(vals.sum()) / archive.num_cells


def coverage(archive: Archive) -> float:
    """100 * filled cells / total cells."""
    return 100.0 * len(archive) / archive.num_cells


def gt_view(archive: Archive, bounds: MeasureBounds, shape: Sequence[int]) -> Archive:
    """Re-grid an archive's elites by their ground-truth measures.

    For an archive already indexed by ground truth this is an identity-style
    re-insert; for a latent archive it shows what the learned elites cover in
    the task's native space.
    """
    view = Archive(shape, bounds, measure_key="gt")
    elites = archive.individuals()
    if elites:
        measures = np.stack([ind.gt_measures for ind in elites])
        for ind, idx in zip(elites, cell_indices(measures, bounds, tuple(shape))):
            view.insert_at(tuple(int(i) for i in idx), ind)
    return view


@dataclass
class MetricsRow:
    """One iteration's scores; ``val_acc`` is empty when no metric model
    (or no oracle to validate against) is in play."""

    iteration: int
    qd_score_archive: float
    coverage_archive: float
    qd_score_all: float
    coverage_all: float
    judgments_used: int
    val_acc: Optional[float] = None


METRICS_COLUMNS = [f.name for f in fields(MetricsRow)]


def write_metrics_csv(rows: Sequence[MetricsRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.iteration,
                    repr(row.qd_score_archive),
                    repr(row.coverage_archive),
                    repr(row.qd_score_all),
                    repr(row.coverage_all),
                    row.judgments_used,
                    "" if row.val_acc is None else repr(row.val_acc),
                ]
            )


def read_metrics_csv(path) -> List[MetricsRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_COLUMNS:
            raise ValueError(f"unexpected metrics columns: {reader.fieldnames}")
        for rec in reader:
            rows.append(
                MetricsRow(
                    iteration=int(rec["iteration"]),
                    qd_score_archive=float(rec["qd_score_archive"]),
                    coverage_archive=float(rec["coverage_archive"]),
                    qd_score_all=float(rec["qd_score_all"]),
                    coverage_all=float(rec["coverage_all"]),
                    judgments_used=int(rec["judgments_used"]),
                    val_acc=float(rec["val_acc"]) if rec["val_acc"] else None,
                )
            )
    return rows


def aggregate_trials(final_rows: Sequence[MetricsRow]) -> Dict[str, Dict[str, float]]:
    """Mean and sample standard deviation of each final metric over trials.

    Uses exact summation, so the result does not depend on trial order.
    """
    if len(final_rows) < 2:
        raise ValueError("need at least two trials to aggregate")
    out: Dict[str, Dict[str, float]] = {}
    for name in ("qd_score_archive", "coverage_archive", "qd_score_all", "coverage_all"):
        values = [getattr(r, name) for r in final_rows]
        mean = math.fsum(values) / len(values)
        var = math.fsum((v - mean) ** 2 for v in values) / (len(values) - 1)
        out[name] = {"mean": mean, "std": math.sqrt(var)}
    accs = [r.val_acc for r in final_rows if r.val_acc is not None]
    if accs:
        mean = math.fsum(accs) / len(accs)
        var = math.fsum((v - mean) ** 2 for v in accs) / (len(accs) - 1) if len(accs) > 1 else 0.0
        out["val_acc"] = {"mean": mean, "std": math.sqrt(var)}
    return out


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Spearman rank correlation with average ranks on ties."""
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length vectors of at least two values")
    ra = _average_ranks(a)
    rb = _average_ranks(b)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float(ra @ ra) * float(rb @ rb))
    if denom == 0:
        raise ValueError("rank correlation undefined for constant input")
    return float(ra @ rb) / denom


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def sweep_budget(budgets, base_config, trials: int = 5, strategies=None):
    """Run the budget x strategy grid; see ``experiments.sweep_budget``."""
    # deferred import: experiments drives the engine, which imports this module
    from .experiments import SWEEP_STRATEGIES
    from .experiments import sweep_budget as _impl

    return _impl(budgets, base_config, trials, strategies or SWEEP_STRATEGIES)


def export_heatmap(archive: Archive, out_dir, basename: str = "heatmap", title=None):
    """Write heatmap CSV + SVG for an archive; see ``plots.export_heatmap``."""
    from .plots import export_heatmap as _impl

    return _impl(archive, out_dir, basename, title)
