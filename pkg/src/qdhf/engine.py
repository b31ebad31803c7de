"""MAP-Elites loop with pluggable diversity metrics.

The same loop serves every strategy: a ground-truth oracle grid, triplet-
trained projections refreshed on a schedule, and unsupervised PCA or
auto-encoder baselines.  Strategy only decides how (and when) the measure
space is fitted; emission, insertion and bookkeeping are shared.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .archive import Archive, Individual, MeasureBounds, cell_indices
from .evalsuite import MetricsRow, coverage, gt_view, qd_score, write_metrics_csv
from .feedback import Budget, Judgment, collect_judgments, make_validation_set, validate_accuracy
from .models import (
    LatentModel,
    TrainConfig,
    fit_autoencoder,
    fit_pca,
    model_to_dict,
    train_projection,
)

GT = "gt"
QDHF_OFFLINE = "qdhf-offline"
QDHF_ONLINE = "qdhf-online"
AURORA_PCA_PRE = "aurora-pca-pretrained"
AURORA_PCA_INC = "aurora-pca-incremental"
AURORA_AE_PRE = "aurora-ae-pretrained"
AURORA_AE_INC = "aurora-ae-incremental"

STRATEGIES = (
    GT,
    QDHF_OFFLINE,
    QDHF_ONLINE,
    AURORA_PCA_PRE,
    AURORA_PCA_INC,
    AURORA_AE_PRE,
    AURORA_AE_INC,
)
STRATEGY_ALIASES = {"ground-truth": GT}

EVAL_SHAPE = (50, 50)
VALIDATION_SIZE = 200


@dataclass
class Schedule:
    """Iteration budget and metric refresh points."""

    total_iterations: int = 1000
    update_iterations: Tuple[int, ...] = (0, 100, 250, 500)
    batch_size: int = 100
    mutation_sigma: float = 0.1

    def validate(self):
        if self.total_iterations < 1:
            raise ValueError("need at least one iteration")
        if self.batch_size < 1:
            raise ValueError("need a positive batch size")
        if self.mutation_sigma < 0:
            raise ValueError("mutation sigma must be non-negative")
        ups = tuple(self.update_iterations)
        if ups != tuple(sorted(set(ups))):
            raise ValueError("update iterations must be strictly increasing")
        if ups and (ups[0] < 0 or ups[-1] >= self.total_iterations):
            raise ValueError("update iterations must lie inside [0, total_iterations)")


def emit_batch(
    archive: Optional[Archive],
    task,
    schedule: Schedule,
    rng: np.random.Generator,
) -> np.ndarray:
    """Next candidate batch: uniform over the genome domain while the archive
    is empty, otherwise Gaussian mutations of uniformly chosen elites."""
    if archive is None or len(archive) == 0:
        return rng.uniform(
            task.genome_low, task.genome_high, size=(schedule.batch_size, task.genome_dim)
        )
    elites = archive.individuals()
    picks = rng.integers(len(elites), size=schedule.batch_size)
    parents = np.stack([elites[i].genome for i in picks])
    noise = rng.normal(0.0, schedule.mutation_sigma, size=parents.shape)
    return np.clip(parents + noise, task.genome_low, task.genome_high)


def rebuild_archive(
    archive: Optional[Archive],
    model: LatentModel,
    bounds: MeasureBounds,
    shape: Optional[Sequence[int]] = None,
) -> Archive:
    """Re-insert the current elites under a refreshed model and bounds.

    Elites landing in the same new cell compete by objective, so the rebuilt
    archive can hold fewer individuals than the source but never loses the
    better of two collapsed cells.
    """
    if shape is None:
        if archive is None:
            raise ValueError("need an archive or an explicit shape")
        shape = archive.shape
    new = Archive(shape, bounds, measure_key="latent")
    elites = archive.individuals() if archive is not None else []
    if not elites:
        return new
    feats = np.stack([ind.features for ind in elites])
    latents = model.project_batch(feats)
    indices = cell_indices(latents, bounds, new.shape)
    for ind, z, idx in zip(elites, latents, indices):
        ind.latent_measures = z
        new.insert_at(tuple(int(v) for v in idx), ind)
    return new


@dataclass
class RunResult:
    """Everything a finished run produced, plus enough to serialize it."""

    task_name: str
    strategy: str
    seed: int
    schedule: Schedule
    budget: Budget
    rows: List[MetricsRow]
    archive: Archive
    archive_view: Archive
    all_solutions: Archive
    model: Optional[LatentModel]
    judgments: List[Tuple[int, Judgment]]
    working_qd: List[float]
    rebuild_iterations: Tuple[int, ...]
    config: Dict[str, object]

    @property
    def final(self) -> MetricsRow:
        return self.rows[-1]

    def save(self, outdir, force: bool = False) -> Path:
        """Write archive.json, metrics.csv, config.json and optional model
        and judgment files into a run directory."""
        out = Path(outdir)
        if out.exists() and any(out.iterdir()) and not force:
            raise FileExistsError(f"{out} exists and is not empty (use force to overwrite)")
        out.mkdir(parents=True, exist_ok=True)
        (out / "archive.json").write_text(json.dumps(archive_to_dict(self.archive, self)))
        write_metrics_csv(self.rows, out / "metrics.csv")
        (out / "config.json").write_text(json.dumps(self.config, indent=2, sort_keys=True))
        if self.model is not None:
            (out / "model.json").write_text(json.dumps(model_to_dict(self.model)))
        if self.judgments:
            with open(out / "judgments.jsonl", "w") as fh:
                for iteration, judgment in self.judgments:
                    fh.write(
                        json.dumps(
                            {
                                "iteration": iteration,
                                "ref": judgment.triplet.ref,
                                "a": judgment.triplet.a,
                                "b": judgment.triplet.b,
                                "choice": judgment.choice.value,
                                "source": judgment.source,
                            }
                        )
                        + "\n"
                    )
        return out


def archive_to_dict(archive: Archive, result: Optional[RunResult] = None) -> dict:
    """JSON layout of an archive, cells sorted by grid index."""
    cells = []
    for idx in sorted(archive.cells):
        ind = archive.cells[idx]
        cells.append(
            {
                "index": list(idx),
                "genome": ind.genome.tolist(),
                "objective": ind.objective,
                "measures": ind.measures(archive.measure_key).tolist(),
                "gt_measures": ind.gt_measures.tolist(),
            }
        )
    out = {
        "measure_space": archive.measure_key,
        "shape": list(archive.shape),
        "bounds": archive.bounds.to_pairs(),
        "cells": cells,
    }
    if result is not None:
        out["task"] = result.task_name
        out["strategy"] = result.strategy
        out["seed"] = result.seed
    return out


def archive_from_dict(data: dict) -> Archive:
    """Rebuild an archive from its JSON layout, preserving exact cell indices."""
    bounds = MeasureBounds(data["bounds"])
    archive = Archive(data["shape"], bounds, measure_key=data["measure_space"])
    latent = archive.measure_key == "latent"
    for cell in data["cells"]:
        measures = np.asarray(cell["measures"], dtype=float)
        ind = Individual(
            genome=np.asarray(cell["genome"], dtype=float),
            objective=float(cell["objective"]),
            features=np.empty(0),
            gt_measures=np.asarray(cell["gt_measures"], dtype=float),
            latent_measures=measures if latent else None,
        )
        archive.insert_at(tuple(int(i) for i in cell["index"]), ind)
    return archive


def _grid_scores(
    elites: Sequence[Individual], bounds: MeasureBounds, shape: Tuple[int, ...]
) -> Tuple[float, float]:
    """QD score and coverage of elites re-gridded by ground-truth measures."""
    size = math.prod(shape)
    if not elites:
        return 0.0, 0.0
    measures = np.stack([ind.gt_measures for ind in elites])
    objectives = np.fromiter((ind.objective for ind in elites), dtype=float, count=len(elites))
    flat = np.ravel_multi_index(tuple(cell_indices(measures, bounds, shape).T), shape)
    grid = np.full(size, -np.inf)
    np.maximum.at(grid, flat, objectives)
    mask = grid > -np.inf
    return 100.0 * float(grid[mask].sum()) / size, 100.0 * float(mask.sum()) / size


def _uses_model(strategy: str) -> bool:
    return strategy != GT

def _uses_judgments(strategy: str) -> bool:
    return strategy in (QDHF_OFFLINE, QDHF_ONLINE)

def update_points(strategy: str, schedule: Schedule) -> Tuple[int, ...]:
    if strategy == GT:
        return ()
    if strategy in (QDHF_ONLINE, AURORA_PCA_INC, AURORA_AE_INC):
        return tuple(schedule.update_iterations)
    return tuple(schedule.update_iterations[:1])


def run_qd(
    task,
    strategy: str,
    schedule: Schedule,
    budget_total: int,
    train_cfg: TrainConfig,
    judge,
    seed: int,
    latent_dim: int = 2,
    archive_shape: Tuple[int, ...] = (50, 50),
    payloads: bool = False,
    config: Optional[Dict[str, object]] = None,
    on_iteration: Optional[Callable] = None,
) -> RunResult:
    """Run one quality-diversity optimization to completion.

    All randomness flows from ``seed`` through two independent streams: the
    main stream drives emission, triplet sampling and training, while a
    second stream builds the held-out validation set.  Runs with the same
    arguments and judgment outcomes are therefore bit-for-bit reproducible,
    whichever judge answers the triplets.
    """
    strategy = STRATEGY_ALIASES.get(strategy, strategy)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy: {strategy!r}")
    schedule.validate()
    train_cfg.validate()
    update_iters = update_points(strategy, schedule)
    if _uses_model(strategy):
        if not update_iters or update_iters[0] != 0:
            raise ValueError("learned-metric strategies need a metric update at iteration 0")
    budget = Budget(
        total=budget_total,
        updates=len(update_iters) if _uses_judgments(strategy) else 1,
    )

    main_ss, val_ss = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(main_ss)
    val_rng = np.random.default_rng(val_ss)

    all_solutions = Archive(EVAL_SHAPE, task.gt_bounds, measure_key="gt")
    working = (
        Archive(archive_shape, task.gt_bounds, measure_key="gt") if strategy == GT else None
    )
    model: Optional[LatentModel] = None
    val_set = None
    val_features: Dict[int, np.ndarray] = {}
    val_acc: Optional[float] = None
    judgments: List[Tuple[int, Judgment]] = []
    training_set: List[Judgment] = []
    judged_features: Dict[int, np.ndarray] = {}
    feature_window: List[np.ndarray] = []
    window_end = (update_iters[-1] + 1) if update_iters else 0
    rows: List[MetricsRow] = []
    working_qd: List[float] = []
    first_batch: Optional[List[Individual]] = None
    payload_fn = None
    if payloads:
        payload_fn = lambda ind: task.render_payload(ind.genome, ind.features)
    update_set = set(update_iters)
    uid = 0

    for it in range(schedule.total_iterations):
        genomes = emit_batch(working, task, schedule, rng)
        objectives, feats, gts = task.evaluate_batch(genomes)
        batch = []
        for i in range(len(genomes)):
            # Copies keep archived survivors from pinning their whole
            # evaluation batch through array views.
            batch.append(
                Individual(
                    genome=genomes[i].copy(),
                    objective=float(objectives[i]),
                    features=feats[i].copy(),
                    gt_measures=gts[i].copy(),
                    uid=uid,
                )
            )
            uid += 1
        if first_batch is None:
            first_batch = batch
        if it < window_end:
            feature_window.append(feats)

        for ind, idx in zip(batch, cell_indices(gts, all_solutions.bounds, EVAL_SHAPE)):
            all_solutions.insert_at(tuple(int(v) for v in idx), ind)

        if it in update_set:
            population = batch if working is None or len(working) == 0 else working.individuals()
            if strategy in (QDHF_OFFLINE, QDHF_ONLINE):
                fresh = collect_judgments(
                    population, budget.per_update, judge, budget, rng, payload_fn
                )
                by_id = {ind.uid: ind for ind in population}
                for j in fresh:
                    for ref in (j.triplet.ref, j.triplet.a, j.triplet.b):
                        judged_features.setdefault(ref, by_id[ref].features)
                judgments.extend((it, j) for j in fresh)
                training_set.extend(fresh)
                model = train_projection(
                    judged_features,
                    training_set,
                    train_cfg,
                    rng,
                    init=model,
                    latent_dim=latent_dim,
                    epochs=None if model is None else train_cfg.finetune_epochs,
                )
            else:
                pop_feats = np.stack([ind.features for ind in population])
                if strategy in (AURORA_PCA_PRE, AURORA_PCA_INC):
                    model = fit_pca(pop_feats, latent_dim)
                else:
                    model = fit_autoencoder(
                        pop_feats,
                        rng,
                        train_cfg,
                        latent_dim,
                        init=model,
                        epochs=None if model is None else train_cfg.finetune_epochs,
                    )
            latent_all = model.project_batch(np.vstack(feature_window))
            bounds = MeasureBounds.from_samples(latent_all, expand=0.05)
            working = rebuild_archive(working, model, bounds, shape=archive_shape)
            if judge.supports_validation:
                if val_set is None:
                    val_set = make_validation_set(first_batch, VALIDATION_SIZE, val_rng)
                    val_features = {ind.uid: ind.features for ind in first_batch}
                val_acc = validate_accuracy(model, val_features, val_set)

        if model is not None:
            latents = model.project_batch(feats)
            for ind, z in zip(batch, latents):
                ind.latent_measures = z
        key = working.measure_key
        measures = gts if key == "gt" else np.stack([ind.latent_measures for ind in batch])
        for ind, idx in zip(batch, cell_indices(measures, working.bounds, working.shape)):
            working.insert_at(tuple(int(v) for v in idx), ind)

        arch_qd, arch_cov = _grid_scores(working.individuals(), task.gt_bounds, EVAL_SHAPE)
        rows.append(
            MetricsRow(
                iteration=it,
                qd_score_archive=arch_qd,
                coverage_archive=arch_cov,
                qd_score_all=qd_score(all_solutions),
                coverage_all=coverage(all_solutions),
                judgments_used=budget.used,
                val_acc=val_acc,
            )
        )
        working_qd.append(qd_score(working))
        if on_iteration is not None:
            on_iteration(it, working, all_solutions, model, budget, rows)

    result = RunResult(
        task_name=task.name,
        strategy=strategy,
        seed=seed,
        schedule=schedule,
        budget=budget,
        rows=rows,
        archive=working,
        archive_view=gt_view(working, task.gt_bounds, EVAL_SHAPE),
        all_solutions=all_solutions,
        model=model,
        judgments=judgments,
        working_qd=working_qd,
        rebuild_iterations=update_iters,
        config=dict(config) if config else _default_config(task, strategy, schedule, budget_total, train_cfg, seed),
    )
    return result


def _default_config(task, strategy, schedule, budget_total, train_cfg, seed) -> Dict[str, object]:
    return {
        "task": task.name,
        "strategy": strategy,
        "seed": seed,
        "schedule.total_iterations": schedule.total_iterations,
        "schedule.update_iterations": list(schedule.update_iterations),
        "schedule.batch_size": schedule.batch_size,
        "schedule.mutation_sigma": schedule.mutation_sigma,
        "budget.total": budget_total,
        "train.margin": train_cfg.margin,
        "train.learning_rate": train_cfg.learning_rate,
        "train.epochs": train_cfg.epochs,
        "train.finetune_epochs": train_cfg.finetune_epochs,
        "train.minibatch": train_cfg.minibatch,
    }
