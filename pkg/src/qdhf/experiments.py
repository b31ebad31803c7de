"""Multi-run orchestration: single experiments, benchmarks, budget sweeps
and the served human-in-the-loop session."""
from __future__ import annotations

import csv
import json
import threading
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .config import ConfigError, ExperimentConfig
from .engine import STRATEGIES, RunResult, archive_to_dict, run_qd, update_points
from .evalsuite import aggregate_trials, write_metrics_csv
from .feedback import HumanJudge, JudgmentQueue, OracleJudge
from .models import model_to_dict
from .service import FeedbackService, StatusBoard
from .tasks import make_task

SWEEP_STRATEGIES = ("qdhf-online", "qdhf-offline")
SWEEP_COLUMNS = ("budget", "strategy", "qd_score_all", "val_acc")


def run_experiment(
    cfg: ExperimentConfig,
    judge=None,
    payloads: bool = False,
    on_iteration: Optional[Callable] = None,
) -> RunResult:
    """Resolve a config and execute one run with an oracle judge by default."""
    rc = cfg.resolve()
    task = make_task(rc.task, rc.maze_file)
    return run_qd(
        task,
        rc.strategy,
        rc.schedule(),
        rc.budget,
        rc.train_config(),
        judge if judge is not None else OracleJudge(),
        rc.seed,
        latent_dim=rc.latent_dim,
        archive_shape=rc.archive_shape,
        payloads=payloads,
        config=rc.to_flat(),
        on_iteration=on_iteration,
    )


def run_trials(cfg: ExperimentConfig, trials: int) -> List[RunResult]:
    """Repeat a config with seeds seed+0 .. seed+trials-1."""
    if trials < 1:
        raise ValueError("need at least one trial")
    base = cfg.resolve()
    out = []
    for t in range(trials):
        trial_cfg = ExperimentConfig(**{**base.__dict__, "seed": base.seed + t})
        out.append(run_experiment(trial_cfg))
    return out


def bench(
    cfg: ExperimentConfig,
    trials: int,
    strategies: Optional[Sequence[str]] = None,
) -> Tuple[List[dict], Dict[str, List[RunResult]]]:
    """Run strategies side by side and aggregate their final metrics.

    Returns the summary entries (one per strategy) and the raw results.
    Single-trial benches report a zero std.
    """
    strategies = tuple(strategies) if strategies else STRATEGIES
    summary = []
    results: Dict[str, List[RunResult]] = {}
    for strategy in strategies:
        runs = run_trials(
            ExperimentConfig(**{**cfg.__dict__, "strategy": strategy}), trials
        )
        results[strategy] = runs
        finals = [r.final for r in runs]
        if trials == 1:
            metrics = {
                name: {"mean": getattr(finals[0], name), "std": 0.0}
                for name in (
                    "qd_score_archive",
                    "coverage_archive",
                    "qd_score_all",
                    "coverage_all",
                )
            }
            if finals[0].val_acc is not None:
                metrics["val_acc"] = {"mean": finals[0].val_acc, "std": 0.0}
        else:
            metrics = aggregate_trials(finals)
        summary.append(
            {
                "strategy": strategy,
                "task": cfg.task,
                "trials": trials,
                "metrics": metrics,
            }
        )
    return summary, results


def sweep_budget(
    budgets: Sequence[int],
    cfg: ExperimentConfig,
    trials: int = 5,
    strategies: Sequence[str] = SWEEP_STRATEGIES,
) -> List[dict]:
    """Grid of budget x strategy x trial runs; one row per run.

    Seeds are paired across budgets and strategies so each trial index sees
    the same stream everywhere.
    """
    if not budgets:
        raise ValueError("need at least one budget")
    if any(b < 0 for b in budgets):
        raise ValueError("budgets must be non-negative")
    base = cfg.resolve()
    rows = []
    for budget in budgets:
        for strategy in strategies:
            for t in range(trials):
                run_cfg = ExperimentConfig(
                    **{
                        **base.__dict__,
                        "strategy": strategy,
                        "budget": int(budget),
                        "seed": base.seed + t,
                    }
                )
                final = run_experiment(run_cfg).final
                rows.append(
                    {
                        "budget": int(budget),
                        "strategy": strategy,
                        "qd_score_all": final.qd_score_all,
                        "val_acc": final.val_acc,
                    }
                )
    return rows


def write_sweep_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row["budget"],
                    row["strategy"],
                    repr(row["qd_score_all"]),
                    "" if row["val_acc"] is None else repr(row["val_acc"]),
                ]
            )


def _write_checkpoint(ckpt_dir: Path, working, model, budget, rows, interrupted=False) -> None:
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    (ckpt_dir / "archive.json").write_text(json.dumps(archive_to_dict(working)))
    if model is not None:
        (ckpt_dir / "model.json").write_text(json.dumps(model_to_dict(model)))
    (ckpt_dir / "state.json").write_text(
        json.dumps(
            {
                "iteration": rows[-1].iteration + 1 if rows else 0,
                "budget": {"total": budget.total, "used": budget.used},
                "interrupted": interrupted,
            }
        )
    )
    write_metrics_csv(rows, ckpt_dir / "metrics.csv")


class ServeSession:
    """A human-in-the-loop run: optimizer in a worker thread, judgments over
    HTTP, checkpoints at every metric update and artifacts on completion."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        ui_dir=None,
        host: str = "127.0.0.1",
        port: Optional[int] = None,
        force: bool = False,
    ):
        rc = cfg.resolve()
        if rc.strategy not in ("qdhf-online", "qdhf-offline"):
            raise ConfigError("serving judgments requires strategy qdhf-online or qdhf-offline")
        if rc.out is None:
            raise ConfigError("serving requires an output directory (--out)")
        out = Path(rc.out)
        if out.exists() and any(out.iterdir()) and not force:
            raise ConfigError(f"{out} exists and is not empty (use --force to overwrite)")
        self.cfg = rc
        self.force = force
        self.queue = JudgmentQueue()
        self.judge = HumanJudge(self.queue)
        self.board = StatusBoard(
            state="starting",
            task=rc.task,
            strategy=rc.strategy,
            iteration=0,
            total_iterations=rc.total_iterations,
            budget={"total": rc.budget, "used": 0},
        )
        self.service = FeedbackService(
            self.queue, self.board, ui_dir=ui_dir, host=host, port=rc.service_port if port is None else port
        )
        self.result: Optional[RunResult] = None
        self.error: Optional[BaseException] = None
        self._thread: Optional[threading.Thread] = None
        self._last_state = None

    def start(self) -> None:
        self.service.start()
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def _run(self) -> None:
        out = Path(self.cfg.out)
        ckpt_dir = out / "checkpoint"
        checkpoints = set(update_points(self.cfg.strategy, self.cfg.schedule()))
        self.board.update(state="running")

        def on_iteration(it, working, all_solutions, model, budget, rows):
            self._last_state = (working, model, budget, list(rows))
            last = rows[-1]
            self.board.update(
                iteration=it + 1,
                budget={"total": budget.total, "used": budget.used},
                coverage_archive=last.coverage_archive,
                qd_score_archive=last.qd_score_archive,
            )
            if it in checkpoints:
                _write_checkpoint(ckpt_dir, working, model, budget, rows)

        try:
            result = run_experiment(
                self.cfg, judge=self.judge, payloads=True, on_iteration=on_iteration
            )
            result.save(out, force=True)
            self.result = result
            final = result.final
            self.board.update(
                state="done",
                final={
                    "qd_score_archive": final.qd_score_archive,
                    "coverage_archive": final.coverage_archive,
                    "qd_score_all": final.qd_score_all,
                    "coverage_all": final.coverage_all,
                    "judgments_used": final.judgments_used,
                },
            )
        except BaseException as exc:
            self.error = exc
            self.board.update(state="failed", error=str(exc))
            if self._last_state is not None:
                working, model, budget, rows = self._last_state
                _write_checkpoint(ckpt_dir, working, model, budget, rows, interrupted=True)

    def wait(self, timeout: Optional[float] = None) -> bool:
        """Join the optimizer thread; True once it has finished."""
        if self._thread is None:
            return False
        self._thread.join(timeout)
        return not self._thread.is_alive()

    def interrupt(self) -> None:
        """Unblock any waiting judgment and checkpoint the partial run."""
        self.queue.close()
        self.wait(timeout=10)

    def shutdown(self) -> None:
        self.service.shutdown()
