"""Experiment configuration: defaults, validation and flat-key round-trips."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from .engine import STRATEGIES, STRATEGY_ALIASES, Schedule
from .models import TrainConfig


class ConfigError(ValueError):
    """Invalid or unresolvable experiment configuration."""


TASK_DEFAULTS = {
    "arm": {"batch_size": 100, "mutation_sigma": 0.1, "budget": 1000},
    "maze": {"batch_size": 200, "mutation_sigma": 0.2, "budget": 200},
}

DEFAULT_UPDATES = (0, 100, 250, 500)


@dataclass
class ExperimentConfig:
    """User-facing knobs; ``None`` fields resolve to task defaults."""

    task: str = "arm"
    strategy: str = "gt"
    seed: int = 0
    total_iterations: Optional[int] = None
    update_iterations: Optional[Tuple[int, ...]] = None
    batch_size: Optional[int] = None
    mutation_sigma: Optional[float] = None
    budget: Optional[int] = None
    margin: float = 0.05
    learning_rate: float = 1e-2
    epochs: int = 100
    finetune_epochs: int = 50
    minibatch: int = 32
    latent_dim: int = 2
    archive_shape: Tuple[int, int] = (50, 50)
    maze_file: Optional[str] = None
    out: Optional[str] = None
    service_port: int = 8765

    def resolve(self) -> "ExperimentConfig":
        """Fill every optional field from task defaults and validate."""
        strategy = STRATEGY_ALIASES.get(self.strategy, self.strategy)
        if strategy not in STRATEGIES:
            raise ConfigError(
                f"unknown strategy {self.strategy!r}; choose from {', '.join(STRATEGIES)}"
            )
        if self.task not in TASK_DEFAULTS:
            raise ConfigError(f"unknown task {self.task!r}; choose from arm, maze")
        defaults = TASK_DEFAULTS[self.task]
        total = self.total_iterations or 1000
        cfg = replace(
            self,
            strategy=strategy,
            total_iterations=total,
            update_iterations=(
                tuple(self.update_iterations)
                if self.update_iterations is not None
                # default refresh points, dropped when they fall past a short run
                else tuple(u for u in DEFAULT_UPDATES if u < total)
            ),
            batch_size=self.batch_size or defaults["batch_size"],
            mutation_sigma=(
                self.mutation_sigma if self.mutation_sigma is not None else defaults["mutation_sigma"]
            ),
            budget=self.budget if self.budget is not None else defaults["budget"],
            archive_shape=tuple(self.archive_shape),
        )
        try:
            cfg.schedule().validate()
            cfg.train_config().validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.budget < 0:
            raise ConfigError("budget must be non-negative")
        if cfg.latent_dim < 1:
            raise ConfigError("latent_dim must be at least 1")
        if len(cfg.archive_shape) != 2 or any(s < 1 for s in cfg.archive_shape):
            raise ConfigError("archive shape must be two positive integers")
        return cfg

    def schedule(self) -> Schedule:
        return Schedule(
            total_iterations=self.total_iterations,
            update_iterations=tuple(self.update_iterations),
            batch_size=self.batch_size,
            mutation_sigma=self.mutation_sigma,
        )

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            margin=self.margin,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            finetune_epochs=self.finetune_epochs,
            minibatch=self.minibatch,
        )

    def to_flat(self) -> Dict[str, object]:
        """Flat dotted-key document mirroring the CLI flags."""
        return {
            "task": self.task,
            "strategy": self.strategy,
            "seed": self.seed,
            "schedule.total_iterations": self.total_iterations,
            "schedule.update_iterations": (
                list(self.update_iterations) if self.update_iterations is not None else None
            ),
            "schedule.batch_size": self.batch_size,
            "schedule.mutation_sigma": self.mutation_sigma,
            "budget.total": self.budget,
            "train.margin": self.margin,
            "train.learning_rate": self.learning_rate,
            "train.epochs": self.epochs,
            "train.finetune_epochs": self.finetune_epochs,
            "train.minibatch": self.minibatch,
            "archive.latent_dim": self.latent_dim,
            "archive.shape": list(self.archive_shape),
            "task.maze_file": self.maze_file,
            "out": self.out,
            "service.port": self.service_port,
        }


FLAT_KEYS = {
    "task": "task",
    "strategy": "strategy",
    "seed": "seed",
    "schedule.total_iterations": "total_iterations",
    "schedule.update_iterations": "update_iterations",
    "schedule.batch_size": "batch_size",
    "schedule.mutation_sigma": "mutation_sigma",
    "budget.total": "budget",
    "train.margin": "margin",
    "train.learning_rate": "learning_rate",
    "train.epochs": "epochs",
    "train.finetune_epochs": "finetune_epochs",
    "train.minibatch": "minibatch",
    "archive.latent_dim": "latent_dim",
    "archive.shape": "archive_shape",
    "task.maze_file": "maze_file",
    "out": "out",
    "service.port": "service_port",
}


def from_flat(data: Dict[str, object]) -> ExperimentConfig:
    """Build a config from a flat dotted-key document."""
    unknown = set(data) - set(FLAT_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, value in data.items():
        if value is None:
            continue
        name = FLAT_KEYS[key]
        if name in ("update_iterations", "archive_shape"):
            value = tuple(int(v) for v in value)
        kwargs[name] = value
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config_file(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a JSON object")
    return from_flat(data)
