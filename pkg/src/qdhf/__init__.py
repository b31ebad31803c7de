"""Quality-diversity optimization with diversity metrics learned from
pairwise similarity feedback."""

from .archive import Archive, Individual, InsertionOutcome, MeasureBounds, cell_index
from .engine import RunResult, Schedule, emit_batch, rebuild_archive, run_qd
from .feedback import Budget, BudgetExhausted, Choice, Judgment, OracleJudge, Triplet
from .models import AutoEncoder, LinearProjection, PcaProjection, TrainConfig, triplet_loss

__version__ = "0.1.0"

__all__ = [
    "Archive",
    "AutoEncoder",
    "Budget",
    "BudgetExhausted",
    "Choice",
    "Individual",
    "InsertionOutcome",
    "Judgment",
    "LinearProjection",
    "MeasureBounds",
    "OracleJudge",
    "PcaProjection",
    "RunResult",
    "Schedule",
    "TrainConfig",
    "Triplet",
    "cell_index",
    "emit_batch",
    "rebuild_archive",
    "run_qd",
    "triplet_loss",
]
