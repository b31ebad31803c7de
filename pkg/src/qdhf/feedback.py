"""Similarity feedback: triplet sampling, judges, budgets and validation."""
from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .archive import Individual
from .models import LatentModel


class Choice(Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class Triplet:
    """Ask whether candidate ``a`` or ``b`` behaves more like ``ref``."""

    ref: int
    a: int
    b: int


@dataclass(frozen=True)
class Judgment:
    triplet: Triplet
    choice: Choice
    source: str = "oracle"


class BudgetExhausted(RuntimeError):
    """Raised when a run asks for more judgments than its budget allows."""


@dataclass
class Budget:
    """Total judgment allowance, split evenly across metric updates."""

    total: int
    updates: int = 1
    used: int = 0

    def __post_init__(self):
        if self.total < 0 or self.updates < 1:
            raise ValueError("budget needs total >= 0 and at least one update")

    @property
    def per_update(self) -> int:
        return self.total // self.updates

    @property
    def remaining(self) -> int:
        return self.total - self.used

    def charge(self, n: int) -> None:
        if n > self.remaining:
            raise BudgetExhausted(
                f"requested {n} judgments with only {self.remaining} of {self.total} left"
            )
        self.used += n


def sample_triplets(ids: Sequence[int], n: int, rng: np.random.Generator) -> List[Triplet]:
    """Uniform triplets of distinct ids."""
    if len(ids) < 3:
        raise ValueError("need at least three candidates to form a triplet")
    if n < 0:
        raise ValueError("triplet count must be non-negative")
    out = []
    for _ in range(n):
        i, j, k = rng.choice(len(ids), size=3, replace=False)
        out.append(Triplet(ref=int(ids[i]), a=int(ids[j]), b=int(ids[k])))
    return out


def oracle_judge(
    triplet: Triplet,
    gt_by_id: Mapping[int, np.ndarray],
    tie_tol: float = 1e-9,
) -> Optional[Judgment]:
    """Judge by ground-truth measure distance; ``None`` asks for a resample
    when the two distances tie within tolerance."""
    ref = np.asarray(gt_by_id[triplet.ref], dtype=float)
    da = float(np.linalg.norm(ref - np.asarray(gt_by_id[triplet.a], dtype=float)))
    db = float(np.linalg.norm(ref - np.asarray(gt_by_id[triplet.b], dtype=float)))
    if abs(da - db) <= tie_tol:
        return None
    return Judgment(triplet=triplet, choice=Choice.A if da < db else Choice.B, source="oracle")


class OracleJudge:
    """Simulated annotator backed by ground-truth measures."""

    supports_validation = True
    source = "oracle"

    def __init__(self, tie_tol: float = 1e-9):
        self.tie_tol = tie_tol

    def judge_batch(
        self,
        triplets: Sequence[Triplet],
        gt_by_id: Mapping[int, np.ndarray],
        payloads: Optional[Mapping[int, dict]] = None,
    ) -> List[Optional[Judgment]]:
        return [oracle_judge(t, gt_by_id, self.tie_tol) for t in triplets]


@dataclass
class JudgmentRequest:
    request_id: int
    triplet: Triplet
    payloads: Dict[str, dict]


class UnknownRequest(KeyError):
    pass


class AlreadyResolved(RuntimeError):
    pass


class JudgmentQueue:
    """Thread-safe pending-judgment queue bridging the optimizer and an
    external annotator (the HTTP service)."""

    def __init__(self):
        self._lock = threading.Condition()
        self._ids = itertools.count(1)
        self._pending: Dict[int, JudgmentRequest] = {}
        self._answers: Dict[int, str] = {}
        self._done: set = set()
        self._closed = False

    def submit(self, triplet: Triplet, payloads: Dict[str, dict]) -> int:
        with self._lock:
            request_id = next(self._ids)
            self._pending[request_id] = JudgmentRequest(request_id, triplet, payloads)
            self._lock.notify_all()
            return request_id

    def next_pending(self) -> Optional[JudgmentRequest]:
        """Oldest unanswered request, if any."""
        with self._lock:
            for request_id in sorted(self._pending):
                if request_id not in self._answers:
                    return self._pending[request_id]
            return None

    def resolve(self, request_id: int, answer: str) -> None:
        if answer not in ("A", "B", "skip"):
            raise ValueError(f"answer must be 'A', 'B' or 'skip', got {answer!r}")
        with self._lock:
            if request_id in self._done or request_id in self._answers:
                raise AlreadyResolved(request_id)
            if request_id not in self._pending:
                raise UnknownRequest(request_id)
            self._answers[request_id] = answer
            self._lock.notify_all()

    def wait(self, request_id: int) -> str:
        """Block until a request is answered (or the queue is closed)."""
        with self._lock:
            while request_id not in self._answers and not self._closed:
                self._lock.wait(timeout=0.5)
            if request_id not in self._answers:
                raise BudgetExhausted("feedback queue closed before the request was answered")
            del self._pending[request_id]
            self._done.add(request_id)
            return self._answers.pop(request_id)

    def close(self) -> None:
        with self._lock:
            self._closed = True
            self._lock.notify_all()

    @property
    def pending_count(self) -> int:
        with self._lock:
            return sum(1 for rid in self._pending if rid not in self._answers)


class HumanJudge:
    """Routes triplets through a judgment queue and blocks on the answers."""

    supports_validation = False
    source = "human"

    def __init__(self, queue: JudgmentQueue):
        self.queue = queue

    def judge_batch(
        self,
        triplets: Sequence[Triplet],
        gt_by_id: Mapping[int, np.ndarray],
        payloads: Optional[Mapping[int, dict]] = None,
    ) -> List[Optional[Judgment]]:
        payloads = payloads or {}
        request_ids = [
            self.queue.submit(
                t,
                {
                    "ref": payloads.get(t.ref, {}),
                    "a": payloads.get(t.a, {}),
                    "b": payloads.get(t.b, {}),
                },
            )
            for t in triplets
        ]
        out: List[Optional[Judgment]] = []
        for triplet, request_id in zip(triplets, request_ids):
            answer = self.queue.wait(request_id)
            if answer == "skip":
                out.append(None)
            else:
                out.append(Judgment(triplet=triplet, choice=Choice(answer), source="human"))
        return out


def collect_judgments(
    population: Sequence[Individual],
    n: int,
    judge,
    budget: Budget,
    rng: np.random.Generator,
    payload_fn: Optional[Callable[[Individual], dict]] = None,
) -> List[Judgment]:
    """Sample triplets over a population and judge until ``n`` are resolved.

    Ties and skips are resampled and never charged; the budget is charged
    exactly ``n`` on success.  Raises ``BudgetExhausted`` up front when the
    remaining allowance cannot cover the request.
    """
    if n > budget.remaining:
        raise BudgetExhausted(
            f"requested {n} judgments with only {budget.remaining} of {budget.total} left"
        )
    by_id = {ind.uid: ind for ind in population}
    gt_by_id = {uid: ind.gt_measures for uid, ind in by_id.items()}
    payloads = (
        {uid: payload_fn(ind) for uid, ind in by_id.items()} if payload_fn is not None else None
    )
    ids = list(by_id)
    out: List[Judgment] = []
    while len(out) < n:
        triplets = sample_triplets(ids, n - len(out), rng)
        for judgment in judge.judge_batch(triplets, gt_by_id, payloads):
            if judgment is not None:
                out.append(judgment)
    budget.charge(n)
    return out


def make_validation_set(
    individuals: Sequence[Individual], n: int, rng: np.random.Generator
) -> List[Judgment]:
    """Oracle-labelled held-out judgments used to track metric quality."""
    gt_by_id = {ind.uid: ind.gt_measures for ind in individuals}
    ids = list(gt_by_id)
    out: List[Judgment] = []
    while len(out) < n:
        for triplet in sample_triplets(ids, n - len(out), rng):
            judgment = oracle_judge(triplet, gt_by_id)
            if judgment is not None:
                out.append(judgment)
    return out


def validate_accuracy(
    model: LatentModel,
    features_by_id: Mapping[int, np.ndarray],
    judgments: Sequence[Judgment],
) -> float:
    """Fraction of judgments whose preferred candidate is also closer in the
    model's latent space."""
    if not judgments:
        raise ValueError("need at least one judgment")
    rows = []
    for j in judgments:
        t = j.triplet
        rows.extend((features_by_id[t.ref], features_by_id[t.a], features_by_id[t.b]))
    z = model.project_batch(np.asarray(rows, dtype=float)).reshape(len(judgments), 3, -1)
    da = np.linalg.norm(z[:, 0] - z[:, 1], axis=1)
    db = np.linalg.norm(z[:, 0] - z[:, 2], axis=1)
    predicted = np.where(da < db, "A", "B")
    actual = np.asarray([j.choice.value for j in judgments])
    return float(np.mean(predicted == actual))
