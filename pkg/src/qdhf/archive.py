"""Grid archive primitives shared by every optimizer variant."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


class InsertionOutcome(Enum):
    NEW_CELL = "new_cell"
    IMPROVED = "improved"
    REJECTED = "rejected"


@dataclass
class Individual:
    """One evaluated solution together with everything later stages may need.

    ``gt_measures`` are the task's native behavior descriptors and are always
    present.  ``latent_measures`` are filled in by a learned metric model and
    may be recomputed whenever that model changes.
    """

    genome: np.ndarray
    objective: float
    features: np.ndarray
    gt_measures: np.ndarray
    latent_measures: Optional[np.ndarray] = None
    uid: int = -1

    def measures(self, key: str) -> np.ndarray:
        if key == "gt":
            return self.gt_measures
        if key == "latent":
            if self.latent_measures is None:
                raise ValueError("individual has no latent measures")
            return self.latent_measures
        raise ValueError(f"unknown measure key: {key!r}")


class MeasureBounds:
    """Per-dimension [low, high] intervals spanning a grid archive."""

    def __init__(self, pairs: Sequence[Sequence[float]]):
        arr = np.asarray(pairs, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("bounds must be a sequence of (low, high) pairs")
        if not np.all(np.isfinite(arr)):
            raise ValueError("bounds must be finite")
        if not np.all(arr[:, 0] < arr[:, 1]):
            raise ValueError("each lower bound must be strictly below its upper bound")
        self.low = arr[:, 0].copy()
        self.high = arr[:, 1].copy()

    def __len__(self) -> int:
        return len(self.low)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MeasureBounds)
            and np.array_equal(self.low, other.low)
            and np.array_equal(self.high, other.high)
        )

    def __repr__(self) -> str:
        return f"MeasureBounds({self.to_pairs()})"

    def to_pairs(self) -> List[List[float]]:
        return [[float(a), float(b)] for a, b in zip(self.low, self.high)]

    @classmethod
    def from_samples(cls, measures: np.ndarray, expand: float = 0.05) -> "MeasureBounds":
        """Bounds covering observed measures, widened by ``expand`` per side.

        Degenerate dimensions (all samples equal) get a tiny symmetric span so
        the interval stays valid.
        """
        m = np.asarray(measures, dtype=float)
        if m.ndim != 2 or m.shape[0] == 0:
            raise ValueError("need a non-empty (n, k) measure matrix")
        lo = m.min(axis=0)
        hi = m.max(axis=0)
        span = np.maximum(hi - lo, 1e-9)
        return cls(np.stack([lo - expand * span, hi + expand * span], axis=1))


def cell_indices(
    measures: np.ndarray, bounds: MeasureBounds, shape: Tuple[int, ...]
) -> np.ndarray:
    """Vectorized grid coordinates for an (n, k) matrix of measures.

    Out-of-range values clamp to the boundary cells.  The index is computed as
    floor(fraction * shape) rather than dividing by a precomputed cell width,
    which keeps exact interval endpoints on the correct side of each bin edge.
    """
    m = np.asarray(measures, dtype=float)
    if m.ndim != 2 or m.shape[1] != len(bounds) or len(shape) != len(bounds):
        raise ValueError("measure, bounds and shape dimensions disagree")
    if not np.all(np.isfinite(m)):
        raise ValueError("measures must be finite")
    frac = (np.clip(m, bounds.low, bounds.high) - bounds.low) / (bounds.high - bounds.low)
    idx = np.floor(frac * np.asarray(shape)).astype(np.int64)
    return np.minimum(idx, np.asarray(shape) - 1)


def cell_index(
    measures: np.ndarray, bounds: MeasureBounds, shape: Tuple[int, ...]
) -> Tuple[int, ...]:
    """Grid coordinates of a single measure vector."""
    m = np.asarray(measures, dtype=float)
    if m.shape != (len(bounds),):
        raise ValueError("measure vector has the wrong dimension")
    return tuple(int(i) for i in cell_indices(m[None, :], bounds, shape)[0])


class Archive:
    """Uniform grid keeping the single best individual per cell.

    ``measure_key`` selects which descriptor of an individual the grid is
    indexed by: the task's ground-truth measures or a model's latent ones.
    A dense ``objective_grid`` mirrors the occupied cells so score summaries
    are a single masked sum.
    """

    def __init__(
        self,
        shape: Sequence[int],
        bounds: MeasureBounds,
        measure_key: str = "gt",
    ):
        self.shape = tuple(int(s) for s in shape)
        if len(self.shape) != len(bounds) or any(s < 1 for s in self.shape):
            raise ValueError("archive shape must match bounds and be positive")
        if measure_key not in ("gt", "latent"):
            raise ValueError(f"unknown measure key: {measure_key!r}")
        self.bounds = bounds
        self.measure_key = measure_key
        self.cells: Dict[Tuple[int, ...], Individual] = {}
        self.objective_grid = np.full(self.shape, -np.inf)

    @property
    def num_cells(self) -> int:
        return math.prod(self.shape)

    def __len__(self) -> int:
        return len(self.cells)

    def insert(self, ind: Individual) -> InsertionOutcome:
        """Insert under elitism: new cells accept, better objectives replace,
        ties keep the incumbent."""
        idx = cell_index(ind.measures(self.measure_key), self.bounds, self.shape)
        return self.insert_at(idx, ind)

    def insert_at(self, idx: Tuple[int, ...], ind: Individual) -> InsertionOutcome:
        """Insert with a precomputed cell index (hot path for batches)."""
        incumbent = self.cells.get(idx)
        if incumbent is None:
            self.cells[idx] = ind
            self.objective_grid[idx] = ind.objective
            return InsertionOutcome.NEW_CELL
        if ind.objective > incumbent.objective:
            self.cells[idx] = ind
            self.objective_grid[idx] = ind.objective
            return InsertionOutcome.IMPROVED
        return InsertionOutcome.REJECTED

    def individuals(self) -> List[Individual]:
        """Current elites in stable (insertion-order) sequence."""
        return list(self.cells.values())

    def best(self) -> Optional[Individual]:
        if not self.cells:
            return None
        return max(self.cells.values(), key=lambda ind: ind.objective)
