"""Greedy k-center coreset selection.

The minimax k-center objective is NP-hard; farthest-point traversal gives the
classic 2-approximation and is what every memory-bank implementation in this
family uses. Selection is deterministic given the seed: the first pick is
uniform under the seed, later picks take the pool point farthest from the
current selection with ties broken by smallest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

# Pools at or below this row count precompute the full pairwise matrix; the
# distance-eval counter then records m^2, matching the quadratic cost model.
FULL_MATRIX_MAX_ROWS = 4096


@dataclass(frozen=True)
class CoresetConfig:
    ratio: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.ratio <= 1.0):
            raise ValueError(f"coreset ratio must be in (0, 1], got {self.ratio}")

    def budget(self, pool_size: int) -> int:
        """round(ratio * pool_size), half away from zero, floored at 1."""
        return max(1, int(np.floor(self.ratio * pool_size + 0.5)))


@dataclass
class Coreset:
    indices: np.ndarray  # selected row indices into the source pool
    vectors: np.ndarray  # (len(indices), dim) float32, verbatim pool rows
    covering_radius: float  # max over pool of distance to nearest selected
    distance_evals: int  # pairwise L2 evaluations spent selecting

    def __len__(self) -> int:
        return len(self.indices)


def kcenter_greedy(pool: np.ndarray, config: CoresetConfig) -> Coreset:
    """Select ``budget(m)`` pool rows by farthest-point traversal."""
    pool = np.asarray(pool)
    if pool.ndim != 2 or pool.shape[0] == 0:
        raise ValueError("pool must be a non-empty 2-D matrix")
    m = pool.shape[0]
    work = pool.astype(np.float64)
    budget = config.budget(m)
    rng = np.random.default_rng(config.seed)
    first = int(rng.integers(m))

    selected = np.empty(budget, dtype=np.int64)
    selected[0] = first
    taken = np.zeros(m, dtype=bool)
    taken[first] = True

    def pick(min_d: np.ndarray) -> int:
        # duplicates can tie at 0 with already-selected rows; mask those out
        masked = np.where(taken, -1.0, min_d)
        return int(masked.argmax())

    if m <= FULL_MATRIX_MAX_ROWS:
        dmat = cdist(work, work)
        evals = m * m
        min_d = dmat[first].copy()
        for t in range(1, budget):
            nxt = pick(min_d)
            selected[t] = nxt
            taken[nxt] = True
            np.minimum(min_d, dmat[nxt], out=min_d)
    else:
        min_d = np.linalg.norm(work - work[first], axis=1)
        evals = m
        for t in range(1, budget):
            nxt = pick(min_d)
            selected[t] = nxt
            taken[nxt] = True
            np.minimum(min_d, np.linalg.norm(work - work[nxt], axis=1), out=min_d)
            evals += m
    return Coreset(
        indices=selected,
        vectors=pool[selected].astype(np.float32),
        covering_radius=float(min_d.max()),
        distance_evals=evals,
    )
