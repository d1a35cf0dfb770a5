"""Unlabeled pool, ordered nearest-neighbor queries, and the budgeted label oracle.

Neighbor order is the contract everything else builds on: ascending squared
Euclidean distance, exact ties broken by ascending index.  The oracle models an
i.i.d. labeled sample: each pool point has a single persistent Bernoulli(eta(x))
realization, drawn up front from the seed, revealed on first request and cached
forever after.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np


class BudgetExhausted(RuntimeError):
    """A label request would drive the oracle budget negative."""


def _as_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError(f"points must be a nonempty (w, d) array, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite-valued")
    return pts


class Pool:
    """Immutable set of w unlabeled points in R^d."""

    def __init__(self, points: np.ndarray) -> None:
        self.points = _as_points(points)
        self.points.setflags(write=False)

    @property
    def w(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def sq_dists_from(self, x: np.ndarray) -> np.ndarray:
        """Squared Euclidean distances from x to every pool point."""
        diff = self.points - np.asarray(x, dtype=np.float64).reshape(1, -1)
        return np.einsum("ij,ij->i", diff, diff)

    @classmethod
    def from_csv(cls, path: str) -> "Pool":
        """Load a pool from CSV: one row per point, d numeric columns, no header."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row:
                    continue
                rows.append([float(v) for v in row])
        if not rows:
            raise ValueError(f"pool CSV {path} is empty")
        return cls(np.asarray(rows, dtype=np.float64))

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in self.points:
                writer.writerow([format(v, ".17g") for v in row])


@dataclass
class NeighborList:
    """Ordered neighbors of a center: (index, distance) ascending, ties by index."""

    center_index: int | None
    neighbors: list[tuple[int, float]]


def _ordered_indices(sq_dists: np.ndarray) -> np.ndarray:
    # lexsort's last key is primary: squared distance, then index.
    idx = np.arange(sq_dists.shape[0])
    return np.lexsort((idx, sq_dists))


def neighbor_order(pool: Pool, center_index: int) -> np.ndarray:
    """Full neighbor ordering of a pool point, center excluded."""
    if not 0 <= center_index < pool.w:
        raise ValueError(f"center_index {center_index} out of range [0, {pool.w})")
    d2 = pool.sq_dists_from(pool.points[center_index])
    order = _ordered_indices(d2)
    return order[order != center_index]


def k_nearest(pool: Pool, center_index: int, k: int) -> NeighborList:
    """The k pool points closest to pool point ``center_index`` (itself excluded)."""
    if not 1 <= k <= pool.w - 1:
        raise ValueError(f"k must satisfy 1 <= k <= w-1 = {pool.w - 1}, got {k}")
    order = neighbor_order(pool, center_index)[:k]
    d2 = pool.sq_dists_from(pool.points[center_index])
    return NeighborList(center_index, [(int(j), float(np.sqrt(d2[j]))) for j in order])


def k_nearest_external(points: np.ndarray, query: np.ndarray, k: int) -> NeighborList:
    """As ``k_nearest`` but the query point need not belong to the set."""
    pts = _as_points(points)
    if not 1 <= k <= pts.shape[0]:
        raise ValueError(f"k must satisfy 1 <= k <= {pts.shape[0]}, got {k}")
    diff = pts - np.asarray(query, dtype=np.float64).reshape(1, -1)
    d2 = np.einsum("ij,ij->i", diff, diff)
    order = _ordered_indices(d2)[:k]
    return NeighborList(None, [(int(j), float(np.sqrt(d2[j]))) for j in order])


class LabelOracle:
    """Budgeted, seeded access to noisy labels of pool points.

    The labeled dataset is realized once at construction: Y_i ~ Bernoulli(eta(X_i))
    i.i.d. from the seed.  ``request_label`` reveals realizations; a revealed label
    never changes.  Budget accounting depends on the mode:

      * ``strict_paper``: every request costs 1, repeat requests included.
      * ``cached_labels``: only first-time reveals cost 1.
    """

    def __init__(self, pool: Pool, eta_fn: Callable[[np.ndarray], np.ndarray],
                 budget: int, seed: int, mode: str = "strict_paper") -> None:
        if budget < 0:
            raise ValueError(f"budget must be >= 0, got {budget}")
        if mode not in ("strict_paper", "cached_labels"):
            raise ValueError(f"unknown budget mode {mode!r}")
        self.pool = pool
        self.mode = mode
        self.seed = int(seed)
        eta = np.asarray(eta_fn(pool.points), dtype=np.float64)
        if eta.shape != (pool.w,) or np.any(eta < 0.0) or np.any(eta > 1.0):
            raise ValueError("eta_fn must map pool points to values in [0, 1]")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))
        self._labels = (rng.random(pool.w) < eta).astype(np.int64)
        self._revealed = np.zeros(pool.w, dtype=bool)
        self._remaining = int(budget)
        self._fresh = 0

    @property
    def remaining_budget(self) -> int:
        return self._remaining

    @property
    def fresh_requests(self) -> int:
        return self._fresh

    def peek_labels(self, indices: np.ndarray) -> np.ndarray:
        """Read realizations without accounting.  Internal: callers must follow up
        with request_batch on exactly the indices whose labels they use."""
        return self._labels[np.asarray(indices, dtype=np.intp)]

    def request_label(self, pool_index: int) -> int:
        """Request one label; returns the cached realization on re-query."""
        return int(self.request_batch(np.asarray([pool_index]))[0])

    def request_batch(self, indices: np.ndarray) -> np.ndarray:
        """Request labels for distinct pool indices, with exact budget accounting."""
        idx = np.asarray(indices, dtype=np.intp)
        if idx.size == 0:
            return np.zeros(0, dtype=np.int64)
        if np.any(idx < 0) or np.any(idx >= self.pool.w):
            raise ValueError("pool index out of range")
        fresh_mask = ~self._revealed[idx]
        n_fresh = int(np.count_nonzero(fresh_mask))
        cost = idx.size if self.mode == "strict_paper" else n_fresh
        if cost > self._remaining:
            raise BudgetExhausted(
                f"request of cost {cost} exceeds remaining budget {self._remaining}")
        self._remaining -= cost
        self._fresh += n_fresh
        self._revealed[idx] = True
        return self._labels[idx]


def label_oracle_for(points_or_pool, eta_fn, budget: int, seed: int,
                     mode: str = "strict_paper") -> LabelOracle:
    """Convenience constructor accepting a Pool or a raw point array."""
    pool = points_or_pool if isinstance(points_or_pool, Pool) else Pool(points_or_pool)
    return LabelOracle(pool, eta_fn, budget, seed, mode)
