"""The active-learning main loop and its two subroutines.

``confident_label`` infers a point's label from successive nearest-neighbor
labels with an anytime cut-off; ``reliable`` tests whether an already-labeled
active record makes a new point uninformative; ``run_kalls`` scans the pool,
spends the label budget on informative points and returns the active set
backing the final 1-NN classifier.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import thresholds as th
from .estimation import est_prob, est_prob_from_sq_dists
from .pool import LabelOracle, Pool, neighbor_order

RELIABLE_ACCEPT_RATIO = 75.0 / 94.0  # estimate threshold of the informativeness test


class AbstainEmpty(RuntimeError):
    """confident_label was invoked with no request allowance."""


class EmptyActiveSet(RuntimeError):
    """1-NN classification requested from an empty active set."""


@dataclass(frozen=True)
class ActiveRecord:
    point: np.ndarray
    inferred_label: int
    lb: float
    source_index: int


class ActiveSet:
    """Ordered labeled records; source indices strictly increase with insertion."""

    def __init__(self) -> None:
        self.records: list[ActiveRecord] = []
        self._points_cache: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: ActiveRecord) -> None:
        if self.records and record.source_index <= self.records[-1].source_index:
            raise ValueError("source indices must be strictly increasing")
        self.records.append(record)
        self._points_cache = None

    def points(self) -> np.ndarray:
        if self._points_cache is None or self._points_cache.shape[0] != len(self.records):
            self._points_cache = (np.vstack([r.point for r in self.records])
                                  if self.records else np.zeros((0, 0)))
        return self._points_cache

    def labels(self) -> np.ndarray:
        return np.asarray([r.inferred_label for r in self.records], dtype=np.int64)

    def to_csv(self, path: str, header_comment: str | None = None) -> None:
        if not self.records:
            d = 0
        else:
            d = self.records[0].point.shape[0]
        cols = [f"x{i}" for i in range(d)] + ["label", "lb", "source_index"]
        with open(path, "w", newline="") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write(",".join(cols) + "\n")
            for r in self.records:
                coords = [format(v, ".17g") for v in r.point]
                fh.write(",".join(coords + [str(r.inferred_label),
                                            format(r.lb, ".17g"),
                                            str(r.source_index)]) + "\n")

    @classmethod
    def from_csv(cls, path: str) -> "ActiveSet":
        active = cls()
        with open(path) as fh:
            rows = [line.strip() for line in fh
                    if line.strip() and not line.startswith("#")]
        if not rows:
            raise ValueError(f"active-set CSV {path} has no header")
        header = rows[0].split(",")
        d = sum(1 for c in header if c.startswith("x"))
        for line in rows[1:]:
            parts = line.split(",")
            active.append(ActiveRecord(
                point=np.asarray([float(v) for v in parts[:d]]),
                inferred_label=int(parts[d]),
                lb=float(parts[d + 1]),
                source_index=int(parts[d + 2]),
            ))
        return active


@dataclass
class ConfidentOutcome:
    y_hat: int
    q: list[tuple[int, int]]
    cut_off_fired: bool
    eta_hat: float


@dataclass
class PerPointRecord:
    s: int
    q_size: int
    lb: float
    accepted: bool
    eta_hat: float
    y_hat: int
    cut_off_fired: bool
    k_cap: int
    k_tilde: float | None

    def as_dict(self) -> dict:
        return {
            "s": self.s,
            "q_size": self.q_size,
            "lb": self.lb,
            "accepted": self.accepted,
            "eta_hat": self.eta_hat,
            "y_hat": self.y_hat,
            "cut_off_fired": self.cut_off_fired,
            "k_cap": self.k_cap,
            "k_tilde": self.k_tilde,
        }


@dataclass
class RunTrace:
    informative_indices: list[int] = field(default_factory=list)
    labels_spent: int = 0
    stopped_reason: str = "pool_exhausted"
    per_point: list[PerPointRecord] = field(default_factory=list)
    points_scanned: int = 0
    reliable_skips: int = 0

    def to_json_dict(self, config_dict: dict, version: str) -> dict:
        return {
            "tool_version": version,
            "config": config_dict,
            "labels_spent": self.labels_spent,
            "stopped_reason": self.stopped_reason,
            "points_scanned": self.points_scanned,
            "reliable_skips": self.reliable_skips,
            "informative_indices": list(self.informative_indices),
            "per_point": [p.as_dict() for p in self.per_point],
        }

    def to_json(self, config_dict: dict, version: str) -> str:
        return json.dumps(self.to_json_dict(config_dict, version),
                          sort_keys=True, indent=2) + "\n"


def confident_label(pool: Pool, oracle: LabelOracle, center_index: int,
                    k_prime: int, t_budget: int, delta_s: float,
                    neighbors: np.ndarray | None = None) -> ConfidentOutcome:
    """Infer the label of a pool point from its nearest neighbors' labels.

    Requests labels of successive neighbors, stopping at min(k', t) requests or
    as soon as |running mean - 1/2| > 2 b(delta_s, k) (the cut-off).  Returns the
    majority label over the requested set.  The stopping index is computed on the
    oracle's predetermined realizations and exactly those labels are then
    requested, which is request-for-request identical to the sequential loop.
    """
    cap = min(int(k_prime), int(t_budget))
    if cap < 1:
        raise AbstainEmpty("no label request possible: min(k', t) < 1")
    if neighbors is None:
        neighbors = neighbor_order(pool, center_index)
    cap = min(cap, neighbors.shape[0])
    if cap < 1:
        raise AbstainEmpty("pool has no neighbors to request")

    idx = neighbors[:cap]
    peeked = oracle.peek_labels(idx)
    cum = np.cumsum(peeked, dtype=np.int64)
    ks = np.arange(1, cap + 1, dtype=np.float64)
    dev = np.abs(cum / ks - 0.5)
    fired = dev > 2.0 * th.confidence_radius_vec(delta_s, ks)
    hits = np.flatnonzero(fired)
    if hits.size:
        k_star = int(hits[0]) + 1
        cut_off_fired = True
    else:
        k_star = cap
        cut_off_fired = False

    labels = oracle.request_batch(idx[:k_star])
    eta_hat = float(cum[k_star - 1]) / k_star
    return ConfidentOutcome(
        y_hat=1 if eta_hat >= 0.5 else 0,
        q=[(int(i), int(v)) for i, v in zip(idx[:k_star], labels)],
        cut_off_fired=cut_off_fired,
        eta_hat=eta_hat,
    )


def reliable(pool: Pool, x_index: int, delta_s: float, smooth: th.SmoothnessParams,
             active: ActiveSet, u_const: int, rng: np.random.Generator,
             short_circuit: bool = True) -> bool:
    """Informativeness test: True when some active record's neighborhood already
    pins down the label of pool point ``x_index``.

    For each record (X', Y', c), estimates the pool mass of the open balls of
    radius rho(X, X') around X' and around X with accuracy (c / 64L)^(d/alpha),
    and answers True when either estimate is <= 75/94 of that accuracy.  The
    empty active set is never reliable.  ``short_circuit`` stops at the first
    passing record, checking records nearest-first; the exhaustive mode follows
    insertion order and evaluates every estimate before deciding.
    """
    if not active.records:
        return False
    x = pool.points[x_index]
    rec_points = active.points()
    diff = rec_points - x.reshape(1, -1)
    d2 = np.einsum("ij,ij->i", diff, diff)
    order = np.argsort(d2, kind="stable") if short_circuit else np.arange(len(d2))
    d2_pool_from_x = pool.sq_dists_from(x)

    found = False
    for j in order:
        rec = active.records[j]
        eps_o = (rec.lb / (64.0 * smooth.L)) ** (smooth.d / smooth.alpha)
        radius = float(np.sqrt(d2[j]))
        threshold = RELIABLE_ACCEPT_RATIO * eps_o
        hit = est_prob(pool.points, rec.point, radius, eps_o, u_const,
                       delta_s, rng).p_hat <= threshold
        if not hit or not short_circuit:
            hit = (est_prob_from_sq_dists(d2_pool_from_x, radius, eps_o, u_const,
                                          delta_s, rng).p_hat <= threshold) or hit
        if hit:
            found = True
            if short_circuit:
                return True
    return found


def run_kalls(pool: Pool, oracle: LabelOracle, config: th.KallsConfig,
              smooth: th.SmoothnessParams, margin: th.MarginParams,
              est_rng: np.random.Generator,
              eta_fn: Callable[[np.ndarray], np.ndarray] | None = None,
              reliable_full_eval: bool = False) -> tuple[ActiveSet, RunTrace]:
    """Scan the pool, label informative points, and build the active set.

    Per scanned point s (1-based): split the confidence as delta_s = delta/(32 s^2);
    skip the point if ``reliable`` answers True; otherwise run ``confident_label``
    with per-point budget k(eps, delta_s) capped by the remaining label budget,
    record LB = |eta_hat - 1/2| - b(delta_s, |Q|), and keep the record iff
    LB >= lb_factor * b(delta_s, |Q|).  Stops when the budget is exhausted or the
    pool is fully scanned.  ``eta_fn`` (synthetic runs only) adds the
    noise-adaptive request bound to the trace for diagnostics.
    """
    if pool.w < 2:
        raise ValueError("pool must contain at least 2 points")
    if oracle.remaining_budget != config.n:
        raise ValueError(
            f"oracle budget {oracle.remaining_budget} does not match config.n {config.n}")

    active = ActiveSet()
    trace = RunTrace()
    budget_hit = False

    for s in range(1, pool.w + 1):
        if oracle.remaining_budget <= 0:
            budget_hit = True
            break
        trace.points_scanned = s
        delta_s = th.per_point_delta(config.delta, s)
        x_index = s - 1

        if reliable(pool, x_index, delta_s, smooth, active, config.u_const,
                    est_rng, short_circuit=not reliable_full_eval):
            trace.reliable_skips += 1
            continue

        k_prime = th.label_budget_k(config.epsilon, delta_s, margin, config.c_const)
        t_before = oracle.remaining_budget
        outcome = confident_label(pool, oracle, x_index, k_prime, t_before, delta_s)
        q_size = len(outcome.q)
        b_q = th.confidence_radius(delta_s, q_size)
        lb = abs(outcome.eta_hat - 0.5) - b_q
        accepted = lb >= config.lb_factor * b_q
        trace.informative_indices.append(s)

        k_tilde = None
        if eta_fn is not None:
            gap = abs(float(eta_fn(pool.points[x_index:x_index + 1])[0]) - 0.5)
            if gap > 0.0:
                value = th.adaptive_budget_bound(gap, delta_s, config.c_const)
                if np.isfinite(value):  # keep the trace valid JSON
                    k_tilde = value
        trace.per_point.append(PerPointRecord(
            s=s, q_size=q_size, lb=lb, accepted=accepted,
            eta_hat=outcome.eta_hat, y_hat=outcome.y_hat,
            cut_off_fired=outcome.cut_off_fired,
            k_cap=min(k_prime, t_before), k_tilde=k_tilde))

        if accepted:
            active.append(ActiveRecord(point=pool.points[x_index].copy(),
                                       inferred_label=outcome.y_hat,
                                       lb=lb, source_index=x_index))

    trace.labels_spent = config.n - oracle.remaining_budget
    if budget_hit or oracle.remaining_budget <= 0:
        trace.stopped_reason = "budget_exhausted"
    else:
        trace.stopped_reason = "pool_exhausted"
    return active, trace


def one_nn_label_batch(active: ActiveSet, queries: np.ndarray) -> np.ndarray:
    """1-NN labels for a batch of queries; distance ties go to the lowest
    source index (records are stored in source order, argmin picks the first)."""
    if not active.records:
        raise EmptyActiveSet("cannot classify with an empty active set")
    q = np.asarray(queries, dtype=np.float64)
    if q.ndim == 1:
        q = q[None, :]
    pts = active.points()
    labels = active.labels()
    out = np.empty(q.shape[0], dtype=np.int64)
    chunk = max(1, 2_000_000 // max(1, pts.shape[0]))
    for lo in range(0, q.shape[0], chunk):
        block = q[lo:lo + chunk]
        d2 = ((block[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
        out[lo:lo + chunk] = labels[np.argmin(d2, axis=1)]
    return out


def one_nn_classify(active: ActiveSet, query: np.ndarray):
    """Label of the record nearest to a single query point."""
    return int(one_nn_label_batch(active, np.asarray(query, dtype=np.float64))[0])


def as_classifier(active: ActiveSet) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap an active set as a batch classifier callable."""
    def classify(X: np.ndarray) -> np.ndarray:
        return one_nn_label_batch(active, X)

    return classify
