"""Excess-risk measurement against the analytic Bayes rule, and the passive
k-NN baseline for label-for-label active-vs-passive comparisons."""
from __future__ import annotations

import time
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import core
from .pool import LabelOracle, Pool
from .seeding import substream
from .synth import SyntheticProblem
from .thresholds import KallsConfig, margin_delta


@dataclass(frozen=True)
class RiskEstimate:
    excess_risk: float
    std_error: float
    n_test: int
    deep_margin_agreement: float
    n_deep: int


def _risk_on_sample(classifier, problem: SyntheticProblem, X: np.ndarray,
                    delta_margin: float) -> RiskEstimate:
    eta = problem.eta(X)
    fstar = (eta >= 0.5).astype(np.int64)
    pred = np.asarray(classifier(X), dtype=np.int64)
    loss = np.abs(2.0 * eta - 1.0) * (pred != fstar)
    n = X.shape[0]
    std_error = float(np.std(loss, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    deep = np.abs(eta - 0.5) > delta_margin
    n_deep = int(np.count_nonzero(deep))
    agreement = float(np.mean(pred[deep] == fstar[deep])) if n_deep else 1.0
    return RiskEstimate(excess_risk=float(np.mean(loss)), std_error=std_error,
                        n_test=n, deep_margin_agreement=agreement, n_deep=n_deep)


def excess_risk(classifier, problem: SyntheticProblem, n_test: int,
                delta_margin: float, rng: np.random.Generator) -> RiskEstimate:
    """Monte-Carlo excess risk E[|2 eta - 1| 1{f != f*}] over fresh draws, plus
    agreement with the Bayes rule restricted to |eta - 1/2| > delta_margin."""
    if n_test < 1:
        raise ValueError(f"n_test must be >= 1, got {n_test}")
    X = problem.sample(n_test, rng)
    return _risk_on_sample(classifier, problem, X, delta_margin)


def default_passive_k(n_labels: int, alpha: float, d: int) -> int:
    """ceil(n^(2 alpha / (2 alpha + d))), resolved in high precision so exact
    integer powers (e.g. 1000^(2/3) = 100) round to the true integer."""
    if n_labels < 1:
        raise ValueError("n_labels must be >= 1")
    with mp.workdps(60):
        e = (2 * mp.mpf(alpha)) / (2 * mp.mpf(alpha) + d)
        v = mp.mpf(n_labels) ** e
        nearest = mp.nint(v)
        if abs(v - nearest) <= mp.mpf("1e-40") * max(nearest, 1):
            return max(1, int(nearest))
        return max(1, int(mp.ceil(v)))


class PassiveKnn:
    """Majority-vote k-NN over an i.i.d. labeled draw.

    Vote ties go to label 1 (the eta_hat >= 1/2 convention); distance ties are
    broken by draw order.
    """

    def __init__(self, X: np.ndarray, y: np.ndarray, k: int) -> None:
        if not 1 <= k <= X.shape[0]:
            raise ValueError(f"k_n must satisfy 1 <= k_n <= n_labels, got {k}")
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.k = int(k)

    def __call__(self, queries: np.ndarray) -> np.ndarray:
        q = np.asarray(queries, dtype=np.float64)
        if q.ndim == 1:
            q = q[None, :]
        n_train = self.X.shape[0]
        out = np.empty(q.shape[0], dtype=np.int64)
        chunk = max(1, 4_000_000 // max(1, n_train))
        for lo in range(0, q.shape[0], chunk):
            block = q[lo:lo + chunk]
            d2 = ((block[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            out[lo:lo + chunk] = self._vote(d2)
        return out

    def _vote(self, d2: np.ndarray) -> np.ndarray:
        k, n_train = self.k, self.X.shape[0]
        if k == n_train:
            ones = np.full(d2.shape[0], int(self.y.sum()))
        else:
            kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
            closer = d2 < kth[:, None]
            n_closer = closer.sum(axis=1)
            at_kth = d2 == kth[:, None]
            ones = (self.y[None, :] * closer).sum(axis=1)
            need = k - n_closer
            simple = at_kth.sum(axis=1) == need
            # Common case: no duplicate distance at the k-th slot.
            ones = np.where(simple, ones + (self.y[None, :] * at_kth).sum(axis=1), ones)
            for i in np.flatnonzero(~simple):
                tied = np.flatnonzero(at_kth[i])[: need[i]]  # draw order breaks ties
                ones[i] += int(self.y[tied].sum())
        return (2 * ones >= k).astype(np.int64)


def passive_knn(problem: SyntheticProblem, n_labels: int, k_n: int | None,
                rng: np.random.Generator) -> PassiveKnn:
    """Draw n_labels labeled pairs from the problem and return the k_n-NN rule."""
    if n_labels < 1:
        raise ValueError(f"n_labels must be >= 1, got {n_labels}")
    if k_n is None:
        alpha = problem.certified_smooth.alpha if problem.certified_smooth else 1.0
        k_n = default_passive_k(n_labels, alpha, problem.d)
    if k_n > n_labels:
        raise ValueError(f"k_n {k_n} exceeds n_labels {n_labels}")
    X = problem.sample(n_labels, rng)
    y = (rng.random(n_labels) < problem.eta(X)).astype(np.int64)
    return PassiveKnn(X, y, k_n)


@dataclass
class CellResult:
    family: str
    kappa: float
    budget: int
    seed: int
    labels_used_active: int
    excess_active: float | None
    excess_passive: float | None
    deep_margin_agreement: float | None
    informative_count: int
    wall_ms: float
    error: str = ""


@dataclass
class ComparisonTable:
    rows: list[CellResult]
    delta_margin: float

    def budgets(self) -> list[int]:
        return sorted({r.budget for r in self.rows})

    def median_excess_active(self, budget: int, fallback: float) -> float:
        """Per-budget median; cells that produced no classifier count as the
        worst-case excess (the flipped-classifier bound) so failures are not
        silently dropped."""
        vals = [r.excess_active if r.excess_active is not None else fallback
                for r in self.rows if r.budget == budget]
        return float(np.median(vals))

    def median_deep_agreement(self, budget: int) -> float:
        vals = [r.deep_margin_agreement if r.deep_margin_agreement is not None else 0.0
                for r in self.rows if r.budget == budget]
        return float(np.median(vals))

    def to_csv(self, path: str, header_comment: str | None = None) -> None:
        cols = ["family", "kappa", "budget", "seed", "labels_used_active",
                "excess_active", "excess_passive", "deep_margin_agreement",
                "informative_count", "wall_ms"]
        with open(path, "w", newline="") as fh:
            if header_comment:
                for line in header_comment.splitlines():
                    fh.write(f"# {line}\n")
            fh.write(",".join(cols) + "\n")
            for r in self.rows:
                fh.write(",".join([
                    r.family,
                    format(r.kappa, ".17g"),
                    str(r.budget),
                    str(r.seed),
                    str(r.labels_used_active),
                    "" if r.excess_active is None else format(r.excess_active, ".17g"),
                    "" if r.excess_passive is None else format(r.excess_passive, ".17g"),
                    ("" if r.deep_margin_agreement is None
                     else format(r.deep_margin_agreement, ".17g")),
                    str(r.informative_count),
                    format(r.wall_ms, ".3f"),
                ]) + "\n")


def run_cell(problem: SyntheticProblem, config: KallsConfig, w: int,
             budget: int, seed: int, n_test: int,
             delta_margin: float) -> CellResult:
    """One (budget, seed) cell: active run, label-matched passive baseline,
    paired evaluation on a shared test draw."""
    t0 = time.perf_counter()
    cell_cfg = KallsConfig(epsilon=config.epsilon, delta=config.delta, n=budget,
                           c_const=config.c_const, u_const=config.u_const,
                           lb_factor=config.lb_factor, budget_mode=config.budget_mode)
    pool = Pool(problem.sample(w, substream(seed, "pool", budget)))
    oracle = LabelOracle(pool, problem.eta, budget,
                         seed=int(substream(seed, "oracle", budget).integers(2**62)),
                         mode=config.budget_mode)
    active, trace = core.run_kalls(pool, oracle, cell_cfg,
                                   problem.certified_smooth
                                   or _nominal_smooth(problem),
                                   problem.certified_margin,
                                   est_rng=substream(seed, "estimation", budget),
                                   eta_fn=problem.eta)
    X_test = problem.sample(n_test, substream(seed, "evaluation", budget))

    error_parts = []
    if len(active):
        est_a = _risk_on_sample(core.as_classifier(active), problem, X_test, delta_margin)
        excess_active, agreement = est_a.excess_risk, est_a.deep_margin_agreement
    else:
        excess_active, agreement = None, None
        error_parts.append("empty active set")

    labels_used = trace.labels_spent
    if labels_used >= 1:
        classifier_p = passive_knn(problem, labels_used, None,
                                   substream(seed, "passive", budget))
        est_p = _risk_on_sample(classifier_p, problem, X_test, delta_margin)
        excess_passive = est_p.excess_risk
    else:
        excess_passive = None
        error_parts.append("no labels spent; passive baseline undefined")

    return CellResult(
        family=problem.family, kappa=problem.kappa, budget=budget, seed=seed,
        labels_used_active=labels_used, excess_active=excess_active,
        excess_passive=excess_passive, deep_margin_agreement=agreement,
        informative_count=len(trace.informative_indices),
        wall_ms=(time.perf_counter() - t0) * 1e3, error="; ".join(error_parts))


def _nominal_smooth(problem: SyntheticProblem):
    from .thresholds import SmoothnessParams
    return SmoothnessParams(alpha=1.0, L=2.0, d=problem.d)


def compare(problem: SyntheticProblem, budgets: list[int], config: KallsConfig,
            seeds: list[int], w: int, n_test: int = 20_000,
            delta_margin: float | None = None, threads: int = 1) -> ComparisonTable:
    """Active-vs-passive grid over budgets x seeds.

    The passive baseline is trained on the labels the active run actually spent
    (label-for-label fairness).  Per-cell failures are recorded in the row, not
    raised.  Cells own independent substreams keyed by (seed, budget), so the
    result is identical however the grid is scheduled.
    """
    if not budgets or not seeds:
        raise ValueError("budgets and seeds must be nonempty")
    if delta_margin is None:
        delta_margin = margin_delta(config.epsilon, problem.certified_margin)
    cells = [(budget, seed) for budget in budgets for seed in seeds]
    if threads > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(_run_cell_star,
                               [(problem, config, w, b, s, n_test, delta_margin)
                                for b, s in cells]))
    else:
        rows = [run_cell(problem, config, w, b, s, n_test, delta_margin)
                for b, s in cells]
    return ComparisonTable(rows=rows, delta_margin=delta_margin)


def _run_cell_star(args) -> CellResult:
    return run_cell(*args)
