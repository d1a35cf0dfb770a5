"""Closed-form confidence radii, margin width, label budgets and feasibility checks.

Every quantity the active learner needs ahead of time lives here: the anytime
confidence radius ``b(delta, k)``, the margin width ``Delta``, the per-point
label budget ``k(eps, delta)``, the per-point confidence split ``delta_s``, and
the (purely diagnostic) feasibility report.  All functions are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Saturation marker for budgets that exceed any practical request count.
INFEASIBLE_BUDGET = 2**63 - 1

_INV_E = 1.0 / math.e


@dataclass(frozen=True)
class SmoothnessParams:
    """Smoothness of the regression function measured in marginal mass.

    alpha: exponent in (0, 1]; L: constant > 1; d: ambient dimension.
    """

    alpha: float
    L: float
    d: int

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        if not self.L > 1.0:
            raise ValueError(f"L must be > 1, got {self.L}")
        if self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")


@dataclass(frozen=True)
class MarginParams:
    """Margin-noise parameters: mass near the decision boundary is < C * eps^beta."""

    beta: float
    C: float

    def __post_init__(self) -> None:
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.C < 1.0:
            raise ValueError(f"C must be >= 1, got {self.C}")


@dataclass(frozen=True)
class DoublingParams:
    """Doubling constant for ball masses; balls below mass_floor are exempt."""

    c_db: float
    mass_floor: float = 1e-9

    def __post_init__(self) -> None:
        if self.c_db <= 0.0:
            raise ValueError(f"c_db must be > 0, got {self.c_db}")
        if not 0.0 < self.mass_floor <= 1.0:
            raise ValueError(f"mass_floor must be in (0, 1], got {self.mass_floor}")


@dataclass(frozen=True)
class KallsConfig:
    """Run parameters of the active learner.

    budget_mode:
      * ``strict_paper``   -- every oracle request costs budget, repeats included.
      * ``cached_labels``  -- a pool point's label is drawn once and re-requests
        of the same point are free.
    """

    epsilon: float
    delta: float
    n: int
    c_const: float = 8.0
    u_const: int = 50
    lb_factor: float = 0.1
    budget_mode: str = "strict_paper"

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if self.n < 0:
            raise ValueError(f"label budget n must be >= 0, got {self.n}")
        if self.c_const < 1.0:
            raise ValueError(f"c_const must be >= 1, got {self.c_const}")
        if self.u_const < 7:
            raise ValueError(f"u_const must be >= 7, got {self.u_const}")
        if self.budget_mode not in ("strict_paper", "cached_labels"):
            raise ValueError(f"unknown budget_mode {self.budget_mode!r}")


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < _INV_E:
        raise ValueError(f"delta must be in (0, 1/e) so loglog(1/delta) > 0, got {delta}")


def margin_delta(epsilon: float, margin: MarginParams) -> float:
    """Margin width Delta = max(eps/2, (eps/2C)^(1/(beta+1)))."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
    return max(epsilon / 2.0, (epsilon / (2.0 * margin.C)) ** (1.0 / (margin.beta + 1.0)))


def confidence_radius(delta: float, k: int) -> float:
    """Anytime confidence radius b(delta, k), valid simultaneously over all k.

    b = sqrt((2/k) * (log(1/delta) + loglog(1/delta) + loglog(e*k)))
    """
    _check_delta(delta)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    log_inv = math.log(1.0 / delta)
    return math.sqrt((2.0 / k) * (log_inv + math.log(log_inv) + math.log(math.log(math.e * k))))


def confidence_radius_vec(delta: float, ks: np.ndarray) -> np.ndarray:
    """Vectorized ``confidence_radius`` over an array of k values."""
    _check_delta(delta)
    ks = np.asarray(ks, dtype=np.float64)
    if np.any(ks < 1):
        raise ValueError("all k must be >= 1")
    log_inv = math.log(1.0 / delta)
    return np.sqrt((2.0 / ks) * (log_inv + math.log(log_inv) + np.log(np.log(math.e * ks))))


def label_budget_real(epsilon: float, delta: float, margin: MarginParams,
                      c_const: float = 8.0) -> float:
    """Per-point label budget before rounding: (c/Delta^2) * bracket.

    bracket = log(1/delta) + loglog(1/delta) + loglog(512*sqrt(e)/Delta).
    Exactly linear in ``c_const``.
    """
    _check_delta(delta)
    if c_const <= 0.0:
        raise ValueError(f"c_const must be > 0, got {c_const}")
    dm = margin_delta(epsilon, margin)
    log_inv = math.log(1.0 / delta)
    bracket = log_inv + math.log(log_inv) + math.log(math.log(512.0 * math.sqrt(math.e) / dm))
    return (c_const / (dm * dm)) * bracket


def label_budget_k(epsilon: float, delta: float, margin: MarginParams,
                   c_const: float = 8.0) -> int:
    """Integer per-point label budget k(eps, delta); saturates at INFEASIBLE_BUDGET."""
    value = label_budget_real(epsilon, delta, margin, c_const)
    if not math.isfinite(value) or value >= float(INFEASIBLE_BUDGET):
        return INFEASIBLE_BUDGET
    return max(1, math.ceil(value))


def phi_n(n: int, delta: float) -> float:
    """sqrt((1/n) * (log(1/delta) + loglog(1/delta)))."""
    _check_delta(delta)
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    log_inv = math.log(1.0 / delta)
    return math.sqrt((log_inv + math.log(log_inv)) / n)


def per_point_delta(delta: float, s: int) -> float:
    """Confidence share delta_s = delta / (32 s^2) of the s-th scanned point."""
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    return delta / (32.0 * s * s)


def adaptive_budget_bound(margin_gap: float, delta_s: float, c_const: float = 8.0) -> float:
    """Noise-adaptive request bound for a point with |eta(x) - 1/2| = margin_gap.

    (c / (4 a^2)) * (log(1/delta_s) + loglog(1/delta_s) + loglog(256*sqrt(e)/a));
    diagnostic only -- it needs the true regression function.
    """
    _check_delta(delta_s)
    if not 0.0 < margin_gap <= 0.5:
        raise ValueError(f"margin_gap must be in (0, 1/2], got {margin_gap}")
    log_inv = math.log(1.0 / delta_s)
    bracket = (log_inv + math.log(log_inv)
               + math.log(math.log(256.0 * math.sqrt(math.e) / margin_gap)))
    return (c_const / (4.0 * margin_gap * margin_gap)) * bracket


@dataclass(frozen=True)
class FeasibilityReport:
    """Diagnostic view of the asymptotic sufficiency conditions.

    ``budget_poly`` and ``pool_poly`` are the polynomial parts only (the theory
    hides polylog factors and unspecified constants inside them), so the booleans
    are indicative, never gating.  ``estprob_pool_rhs`` is the exact pool-size
    requirement of the unlabeled-sampling subroutine, evaluated at the supplied w.
    """

    epsilon: float
    delta: float
    n: int
    w: int
    delta_margin: float
    k_budget: int
    phi_n: float
    p_eps: float
    p_tilde_eps: float
    t_eps_delta: float
    budget_poly: float
    pool_poly: float
    estprob_pool_rhs: float
    budget_ok: bool
    pool_rate_ok: bool
    pool_estprob_ok: bool

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "n": self.n,
            "w": self.w,
            "delta_margin": self.delta_margin,
            "k_budget": self.k_budget,
            "phi_n": self.phi_n,
            "p_eps": self.p_eps,
            "p_tilde_eps": self.p_tilde_eps,
            "t_eps_delta": self.t_eps_delta,
            "budget_poly_part": self.budget_poly,
            "pool_poly_part": self.pool_poly,
            "estprob_pool_rhs": self.estprob_pool_rhs,
            "budget_ok_poly_part_only": self.budget_ok,
            "pool_rate_ok_poly_part_only": self.pool_rate_ok,
            "pool_estprob_ok": self.pool_estprob_ok,
        }

    def render(self) -> str:
        """Human-readable table."""
        d = self.as_dict()
        width = max(len(k) for k in d)
        lines = ["feasibility report (diagnostic only; polynomial parts omit polylog factors)"]
        for key, val in d.items():
            if isinstance(val, bool):
                sval = "yes" if val else "no"
            elif isinstance(val, float):
                sval = f"{val:.6g}"
            else:
                sval = str(val)
            lines.append(f"  {key:<{width}}  {sval}")
        return "\n".join(lines)


def feasibility_report(config: KallsConfig, smooth: SmoothnessParams,
                       margin: MarginParams, w: int) -> FeasibilityReport:
    """Evaluate the sufficiency conditions at the supplied (n, w); never raises.

    Reported quantities: the budget bound's polynomial part, the two pool bounds
    (rate polynomial part, and the exact unlabeled-sampling requirement with
    c_bar = lb_factor and phi_n), the covering scales p_eps / p_tilde_eps and
    the covering horizon T(eps, delta).
    """
    eps, delta = config.epsilon, config.delta
    dm = margin_delta(eps, margin)
    exp_pool = (2.0 * smooth.alpha + smooth.d) / (smooth.alpha * (margin.beta + 1.0))
    exp_budget = ((2.0 * smooth.alpha + smooth.d - smooth.alpha * margin.beta)
                  / (smooth.alpha * (margin.beta + 1.0)))
    budget_poly = (1.0 / eps) ** exp_budget
    pool_poly = (1.0 / eps) ** exp_pool

    p_eps = (31.0 * dm / (1024.0 * smooth.L)) ** (smooth.d / smooth.alpha)
    p_tilde = (dm / (128.0 * smooth.L)) ** (smooth.d / smooth.alpha)
    t_eps_delta = math.log(8.0 / delta) / p_tilde

    k_budget = label_budget_k(eps, delta, margin, config.c_const)
    phi = phi_n(max(config.n, 1), delta) if delta < _INV_E else float("nan")

    if config.n >= 1 and delta < _INV_E and w >= 1:
        psi = (config.lb_factor * phi / (64.0 * smooth.L)) ** (smooth.d / smooth.alpha)
        estprob_rhs = 400.0 * math.log(12800.0 * w * w / (delta * psi)) / psi
        pool_estprob_ok = w >= estprob_rhs
    else:
        estprob_rhs = float("inf")
        pool_estprob_ok = False

    return FeasibilityReport(
        epsilon=eps,
        delta=delta,
        n=config.n,
        w=w,
        delta_margin=dm,
        k_budget=k_budget,
        phi_n=phi,
        p_eps=p_eps,
        p_tilde_eps=p_tilde,
        t_eps_delta=t_eps_delta,
        budget_poly=budget_poly,
        pool_poly=pool_poly,
        estprob_pool_rhs=estprob_rhs,
        budget_ok=config.n >= budget_poly,
        pool_rate_ok=w >= pool_poly,
        pool_estprob_ok=pool_estprob_ok,
    )
