"""Synthetic classification problems with analytic ground truth.

Each family ships an exact regression function eta, the Bayes classifier, an
analytic marginal ball-mass, and certified constants for the three executable
assumptions: smoothness in marginal mass (H3), margin noise (H2) and doubling
of ball masses (H4).  The margin shape is one knob ``kappa``: eta(x) crosses
1/2 like |2F(x)-1|^kappa where F is the marginal CDF, so the same certified
constants cover uniform, Gaussian, discrete and product marginals.

kappa = 0 is the noiseless limit (eta in {0, 1} off the boundary); it has no
valid smoothness certificate, so ``certified_smooth`` is None there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .seeding import substream
from .thresholds import DoublingParams, MarginParams, SmoothnessParams

FAMILIES = (
    "power_margin_uniform_1d",
    "power_margin_gaussian_1d",
    "discrete_atoms",
    "product_uniform_nd",
)


@dataclass(frozen=True)
class AssumptionReport:
    assumption: str
    checked: int
    max_violation: float
    passed: bool
    tolerance: float

    def as_dict(self) -> dict:
        mv = self.max_violation
        return {
            "assumption": self.assumption,
            "checked": self.checked,
            "max_violation": mv if math.isfinite(mv) else repr(mv),
            "passed": self.passed,
            "tolerance": self.tolerance,
        }


def _signed_power(v: np.ndarray, kappa: float) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if kappa == 0.0:
        return np.sign(v)
    return np.sign(v) * np.abs(v) ** kappa


def _eta_from_u(u: np.ndarray, kappa: float) -> np.ndarray:
    return 0.5 + 0.5 * _signed_power(2.0 * np.asarray(u, dtype=np.float64) - 1.0, kappa)


def _power_margin_mass(eps: np.ndarray, kappa: float) -> np.ndarray:
    """P(|eta - 1/2| <= eps) when eta = 1/2 + sign(.)|2U-1|^kappa / 2, U uniform."""
    eps = np.asarray(eps, dtype=np.float64)
    if kappa == 0.0:
        return np.where(eps >= 0.5, 1.0, 0.0)
    return np.minimum((2.0 * eps) ** (1.0 / kappa), 1.0)


class SyntheticProblem:
    """Base class; subclasses fix the marginal and the analytic ball mass."""

    family: str

    def __init__(self, kappa: float, d: int, seed: int) -> None:
        if kappa < 0.0:
            raise ValueError(f"kappa must be >= 0, got {kappa}")
        self.kappa = float(kappa)
        self.d = int(d)
        self.seed = int(seed)
        alpha = min(self.kappa, 1.0)
        self.certified_smooth = (
            SmoothnessParams(alpha=alpha, L=2.0, d=self.d) if self.kappa > 0.0 else None
        )
        if self.kappa > 0.0:
            self.certified_margin = MarginParams(beta=1.0 / self.kappa,
                                                 C=2.0 ** (1.0 / self.kappa))
        else:
            self.certified_margin = MarginParams(beta=1.0, C=2.0)
        self.certified_doubling: DoublingParams | None = None

    # -- marginal-specific hooks -------------------------------------------
    def sample(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def eta(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def ball_mass(self, centers: np.ndarray, radii: np.ndarray) -> np.ndarray:
        """Analytic marginal mass of open Euclidean balls."""
        raise NotImplementedError

    def doubling_grid(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def spec_dict(self) -> dict:
        return {"family": self.family, "kappa": self.kappa, "d": self.d}

    # -- shared exact quantities -------------------------------------------
    def bayes(self, X: np.ndarray) -> np.ndarray:
        return (self.eta(X) >= 0.5).astype(np.int64)

    def margin_mass(self, eps: np.ndarray) -> np.ndarray:
        """Exact P(|eta(X) - 1/2| <= eps)."""
        return _power_margin_mass(eps, self.kappa)

    def bayes_risk(self) -> float:
        """E[min(eta, 1 - eta)] = kappa / (2 (kappa + 1)) for these families."""
        return self.kappa / (2.0 * (self.kappa + 1.0))

    def mean_abs_margin(self) -> float:
        """E|2 eta - 1| = 1 / (kappa + 1); the excess risk of the flipped Bayes rule."""
        return 1.0 / (self.kappa + 1.0)

    def default_rng(self) -> np.random.Generator:
        return substream(self.seed, "points")

    def _points_1d(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X[:, 0] if X.ndim == 2 else X


def _interval_mass(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return np.clip(np.minimum(hi, 1.0) - np.maximum(lo, 0.0), 0.0, 1.0)


class UniformPowerMargin1D(SyntheticProblem):
    family = "power_margin_uniform_1d"

    def __init__(self, kappa: float, seed: int) -> None:
        super().__init__(kappa, 1, seed)
        self.certified_doubling = DoublingParams(c_db=2.0, mass_floor=1e-9)

    def sample(self, n, rng=None):
        rng = rng or self.default_rng()
        return rng.random((n, 1))

    def eta(self, X):
        return _eta_from_u(self._points_1d(X), self.kappa)

    def ball_mass(self, centers, radii):
        x = self._points_1d(np.atleast_1d(np.asarray(centers, dtype=np.float64)))
        r = np.asarray(radii, dtype=np.float64)
        return _interval_mass(x - r, x + r)

    def doubling_grid(self):
        centers = np.linspace(0.0125, 0.9875, 40)
        radii = np.geomspace(1e-3, 2.0, 25)
        cc, rr = np.meshgrid(centers, radii, indexing="ij")
        return cc.reshape(-1, 1), rr.ravel()


class GaussianPowerMargin1D(SyntheticProblem):
    family = "power_margin_gaussian_1d"

    def __init__(self, kappa: float, seed: int) -> None:
        super().__init__(kappa, 1, seed)
        # Doubling fails in deep tails; certified only for balls above the floor,
        # over centers within the (1e-3, 1-1e-3) quantile range.
        self.certified_doubling = DoublingParams(c_db=16.0, mass_floor=1e-3)

    def sample(self, n, rng=None):
        rng = rng or self.default_rng()
        return rng.standard_normal((n, 1))

    def eta(self, X):
        return _eta_from_u(ndtr(self._points_1d(X)), self.kappa)

    def ball_mass(self, centers, radii):
        x = self._points_1d(np.atleast_1d(np.asarray(centers, dtype=np.float64)))
        r = np.asarray(radii, dtype=np.float64)
        return ndtr(x + r) - ndtr(x - r)

    def doubling_grid(self):
        centers = ndtri(np.linspace(1e-3, 1.0 - 1e-3, 40))
        radii = np.geomspace(1e-3, 8.0, 25)
        cc, rr = np.meshgrid(centers, radii, indexing="ij")
        return cc.reshape(-1, 1), rr.ravel()


class DiscreteAtoms(SyntheticProblem):
    family = "discrete_atoms"

    def __init__(self, kappa: float, seed: int, n_atoms: int = 256) -> None:
        if n_atoms < 2 or n_atoms % 2 != 0:
            raise ValueError(f"n_atoms must be an even integer >= 2, got {n_atoms}")
        super().__init__(kappa, 1, seed)
        self.n_atoms = int(n_atoms)
        self.atoms = (np.arange(self.n_atoms) + 0.5) / self.n_atoms
        # Even atom count keeps every |2a-1| >= 1/M, giving the clean margin constant.
        if self.kappa > 0.0:
            self.certified_margin = MarginParams(beta=1.0 / self.kappa,
                                                 C=2.0 ** (1.0 + 1.0 / self.kappa))
        self.certified_doubling = DoublingParams(c_db=3.0, mass_floor=1e-9)

    def spec_dict(self):
        return {"family": self.family, "kappa": self.kappa, "d": self.d,
                "n_atoms": self.n_atoms}

    def sample(self, n, rng=None):
        rng = rng or self.default_rng()
        return self.atoms[rng.integers(0, self.n_atoms, size=n)][:, None]

    def eta(self, X):
        return _eta_from_u(self._points_1d(X), self.kappa)

    def ball_mass(self, centers, radii):
        x = self._points_1d(np.atleast_1d(np.asarray(centers, dtype=np.float64)))
        r = np.asarray(radii, dtype=np.float64)
        lo = np.searchsorted(self.atoms, x - r, side="right")
        hi = np.searchsorted(self.atoms, x + r, side="left")
        return np.maximum(hi - lo, 0) / self.n_atoms

    def margin_mass(self, eps):
        eps = np.asarray(eps, dtype=np.float64)
        if self.kappa == 0.0:
            return np.where(eps >= 0.5, 1.0, 0.0)
        v = (2.0 * eps) ** (1.0 / self.kappa)
        lo = np.searchsorted(self.atoms, (1.0 - v) / 2.0, side="left")
        hi = np.searchsorted(self.atoms, (1.0 + v) / 2.0, side="right")
        return (hi - lo) / self.n_atoms

    def bayes_risk(self):
        e = self.eta(self.atoms[:, None])
        return float(np.mean(np.minimum(e, 1.0 - e)))

    def mean_abs_margin(self):
        return float(np.mean(np.abs(2.0 * self.eta(self.atoms[:, None]) - 1.0)))

    def doubling_grid(self):
        step = max(1, self.n_atoms // 40)
        centers = self.atoms[::step]
        spacing = 1.0 / self.n_atoms
        radii = np.geomspace(0.6 * spacing, 2.0, 25)
        cc, rr = np.meshgrid(centers, radii, indexing="ij")
        return cc.reshape(-1, 1), rr.ravel()


def _quarter_disc_area(a: np.ndarray, b: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Area of {u, v >= 0, u <= a, v <= b, u^2 + v^2 <= r^2} for a, b >= 0."""
    a = np.minimum(a, r)
    b = np.minimum(b, r)
    with np.errstate(invalid="ignore", divide="ignore"):
        safe_r = np.where(r > 0.0, r, 1.0)

        def arc_integral(t):
            # integral_0^t sqrt(r^2 - u^2) du for 0 <= t <= r
            t = np.clip(t, 0.0, r)
            return 0.5 * (t * np.sqrt(np.maximum(r * r - t * t, 0.0))
                          + r * r * np.arcsin(np.clip(t / safe_r, 0.0, 1.0)))

        u_b = np.sqrt(np.maximum(r * r - b * b, 0.0))
        flat = b * np.minimum(a, u_b)
        arc = np.maximum(arc_integral(a) - arc_integral(np.minimum(a, u_b)), 0.0)
        area = np.where(r > 0.0, flat + arc, 0.0)
    return area


def _circle_box_area(cx: np.ndarray, cy: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Exact area of B((cx, cy), r) intersected with the unit square."""
    def q(a, b):
        return np.sign(a) * np.sign(b) * _quarter_disc_area(np.abs(a), np.abs(b), r)

    return (q(1.0 - cx, 1.0 - cy) - q(-cx, 1.0 - cy)
            - q(1.0 - cx, -cy) + q(-cx, -cy))


class ProductUniformND(SyntheticProblem):
    family = "product_uniform_nd"

    def __init__(self, kappa: float, d: int, seed: int) -> None:
        if d < 2:
            raise ValueError(f"product family needs d >= 2, got {d}; use the 1-d family")
        super().__init__(kappa, d, seed)
        if d == 2:
            self.certified_doubling = DoublingParams(c_db=4.0, mass_floor=1e-9)

    def sample(self, n, rng=None):
        rng = rng or self.default_rng()
        return rng.random((n, self.d))

    def eta(self, X):
        X = np.asarray(X, dtype=np.float64)
        return _eta_from_u(X[:, 0], self.kappa)

    def ball_mass(self, centers, radii):
        if self.d != 2:
            raise NotImplementedError(
                "analytic ball mass for the product family is implemented for d = 2 only")
        c = np.asarray(centers, dtype=np.float64)
        if c.ndim == 1:
            c = c[None, :]
        r = np.asarray(radii, dtype=np.float64)
        return _circle_box_area(c[:, 0], c[:, 1], r)

    def doubling_grid(self):
        g = np.linspace(0.05, 0.95, 7)
        cx, cy = np.meshgrid(g, g, indexing="ij")
        centers = np.column_stack([cx.ravel(), cy.ravel()])
        radii = np.geomspace(1e-2, 1.6, 20)
        cc = np.repeat(centers, radii.size, axis=0)
        rr = np.tile(radii, centers.shape[0])
        return cc, rr


def make_problem(family: str, kappa: float = 1.0, d: int = 1, seed: int = 0,
                 n_atoms: int = 256) -> SyntheticProblem:
    """Factory for the synthetic families; kappa = 0 is the noiseless limit."""
    if family == "power_margin_uniform_1d":
        if d != 1:
            raise ValueError("power_margin_uniform_1d is one-dimensional")
        return UniformPowerMargin1D(kappa, seed)
    if family == "power_margin_gaussian_1d":
        if d != 1:
            raise ValueError("power_margin_gaussian_1d is one-dimensional")
        return GaussianPowerMargin1D(kappa, seed)
    if family == "discrete_atoms":
        if d != 1:
            raise ValueError("discrete_atoms is one-dimensional")
        return DiscreteAtoms(kappa, seed, n_atoms=n_atoms)
    if family == "product_uniform_nd":
        return ProductUniformND(kappa, d, seed)
    raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")


# -- assumption checkers ----------------------------------------------------

def check_smoothness(problem: SyntheticProblem, n_pairs: int = 100_000,
                     rng: np.random.Generator | None = None,
                     smooth: SmoothnessParams | None = None,
                     tolerance: float = 1e-9) -> AssumptionReport:
    """Sample point pairs and test |eta(x) - eta(z)| <= L * mass(B(x, rho))^(alpha/d)."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    smooth = smooth if smooth is not None else problem.certified_smooth
    if smooth is None:
        raise ValueError("problem has no certified smoothness constants (noiseless kappa=0)")
    rng = rng or problem.default_rng()
    X = problem.sample(n_pairs, rng)
    Z = problem.sample(n_pairs, rng)
    rho = np.sqrt(np.einsum("ij,ij->i", X - Z, X - Z))
    lhs = np.abs(problem.eta(X) - problem.eta(Z))
    mass = problem.ball_mass(X, rho)
    viol = lhs - smooth.L * mass ** (smooth.alpha / smooth.d)
    max_violation = float(np.max(viol))
    return AssumptionReport("H3", n_pairs, max_violation,
                            max_violation <= tolerance, tolerance)


def check_margin(problem: SyntheticProblem, eps_grid: np.ndarray | None = None,
                 margin: MarginParams | None = None,
                 tolerance: float = 1e-9) -> AssumptionReport:
    """Test P(|eta - 1/2| <= eps) <= C * eps^beta on an epsilon grid.

    The theory's display is strict "<"; equality is attained by these families,
    so the executable check is the closed "<=" within tolerance.
    """
    margin = margin if margin is not None else problem.certified_margin
    if eps_grid is None:
        eps_grid = np.geomspace(1e-4, 1.0, 1000)
    eps_grid = np.asarray(eps_grid, dtype=np.float64)
    if eps_grid.size == 0 or np.any(eps_grid <= 0.0) or np.any(eps_grid > 1.0):
        raise ValueError("eps_grid must be nonempty with values in (0, 1]")
    viol = problem.margin_mass(eps_grid) - margin.C * eps_grid ** margin.beta
    max_violation = float(np.max(viol))
    return AssumptionReport("H2", int(eps_grid.size), max_violation,
                            max_violation <= tolerance, tolerance)


def check_doubling(problem: SyntheticProblem,
                   grid: tuple[np.ndarray, np.ndarray] | None = None,
                   mass_floor: float | None = None,
                   doubling: DoublingParams | None = None,
                   tolerance: float = 1e-9) -> AssumptionReport:
    """Test mass(B(x, r)) <= c_db * mass(B(x, r/2)) on (x, r) pairs above the floor."""
    doubling = doubling if doubling is not None else problem.certified_doubling
    if doubling is None:
        raise ValueError("problem has no certified doubling constants")
    centers, radii = grid if grid is not None else problem.doubling_grid()
    centers = np.asarray(centers, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    if centers.shape[0] == 0 or centers.shape[0] != radii.shape[0]:
        raise ValueError("grid must supply matching nonempty centers and radii")
    floor = mass_floor if mass_floor is not None else doubling.mass_floor
    full = problem.ball_mass(centers, radii)
    half = problem.ball_mass(centers, radii / 2.0)
    eligible = full >= floor
    checked = int(np.count_nonzero(eligible))
    if checked == 0:
        return AssumptionReport("H4", 0, float("-inf"), True, tolerance)
    viol = full[eligible] - doubling.c_db * half[eligible]
    max_violation = float(np.max(viol))
    return AssumptionReport("H4", checked, max_violation,
                            max_violation <= tolerance, tolerance)
