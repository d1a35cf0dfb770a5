from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from kalls.seeding import substream
from kalls.synth import (FAMILIES, check_doubling, check_margin,
                         check_smoothness, make_problem)
from kalls.thresholds import DoublingParams, MarginParams, SmoothnessParams


def all_default_problems():
    return [
        make_problem("power_margin_uniform_1d", kappa=1.0, seed=1),
        make_problem("power_margin_gaussian_1d", kappa=1.0, seed=2),
        make_problem("discrete_atoms", kappa=1.0, seed=3),
        make_problem("product_uniform_nd", kappa=1.0, d=2, seed=4),
    ]


class TestFactory:
    def test_families_construct(self):
        for fam in FAMILIES:
            d = 2 if fam == "product_uniform_nd" else 1
            p = make_problem(fam, kappa=0.5, d=d, seed=0)
            assert p.family == fam

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            make_problem("no_such_family")
        with pytest.raises(ValueError):
            make_problem("power_margin_uniform_1d", d=2)
        with pytest.raises(ValueError):
            make_problem("product_uniform_nd", d=1)
        with pytest.raises(ValueError):
            make_problem("discrete_atoms", n_atoms=33)
        with pytest.raises(ValueError):
            make_problem("power_margin_uniform_1d", kappa=-1.0)

    def test_certified_constants(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        assert p.certified_smooth == SmoothnessParams(alpha=1.0, L=2.0, d=1)
        assert p.certified_margin == MarginParams(beta=1.0, C=2.0)
        assert p.certified_doubling.c_db == 2.0
        half = make_problem("power_margin_uniform_1d", kappa=0.5)
        assert half.certified_margin == MarginParams(beta=2.0, C=4.0)
        # kappa > 1 clamps the certified smoothness exponent to 1
        over = make_problem("power_margin_uniform_1d", kappa=1.5)
        assert over.certified_smooth.alpha == 1.0

    def test_noiseless_has_no_smoothness_certificate(self):
        p = make_problem("power_margin_uniform_1d", kappa=0.0)
        assert p.certified_smooth is None
        eta = p.eta(np.array([[0.2], [0.8], [0.5]]))
        assert list(eta) == [0.0, 1.0, 0.5]


class TestEtaAndBayes:
    def test_uniform_kappa_one_is_identity(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        assert p.eta(np.array([[0.75]]))[0] == pytest.approx(0.75, rel=1e-15)
        assert p.bayes(np.array([[0.75]]))[0] == 1
        assert p.eta(np.array([[0.5]]))[0] == 0.5
        assert p.bayes(np.array([[0.5]]))[0] == 1  # >= 1/2 convention

    def test_uniform_kappa_half_frozen_value(self):
        p = make_problem("power_margin_uniform_1d", kappa=0.5)
        assert p.eta(np.array([[0.875]]))[0] == pytest.approx(0.93301270189221932,
                                                              rel=1e-12)

    def test_gaussian_center_is_half(self):
        for kappa in (0.5, 1.0):
            p = make_problem("power_margin_gaussian_1d", kappa=kappa)
            assert p.eta(np.array([[0.0]]))[0] == pytest.approx(0.5, abs=1e-12)

    def test_eta_is_pure_and_seed_independent(self):
        a = make_problem("power_margin_uniform_1d", kappa=0.7, seed=1)
        b = make_problem("power_margin_uniform_1d", kappa=0.7, seed=999)
        X = substream(1, "points").random((100, 1))
        assert np.array_equal(a.eta(X), b.eta(X))


class TestClosedForms:
    @pytest.mark.parametrize("kappa", [0.5, 1.0])
    def test_bayes_risk_matches_quadrature(self, kappa):
        p = make_problem("power_margin_uniform_1d", kappa=kappa)

        def pointwise(x):
            e = p.eta(np.array([[x]]))[0]
            return min(e, 1.0 - e)

        oracle, _ = quad(pointwise, 0.0, 1.0, limit=200)
        assert p.bayes_risk() == pytest.approx(oracle, abs=1e-9)
        assert p.bayes_risk() == pytest.approx(kappa / (2 * (kappa + 1)), rel=1e-12)

    def test_uniform_bayes_risk_quarter(self):
        assert make_problem("power_margin_uniform_1d", kappa=1.0).bayes_risk() == 0.25

    def test_mean_abs_margin_matches_quadrature(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        oracle, _ = quad(lambda x: abs(2 * p.eta(np.array([[x]]))[0] - 1), 0, 1)
        assert p.mean_abs_margin() == pytest.approx(oracle, abs=1e-9)

    def test_bayes_risk_monte_carlo(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        X = p.sample(10**6, substream(5, "points"))
        eta = p.eta(X)
        mc = float(np.mean(np.minimum(eta, 1 - eta)))
        assert abs(mc - 0.25) < 1e-3

    def test_margin_mass_equality_case(self):
        # kappa = 1 uniform attains the margin bound with equality at every eps <= 1/2
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        assert p.margin_mass(np.array([0.25]))[0] == 0.5
        m = p.certified_margin
        assert m.C * 0.25**m.beta == 0.5

    def test_discrete_closed_forms_match_atom_sums(self):
        p = make_problem("discrete_atoms", kappa=0.5, n_atoms=64)
        eta = p.eta(p.atoms[:, None])
        assert p.bayes_risk() == pytest.approx(float(np.mean(np.minimum(eta, 1 - eta))))
        assert p.mean_abs_margin() == pytest.approx(float(np.mean(np.abs(2 * eta - 1))))


class TestBallMass:
    def test_uniform_interval_clipping(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        assert p.ball_mass(np.array([[0.5]]), np.array([0.1]))[0] == pytest.approx(0.2)
        assert p.ball_mass(np.array([[0.0]]), np.array([0.3]))[0] == pytest.approx(0.3)
        assert p.ball_mass(np.array([[0.5]]), np.array([2.0]))[0] == 1.0

    def test_discrete_open_ball_counts(self):
        p = make_problem("discrete_atoms", kappa=1.0, n_atoms=8)
        # atoms at 0.0625 + k/8; open ball of radius 1/8 around an atom holds only itself
        c = p.atoms[3:4, None]
        assert p.ball_mass(c, np.array([1.0 / 8.0]))[0] == pytest.approx(1.0 / 8.0)
        assert p.ball_mass(c, np.array([0.0]))[0] == 0.0

    def test_gaussian_mass_is_cdf_difference(self):
        from scipy.special import ndtr
        p = make_problem("power_margin_gaussian_1d", kappa=1.0)
        got = p.ball_mass(np.array([[0.3]]), np.array([1.1]))[0]
        assert got == pytest.approx(float(ndtr(1.4) - ndtr(-0.8)), rel=1e-12)

    def test_product_circle_box_against_quadrature(self):
        p = make_problem("product_uniform_nd", kappa=1.0, d=2)
        rng = substream(6, "points")
        for _ in range(5):
            cx, cy = rng.random(2)
            r = 0.05 + rng.random() * 1.2

            def width(t):
                h = np.sqrt(max(r * r - (t - cx) ** 2, 0.0))
                return max(min(cy + h, 1.0) - max(cy - h, 0.0), 0.0)

            lo, hi = max(cx - r, 0.0), min(cx + r, 1.0)
            oracle = quad(width, lo, hi, limit=400)[0] if hi > lo else 0.0
            got = p.ball_mass(np.array([[cx, cy]]), np.array([r]))[0]
            assert got == pytest.approx(oracle, abs=1e-7)

    def test_product_needs_d2_for_mass(self):
        p = make_problem("product_uniform_nd", kappa=1.0, d=3)
        with pytest.raises(NotImplementedError):
            p.ball_mass(np.array([[0.5, 0.5, 0.5]]), np.array([0.1]))


class TestCheckers:
    def test_all_families_pass_at_certified_constants(self):
        for p in all_default_problems():
            r3 = check_smoothness(p, n_pairs=20_000, rng=substream(7, "points"))
            r2 = check_margin(p)
            r4 = check_doubling(p)
            assert r3.passed and r2.passed and r4.passed, (p.family, r3, r2, r4)

    def test_degenerate_pair_contributes_nothing(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        viol = abs(p.eta(np.array([[0.3]])) - p.eta(np.array([[0.3]])))[0]
        assert viol == 0.0

    def test_planted_smoothness_failure(self):
        # L' = 0.4 on the kappa=1 uniform family: any interior pair violates,
        # e.g. x=0.2, z=0.8 gives |eta diff| = 0.6 > 0.4 * mass(B(x, 0.6)) = 0.36
        from types import SimpleNamespace
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        report = check_smoothness(p, n_pairs=5000, rng=substream(8, "points"),
                                  smooth=SimpleNamespace(alpha=1.0, L=0.4, d=1))
        assert not report.passed
        assert report.max_violation > 0

    def test_planted_margin_failure(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        report = check_margin(p, margin=MarginParams(beta=1.0, C=1.0))
        assert not report.passed
        assert report.max_violation > 0

    def test_planted_doubling_failure(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        report = check_doubling(p, doubling=DoublingParams(c_db=1.5))
        assert not report.passed

    def test_uniform_interior_ratio_is_exactly_two(self):
        p = make_problem("power_margin_uniform_1d", kappa=1.0)
        full = p.ball_mass(np.array([[0.5]]), np.array([0.2]))[0]
        half = p.ball_mass(np.array([[0.5]]), np.array([0.1]))[0]
        assert full == pytest.approx(2.0 * half, rel=1e-12)

    def test_gaussian_deep_tail_pair_is_exempt(self):
        p = make_problem("power_margin_gaussian_1d", kappa=1.0)
        grid = (np.array([[5.0]]), np.array([0.2]))
        report = check_doubling(p, grid=grid, mass_floor=1e-3)
        assert report.checked == 0
        assert report.passed

    def test_kappa_zero_margin_certificate_holds(self):
        p = make_problem("power_margin_uniform_1d", kappa=0.0)
        assert check_margin(p).passed
        with pytest.raises(ValueError):
            check_smoothness(p, n_pairs=10)


class TestSampling:
    def test_reproducible_streams(self):
        p = make_problem("power_margin_gaussian_1d", kappa=1.0, seed=5)
        a = p.sample(100, substream(9, "points"))
        b = p.sample(100, substream(9, "points"))
        assert np.array_equal(a, b)

    def test_discrete_samples_are_atoms(self):
        p = make_problem("discrete_atoms", kappa=1.0, n_atoms=32)
        X = p.sample(500, substream(10, "points"))
        assert set(np.unique(X)).issubset(set(p.atoms))

    def test_product_shape(self):
        p = make_problem("product_uniform_nd", kappa=1.0, d=5)
        X = p.sample(64, substream(11, "points"))
        assert X.shape == (64, 5)
        assert p.eta(X).shape == (64,)
