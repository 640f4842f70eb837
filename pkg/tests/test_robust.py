"""Shift-robust level tests.

The generic oracle below evaluates v and v_inv straight from their
definitions with an explicit phi callable and bracketed root finding /
binary search, independently of the closed forms and reductions in the
module under test.  Gaussian KL values are cross-checked by numerical
integration of the defining integral.
"""

import math

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad
from scipy.optimize import brentq

from ccopt.quantile import ConformalLevel, InfeasibleLevelError
from ccopt.robust import (
    Divergence,
    RobustLevel,
    delta_n,
    delta_tilde,
    gaussian_kl,
    min_count,
    v,
    v_inv,
)


def phi_tv(t):
    return abs(t - 1.0) / 2.0


def phi_kl(t):
    return t * math.log(t) if t > 0.0 else 0.0


def oracle_v(beta, phi, eps):
    """inf{z : beta phi(z/beta) + (1-beta) phi((1-z)/(1-beta)) <= eps}."""
    if beta <= 0.0:
        return 0.0
    if beta >= 1.0:
        return 1.0 if phi is phi_kl else max(1.0 - eps, 0.0)

    def g(z):
        return beta * phi(z / beta) + (1 - beta) * phi((1 - z) / (1 - beta))

    if g(0.0) <= eps:
        return 0.0
    return float(brentq(lambda z: g(z) - eps, 0.0, beta, xtol=1e-13))


def oracle_v_inv(tau, phi, eps):
    """sup{beta : oracle_v(beta) <= tau} by bisection on the monotone map."""
    lo, hi = 0.0, 1.0
    for _ in range(80):
        mid = (lo + hi) / 2.0
        if oracle_v(mid, phi, eps) <= tau + 1e-13:
            lo = mid
        else:
            hi = mid
    return lo


class TestDivergence:
    def test_validation(self):
        with pytest.raises(ValueError):
            Divergence("wasserstein", 0.1)
        with pytest.raises(ValueError):
            Divergence("kl", -0.1)
        assert Divergence("tv", 0.0).epsilon == 0.0


class TestV:
    def test_zero_epsilon_is_identity(self):
        for kind in ("kl", "tv"):
            div = Divergence(kind, 0.0)
            for b in (0.0, 0.1, 0.5, 0.85, 1.0):
                assert v(b, div) == b
                assert v_inv(b, div) == b

    def test_tv_closed_form(self):
        div = Divergence("tv", 0.05)
        assert v(0.85, div) == pytest.approx(0.80, abs=1e-12)
        assert v(0.03, div) == 0.0
        assert v_inv(0.8, div) == pytest.approx(0.85, abs=1e-12)
        assert v_inv(0.97, div) == 1.0

    def test_kl_known_point(self):
        div = Divergence("kl", 0.027)
        z = v(0.9, div)
        assert z == pytest.approx(0.824, abs=5e-4)
        # the root actually sits on the ball boundary
        kl = z * math.log(z / 0.9) + (1 - z) * math.log((1 - z) / 0.1)
        assert kl == pytest.approx(0.027, abs=1e-9)

    def test_tv_matches_generic_bisection(self):
        rng = np.random.default_rng(31)
        for _ in range(1000):
            beta = float(rng.uniform(0.02, 0.98))
            tau = float(rng.uniform(0.02, 0.98))
            eps = float(rng.uniform(0.0, 0.3))
            div = Divergence("tv", eps)
            assert v(beta, div) == pytest.approx(
                oracle_v(beta, phi_tv, eps), abs=1e-8)
            assert v_inv(tau, div) == pytest.approx(
                oracle_v_inv(tau, phi_tv, eps), abs=1e-8)

    def test_kl_matches_generic_bisection(self):
        rng = np.random.default_rng(32)
        for _ in range(200):
            beta = float(rng.uniform(0.05, 0.95))
            tau = float(rng.uniform(0.05, 0.95))
            eps = float(rng.uniform(1e-4, 0.3))
            div = Divergence("kl", eps)
            assert v(beta, div) == pytest.approx(
                oracle_v(beta, phi_kl, eps), abs=1e-6)
            assert v_inv(tau, div) == pytest.approx(
                oracle_v_inv(tau, phi_kl, eps), abs=1e-6)

    def test_sandwich(self):
        rng = np.random.default_rng(33)
        for _ in range(100):
            tau = float(rng.uniform(0.05, 0.95))
            eps = float(rng.uniform(0.0, 0.2))
            for kind in ("kl", "tv"):
                div = Divergence(kind, eps)
                assert v(v_inv(tau, div), div) <= tau + 1e-9
                assert v_inv(v(tau, div), div) >= tau - 1e-9

    def test_monotone_in_beta(self):
        for kind in ("kl", "tv"):
            div = Divergence(kind, 0.07)
            grid = np.linspace(0.01, 0.99, 50)
            vals = [v(b, div) for b in grid]
            assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
            assert all(val <= b for val, b in zip(vals, grid))

    def test_domain_errors(self):
        div = Divergence("kl", 0.1)
        with pytest.raises(ValueError):
            v(-0.1, div)
        with pytest.raises(ValueError):
            v(1.1, div)
        with pytest.raises(ValueError):
            v_inv(2.0, div)


class TestDeltaTilde:
    def test_vanilla_reduction_exact(self):
        lv = delta_tilde(0.1, 19, Divergence("kl", 0.0))
        assert lv.delta_tilde == pytest.approx(1 - (20 / 19) * 0.9, abs=1e-14)
        assert lv.delta_tilde == pytest.approx(1 / 19, abs=1e-12)

    def test_vanilla_reduction_matches_plain_level(self):
        rng = np.random.default_rng(34)
        for _ in range(100):
            delta = float(rng.uniform(0.02, 0.4))
            count = int(rng.integers(5, 500))
            if (1 - delta) / delta > count:
                continue
            plain = ConformalLevel(delta, count)
            for kind in ("kl", "tv"):
                lv = RobustLevel(delta, count, Divergence(kind, 0.0))
                assert lv.alpha_tilde == pytest.approx(plain.alpha, abs=1e-10)
                assert lv.rank == plain.rank

    def test_tv_frozen_chain(self):
        div = Divergence("tv", 0.05)
        assert delta_n(0.2, 99, div) == pytest.approx(379 / 1980, abs=1e-12)
        lv = delta_tilde(0.2, 99, div)
        assert lv.delta_tilde == pytest.approx(14 / 99, abs=1e-10)
        assert lv.alpha_tilde == pytest.approx(85 / 99, abs=1e-10)
        assert lv.rank == 85
        assert lv.alpha == lv.alpha_tilde

    def test_tighter_than_plain(self):
        plain = ConformalLevel(0.2, 99)
        lv = delta_tilde(0.2, 99, Divergence("tv", 0.05))
        assert lv.delta_tilde <= 0.2
        assert lv.rank >= plain.rank

    def test_monotone_in_epsilon(self):
        for kind in ("kl", "tv"):
            prev = None
            for eps in np.linspace(0.0, 0.1, 11):
                lv = delta_tilde(0.2, 199, Divergence(kind, float(eps)))
                if prev is not None:
                    assert lv.delta_tilde <= prev + 1e-12
                prev = lv.delta_tilde

    def test_min_count(self):
        assert min_count(0.05, Divergence("kl", 0.0)) == 19
        assert min_count(0.1, Divergence("tv", 0.0)) == 9
        assert min_count(0.2, Divergence("tv", 0.05)) == 6
        with pytest.raises(InfeasibleLevelError):
            min_count(0.2, Divergence("tv", 0.8))

    def test_count_below_minimum_raises(self):
        div = Divergence("tv", 0.05)
        with pytest.raises(InfeasibleLevelError):
            delta_tilde(0.2, 5, div)
        assert delta_tilde(0.2, 6, div).rank <= 6

    def test_huge_epsilon_infeasible(self):
        with pytest.raises(InfeasibleLevelError):
            delta_tilde(0.2, 1000, Divergence("tv", 0.85))


class TestGaussianKl:
    def test_identical_is_zero(self):
        assert gaussian_kl([0.1, 0.2], [1.0, 2.0], [0.1, 0.2], [1.0, 2.0]) == 0.0

    def test_known_three_asset_value(self):
        val = gaussian_kl([0.1, 0.11, 0.07], [0.013, 0.011, 0.007],
                          [0.12, 0.1, 0.07], [0.013, 0.01, 0.008])
        assert val == pytest.approx(0.027, abs=5e-4)
        comp1 = 0.5 * (0.02 ** 2 / 0.013)
        comp2 = 0.5 * (0.01 / 0.011 - 1 + 0.01 ** 2 / 0.011 - math.log(0.01 / 0.011))
        comp3 = 0.5 * (0.008 / 0.007 - 1 - math.log(0.008 / 0.007))
        assert comp1 == pytest.approx(0.01538, abs=5e-6)
        assert comp2 == pytest.approx(0.00675, abs=5e-6)
        assert comp3 == pytest.approx(0.00466, abs=5e-6)
        assert val == pytest.approx(comp1 + comp2 + comp3, rel=1e-12)

    def test_equal_variance_collapse(self):
        sigma2, dm = 1.7, 0.3
        assert gaussian_kl([0.0], [sigma2], [dm], [sigma2]) == pytest.approx(
            dm ** 2 / (2 * sigma2), rel=1e-12)

    def test_matches_numerical_integral(self):
        # returns the relative entropy of the second Gaussian from the first
        rng = np.random.default_rng(35)
        for _ in range(15):
            m1, m2 = rng.normal(size=2)
            v1, v2 = rng.uniform(0.3, 2.0, size=2)
            p1 = stats.norm(m1, math.sqrt(v1))
            p2 = stats.norm(m2, math.sqrt(v2))
            want, _ = quad(lambda t: p2.pdf(t) * (p2.logpdf(t) - p1.logpdf(t)),
                           -12, 12)
            assert gaussian_kl([m1], [v1], [m2], [v2]) == pytest.approx(
                want, rel=1e-7, abs=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            gaussian_kl([0.0], [1.0], [0.0], [0.0])
        with pytest.raises(ValueError):
            gaussian_kl([0.0, 1.0], [1.0, 1.0], [0.0], [1.0])


class TestRobustCoverage:
    """Calibrating robustly on one Gaussian covers a shifted one."""

    def test_shifted_coverage_meets_target(self):
        rng = np.random.default_rng(36)
        delta, count, trials, shift = 0.1, 200, 1000, 0.2
        eps_kl = gaussian_kl([shift], [1.0], [0.0], [1.0])
        assert eps_kl == pytest.approx(0.02, rel=1e-12)
        eps_tv = 2 * stats.norm.cdf(shift / 2) - 1
        for div in (Divergence("kl", eps_kl), Divergence("tv", eps_tv)):
            lv = RobustLevel(delta, count, div)
            scores = np.sort(rng.normal(size=(trials, count)), axis=1)
            bounds = scores[:, lv.rank - 1]
            cov = stats.norm.cdf(bounds - shift)
            assert cov.mean() >= 1 - delta - 0.01

    def test_plain_level_would_undercover(self):
        # sanity for the test itself: without the robust correction the
        # same experiment misses the shifted target
        rng = np.random.default_rng(37)
        delta, count, trials, shift = 0.1, 200, 1000, 0.2
        lv = ConformalLevel(delta, count)
        scores = np.sort(rng.normal(size=(trials, count)), axis=1)
        cov = stats.norm.cdf(scores[:, lv.rank - 1] - shift)
        assert cov.mean() < 1 - delta
