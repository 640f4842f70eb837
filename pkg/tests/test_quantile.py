"""Quantile, level, and certification tests.

Expected values come from two independent oracles implemented inline:
a dense-grid minimizer for the pinball objective and a linear-scan rank
oracle for empirical quantiles.  Tail probabilities are cross-checked
against scipy.stats.binom.
"""

import math
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from ccopt import expr as ex
from ccopt.quantile import (
    Certificate,
    ConformalLevel,
    InfeasibleLevelError,
    certify,
    chance_scores,
    conformal_rank,
    empirical_coverage,
    empirical_quantile,
    pinball_loss,
    pinball_quantile,
    quantile_at,
)


def oracle_pinball_minimizers(scores, alpha, tol=1e-9):
    """All grid points attaining the minimal pinball loss."""
    s = np.sort(np.asarray(scores, dtype=float))
    lo, hi = s[0] - 1.0, s[-1] + 1.0
    grid = np.unique(np.concatenate([
        np.linspace(lo, hi, 4001),
        s, (s[:-1] + s[1:]) / 2.0,
    ]))
    losses = np.array([pinball_loss(q, s, alpha) for q in grid])
    best = losses.min()
    return grid[losses <= best + tol], best


def oracle_rank_quantile(scores, alpha):
    """Smallest score z with #(scores <= z) >= alpha * K, in exact arithmetic."""
    s = np.sort(np.asarray(scores, dtype=float))
    k = s.size
    target = Fraction(alpha) * k
    for z in s:
        if np.sum(s <= z) >= target:
            return float(z)
    return float(s[-1])


class TestConformalLevel:
    def test_table_sizes(self):
        lv = ConformalLevel(0.05, 500)
        assert lv.rank == 476
        assert abs(lv.alpha - (1 + 1 / 500) * 0.95) < 1e-15
        assert ConformalLevel(0.05, 1000).rank == 951
        assert ConformalLevel(0.1, 80).rank == 73
        assert ConformalLevel(0.2, 99).rank == 80

    def test_boundary_count(self):
        lv = ConformalLevel(0.05, 19)
        assert lv.rank == 19

    def test_too_few_samples(self):
        with pytest.raises(InfeasibleLevelError):
            ConformalLevel(0.05, 18)
        with pytest.raises(InfeasibleLevelError):
            ConformalLevel(0.1, 8)

    def test_rank_guard_against_float_rounding(self):
        # (9+1)(1-0.3) is exactly 7 in decimal but 0.3 is not a binary float
        assert ConformalLevel(0.3, 9).rank == 7
        assert conformal_rank(9, 0.3) == 7
        assert conformal_rank(99, 0.2) == 80

    def test_bad_args(self):
        with pytest.raises(ValueError):
            ConformalLevel(0.0, 10)
        with pytest.raises(ValueError):
            ConformalLevel(1.0, 10)
        with pytest.raises(ValueError):
            ConformalLevel(0.5, 0)

    def test_rank_matches_exact_rational_scan(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            count = int(rng.integers(1, 400))
            delta = float(rng.uniform(0.01, 0.5))
            if (1 - delta) / delta > count:
                continue
            got = conformal_rank(count, delta)
            want = math.ceil(Fraction(count + 1) * (1 - Fraction(delta)))
            # the guard may differ from exact-rational ceil only within
            # 1e-9 of an integer; random deltas never land there
            assert got == want


class TestEmpiricalQuantile:
    def test_known_rank(self):
        scores = np.arange(1.0, 20.0)
        lv = ConformalLevel(0.05, 19)
        assert empirical_quantile(scores, lv) == 19.0
        lv2 = ConformalLevel(0.2, 19)
        assert empirical_quantile(scores, lv2) == 16.0

    def test_unsorted_input(self):
        rng = np.random.default_rng(0)
        scores = rng.normal(size=50)
        lv = ConformalLevel(0.1, 50)
        assert empirical_quantile(scores, lv) == np.sort(scores)[lv.rank - 1]

    def test_count_mismatch(self):
        with pytest.raises(ValueError):
            empirical_quantile([1.0, 2.0], ConformalLevel(0.1, 50))

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            empirical_quantile([1.0, np.nan] + [0.0] * 48, ConformalLevel(0.1, 50))

    def test_quantile_at_vs_scan_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(400):
            k = int(rng.integers(1, 60))
            scores = rng.normal(size=k)
            alpha = float(rng.uniform(0.01, 0.99))
            assert quantile_at(scores, alpha) == oracle_rank_quantile(scores, alpha)


class TestPinballQuantile:
    def test_integer_level_upper_endpoint(self):
        # alpha*K = 2 exactly: minimizers form [2, 3], upper endpoint returned
        assert pinball_quantile([1.0, 2.0, 3.0, 4.0], 0.5) == 3.0
        assert pinball_loss(2.0, [1, 2, 3, 4], 0.5) == pinball_loss(3.0, [1, 2, 3, 4], 0.5)
        assert pinball_loss(2.5, [1, 2, 3, 4], 0.5) == pytest.approx(
            pinball_loss(3.0, [1, 2, 3, 4], 0.5))

    def test_two_thirds_is_not_exactly_integer(self):
        # float(2/3) * 3 rounds to 2.0 but the exact rational product is
        # just under 2, so the minimizer is unique at the second score
        assert (2 / 3) * 3 == 2.0
        assert Fraction(2 / 3) * 3 != 2
        assert pinball_quantile([1.0, 2.0, 3.0], 2 / 3) == 2.0

    def test_minimizes_loss_sweep(self):
        rng = np.random.default_rng(11)
        for _ in range(120):
            k = int(rng.integers(2, 30))
            scores = np.round(rng.normal(size=k), 3)
            alpha = float(rng.uniform(0.05, 0.95))
            q = pinball_quantile(scores, alpha)
            mins, best = oracle_pinball_minimizers(scores, alpha)
            assert pinball_loss(q, scores, alpha) <= best + 1e-9
            assert q <= mins.max() + 1e-12

    def test_upper_endpoint_in_integer_case_sweep(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            k = int(rng.integers(2, 40))
            r = int(rng.integers(1, k))
            alpha = r / k
            if Fraction(alpha) * k != r:
                continue
            scores = np.sort(rng.normal(size=k))
            assert pinball_quantile(scores, alpha) == scores[r]

    def test_dominates_rank_quantile(self):
        rng = np.random.default_rng(13)
        hits_integer = 0
        for _ in range(10000):
            k = int(rng.integers(1, 25))
            if rng.random() < 0.5:
                alpha = float(rng.uniform(0.02, 0.98))
            else:
                alpha = float(rng.integers(1, k + 1)) / k if k > 1 else 0.5
                alpha = min(max(alpha, 0.02), 0.98)
            scores = rng.normal(size=k)
            pb = pinball_quantile(scores, alpha)
            rq = quantile_at(scores, alpha)
            assert pb >= rq
            if Fraction(alpha) * k == int(Fraction(alpha) * k):
                hits_integer += 1
                if k > 1 and np.unique(scores).size == k:
                    # distinct scores: strictly larger at integer levels
                    rank = int(Fraction(alpha) * k)
                    if rank < k:
                        assert pb > rq
            else:
                assert pb == rq
        assert hits_integer > 500

    def test_bad_alpha(self):
        with pytest.raises(ValueError):
            pinball_quantile([1.0], 0.0)
        with pytest.raises(ValueError):
            pinball_quantile([1.0], 1.0)


def _stub_problem(texts, delta, n=1, d=1):
    fns = [ex.parse(t, n=n, d=d) for t in texts]
    return SimpleNamespace(chance_fns=fns, delta=delta)


class TestCertify:
    def test_single_constraint_bound(self):
        prob = _stub_problem(["y[0] - x[0]"], 0.1)
        rng = np.random.default_rng(5)
        rows = rng.uniform(size=(50, 1))
        cert = certify([0.0], prob, rows)
        lv = ConformalLevel(0.1, 50)
        assert cert.bound == np.sort(rows[:, 0])[lv.rank - 1]
        assert cert.level.rank == lv.rank
        assert cert.scores.shape == (50,)
        assert cert.per_constraint is None

    def test_tail_probability_known_value(self):
        prob = _stub_problem(["y[0] - x[0]"], 0.05)
        rows = np.linspace(0.0, 1.0, 19).reshape(-1, 1)
        cert = certify([0.0], prob, rows)
        assert cert.beta_l == 1
        # P(Bin(19, 0.05) >= 1) = 1 - 0.95^19
        assert cert.meets_coverage_prob == pytest.approx(1 - 0.95 ** 19, abs=1e-12)
        assert cert.meets_coverage_prob == pytest.approx(0.6226, abs=5e-4)

    def test_tail_probability_vs_scipy_sweep(self):
        rng = np.random.default_rng(6)
        for _ in range(60):
            count = int(rng.integers(10, 400))
            delta = float(rng.uniform(0.02, 0.4))
            if (1 - delta) / delta > count:
                continue
            prob = _stub_problem(["y[0] - x[0]"], delta)
            rows = rng.normal(size=(count, 1))
            cert = certify([0.0], prob, rows)
            l = math.floor((count + 1) * delta + 1e-9)
            assert cert.beta_l == l
            want = stats.binom.sf(l - 1, count, delta)
            assert cert.meets_coverage_prob == pytest.approx(want, rel=1e-10)

    def test_joint_max_mode(self):
        prob = _stub_problem(["y[0] - x[0]", "y[1] - 2 * x[0]"], 0.1, d=2)
        rng = np.random.default_rng(8)
        rows = rng.normal(size=(60, 2))
        cert = certify([0.5], prob, rows)
        sc = np.maximum(rows[:, 0] - 0.5, rows[:, 1] - 1.0)
        lv = ConformalLevel(0.1, 60)
        assert cert.bound == pytest.approx(np.sort(sc)[lv.rank - 1])
        assert cert.per_constraint is None

    def test_joint_union_mode(self):
        prob = _stub_problem(["y[0] - x[0]", "y[1] - 2 * x[0]"], 0.2, d=2)
        rng = np.random.default_rng(9)
        rows = rng.normal(size=(80, 2))
        cert = certify([0.5], prob, rows, joint="union")
        lv = ConformalLevel(0.1, 80)
        b0 = np.sort(rows[:, 0] - 0.5)[lv.rank - 1]
        b1 = np.sort(rows[:, 1] - 1.0)[lv.rank - 1]
        assert cert.per_constraint == (pytest.approx(b0), pytest.approx(b1))
        assert cert.bound == pytest.approx(max(b0, b1))
        assert cert.scores.shape == (80, 2)
        assert cert.level.delta == pytest.approx(0.1)

    def test_union_bound_never_below_max_bound(self):
        rng = np.random.default_rng(10)
        prob = _stub_problem(["y[0] - x[0]", "y[1] - x[0]"], 0.2, d=2)
        for _ in range(50):
            rows = rng.normal(size=(100, 2))
            cu = certify([0.0], prob, rows, joint="union")
            cm = certify([0.0], prob, rows, joint="max")
            assert cu.bound >= cm.bound - 1e-12

    def test_unknown_joint_mode(self):
        prob = _stub_problem(["y[0] - x[0]"], 0.1)
        with pytest.raises(ValueError):
            certify([0.0], prob, np.zeros((20, 1)), joint="both")


class TestCoverageLaw:
    """Coverage of the certified bound follows the stated Beta/binomial law."""

    def test_marginal_and_conditional_coverage(self):
        rng = np.random.default_rng(21)
        delta, count, trials = 0.1, 100, 1000
        lv = ConformalLevel(delta, count)
        covs = np.empty(trials)
        for t in range(trials):
            u = rng.uniform(size=count)
            c = np.sort(u)[lv.rank - 1]
            covs[t] = c  # coverage of {U <= c} for U ~ Uniform(0,1)
        # marginal guarantee: E(coverage) = rank / (count+1) >= 1 - delta
        assert covs.mean() == pytest.approx(lv.rank / (count + 1), abs=0.01)
        assert covs.mean() >= 1 - delta - 0.005
        # conditional law: P(coverage >= 1-delta) = P(Bin(count, delta) >= l)
        frac = np.mean(covs >= 1 - delta)
        l = math.floor((count + 1) * delta)
        want = stats.binom.sf(l - 1, count, delta)
        assert frac == pytest.approx(want, abs=0.05)

    def test_coverage_matches_beta_distribution(self):
        rng = np.random.default_rng(22)
        delta, count, trials = 0.1, 100, 2000
        lv = ConformalLevel(delta, count)
        covs = np.sort(rng.uniform(size=(trials, count)), axis=1)[:, lv.rank - 1]
        # rank-p of count uniforms is Beta(p, count+1-p)
        ks = stats.kstest(covs, stats.beta(lv.rank, count + 1 - lv.rank).cdf)
        assert ks.pvalue > 0.01


class TestEmpiricalCoverage:
    def test_counts_fraction_below_threshold(self):
        prob = _stub_problem(["y[0] - x[0]"], 0.1)
        rows = np.array([[0.1], [0.5], [0.9], [1.5]])
        assert empirical_coverage([1.0], prob, rows) == 0.75
        assert empirical_coverage([1.0], prob, rows, threshold=0.5) == 1.0

    def test_joint_uses_max_score(self):
        prob = _stub_problem(["y[0] - x[0]", "y[1] - x[0]"], 0.1, d=2)
        rows = np.array([[0.0, 2.0], [0.0, 0.5], [-1.0, -1.0]])
        assert empirical_coverage([1.0], prob, rows) == pytest.approx(2 / 3)

    def test_chance_scores_first_mode(self):
        prob = _stub_problem(["y[0] - x[0]", "y[1] - x[0]"], 0.1, d=2)
        rows = np.array([[0.0, 2.0], [3.0, 0.5]])
        sc = chance_scores(prob, [1.0], rows, mode="first")
        assert np.allclose(sc, [-1.0, 2.0])
