"""Split-sample quantile machinery.

A chance constraint Prob(f(x, Y) <= 0) >= 1 - delta is replaced by an
empirical quantile constraint over K training samples.  The inflated level

    alpha(K) = (1 + 1/K) * (1 - delta)

makes the rank-p order statistic, p = ceil((K+1)(1-delta)), a finite-sample
valid bound: for a feasible x of the reformulation, a fresh sample satisfies
the constraint with probability at least 1 - delta.  The same construction
applied to L held-out calibration scores certifies an arbitrary candidate
decision after the fact.

Rank arithmetic uses a 1e-9 guard against float rounding of (count+1)(1-delta)
so that decimally-exact integer products land on the intended rank.  The
pinball (quantile-regression) characterization instead treats its ``alpha``
argument as the exact rational value of the given float, which matters only
when alpha*K sits exactly on an integer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, logsumexp

from . import expr as ex

__all__ = [
    "InfeasibleLevelError",
    "ConformalLevel",
    "Certificate",
    "conformal_rank",
    "empirical_quantile",
    "quantile_at",
    "pinball_quantile",
    "pinball_loss",
    "certify",
    "empirical_coverage",
    "chance_scores",
]


class InfeasibleLevelError(ValueError):
    """The requested level needs more samples than were provided."""


def ceil_guard(v: float) -> int:
    return int(math.ceil(v - 1e-9))


def floor_guard(v: float) -> int:
    return int(math.floor(v + 1e-9))


def conformal_rank(count: int, delta: float) -> int:
    """p = ceil((count+1)(1-delta)); the calibrated order-statistic rank."""
    return ceil_guard((count + 1) * (1.0 - delta))


@dataclass(frozen=True)
class ConformalLevel:
    """Inflated quantile level for a finite sample of given size.

    rank is 1-based into the ascending order statistics.  Construction fails
    when rank would exceed count, i.e. when count < (1-delta)/delta.
    """

    delta: float
    count: int
    alpha: float = field(init=False)
    rank: int = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if self.count < 1:
            raise ValueError("count must be positive")
        object.__setattr__(self, "alpha",
                           (1.0 + 1.0 / self.count) * (1.0 - self.delta))
        object.__setattr__(self, "rank", conformal_rank(self.count, self.delta))
        if self.rank > self.count:
            need = ceil_guard((1.0 - self.delta) / self.delta)
            raise InfeasibleLevelError(
                f"level delta={self.delta} needs at least {need} samples, "
                f"got {self.count}")


def _sorted_scores(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("empty score vector")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores contain non-finite values")
    return np.sort(s, kind="stable")


def empirical_quantile(scores, level) -> float:
    """Order statistic at the level's rank (ascending, 1-based)."""
    s = _sorted_scores(scores)
    if s.size != level.count:
        raise ValueError(f"level was built for {level.count} scores, got {s.size}")
    return float(s[level.rank - 1])


def quantile_at(scores, alpha: float) -> float:
    """Empirical quantile inf{z : F(z) >= alpha} of the given scores.

    The rank is ceil(alpha*K) with alpha taken as the exact rational value
    of the float, so an exactly-integer alpha*K picks rank alpha*K.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    s = _sorted_scores(scores)
    rank = int(math.ceil(Fraction(alpha) * s.size))
    return float(s[rank - 1])


def pinball_loss(q: float, scores, alpha: float) -> float:
    """Sum of pinball losses rho_alpha(score - q)."""
    u = np.asarray(scores, dtype=float) - q
    return float(np.sum(u * (alpha - (u < 0.0))))


def pinball_quantile(scores, alpha: float) -> float:
    """Largest minimizer of the pinball objective over q.

    When alpha*K is an integer (in exact arithmetic over the float alpha)
    the minimizer set is the interval between two adjacent order statistics
    and the upper endpoint is returned; otherwise the minimizer is unique
    and equals the rank-ceil(alpha*K) order statistic.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    s = _sorted_scores(scores)
    a = Fraction(alpha) * s.size
    if a.denominator == 1:
        idx = int(a) + 1
    else:
        idx = int(math.ceil(a))
    return float(s[idx - 1])


def _binom_tail(count: int, weight: float, start: int) -> float:
    """P(Binomial(count, weight) >= start), summed in log space."""
    if start <= 0:
        return 1.0
    if start > count:
        return 0.0
    j = np.arange(start, count + 1)
    logc = gammaln(count + 1) - gammaln(j + 1) - gammaln(count - j + 1)
    logterms = logc + j * math.log(weight) + (count - j) * math.log1p(-weight)
    return float(min(1.0, math.exp(logsumexp(logterms))))


def chance_scores(problem, x, rows, mode: str = "max") -> np.ndarray:
    """Constraint scores f(x, .) per row; multiple constraints combine by max."""
    fns = problem.chance_fns
    if len(fns) == 1 or mode == "first":
        return ex.eval_rows(fns[0], x, rows, strict=True)
    cols = [ex.eval_rows(f, x, rows, strict=True) for f in fns]
    return np.max(np.stack(cols), axis=0)


@dataclass(frozen=True)
class Certificate:
    """Calibration-quantile bound for a fixed decision.

    bound: the certified constraint-function level; a fresh sample satisfies
        f(x, Y) <= bound with probability >= 1 - delta (marginally over the
        calibration draw).
    beta_l: the Beta-law index l = floor((L+1) delta); conditionally on the
        calibration draw, the coverage of the bound is Beta(L+1-l, l)
        distributed under continuity.
    meets_coverage_prob: P(coverage >= 1 - delta) = P(Bin(L, delta) >= l).
    per_constraint: per-constraint bounds when certifying a union of
        constraints, else None.
    """

    bound: float
    level: object
    scores: np.ndarray
    beta_l: int
    meets_coverage_prob: float
    per_constraint: tuple | None = None


def certify(x, problem, calib_rows, robust: bool = False,
            joint: str = "max") -> Certificate:
    """Certify a decision with held-out calibration rows.

    robust=True swaps the level for the f-divergence-adjusted one built
    from problem.epsilon / problem.divergence.  Problems with several
    chance constraints certify either the pointwise max score (joint="max")
    or each constraint at delta/s with the max of the per-constraint bounds
    (joint="union").
    """
    rows = np.asarray(calib_rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    count = rows.shape[0]
    s = len(problem.chance_fns)

    def build_level(delta: float):
        if robust:
            from .robust import Divergence, RobustLevel
            div = Divergence(problem.divergence, problem.epsilon)
            return RobustLevel(delta, count, div)
        return ConformalLevel(delta, count)

    if s > 1 and joint == "union":
        sub = problem.delta / s
        bounds = []
        cols = []
        for f in problem.chance_fns:
            level_j = build_level(sub)
            col = ex.eval_rows(f, x, rows, strict=True)
            cols.append(col)
            bounds.append(float(np.sort(col)[level_j.rank - 1]))
        level = build_level(sub)
        scores = np.stack(cols, axis=1)
        bound = max(bounds)
        per = tuple(bounds)
    elif joint in ("max", "union"):
        level = build_level(problem.delta)
        scores = chance_scores(problem, x, rows)
        bound = float(np.sort(scores)[level.rank - 1])
        per = None
    else:
        raise ValueError(f"unknown joint mode {joint!r}")

    beta_l = floor_guard((count + 1) * problem.delta)
    meets = _binom_tail(count, problem.delta, beta_l)
    return Certificate(bound, level, scores, beta_l, meets, per)


def empirical_coverage(x, problem, rows, threshold: float = 0.0) -> float:
    """Fraction of rows whose (joint) score is <= threshold."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    sc = chance_scores(problem, x, rows)
    return float(np.mean(sc <= threshold))
