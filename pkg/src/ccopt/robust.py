"""Distribution-shift-robust quantile levels.

When the deployment distribution may differ from the sampled one by at most
epsilon in an f-divergence (KL or total variation), the chance level delta
is tightened to delta_tilde before picking the order-statistic rank.  The
two maps doing the work are

    v(beta)     = inf{z in [0,1] : beta*phi(z/beta)
                                   + (1-beta)*phi((1-z)/(1-beta)) <= eps}
    v_inv(tau)  = sup{beta in [0,1] : v(beta) <= tau}

i.e. the worst coverage a shifted distribution can exhibit when the sampled
one covers with probability beta, and its inverse.  Total variation
(phi(t) = |t-1|/2) has closed forms; KL (phi(t) = t ln t) reduces to the
binary KL divergence KL(z || beta), solved by bracketed root finding.

The tightened level is composed as

    delta_n     = 1 - v((1 + 1/count) * v_inv(1 - delta))
    delta_tilde = 1 - v_inv(1 - delta_n)

which collapses to the plain inflated level when eps = 0.

gaussian_kl gives the diagonal-Gaussian KL closed form used to pick eps
when the shift between two known Gaussians should be budgeted exactly.
Its argument order follows the convention that the first distribution's
variances appear in the denominators, so it returns the relative entropy
of the second distribution from the first; this differs from the most
common textbook argument order and is kept deliberately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .quantile import InfeasibleLevelError, ceil_guard

__all__ = [
    "Divergence",
    "RobustLevel",
    "v",
    "v_inv",
    "delta_n",
    "delta_tilde",
    "min_count",
    "gaussian_kl",
]

_INNER_TOL = 1e-12
_OUTER_TOL = 1e-10


@dataclass(frozen=True)
class Divergence:
    """An f-divergence ball: kind 'kl' or 'tv', radius epsilon >= 0."""

    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in ("kl", "tv"):
            raise ValueError(f"unknown divergence kind {self.kind!r}")
        if not self.epsilon >= 0.0:
            raise ValueError("epsilon must be nonnegative")


def _kl_binary(z: float, b: float) -> float:
    """KL(Bernoulli(z) || Bernoulli(b)), with the usual 0 log 0 = 0 limits."""
    t1 = z * math.log(z / b) if z > 0.0 else 0.0
    t2 = (1.0 - z) * math.log((1.0 - z) / (1.0 - b)) if z < 1.0 else 0.0
    return t1 + t2


def v(beta: float, div: Divergence) -> float:
    """Worst-case shifted coverage when sampled coverage is beta."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    eps = div.epsilon
    if eps == 0.0:
        return beta
    if div.kind == "tv":
        return max(beta - eps, 0.0)
    if beta >= 1.0:
        return 1.0
    if beta <= 0.0:
        return 0.0
    if _kl_binary(0.0, beta) <= eps:
        return 0.0
    return float(brentq(lambda z: _kl_binary(z, beta) - eps,
                        0.0, beta, xtol=_INNER_TOL))


def v_inv(tau: float, div: Divergence) -> float:
    """Largest sampled coverage whose worst-case shifted coverage is <= tau."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    eps = div.epsilon
    if eps == 0.0:
        return tau
    if div.kind == "tv":
        return min(tau + eps, 1.0)
    if tau >= 1.0:
        return 1.0
    # v(beta) <= tau exactly when KL(tau || beta) <= eps (for beta >= tau),
    # and KL(tau || .) is increasing on [tau, 1), so the sup solves it with
    # equality unless even beta near 1 stays inside the ball.
    hi = 1.0 - 1e-15
    if _kl_binary(tau, hi) - eps <= 0.0:
        return 1.0
    return float(brentq(lambda b: _kl_binary(tau, b) - eps,
                        tau, hi, xtol=_OUTER_TOL))


def min_count(delta: float, div: Divergence) -> int:
    """Smallest sample count admitting the robust level."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    tau0 = v_inv(1.0 - delta, div)
    if tau0 >= 1.0:
        raise InfeasibleLevelError(
            f"divergence budget epsilon={div.epsilon} with delta={delta} "
            "admits no finite sample size")
    return ceil_guard(tau0 / (1.0 - tau0))


def delta_n(delta: float, count: int, div: Divergence) -> float:
    """Finite-sample-inflated shifted miscoverage at the given count."""
    if count < 1:
        raise ValueError("count must be positive")
    tau0 = v_inv(1.0 - delta, div)
    arg = (1.0 + 1.0 / count) * tau0
    if arg > 1.0 + 1e-12:
        need = min_count(delta, div)
        raise InfeasibleLevelError(
            f"robust level delta={delta}, epsilon={div.epsilon} needs at "
            f"least {need} samples, got {count}")
    return 1.0 - v(min(arg, 1.0), div)


@dataclass(frozen=True)
class RobustLevel:
    """Shift-tightened quantile level for a finite sample.

    alpha_tilde plays the role ConformalLevel.alpha plays without shift;
    rank = ceil(count * alpha_tilde) indexes the ascending order statistics.
    With epsilon = 0 this reproduces the plain level exactly.
    """

    delta: float
    count: int
    divergence: Divergence
    delta_tilde: float = field(init=False)
    alpha_tilde: float = field(init=False)
    alpha: float = field(init=False)
    rank: int = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        dn = delta_n(self.delta, self.count, self.divergence)
        dt = 1.0 - v_inv(1.0 - dn, self.divergence)
        at = 1.0 - dt
        if not 0.0 < at <= 1.0:
            raise InfeasibleLevelError(
                f"robust level collapsed (alpha_tilde={at}); "
                "epsilon too large for this delta")
        object.__setattr__(self, "delta_tilde", dt)
        object.__setattr__(self, "alpha_tilde", at)
        object.__setattr__(self, "alpha", at)
        object.__setattr__(self, "rank", ceil_guard(self.count * at))


def delta_tilde(delta: float, count: int, div: Divergence) -> RobustLevel:
    """Tightened level for the given sample count; raises below min_count."""
    return RobustLevel(delta, count, div)


def gaussian_kl(mean1, var1, mean2, var2) -> float:
    """KL divergence between diagonal Gaussians.

    Arguments are (means, variances) of the first and second distribution;
    the first one's variances sit in the denominators, so this equals
    KL(second || first).  Coordinates are independent and contributions sum:

        0.5 * sum(var2/var1 - 1 + (mean1-mean2)^2/var1 - ln(var2/var1))
    """
    m1 = np.atleast_1d(np.asarray(mean1, dtype=float))
    v1 = np.atleast_1d(np.asarray(var1, dtype=float))
    m2 = np.atleast_1d(np.asarray(mean2, dtype=float))
    v2 = np.atleast_1d(np.asarray(var2, dtype=float))
    if not (m1.shape == v1.shape == m2.shape == v2.shape):
        raise ValueError("mismatched mean/variance shapes")
    if np.any(v1 <= 0.0) or np.any(v2 <= 0.0):
        raise ValueError("variances must be positive")
    r = v2 / v1
    return float(0.5 * np.sum(r - 1.0 + (m1 - m2) ** 2 / v1 - np.log(r)))
