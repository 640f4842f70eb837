"""Scenario and sample-average baselines.

Two classical reference encodings for the same sampled chance constraint:

* ``encode_sa`` -- the scenario approach.  Every training sample becomes a
  hard constraint, no binaries, no discarding.  Feasible sets are therefore
  contained in every quantile-based feasible set built from the same rows,
  which makes it the conservative yardstick in comparisons.
* ``encode_saa`` -- the sample average approximation.  Mirrors the indicator
  machinery of the quantile encoding but counts satisfied samples against an
  empirical threshold ceil(K * (1 - omega)) and tightens each score by an
  extra margin iota >= 0.

With omega = 1 - r/K, where r is the conformal rank for (K, delta), and
iota = 0 the sample-average program has the same cardinality row as the
quantile indicator program, so the two are equivalent reformulations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encode import (BigM, DetProgram, EncodeError, _MIN_MAG, ZETA,
                     _emit_indicator, _envelope, _meta, _score_expr,
                     _shifted_constants, _single_fn, _start)
from .problem import CcoProblem
from .quantile import ceil_guard

__all__ = ["encode_sa", "encode_saa", "saa_threshold"]


def _rows2d(rows) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    return rows


def encode_sa(p: CcoProblem, rows) -> DetProgram:
    """Scenario approach: one hard row per (constraint, sample) pair.

    Joint problems are handled by requiring every chance function on every
    sample.  An empty sample set degenerates to the deterministic part of
    the problem alone.  The problem's margin chi tightens each row exactly
    as it tightens the quantile encodings.
    """
    rows = _rows2d(rows)
    b = _start(p)
    for j, fn in enumerate(p.chance_fns):
        for i in range(rows.shape[0]):
            b.add(_score_expr(fn, rows[i], p.chi), (), "<=", 0.0,
                  tag=f"sa{j}_{i}")
    md = _meta(p, "sa", None, count=int(rows.shape[0]))
    return b.build(p.min_objective, p.n, md)


def saa_threshold(count: int, omega: float) -> int:
    """Required satisfied-sample count ceil(count * (1 - omega))."""
    return ceil_guard(count * (1.0 - omega))


@dataclass(frozen=True)
class _SaaLevel:
    rank: int
    count: int


def encode_saa(p: CcoProblem, rows, omega: float,
               iota: float = 0.0) -> DetProgram:
    """Sample average approximation with violation budget omega.

    Requires at least ceil(K * (1 - omega)) of the K sampled scores, each
    tightened by iota (on top of the problem's chi), to be nonpositive.
    Shares the indicator big-M machinery with the quantile encoding; only
    the cardinality threshold and the score shift differ.
    """
    if not 0.0 < omega < 1.0:
        raise EncodeError(f"omega must lie in (0, 1), got {omega}")
    if iota < 0.0:
        raise EncodeError(f"iota must be nonnegative, got {iota}")
    fn = _single_fn(p, "encode_saa")
    rows = _rows2d(rows)
    K = rows.shape[0]
    if K == 0:
        raise EncodeError("sample average approximation needs at least one "
                          "sample")
    level = _SaaLevel(saa_threshold(K, omega), K)
    b = _start(p)
    lov, hiv = _envelope(p, rows, (fn,))
    bigm = BigM(max(float(hiv.max()), _MIN_MAG),
                min(float(lov.min()), -_MIN_MAG), ZETA)
    shift = p.chi + iota
    _emit_indicator(b, p, fn, rows, level, bigm, lov[0], "", shift=shift)
    Ms, ms = _shifted_constants(bigm, shift)
    md = _meta(p, "saa", level, M=Ms, m=ms, omega=omega, iota=iota)
    return b.build(p.min_objective, p.n, md)
