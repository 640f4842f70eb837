"""Compilation of chance-constrained problems into deterministic programs.

Given K training rows, the chance constraint is replaced by a counting
condition over the K per-sample constraint values, realized in one of two
exact forms:

  * indicator form: one binary z_i per sample, big-M rows forcing
    z_i = 1 exactly when f(x, Y_i) <= -chi (up to a zeta-width sliver on
    the reverse side), and a cardinality row sum(z) >= rank;
  * pinball-stationarity form: an auxiliary quantile variable q with the
    optimality system of the pinball-loss minimization (residual splits
    e+/e-, multipliers lambda/beta/gamma, and complementarity pairs),
    plus q <= -chi.

Joint problems (several constraint functions that must hold together)
either split the failure budget delta across constraints and concatenate
s independent single-constraint encodings, or introduce per-sample max
variables mu_i with selector binaries so the single-constraint machinery
applies to max_j f_j.

The output IR (DetProgram) is a flat list of rows over named continuous
variables and named binaries.  Each row reads

    expr(x_continuous) + sum_b lin[b] * z_b   REL   rhs

Rows are normative: feasibility checking uses them directly.  The block
objects attached to a program are redundant accelerator metadata for the
tree-search solver (vectorized per-sample score evaluation); they carry
no information absent from the rows.

The reverse indicator row forces f >= zeta for unselected samples, so a
decision where an unselected score lies exactly in (-chi, -chi + zeta) is
excluded; zeta = 1e-6 keeps that sliver measure-zero for continuous data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import expr as ex
from .problem import CcoProblem
from .quantile import ConformalLevel

__all__ = [
    "EncodeError",
    "BigM",
    "Constraint",
    "CardinalityRow",
    "IndicatorBlock",
    "MaxBlock",
    "KktBlock",
    "DetProgram",
    "derive_bigM",
    "encode_mip",
    "encode_kkt",
    "encode_joint_union",
    "encode_joint_max",
    "build_program",
    "constraint_value",
    "check_program",
    "program_to_dict",
]

ZETA = 1e-6
_WIDEN = 0.05
_MIN_MAG = 1e-3


class EncodeError(ValueError):
    """The problem cannot be compiled with the given data and level."""


@dataclass(frozen=True)
class BigM:
    """Box bounds on every per-sample constraint value, outer-widened."""

    M: float
    m: float
    zeta: float = ZETA

    def __post_init__(self):
        if not (self.M > 0.0 > self.m):
            raise EncodeError(f"need M > 0 > m, got M={self.M}, m={self.m}")
        if not 0.0 < self.zeta < min(-self.m, self.M):
            raise EncodeError(f"zeta={self.zeta} outside (0, min(|m|, M))")


@dataclass(frozen=True)
class Constraint:
    """expr(continuous vars) + sum of lin coefficients * binaries REL rhs."""

    expr: ex.Expr
    lin: tuple
    rel: str
    rhs: float
    tag: str = ""

    def __post_init__(self):
        if self.rel not in ("<=", "=", ">="):
            raise EncodeError(f"bad relation {self.rel!r}")
        object.__setattr__(self, "lin", tuple(self.lin))


@dataclass(frozen=True)
class CardinalityRow:
    """sum of the named binaries REL value."""

    names: tuple
    rel: str
    value: int

    def __post_init__(self):
        if self.rel not in (">=", "="):
            raise EncodeError(f"bad cardinality relation {self.rel!r}")
        if not 0 <= self.value <= len(self.names):
            raise EncodeError(
                f"cardinality {self.value} outside 0..{len(self.names)}")


@dataclass(frozen=True)
class IndicatorBlock:
    """Accelerator view of one indicator (big-M) chance block."""

    fn: ex.Expr
    rows: np.ndarray
    binaries: tuple
    M: float
    m: float
    zeta: float
    shift: float
    rank: int


@dataclass(frozen=True)
class MaxBlock:
    """Accelerator view of a joint-max chance block."""

    fns: tuple
    rows: np.ndarray
    mu: tuple          # program var indices of mu_i
    sigma: tuple       # per sample: tuple of selector binary names
    binaries: tuple    # outer z binaries (empty when the outer form is kkt)
    M: float
    m: float
    zeta: float
    link: float
    shift: float
    rank: int


@dataclass(frozen=True)
class KktBlock:
    """Accelerator view of one pinball-stationarity chance block.

    Index fields point into the program's continuous variables.  mu is
    set when the per-sample score is itself a program variable (joint-max
    composition) instead of an expression over x.
    """

    fn: object
    rows: np.ndarray
    alpha: float
    shift: float
    q: int
    ep: tuple
    em: tuple
    gam: tuple
    lam: tuple
    bet: tuple
    mu: tuple = ()


@dataclass(frozen=True)
class DetProgram:
    """Deterministic-program IR over named variables.

    The first n_decision continuous variables are the original decision
    vector; everything after them is auxiliary.  objective is always in
    minimization sense (metadata records the original sense).
    """

    var_names: tuple
    var_lo: tuple
    var_hi: tuple
    binary_names: tuple
    constraints: tuple
    objective: ex.Expr
    cardinality: tuple
    complementarity: tuple
    n_decision: int
    metadata: dict = field(default_factory=dict)
    blocks: tuple = ()

    def __post_init__(self):
        nv = len(self.var_names)
        if not (len(self.var_lo) == len(self.var_hi) == nv):
            raise EncodeError("variable name/bound length mismatch")
        binset = set(self.binary_names)
        if len(binset) != len(self.binary_names):
            raise EncodeError("duplicate binary names")
        if len(set(self.var_names)) != nv:
            raise EncodeError("duplicate variable names")
        for c in self.constraints:
            mx, my = ex.max_indices(c.expr)
            if my >= 0:
                raise EncodeError(f"row {c.tag!r} still references samples")
            if mx >= nv:
                raise EncodeError(f"row {c.tag!r} references var {mx}, "
                                  f"have {nv}")
            for name, _ in c.lin:
                if name not in binset:
                    raise EncodeError(f"row {c.tag!r} uses unknown binary "
                                      f"{name!r}")
        for row in self.cardinality:
            for name in row.names:
                if name not in binset:
                    raise EncodeError(f"cardinality uses unknown binary "
                                      f"{name!r}")
        names = set(self.var_names)
        for a, b in self.complementarity:
            if a not in names or b not in names:
                raise EncodeError(f"complementarity pair ({a}, {b}) uses "
                                  "unknown variables")

    def var_index(self, name: str) -> int:
        return self.var_names.index(name)


class _Builder:
    def __init__(self):
        self.names, self.lo, self.hi = [], [], []
        self.binaries = []
        self.rows = []
        self.cards = []
        self.compl = []
        self.blocks = []

    def var(self, name: str, lo: float, hi: float) -> int:
        self.names.append(name)
        self.lo.append(float(lo))
        self.hi.append(float(hi))
        return len(self.names) - 1

    def binary(self, name: str) -> str:
        self.binaries.append(name)
        return name

    def add(self, expr, lin, rel, rhs, tag=""):
        self.rows.append(Constraint(expr, tuple(lin), rel, float(rhs), tag))

    def card(self, names, rel, value):
        self.cards.append(CardinalityRow(tuple(names), rel, int(value)))

    def pair(self, a: str, b: str):
        self.compl.append((a, b))

    def build(self, objective, n_decision, metadata) -> DetProgram:
        return DetProgram(
            tuple(self.names), tuple(self.lo), tuple(self.hi),
            tuple(self.binaries), tuple(self.rows), objective,
            tuple(self.cards), tuple(self.compl), n_decision,
            metadata, tuple(self.blocks))


def _start(p: CcoProblem) -> _Builder:
    """Decision variables, deterministic rows: shared by every encoder."""
    b = _Builder()
    for i, (lo, hi) in enumerate(p.var_bounds):
        b.var(f"x{i}", lo, hi)
    for j, h in enumerate(p.ineq):
        b.add(h, (), "<=", 0.0, tag=f"det_ineq{j}")
    for j, g in enumerate(p.eq):
        b.add(g, (), "=", 0.0, tag=f"det_eq{j}")
    return b


def _envelope(p: CcoProblem, rows: np.ndarray, fns) -> tuple:
    """Per-fn, per-sample interval bounds over the decision box, widened."""
    lov, hiv = [], []
    for j, fn in enumerate(fns):
        try:
            lo_j, hi_j = ex.interval_rows(fn, p.lower, p.upper, rows)
        except ex.EvalError as err:
            raise EncodeError(
                f"cannot bound chance constraint {j} over the box: {err}"
            ) from err
        w = hi_j - lo_j
        lov.append(lo_j - _WIDEN * w)
        hiv.append(hi_j + _WIDEN * w)
    return np.stack(lov), np.stack(hiv)


def derive_bigM(p: CcoProblem, rows: np.ndarray) -> BigM:
    """Global constants bounding every f_j(x, Y_i) over the box.

    Interval arithmetic per sample, each interval widened outward by 5% of
    its own width (so values constant in x stay exact), then aggregated.
    The results are clamped away from zero so they remain usable as
    indicator coefficients even for one-sided score ranges.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    lov, hiv = _envelope(p, rows, p.chance_fns)
    return BigM(max(float(hiv.max()), _MIN_MAG),
                min(float(lov.min()), -_MIN_MAG), ZETA)


def _shifted_constants(bigm: BigM, chi: float) -> tuple:
    ms = min(bigm.m + chi, -_MIN_MAG)
    Ms = max(bigm.M + chi, _MIN_MAG)
    return Ms, ms


def _score_expr(fn: ex.Expr, row, chi: float) -> ex.Expr:
    fe = ex.bind_samples(fn, row)
    if chi != 0.0:
        fe = ex.add(fe, ex.const(chi))
    return fe


def _emit_indicator(b: _Builder, p: CcoProblem, fn: ex.Expr,
                    rows: np.ndarray, level, bigm: BigM, lov: np.ndarray,
                    prefix: str, shift: float | None = None) -> None:
    """Indicator rows + cardinality for one chance function.

    shift overrides the score margin (defaults to the problem's chi); the
    sample-average baseline passes chi plus its own iota here.
    """
    K = rows.shape[0]
    rank = level.rank
    sh = p.chi if shift is None else shift
    selectable = int(np.sum(lov <= -sh))
    if selectable < rank:
        raise EncodeError(
            f"chance constraint {prefix or 'f'}: only {selectable} of {K} "
            f"samples can ever satisfy f <= {-sh}, but rank {rank} "
            "are required")
    Ms, ms = _shifted_constants(bigm, sh)
    zeta = bigm.zeta
    names = [b.binary(f"{prefix}z{i}") for i in range(K)]
    for i in range(K):
        fe = _score_expr(fn, rows[i], sh)
        b.add(fe, ((names[i], Ms),), "<=", Ms, tag=f"{prefix}ind_on{i}")
        b.add(fe, ((names[i], zeta - ms),), ">=", zeta,
              tag=f"{prefix}ind_off{i}")
    b.card(names, ">=", rank)
    b.blocks.append(IndicatorBlock(fn, rows, tuple(names), Ms, ms, zeta,
                                   sh, rank))


def _emit_kkt(b: _Builder, p: CcoProblem, fn, rows: np.ndarray,
              alpha: float, bigm: BigM | None, prefix: str,
              mu_idx: tuple = ()) -> None:
    """Pinball-stationarity system for one chance function.

    fn is an expression template unless mu_idx is given, in which case the
    per-sample score is the program variable mu_idx[i] and fn is ignored
    for row construction.
    """
    if not 0.0 < alpha < 1.0:
        raise EncodeError(f"alpha must lie in (0, 1), got {alpha}")
    K = rows.shape[0]
    qlo = bigm.m - 1.0 if bigm is not None else -math.inf
    q = b.var(f"{prefix}q", qlo, -p.chi)
    qe = ex.x(q)
    b.add(qe, (), "<=", -p.chi, tag=f"{prefix}kkt_q")
    ep, em, gam, lam, bet = [], [], [], [], []
    for i in range(K):
        ep.append(b.var(f"{prefix}ep{i}", 0.0, math.inf))
        em.append(b.var(f"{prefix}em{i}", 0.0, math.inf))
        gam.append(b.var(f"{prefix}gam{i}", -alpha, 1.0 - alpha))
        lam.append(b.var(f"{prefix}lam{i}", 0.0, 1.0))
        bet.append(b.var(f"{prefix}bet{i}", 0.0, 1.0))
    for i in range(K):
        b.add(ex.sub(ex.x(gam[i]), ex.x(lam[i])), (), "=", -alpha,
              tag=f"{prefix}kkt_stat_lam{i}")
        b.add(ex.add(ex.x(gam[i]), ex.x(bet[i])), (), "=", 1.0 - alpha,
              tag=f"{prefix}kkt_stat_bet{i}")
        score = ex.x(mu_idx[i]) if mu_idx else ex.bind_samples(fn, rows[i])
        resid = ex.add(ex.sub(ex.sub(ex.x(ep[i]), ex.x(em[i])), score), qe)
        b.add(resid, (), "=", 0.0, tag=f"{prefix}kkt_resid{i}")
        b.pair(f"{prefix}lam{i}", f"{prefix}ep{i}")
        b.pair(f"{prefix}bet{i}", f"{prefix}em{i}")
    gsum = ex.x(gam[0])
    for i in range(1, K):
        gsum = ex.add(gsum, ex.x(gam[i]))
    b.add(gsum, (), "=", 0.0, tag=f"{prefix}kkt_gamsum")
    b.blocks.append(KktBlock(fn, rows, alpha, p.chi, q, tuple(ep), tuple(em),
                             tuple(gam), tuple(lam), tuple(bet),
                             tuple(mu_idx)))


def _meta(p: CcoProblem, origin: str, level=None, **extra) -> dict:
    md = {"origin": origin, "chi": p.chi, "sense": p.sense,
          "delta": p.delta, "zeta": ZETA}
    if level is not None:
        md["rank"] = level.rank
        md["count"] = level.count
        md["alpha"] = getattr(level, "alpha", None)
        md["robust"] = hasattr(level, "divergence")
    md.update(extra)
    return md


def _single_fn(p: CcoProblem, what: str) -> ex.Expr:
    if len(p.chance_fns) != 1:
        raise EncodeError(
            f"{what} encodes a single chance constraint; this problem has "
            f"{len(p.chance_fns)} (use the union or max joint encodings)")
    return p.chance_fns[0]


def _check_count(rows: np.ndarray, level) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    count = getattr(level, "count", rows.shape[0])
    if count != rows.shape[0]:
        raise EncodeError(f"level was built for {count} samples, "
                          f"got {rows.shape[0]}")
    return rows


def encode_mip(p: CcoProblem, rows, level) -> DetProgram:
    """Indicator (big-M) encoding at the given level's rank."""
    fn = _single_fn(p, "encode_mip")
    rows = _check_count(rows, level)
    b = _start(p)
    lov, hiv = _envelope(p, rows, (fn,))
    bigm = BigM(max(float(hiv.max()), _MIN_MAG),
                min(float(lov.min()), -_MIN_MAG), ZETA)
    _emit_indicator(b, p, fn, rows, level, bigm, lov[0], "")
    Ms, ms = _shifted_constants(bigm, p.chi)
    md = _meta(p, "cpp-mip", level, M=Ms, m=ms)
    return b.build(p.min_objective, p.n, md)


def encode_kkt(p: CcoProblem, rows, alpha: float) -> DetProgram:
    """Pinball-stationarity encoding at quantile level alpha."""
    fn = _single_fn(p, "encode_kkt")
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    b = _start(p)
    try:
        lov, hiv = _envelope(p, rows, (fn,))
        bigm = BigM(max(float(hiv.max()), _MIN_MAG),
                    min(float(lov.min()), -_MIN_MAG), ZETA)
    except EncodeError:
        bigm = None
    _emit_kkt(b, p, fn, rows, alpha, bigm, "")
    md = _meta(p, "cpp-kkt", None, alpha=alpha, count=rows.shape[0],
               identities=("lam[i] + bet[i] == 1",))
    return b.build(p.min_objective, p.n, md)


def encode_joint_union(p: CcoProblem, rows, method: str = "mip",
                       robust: bool = False) -> DetProgram:
    """Split delta across the s constraints and concatenate encodings."""
    s = len(p.chance_fns)
    if s < 2:
        raise EncodeError("union encoding needs at least 2 chance "
                          "constraints")
    if method not in ("mip", "kkt"):
        raise EncodeError(f"unknown sub-encoding {method!r}")
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    K = rows.shape[0]
    sub_delta = p.delta / s
    level = _make_level(p, sub_delta, K, robust)

    b = _start(p)
    lov, hiv = _envelope(p, rows, p.chance_fns)
    ranks = []
    for j, fn in enumerate(p.chance_fns):
        bigm = BigM(max(float(hiv[j].max()), _MIN_MAG),
                    min(float(lov[j].min()), -_MIN_MAG), ZETA)
        if method == "mip":
            _emit_indicator(b, p, fn, rows, level, bigm, lov[j], f"c{j}_")
            ranks.append(level.rank)
        else:
            _emit_kkt(b, p, fn, rows, level.alpha, bigm, f"c{j}_")
            ranks.append(level.rank)
    md = _meta(p, "jcco-union", level, sub_delta=sub_delta,
               sub_method=method, ranks=tuple(ranks))
    return b.build(p.min_objective, p.n, md)


def encode_joint_max(p: CcoProblem, rows, level,
                     method: str = "mip") -> DetProgram:
    """Per-sample max variables fed into a single-constraint encoding."""
    s = len(p.chance_fns)
    if s < 2:
        raise EncodeError("max encoding needs at least 2 chance "
                          "constraints; use the plain encodings for s=1")
    if method not in ("mip", "kkt"):
        raise EncodeError(f"unknown outer encoding {method!r}")
    rows = _check_count(rows, level)
    K = rows.shape[0]

    b = _start(p)
    lov, hiv = _envelope(p, rows, p.chance_fns)
    M_all = max(float(hiv.max()), _MIN_MAG)
    m_all = min(float(lov.min()), -_MIN_MAG)
    bigm = BigM(M_all, m_all, ZETA)
    link = M_all - m_all

    mu = [b.var(f"mu{i}", m_all - 1.0, M_all + 1.0) for i in range(K)]
    sigma = [[b.binary(f"s{i}_{j}") for j in range(s)] for i in range(K)]
    for i in range(K):
        for j, fn in enumerate(p.chance_fns):
            fe = ex.bind_samples(fn, rows[i])
            diff = ex.sub(ex.x(mu[i]), fe)
            b.add(diff, (), ">=", 0.0, tag=f"max_lb{i}_{j}")
            b.add(diff, ((sigma[i][j], -link),), ">=", -link,
                  tag=f"max_sel_lo{i}_{j}")
            b.add(diff, ((sigma[i][j], link),), "<=", link,
                  tag=f"max_sel_hi{i}_{j}")
        b.card(sigma[i], "=", 1)

    Ms, ms = _shifted_constants(bigm, p.chi)
    znames = []
    if method == "mip":
        # the outer indicator rows act on the mu variables directly
        lov_mu = lov.max(axis=0)
        rank = level.rank
        selectable = int(np.sum(lov_mu <= -p.chi))
        if selectable < rank:
            raise EncodeError(
                f"joint max: only {selectable} of {K} samples can ever "
                f"reach max_j f_j <= {-p.chi}, but rank {rank} is required")
        znames = [b.binary(f"z{i}") for i in range(K)]
        for i in range(K):
            me = ex.x(mu[i]) if p.chi == 0.0 else \
                ex.add(ex.x(mu[i]), ex.const(p.chi))
            b.add(me, ((znames[i], Ms),), "<=", Ms, tag=f"ind_on{i}")
            b.add(me, ((znames[i], ZETA - ms),), ">=", ZETA,
                  tag=f"ind_off{i}")
        b.card(znames, ">=", rank)
    else:
        _emit_kkt(b, p, None, rows, level.alpha, bigm, "", mu_idx=tuple(mu))

    b.blocks.insert(0, MaxBlock(tuple(p.chance_fns), rows, tuple(mu),
                                tuple(tuple(sg) for sg in sigma),
                                tuple(znames), Ms, ms, ZETA, link, p.chi,
                                level.rank))
    md = _meta(p, "jcco-max", level, M=Ms, m=ms, link=link,
               outer_method=method)
    return b.build(p.min_objective, p.n, md)


def _make_level(p: CcoProblem, delta: float, count: int, robust: bool):
    if robust:
        from .robust import Divergence, RobustLevel
        if p.epsilon is None:
            raise EncodeError("robust encoding requires the problem to set "
                              "epsilon")
        return RobustLevel(delta, count, Divergence(p.divergence, p.epsilon))
    return ConformalLevel(delta, count)


def build_program(p: CcoProblem, rows, method: str,
                  robust: bool = False) -> DetProgram:
    """Name-based dispatcher used by the CLI and the experiment harness.

    methods: cpp-mip, cpp-kkt, rcpp-mip, rcpp-kkt, union, max.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    K = rows.shape[0]
    s = len(p.chance_fns)
    if method in ("rcpp-mip", "rcpp-kkt"):
        robust = True
    if method in ("cpp-mip", "cpp-kkt", "rcpp-mip", "rcpp-kkt"):
        if s != 1:
            raise EncodeError(
                f"{method} applies to single-constraint problems; this one "
                f"has s={s} (use union or max)")
        level = _make_level(p, p.delta, K, robust)
        if method.endswith("mip"):
            return encode_mip(p, rows, level)
        return encode_kkt(p, rows, level.alpha)
    if method == "union":
        return encode_joint_union(p, rows, "mip", robust)
    if method == "max":
        level = _make_level(p, p.delta, K, robust)
        return encode_joint_max(p, rows, level, "mip")
    raise EncodeError(f"unknown encoding method {method!r}")


def constraint_value(c: Constraint, xv, binvals: dict) -> float:
    """Left-hand side of one row at a full continuous + binary assignment."""
    v = ex.evaluate(c.expr, xv)
    for name, coeff in c.lin:
        v += coeff * float(binvals[name])
    return v


def check_program(prog: DetProgram, xv, binvals: dict,
                  tol: float = 1e-6) -> list[str]:
    """All constraint violations at a candidate point; empty means feasible."""
    xv = np.asarray(xv, dtype=float)
    out = []
    if xv.size != len(prog.var_names):
        return [f"expected {len(prog.var_names)} continuous values, "
                f"got {xv.size}"]
    for i, name in enumerate(prog.var_names):
        if xv[i] < prog.var_lo[i] - tol or xv[i] > prog.var_hi[i] + tol:
            out.append(f"{name}={xv[i]} outside [{prog.var_lo[i]}, "
                       f"{prog.var_hi[i]}]")
    for name in prog.binary_names:
        zv = float(binvals.get(name, 0.0))
        if min(abs(zv), abs(zv - 1.0)) > tol:
            out.append(f"binary {name}={zv} not in {{0, 1}}")
    for c in prog.constraints:
        v = constraint_value(c, xv, binvals)
        bad = ((c.rel == "<=" and v > c.rhs + tol)
               or (c.rel == ">=" and v < c.rhs - tol)
               or (c.rel == "=" and abs(v - c.rhs) > tol))
        if bad:
            out.append(f"row {c.tag or '?'}: {v:.9g} {c.rel} {c.rhs:.9g} "
                       "violated")
    for row in prog.cardinality:
        total = sum(round(float(binvals.get(nm, 0.0))) for nm in row.names)
        bad = ((row.rel == ">=" and total < row.value)
               or (row.rel == "=" and total != row.value))
        if bad:
            out.append(f"cardinality {row.rel} {row.value} violated "
                       f"(got {total})")
    for a, bn in prog.complementarity:
        va = xv[prog.var_index(a)]
        vb = xv[prog.var_index(bn)]
        if abs(va * vb) > tol:
            out.append(f"complementarity {a}*{bn} = {va * vb:.3g} != 0")
    return out


def _num(v: float):
    if math.isinf(v):
        return None
    return v


def program_to_dict(prog: DetProgram) -> dict:
    """JSON-ready dump of the IR (blocks are runtime-only and omitted)."""
    names = prog.var_names
    md = {}
    for k, v in prog.metadata.items():
        md[k] = list(v) if isinstance(v, tuple) else v
    return {
        "vars": [{"name": nm, "lo": _num(lo), "hi": _num(hi)}
                 for nm, lo, hi in zip(names, prog.var_lo, prog.var_hi)],
        "binaries": list(prog.binary_names),
        "n_decision": prog.n_decision,
        "objective": ex.to_str(prog.objective, names),
        "constraints": [
            {"expr": ex.to_str(c.expr, names),
             "lin": {nm: coeff for nm, coeff in c.lin},
             "rel": c.rel, "rhs": c.rhs, "tag": c.tag}
            for c in prog.constraints],
        "cardinality": [
            {"names": list(r.names), "rel": r.rel, "value": r.value}
            for r in prog.cardinality],
        "complementarity": [list(pair) for pair in prog.complementarity],
        "metadata": md,
    }
