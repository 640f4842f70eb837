"""Deterministic-program solvers.

Three backends over the encode IR plus one direct heuristic:

  * solve_bnb: best-first branch-and-bound on binaries and complementarity
    pairs.  Node relaxations drop complementarity and relax binaries to
    [0, 1]; fully affine programs get an exact LP relaxation (HiGHS), and
    programs carrying encoder blocks get a projected relaxation in the
    decision variables only, with the per-sample structure collapsed to a
    handful of vectorized constraint callables.  Relaxations of nonconvex
    programs are solved by a local method under multistart, so their
    bounds are heuristic there; feasibility of anything returned is still
    verified exactly.
  * solve_enumerate: exhaustive enumeration of binary assignments keeping
    the cardinality rows, continuous subsolve per assignment.  Exact
    oracle for tiny programs.
  * solve_quantile_penalty: derivative-free pattern search on the decision
    vector, penalizing the rank quantile of the training scores directly;
    bypasses the IR entirely.
  * solve_continuous: the shared NLP subsolver (sequential quadratic
    programming under deterministic low-discrepancy multistart).

Every Solution with status optimal, feasible, or timeout-with-point is
re-verified against the program rows by independent expression evaluation
before being returned; solver internals are never trusted.

All tie-breaking is index-based and every start point comes from an
unscrambled Halton sequence, so repeated runs produce identical Solutions.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.stats import qmc

from . import expr as ex
from .encode import (
    Constraint,
    DetProgram,
    IndicatorBlock,
    KktBlock,
    MaxBlock,
    build_program,
    check_program,
)
from .quantile import ConformalLevel

__all__ = [
    "SolveConfig",
    "Solution",
    "LocalResult",
    "halton_starts",
    "solve_continuous",
    "solve_bnb",
    "solve_enumerate",
    "solve_quantile_penalty",
    "solve_program",
    "solve_cco",
    "verify_solution",
]

_FEAS_TOL = 1e-6
_LOCAL_TOL = 1e-7


@dataclass(frozen=True)
class SolveConfig:
    time_limit: float = 100.0
    abs_gap: float = 1e-6
    multistart: int = 20
    mu0: float = 10.0
    mu_growth: float = 10.0
    max_penalty_rounds: int = 12
    node_limit: int = 20000
    backend: str = "bnb"

    def __post_init__(self):
        if self.time_limit <= 0 or self.node_limit <= 0:
            raise ValueError("limits must be positive")
        if self.multistart < 1 or self.abs_gap < 0:
            raise ValueError("multistart must be >= 1 and abs_gap >= 0")
        if self.mu_growth <= 1.0 or self.mu0 <= 0:
            raise ValueError("penalty schedule needs mu0 > 0, growth > 1")
        if self.backend not in ("bnb", "enumerate", "penalty"):
            raise ValueError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class Solution:
    """Solver outcome.

    objective is in the program's own (minimization) sense; solve_cco
    converts back to the owning problem's sense.  vars maps every
    continuous program variable to its value; x is the decision part.
    """

    status: str
    x: np.ndarray | None
    objective: float
    binaries: dict
    nodes: int
    wall_time: float
    vars: dict = field(default_factory=dict)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "feasible")


@dataclass(frozen=True)
class LocalResult:
    x: np.ndarray
    objective: float
    violation: float

    @property
    def feasible(self) -> bool:
        return self.violation < _LOCAL_TOL


def halton_starts(lo, hi, count: int) -> np.ndarray:
    """Deterministic start points in the box: center plus a Halton set."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    flo = np.where(np.isfinite(lo), lo, -10.0)
    fhi = np.where(np.isfinite(hi), hi, 10.0)
    center = (flo + fhi) / 2.0
    if count <= 1:
        return center.reshape(1, -1)
    h = qmc.Halton(d=lo.size, scramble=False).random(count - 1)
    pts = flo + h * (fhi - flo)
    return np.vstack([center, pts])


def _fn_of(e: ex.Expr):
    def f(v):
        try:
            out = ex.evaluate(e, v)
        except ex.EvalError:
            return 1e15
        return out if math.isfinite(out) else 1e15
    return f


def _split_rows(rows):
    """Partition expression rows into scipy ineq (>= 0) and eq callables."""
    ineq, eq = [], []
    for expr, rel, rhs in rows:
        f = _fn_of(expr)
        if rel == "<=":
            ineq.append(lambda v, f=f, r=rhs: r - f(v))
        elif rel == ">=":
            ineq.append(lambda v, f=f, r=rhs: f(v) - r)
        else:
            eq.append(lambda v, f=f, r=rhs: f(v) - r)
    return ineq, eq


def _minimize(obj_fn, ineq_fns, eq_fns, lo, hi, starts) -> LocalResult | None:
    """SQP under multistart; best point by (feasible first, objective)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    bounds = [(None if math.isinf(a) else a, None if math.isinf(b) else b)
              for a, b in zip(lo, hi)]
    cons = []
    if ineq_fns:
        cons.append({"type": "ineq",
                     "fun": lambda v: np.concatenate(
                         [np.atleast_1d(f(v)) for f in ineq_fns])})
    if eq_fns:
        cons.append({"type": "eq",
                     "fun": lambda v: np.concatenate(
                         [np.atleast_1d(f(v)) for f in eq_fns])})

    def violation(v):
        worst = 0.0
        for c in cons:
            vals = np.atleast_1d(c["fun"](v))
            if c["type"] == "ineq":
                worst = max(worst, float(np.max(-vals, initial=0.0)))
            else:
                worst = max(worst, float(np.max(np.abs(vals), initial=0.0)))
        worst = max(worst, float(np.max(lo - v, initial=0.0)))
        worst = max(worst, float(np.max(v - hi, initial=0.0)))
        return worst

    best = None
    for x0 in np.atleast_2d(starts):
        x0 = np.clip(x0, np.where(np.isfinite(lo), lo, -1e6),
                     np.where(np.isfinite(hi), hi, 1e6))
        try:
            res = minimize(obj_fn, x0, method="SLSQP", bounds=bounds,
                           constraints=cons,
                           options={"maxiter": 200, "ftol": 1e-10})
        except (ValueError, OverflowError):
            continue
        xs = np.clip(res.x, np.where(np.isfinite(lo), lo, -np.inf),
                     np.where(np.isfinite(hi), hi, np.inf))
        cand = LocalResult(xs, float(obj_fn(xs)), violation(xs))
        if best is None:
            best = cand
        elif cand.feasible and not best.feasible:
            best = cand
        elif cand.feasible == best.feasible and \
                cand.objective < best.objective - 1e-12:
            best = cand
    return best


def solve_continuous(objective: ex.Expr, constraints, box,
                     starts) -> LocalResult | None:
    """Minimize an expression subject to expression rows inside a box.

    constraints: iterable of (expr, rel, rhs) triples or Constraint rows
    with empty binary parts.  Returns the best local result across the
    given starts, or None when every start fails outright.
    """
    rows = []
    for c in constraints:
        if isinstance(c, Constraint):
            if c.lin:
                raise ValueError("solve_continuous takes rows without "
                                 "binary terms; fold them first")
            rows.append((c.expr, c.rel, c.rhs))
        else:
            rows.append(tuple(c))
    lo, hi = box
    ineq, eq = _split_rows(rows)
    return _minimize(_fn_of(objective), ineq, eq, lo, hi,
                     np.atleast_2d(starts))


def verify_solution(prog: DetProgram, sol: Solution,
                    tol: float = _FEAS_TOL) -> list[str]:
    """Independent feasibility re-check of a Solution against the rows."""
    if sol.x is None:
        return ["solution carries no point"]
    full = np.array([sol.vars.get(name, 0.0) for name in prog.var_names])
    full[:prog.n_decision] = np.asarray(sol.x, dtype=float)
    return check_program(prog, full, sol.binaries, tol)


# ---------------------------------------------------------------------------
# shared block helpers


def _indicator_score_fn(block):
    """Vectorized shifted scores s_i(x) for an indicator or max block."""
    if isinstance(block, MaxBlock):
        fns, rows = block.fns, block.rows
    else:
        fns, rows = (block.fn,), block.rows
    shift = block.shift

    def scores(x):
        cols = [ex.eval_rows(f, x, rows) for f in fns]
        sc = cols[0] if len(cols) == 1 else np.max(np.stack(cols), axis=0)
        return np.where(np.isfinite(sc), sc, 1e15) + shift
    return scores


def _kkt_score_fn(block: KktBlock, prog: DetProgram):
    """Raw (unshifted) per-sample scores feeding a pinball block."""
    if block.mu:
        for other in prog.blocks:
            if isinstance(other, MaxBlock) and other.mu == block.mu:
                unshift = other.shift

                def scores(x, other=other, unshift=unshift):
                    cols = [ex.eval_rows(f, x, other.rows) for f in other.fns]
                    sc = np.max(np.stack(cols), axis=0)
                    return np.where(np.isfinite(sc), sc, 1e15)
                return scores
        raise ValueError("kkt block references mu variables without a "
                         "matching max block")
    fn, rows = block.fn, block.rows

    def scores(x):
        sc = ex.eval_rows(fn, x, rows)
        return np.where(np.isfinite(sc), sc, 1e15)
    return scores


def _kkt_completion(scores: np.ndarray, alpha: float, chi: float):
    """Aux assignment certifying q as a pinball minimizer, or None.

    Returns (q, e_plus, e_minus, gam, lam, bet) with every stationarity,
    residual, sum, and complementarity condition satisfied, provided some
    pinball minimizer q <= -chi exists for these scores.  alpha * K within
    1e-9 of an integer is treated as exactly integral, so the admissible q
    interval matches the guarded rank arithmetic of the levels; the sum
    row then holds to float noise, far inside the verification tolerance.
    """
    K = scores.size
    s = np.sort(scores, kind="stable")
    a = alpha * K
    if abs(a - round(a)) <= 1e-9:
        r = int(round(a))
        q_lo = s[r - 1] if r >= 1 else -math.inf
        q_hi = s[r] if r < K else math.inf
        q = min(-chi, q_hi)
        if q < q_lo:
            return None
    else:
        r = int(math.ceil(a))
        q = s[r - 1]
        if q > -chi:
            return None
    below = scores < q
    above = scores > q
    ties = ~(below | above)
    t = int(ties.sum())
    need = alpha * above.sum() - (1.0 - alpha) * below.sum()
    gam = np.where(below, 1.0 - alpha, -alpha)
    if t:
        fill = need / t
        if not -alpha - 1e-9 <= fill <= 1.0 - alpha + 1e-9:
            return None
        gam = gam.copy()
        gam[ties] = min(max(fill, -alpha), 1.0 - alpha)
    elif abs(need) > 1e-9:
        return None
    lam = alpha + gam
    bet = 1.0 - alpha - gam
    e_plus = np.where(above, scores - q, 0.0)
    e_minus = np.where(below, q - scores, 0.0)
    lam = np.where(above, 0.0, lam)
    gam = np.where(above, -alpha, gam)
    bet = np.where(below, 0.0, bet)
    return q, e_plus, e_minus, gam, lam, bet


# ---------------------------------------------------------------------------
# branch-and-bound


@dataclass(frozen=True)
class _Node:
    fixed: dict          # binary name -> 0/1
    zero: frozenset      # continuous var indices pinned to 0
    kkt_above: tuple     # (block_index, sample_index) pairs
    kkt_below: tuple
    bound: float
    depth: int


class _Prep:
    """Preprocessed program context shared by every node."""

    def __init__(self, prog: DetProgram, cfg: SolveConfig):
        self.prog = prog
        self.cfg = cfg
        self.nv = len(prog.var_names)
        self.nb = len(prog.binary_names)
        self.bidx = {n: i for i, n in enumerate(prog.binary_names)}
        self.lo = np.array(prog.var_lo)
        self.hi = np.array(prog.var_hi)
        self.obj_fn = _fn_of(prog.objective)
        self.affine = self._compile_affine()
        self.ind_blocks = [b for b in prog.blocks
                           if isinstance(b, (IndicatorBlock, MaxBlock))]
        self.kkt_blocks = [b for b in prog.blocks
                           if isinstance(b, KktBlock)]
        self.ind_scores = [_indicator_score_fn(b) for b in self.ind_blocks]
        self.kkt_scores = [_kkt_score_fn(b, prog) for b in self.kkt_blocks]
        self.block_bins = set()
        for b in self.ind_blocks:
            self.block_bins.update(b.binaries)
            if isinstance(b, MaxBlock):
                for group in b.sigma:
                    self.block_bins.update(group)
        blocks_cover = (bool(prog.blocks)
                        and self.block_bins == set(prog.binary_names))
        self.pure_blocks = self.affine is None and blocks_cover
        # the LP relaxation of a large max-of-functions encoding is too
        # weak to close the tree (big-M selector rows); the exact score
        # projection bounds those programs far tighter
        if (self.affine is not None and blocks_cover and self.nb > 24
                and any(isinstance(b, MaxBlock) for b in prog.blocks)):
            self.affine = None
            self.pure_blocks = True
        det = [c for c in prog.constraints if self._is_det_row(c)]
        self.det_rows = [(c.expr, c.rel, c.rhs) for c in det]

    def _is_det_row(self, c: Constraint) -> bool:
        return c.tag.startswith("det_")

    def _compile_affine(self):
        nv, nb = self.nv, self.nb
        obj = ex.detect_affine(self.prog.objective, nv)
        if obj is None:
            return None
        a_ub, b_ub, a_eq, b_eq = [], [], [], []
        for c in self.prog.constraints:
            af = ex.detect_affine(c.expr, nv)
            if af is None:
                return None
            vec = np.zeros(nv + nb)
            vec[:nv] = af.coeffs
            for name, coeff in c.lin:
                vec[nv + self.bidx[name]] += coeff
            rhs = c.rhs - af.const
            if c.rel == "<=":
                a_ub.append(vec)
                b_ub.append(rhs)
            elif c.rel == ">=":
                a_ub.append(-vec)
                b_ub.append(-rhs)
            else:
                a_eq.append(vec)
                b_eq.append(rhs)
        for row in self.prog.cardinality:
            vec = np.zeros(nv + nb)
            for name in row.names:
                vec[nv + self.bidx[name]] = 1.0
            if row.rel == ">=":
                a_ub.append(-vec)
                b_ub.append(-float(row.value))
            else:
                a_eq.append(vec)
                b_eq.append(float(row.value))
        cvec = np.zeros(nv + nb)
        cvec[:nv] = obj.coeffs
        return {
            "c": cvec, "const": obj.const,
            "A_ub": np.array(a_ub) if a_ub else None,
            "b_ub": np.array(b_ub) if b_ub else None,
            "A_eq": np.array(a_eq) if a_eq else None,
            "b_eq": np.array(b_eq) if b_eq else None,
        }


def _propagate(prep: _Prep, fixed: dict) -> dict | None:
    """Fix binaries forced by cardinality rows; None when contradictory."""
    fixed = dict(fixed)
    changed = True
    while changed:
        changed = False
        for row in prep.prog.cardinality:
            ones = sum(1 for n in row.names if fixed.get(n) == 1)
            zeros = sum(1 for n in row.names if fixed.get(n) == 0)
            free = [n for n in row.names if n not in fixed]
            if row.rel == ">=":
                if ones >= row.value:
                    continue
                if ones + len(free) < row.value:
                    return None
                if ones + len(free) == row.value:
                    for n in free:
                        fixed[n] = 1
                    changed = True
            else:
                if ones > row.value or ones + len(free) < row.value:
                    return None
                if ones == row.value and free:
                    for n in free:
                        fixed[n] = 0
                    changed = True
                elif ones + len(free) == row.value and free:
                    for n in free:
                        fixed[n] = 1
                    changed = True
    return fixed


def _lp_relax(prep: _Prep, node: _Node):
    """Exact LP bound for affine programs; returns (result, zvals) or None."""
    aff = prep.affine
    bounds = []
    for i in range(prep.nv):
        lo, hi = prep.lo[i], prep.hi[i]
        if i in node.zero:
            lo, hi = 0.0, 0.0
        bounds.append((None if math.isinf(lo) else lo,
                       None if math.isinf(hi) else hi))
    for name in prep.prog.binary_names:
        v = node.fixed.get(name)
        bounds.append((0.0, 1.0) if v is None else (float(v), float(v)))
    res = linprog(aff["c"], A_ub=aff["A_ub"], b_ub=aff["b_ub"],
                  A_eq=aff["A_eq"], b_eq=aff["b_eq"], bounds=bounds,
                  method="highs")
    if res.status == 2:
        return None
    if not res.success:
        return None
    full = res.x
    return (full[:prep.nv], float(res.fun + aff["const"]),
            full[prep.nv:])


def _block_relax(prep: _Prep, node: _Node, starts):
    """Projected relaxation in (x, q...) space for block programs."""
    n = prep.prog.n_decision
    nq = len(prep.kkt_blocks)
    lo = list(prep.lo[:n])
    hi = list(prep.hi[:n])
    for b in prep.kkt_blocks:
        lo.append(prep.lo[b.q] if math.isfinite(prep.lo[b.q]) else -1e6)
        hi.append(-b.shift)
    lo, hi = np.array(lo), np.array(hi)

    ineq, eq = _split_rows(prep.det_rows)
    for bi, block in enumerate(prep.ind_blocks):
        sfn = prep.ind_scores[bi]
        f1 = [i for i, nm in enumerate(block.binaries)
              if node.fixed.get(nm) == 1]
        f0 = [i for i, nm in enumerate(block.binaries)
              if node.fixed.get(nm) == 0]
        free = [i for i, nm in enumerate(block.binaries)
                if nm not in node.fixed]
        f1a = np.array(f1, dtype=int)
        f0a = np.array(f0, dtype=int)
        fra = np.array(free, dtype=int)
        zeta = block.zeta
        # every integral completion must satisfy the cardinality row, which
        # for scores is exactly: the (rank - |F1|)-th smallest free score is
        # nonpositive.  Using the order statistic itself (rather than a
        # smooth surrogate) makes the node bound exact in x.
        need = block.rank - len(f1)
        if need > len(free):
            return None

        def g(v, sfn=sfn, f1a=f1a, f0a=f0a, fra=fra, zeta=zeta, need=need):
            sc = sfn(v[:n])
            out = []
            if f1a.size:
                out.append(-sc[f1a])
            if f0a.size:
                out.append(sc[f0a] - zeta)
            if need >= 1:
                stat = np.sort(sc[fra], kind="stable")[need - 1]
                out.append(np.array([-stat]))
            return np.concatenate(out) if out else np.zeros(0)
        if f1a.size or f0a.size or need >= 1:
            ineq.append(g)
    for ki, block in enumerate(prep.kkt_blocks):
        sfn = prep.kkt_scores[ki]
        shift = block.shift
        krank = int(math.ceil(block.alpha * block.rows.shape[0] - 1e-9))
        above = np.array([i for (b, i) in node.kkt_above if b == ki],
                         dtype=int)
        below = np.array([i for (b, i) in node.kkt_below if b == ki],
                         dtype=int)

        def g(v, sfn=sfn, above=above, below=below, qpos=n + ki,
              shift=shift, krank=krank):
            sc = sfn(v[:n])
            out = [np.array([-(np.sort(sc, kind="stable")[krank - 1]
                               + shift)])]
            if above.size:
                out.append(sc[above] - v[qpos])
            if below.size:
                out.append(v[qpos] - sc[below])
            return np.concatenate(out)
        ineq.append(g)

    obj = lambda v: prep.obj_fn(v[:n])
    res = _minimize(obj, ineq, eq, lo, hi, starts)
    if res is None or not res.feasible:
        return None
    return res


def _generic_relax(prep: _Prep, node: _Node, starts):
    """Fallback: binaries as boxed NLP variables, complementarity dropped."""
    nv, nb = prep.nv, prep.nb
    lo = np.concatenate([prep.lo, np.zeros(nb)])
    hi = np.concatenate([prep.hi, np.ones(nb)])
    for i in node.zero:
        lo[i] = hi[i] = 0.0
    for name, v in node.fixed.items():
        j = nv + prep.bidx[name]
        lo[j] = hi[j] = float(v)
    ineq, eq = [], []
    for c in prep.prog.constraints:
        f = _fn_of(c.expr)
        coeffs = [(nv + prep.bidx[nm], co) for nm, co in c.lin]

        def val(v, f=f, coeffs=coeffs):
            return f(v[:nv]) + sum(co * v[j] for j, co in coeffs)
        if c.rel == "<=":
            ineq.append(lambda v, val=val, r=c.rhs: r - val(v))
        elif c.rel == ">=":
            ineq.append(lambda v, val=val, r=c.rhs: val(v) - r)
        else:
            eq.append(lambda v, val=val, r=c.rhs: val(v) - r)
    for row in prep.prog.cardinality:
        idx = [nv + prep.bidx[nm] for nm in row.names]
        if row.rel == ">=":
            ineq.append(lambda v, idx=idx, r=row.value:
                        sum(v[j] for j in idx) - r)
        else:
            eq.append(lambda v, idx=idx, r=row.value:
                      sum(v[j] for j in idx) - r)
    obj = lambda v: prep.obj_fn(v[:nv])
    res = _minimize(obj, ineq, eq, lo, hi, starts)
    if res is None or not res.feasible:
        return None
    return res


def _candidate(prep: _Prep, xdec: np.ndarray, lp_full=None, lp_z=None):
    """Integral completion at a decision point; returns Solution-ish or None."""
    prog = prep.prog
    full = np.zeros(prep.nv)
    if lp_full is not None:
        full[:] = lp_full
    full[:prog.n_decision] = xdec
    binvals = {}
    if lp_z is not None and not prog.blocks:
        binvals = {nm: int(round(z))
                   for nm, z in zip(prog.binary_names, lp_z)}
    for bi, block in enumerate(prep.ind_blocks):
        sc = prep.ind_scores[bi](xdec)
        if isinstance(block, MaxBlock):
            cols = [ex.eval_rows(f, xdec, block.rows) for f in block.fns]
            stack = np.stack(cols)
            mx = stack.max(axis=0)
            arg = stack.argmax(axis=0)
            for i, mu_idx in enumerate(block.mu):
                full[mu_idx] = mx[i]
                for j, nm in enumerate(block.sigma[i]):
                    binvals[nm] = int(arg[i] == j)
            for i, nm in enumerate(block.binaries):
                binvals[nm] = int(mx[i] + block.shift <= block.zeta / 2)
        else:
            # scores inside [0, zeta) satisfy either branch of the big-M
            # rows within tolerance; select them so ranks are not lost to
            # one-ulp solver slack
            for i, nm in enumerate(block.binaries):
                binvals[nm] = int(sc[i] <= block.zeta / 2)
    for ki, block in enumerate(prep.kkt_blocks):
        sc = prep.kkt_scores[ki](xdec)
        comp = _kkt_completion(sc, block.alpha, block.shift)
        if comp is None:
            return None
        q, epv, emv, gamv, lamv, betv = comp
        full[block.q] = q
        for i in range(sc.size):
            full[block.ep[i]] = epv[i]
            full[block.em[i]] = emv[i]
            full[block.gam[i]] = gamv[i]
            full[block.lam[i]] = lamv[i]
            full[block.bet[i]] = betv[i]
    if check_program(prog, full, binvals, _FEAS_TOL):
        return None
    obj = prep.obj_fn(full)
    vars_map = {nm: float(full[i]) for i, nm in enumerate(prog.var_names)}
    return (obj, xdec.copy(), binvals, vars_map)


def _pick_branch(prep: _Prep, node: _Node, xdec, zvals=None):
    """Choose the next branch: (kind, payload) or None when nothing left."""
    # most fractional binary first
    best_name, best_gap = None, math.inf
    if zvals is not None:
        for j, nm in enumerate(prep.prog.binary_names):
            if nm in node.fixed or min(zvals[j], 1.0 - zvals[j]) <= 1e-7:
                continue
            gap = abs(zvals[j] - 0.5)
            if gap < best_gap:
                best_name, best_gap = nm, gap
    if best_name is not None:
        return ("bin", best_name)
    for bi, block in enumerate(prep.ind_blocks):
        sc = prep.ind_scores[bi](xdec)
        order = np.argsort(np.abs(sc), kind="stable")
        for i in order:
            nm = block.binaries[int(i)]
            if nm not in node.fixed:
                return ("bin", nm)
    for ki, block in enumerate(prep.kkt_blocks):
        decided = {i for (b, i) in node.kkt_above if b == ki}
        decided |= {i for (b, i) in node.kkt_below if b == ki}
        if len(decided) == len(block.ep):
            continue
        sc = prep.kkt_scores[ki](xdec)
        comp = _kkt_completion(sc, block.alpha, block.shift)
        qref = comp[0] if comp is not None else -block.shift
        order = np.argsort(np.abs(sc - qref), kind="stable")
        for i in order:
            if int(i) not in decided:
                return ("kkt", (ki, int(i)))
    return None


def _pair_branch(prep: _Prep, node: _Node, full_vals):
    prog = prep.prog
    worst, pick = _FEAS_TOL, None
    for a, b in prog.complementarity:
        ia, ib = prog.var_index(a), prog.var_index(b)
        if ia in node.zero or ib in node.zero:
            continue
        v = abs(full_vals[ia] * full_vals[ib])
        if v > worst:
            worst, pick = v, (ia, ib)
    return pick


def solve_bnb(prog: DetProgram, cfg: SolveConfig | None = None) -> Solution:
    """Best-first branch-and-bound over binaries and complementarity pairs."""
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    prep = _Prep(prog, cfg)
    n = prog.n_decision
    starts_root = halton_starts(prep.lo[:n], prep.hi[:n], cfg.multistart)

    incumbent = None
    inc_obj = math.inf

    def consider(cand):
        nonlocal incumbent, inc_obj
        if cand is not None and cand[0] < inc_obj - 1e-12:
            inc_obj, incumbent = cand[0], cand

    # prime the incumbent from the block structure before searching
    if prep.ind_blocks or prep.kkt_blocks:
        xprime = _prime_point(prep, starts_root, cfg)
        if xprime is not None:
            consider(_candidate(prep, xprime))

    counter = itertools.count()
    root = _Node({}, frozenset(), (), (), -math.inf, 0)
    heap = [(-math.inf, next(counter), root)]
    nodes = 0
    status = None

    while heap:
        if nodes >= cfg.node_limit or \
                time.perf_counter() - t0 > cfg.time_limit:
            status = "timeout"
            break
        bound, _, node = heapq.heappop(heap)
        if bound >= inc_obj - cfg.abs_gap:
            continue
        fixed = _propagate(prep, node.fixed)
        if fixed is None:
            continue
        node = replace(node, fixed=fixed)
        nodes += 1

        if prep.affine is not None:
            out = _lp_relax(prep, node)
            if out is None:
                continue
            xdec_full, lb, zvals = out
            if lb >= inc_obj - cfg.abs_gap:
                continue
            xdec = xdec_full[:n]
            consider(_candidate(prep, xdec, lp_full=xdec_full, lp_z=zvals))
            frac = [j for j, nm in enumerate(prog.binary_names)
                    if nm not in node.fixed
                    and min(zvals[j], 1 - zvals[j]) > 1e-7]
            if not frac:
                pick = _pair_branch(prep, node, xdec_full)
                if pick is None:
                    # integral and complementary: node solved exactly
                    continue
                ia, ib = pick
                for fix in (ia, ib):
                    child = replace(node, zero=node.zero | {fix},
                                    bound=lb, depth=node.depth + 1)
                    heapq.heappush(heap, (lb, next(counter), child))
                continue
            branch = ("bin", prog.binary_names[
                min(frac, key=lambda j: (abs(zvals[j] - 0.5), j))])
        else:
            if node.depth == 0:
                starts = starts_root
            else:
                starts = halton_starts(prep.lo[:n], prep.hi[:n],
                                       max(3, cfg.multistart // 4))
            if prep.pure_blocks:
                qpad = len(prep.kkt_blocks)
                if qpad:
                    starts = np.hstack([starts, np.full(
                        (starts.shape[0], qpad), -1.0)])
                res = _block_relax(prep, node, starts)
            else:
                pads = prep.nv - n + prep.nb
                stp = np.hstack([starts, np.full(
                    (starts.shape[0], pads), 0.5)]) if pads else starts
                res = _generic_relax(prep, node, stp)
            if res is None:
                continue
            lb = max(res.objective, node.bound)
            if lb >= inc_obj - cfg.abs_gap:
                continue
            xdec = res.x[:n]
            if prep.pure_blocks:
                consider(_candidate(prep, xdec))
                branch = _pick_branch(prep, node, xdec)
            else:
                full = res.x[:prep.nv]
                zv = res.x[prep.nv:]
                consider(_candidate(prep, xdec, lp_full=full, lp_z=zv))
                branch = _pick_branch(prep, node, xdec, zv)
                if branch is None:
                    pick = _pair_branch(prep, node, full)
                    if pick is None:
                        continue
                    ia, ib = pick
                    for fix in (ia, ib):
                        child = replace(node, zero=node.zero | {fix},
                                        bound=lb, depth=node.depth + 1)
                        heapq.heappush(heap, (lb, next(counter), child))
                    continue
            if branch is None:
                continue

        kind, payload = branch
        if kind == "bin":
            for v in (1, 0):
                child = replace(node, fixed={**node.fixed, payload: v},
                                bound=lb, depth=node.depth + 1)
                heapq.heappush(heap, (lb, next(counter), child))
        else:
            ki, i = payload
            above = replace(node, kkt_above=node.kkt_above + ((ki, i),),
                            bound=lb, depth=node.depth + 1)
            below = replace(node, kkt_below=node.kkt_below + ((ki, i),),
                            bound=lb, depth=node.depth + 1)
            heapq.heappush(heap, (lb, next(counter), above))
            heapq.heappush(heap, (lb, next(counter), below))

    wall = time.perf_counter() - t0
    if status == "timeout" and incumbent is not None and \
            all(b >= inc_obj - cfg.abs_gap for b, _, _ in heap):
        status = None
    if status is None:
        status = "optimal" if incumbent is not None else "infeasible"
    if incumbent is None:
        return Solution(status if status == "timeout" else "infeasible",
                        None, math.nan, {}, nodes, wall)
    obj, xdec, binvals, vars_map = incumbent
    sol = Solution(status, xdec, obj, binvals, nodes, wall, vars_map)
    bad = verify_solution(prog, sol)
    if bad:
        return Solution("infeasible", None, math.nan, {}, nodes, wall,
                        message="; ".join(bad[:3]))
    return sol


def _prime_point(prep: _Prep, starts, cfg: SolveConfig):
    """Pattern-search a chance-feasible decision to seed the incumbent."""
    score_fns = list(prep.ind_scores)
    ranks = [b.rank for b in prep.ind_blocks]
    for ki, b in enumerate(prep.kkt_blocks):
        sfn = prep.kkt_scores[ki]
        shift = b.shift
        score_fns.append(lambda x, sfn=sfn, shift=shift: sfn(x) + shift)
        ranks.append(int(math.ceil(b.alpha * b.rows.shape[0] - 1e-9)))
    ineq, eq = _split_rows(prep.det_rows)

    def penalized(x, mu):
        val = prep.obj_fn(x)
        for sfn, rank in zip(score_fns, ranks):
            qv = np.sort(sfn(x), kind="stable")[rank - 1]
            val += mu * max(0.0, qv) ** 2
        for g in ineq:
            val += mu * max(0.0, -g(x)) ** 2
        for g in eq:
            val += mu * g(x) ** 2
        return val

    def feasible(x):
        for sfn, rank in zip(score_fns, ranks):
            if np.sort(sfn(x), kind="stable")[rank - 1] > 1e-9:
                return False
        return all(g(x) >= -_LOCAL_TOL for g in ineq) and \
            all(abs(g(x)) <= _LOCAL_TOL for g in eq)

    n = prep.prog.n_decision
    lo, hi = prep.lo[:n], prep.hi[:n]
    mu = cfg.mu0
    best, best_val = None, math.inf
    x = min((s for s in starts[:, :n]),
            key=lambda s: penalized(np.asarray(s), mu))
    x = np.asarray(x, dtype=float)
    for _ in range(cfg.max_penalty_rounds):
        x = _compass(lambda v: penalized(v, mu), x, lo, hi)
        if feasible(x):
            val = prep.obj_fn(x)
            if val < best_val:
                best, best_val = x.copy(), val
            break
        mu *= cfg.mu_growth
    return best


def _compass(fn, x0, lo, hi, rel_step=0.25, min_rel=1e-7, budget=4000):
    """Deterministic coordinate pattern search inside a box."""
    span = np.where(np.isfinite(hi - lo), hi - lo, 20.0)
    span = np.maximum(span, 1e-9)
    x = np.clip(x0, lo, hi).astype(float)
    f = fn(x)
    step = rel_step
    evals = 0
    while step > min_rel and evals < budget:
        improved = False
        for d in range(x.size):
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[d] = min(max(trial[d] + sgn * step * span[d],
                                   lo[d]), hi[d])
                if trial[d] == x[d]:
                    continue
                ft = fn(trial)
                evals += 1
                if ft < f - 1e-12:
                    x, f = trial, ft
                    improved = True
                    break
        if not improved:
            step /= 2.0
    return x


# ---------------------------------------------------------------------------
# enumeration


def _card_patterns(row, names_in_row):
    k = len(names_in_row)
    out = []
    if row.rel == ">=":
        sizes = range(row.value, k + 1)
    else:
        sizes = [row.value]
    for size in sizes:
        for ones in itertools.combinations(range(k), size):
            pat = dict.fromkeys(names_in_row, 0)
            for j in ones:
                pat[names_in_row[j]] = 1
            out.append(pat)
    return out


def _repair_aux(prog: DetProgram, full: np.ndarray) -> bool:
    """Recompute mu and pinball auxiliaries from the decision part."""
    n = prog.n_decision
    for block in prog.blocks:
        if isinstance(block, MaxBlock) and block.mu:
            cols = [ex.eval_rows(f, full[:n], block.rows) for f in block.fns]
            mx = np.max(np.stack(cols), axis=0)
            for i, mu_idx in enumerate(block.mu):
                full[mu_idx] = mx[i]
    for block in prog.blocks:
        if not isinstance(block, KktBlock):
            continue
        sc = _kkt_score_fn(block, prog)(full[:n])
        comp = _kkt_completion(sc, block.alpha, block.shift)
        if comp is None:
            return False
        q, epv, emv, gamv, lamv, betv = comp
        full[block.q] = q
        for i in range(sc.size):
            full[block.ep[i]] = epv[i]
            full[block.em[i]] = emv[i]
            full[block.gam[i]] = gamv[i]
            full[block.lam[i]] = lamv[i]
            full[block.bet[i]] = betv[i]
    return True


def solve_enumerate(prog: DetProgram,
                    cfg: SolveConfig | None = None) -> Solution:
    """Exact solve by exhausting binary assignments (<= 20 binaries).

    Programs with pinball blocks carry no complementarity branching here:
    each subsolve enforces the equivalent sorted-score condition on the
    decision vector directly, and the auxiliaries are rebuilt afterwards.
    """
    cfg = cfg or SolveConfig()
    if len(prog.binary_names) > 20:
        raise ValueError(f"enumerate supports at most 20 binaries, "
                         f"got {len(prog.binary_names)}")
    t0 = time.perf_counter()
    in_rows = set()
    groups = []
    for row in prog.cardinality:
        groups.append(_card_patterns(row, list(row.names)))
        in_rows.update(row.names)
    loose = [n for n in prog.binary_names if n not in in_rows]
    for name in loose:
        groups.append([{name: 0}, {name: 1}])

    lo, hi = np.array(prog.var_lo), np.array(prog.var_hi)
    n = prog.n_decision
    starts = halton_starts(lo, hi, max(4, cfg.multistart // 2))
    kkt_blocks = [b for b in prog.blocks if isinstance(b, KktBlock)]
    kkt_cons = []
    for block in kkt_blocks:
        sfn = _kkt_score_fn(block, prog)
        a = block.alpha * block.rows.shape[0]
        rank = int(round(a)) if abs(a - round(a)) <= 1e-9 \
            else int(math.ceil(a))
        kkt_cons.append(lambda v, sfn=sfn, rank=rank, shift=block.shift:
                        -(np.sort(sfn(v[:n]), kind="stable")[rank - 1]
                          + shift))
    compl_rows = [] if kkt_blocks else \
        [(ex.mul(ex.x(prog.var_index(a)), ex.x(prog.var_index(b))),
          "=", 0.0) for a, b in prog.complementarity]

    best = None
    best_obj = math.inf
    tried = 0
    hit_limit = False
    for combo in itertools.product(*groups) if groups else [()]:
        if time.perf_counter() - t0 > cfg.time_limit:
            hit_limit = True
            break
        binvals = {}
        for pat in combo:
            binvals.update(pat)
        rows = [(c.expr, c.rel,
                 c.rhs - sum(co * binvals[nm] for nm, co in c.lin))
                for c in prog.constraints]
        rows += compl_rows
        tried += 1
        ineq, eq = _split_rows(rows)
        res = _minimize(_fn_of(prog.objective), ineq + kkt_cons, eq,
                        lo, hi, starts)
        if res is None or not res.feasible:
            continue
        if res.objective < best_obj - 1e-12:
            full = res.x.copy()
            if not _repair_aux(prog, full):
                continue
            sol_try = Solution("feasible", full[:n],
                               float(_fn_of(prog.objective)(full)),
                               binvals, tried, 0.0,
                               {nm: float(full[i]) for i, nm in
                                enumerate(prog.var_names)})
            if not verify_solution(prog, sol_try):
                best_obj, best = sol_try.objective, sol_try
    wall = time.perf_counter() - t0
    if best is None:
        return Solution("timeout" if hit_limit else "infeasible",
                        None, math.nan, {}, tried, wall)
    return replace(best, status="timeout" if hit_limit else "optimal",
                   nodes=tried, wall_time=wall)


# ---------------------------------------------------------------------------
# quantile penalty


def solve_quantile_penalty(problem, rows, level,
                           cfg: SolveConfig | None = None) -> Solution:
    """Direct pattern-search minimization under a rank-quantile penalty.

    Ignores the IR: scores are re-sorted at every evaluation.  The penalty
    weight escalates by cfg.mu_growth until the quantile constraint holds
    to 1e-9 or cfg.max_penalty_rounds is exhausted.  The reported
    objective is in minimization sense.
    """
    cfg = cfg or SolveConfig()
    t0 = time.perf_counter()
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    if getattr(level, "count", rows.shape[0]) != rows.shape[0]:
        raise ValueError("level/sample count mismatch")
    rank = level.rank
    chi = problem.chi
    obj_fn = _fn_of(problem.min_objective)
    fns = problem.chance_fns

    def quant(x):
        cols = [ex.eval_rows(f, x, rows) for f in fns]
        sc = cols[0] if len(cols) == 1 else np.max(np.stack(cols), axis=0)
        sc = np.where(np.isfinite(sc), sc, 1e15)
        return float(np.sort(sc, kind="stable")[rank - 1])

    det_ineq = [_fn_of(h) for h in problem.ineq]
    det_eq = [_fn_of(g) for g in problem.eq]

    def penalized(x, mu):
        val = obj_fn(x)
        val += mu * max(0.0, quant(x) + chi) ** 2
        for h in det_ineq:
            val += mu * max(0.0, h(x)) ** 2
        for g in det_eq:
            val += mu * g(x) ** 2
        return val

    def viol(x):
        worst = max(0.0, quant(x) + chi)
        for h in det_ineq:
            worst = max(worst, h(x))
        for g in det_eq:
            worst = max(worst, abs(g(x)))
        return worst

    lo, hi = problem.lower, problem.upper
    starts = halton_starts(lo, hi, cfg.multistart)
    mu = cfg.mu0
    x = min((s for s in starts), key=lambda s: penalized(s, mu))
    x = np.asarray(x, dtype=float)
    feasible = False
    for _ in range(cfg.max_penalty_rounds):
        if time.perf_counter() - t0 > cfg.time_limit:
            break
        x = _compass(lambda v: penalized(v, mu), x, lo, hi)
        if quant(x) <= -chi + 1e-9 and viol(x) <= max(_LOCAL_TOL, 1e-9):
            feasible = True
            break
        mu *= cfg.mu_growth
    wall = time.perf_counter() - t0
    vars_map = {f"x{i}": float(v) for i, v in enumerate(x)}
    if not feasible:
        return Solution("infeasible", x, float(obj_fn(x)), {}, 0, wall,
                        vars_map,
                        message=f"penalty schedule exhausted, worst "
                                f"violation {viol(x):.3g}")
    return Solution("feasible", x, float(obj_fn(x)), {}, 0, wall, vars_map)


# ---------------------------------------------------------------------------
# dispatchers


def solve_program(prog: DetProgram, cfg: SolveConfig | None = None) -> Solution:
    cfg = cfg or SolveConfig()
    if cfg.backend == "bnb":
        return solve_bnb(prog, cfg)
    if cfg.backend == "enumerate":
        return solve_enumerate(prog, cfg)
    raise ValueError("the penalty backend works on problems, not programs; "
                     "use solve_cco or solve_quantile_penalty")


def solve_cco(problem, rows, method: str = "cpp-mip",
              cfg: SolveConfig | None = None, robust: bool = False,
              omega: float | None = None, iota: float = 0.0) -> Solution:
    """Encode-and-solve convenience; objective is in the problem's sense.

    omega and iota apply only to method='saa' (violation budget and score
    tightening of the sample-average baseline).
    """
    cfg = cfg or SolveConfig()
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    if method == "penalty" or cfg.backend == "penalty":
        if method not in ("penalty", "cpp-mip"):
            raise ValueError("the penalty backend bypasses encodings; "
                             "call it with method='penalty'")
        from .encode import _make_level
        level = _make_level(problem, problem.delta, rows.shape[0], robust)
        sol = solve_quantile_penalty(problem, rows, level, cfg)
    elif method == "sa":
        from .baselines import encode_sa
        sol = solve_program(encode_sa(problem, rows), cfg)
    elif method == "saa":
        from .baselines import encode_saa
        if omega is None:
            raise ValueError("method 'saa' needs a violation budget omega")
        sol = solve_program(encode_saa(problem, rows, omega, iota), cfg)
    else:
        prog = build_program(problem, rows, method, robust)
        sol = solve_program(prog, cfg)
    if problem.sense == "max" and sol.x is not None:
        sol = replace(sol, objective=-sol.objective)
    return sol
