"""Problem instances, sample distributions, and dataset plumbing.

A CcoProblem is the container every other module consumes: an objective
over a box-bounded decision vector x, one or more sample-dependent
constraint functions whose joint satisfaction must hold with probability
at least 1 - delta, plus deterministic inequality and equality side
constraints.  Instances are loaded from a small JSON format (see
load_problem) or built directly.

Sampling is deliberately low-level: a counter-based Philox generator keyed
by (seed, stream) produces uniforms, and every distribution is realized by
an explicit inverse transform written out below.  That makes rows
reproducible bit for bit from the documented algorithm alone, independent
of library convenience-method internals:

    uniform     u ~ [0, 1) from Generator.random, clamped below at 2^-54
    exponential -mean * log1p(-u)
    laplace     loc + scale*ln(2u)           if u < 1/2
                loc - scale*ln(2(1-u))       otherwise
    normal      mean + sqrt(variance) * ndtri(u)
    student t   loc + scale * stdtrit(dof, u)

The normal distribution is parameterized by mean and VARIANCE, not
standard deviation.  Distinct trials should use distinct streams under a
fixed master seed.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri, stdtrit

from . import expr as ex
from .quantile import ceil_guard

__all__ = [
    "ProblemError",
    "Distribution",
    "exponential_mean",
    "laplace",
    "normal",
    "student_t",
    "product_of",
    "sample",
    "SampleSet",
    "make_sample_set",
    "CcoProblem",
    "validate_sizes",
    "load_problem",
]


class ProblemError(ValueError):
    """Malformed problem document or invalid instance data."""


_SCALAR_KINDS = ("exponential_mean", "laplace", "normal", "student_t")


@dataclass(frozen=True)
class Distribution:
    """One sample-vector distribution.

    Scalar kinds fill `dim` i.i.d. coordinates; kind "product" concatenates
    independent component distributions and dim is derived.
    """

    kind: str
    params: tuple = ()
    dim: int = 1
    components: tuple = ()

    def __post_init__(self):
        if self.kind == "product":
            if len(self.components) < 1:
                raise ProblemError("product distribution needs components")
            for c in self.components:
                if not isinstance(c, Distribution) or c.kind == "product":
                    raise ProblemError("product components must be scalar "
                                       "distributions")
            object.__setattr__(self, "dim",
                               sum(c.dim for c in self.components))
            return
        if self.kind not in _SCALAR_KINDS:
            raise ProblemError(f"unknown distribution kind {self.kind!r}")
        if self.dim < 1:
            raise ProblemError("dim must be positive")
        p = self.params
        if self.kind == "exponential_mean":
            if len(p) != 1 or not p[0] > 0:
                raise ProblemError("exponential_mean needs mean > 0")
        elif self.kind == "laplace":
            if len(p) != 2 or not p[1] > 0:
                raise ProblemError("laplace needs (location, scale > 0)")
        elif self.kind == "normal":
            if len(p) != 2 or not p[1] > 0:
                raise ProblemError("normal needs (mean, variance > 0)")
        elif self.kind == "student_t":
            if len(p) != 3 or not p[1] > 0 or not p[2] > 0:
                raise ProblemError("student_t needs (location, scale > 0, "
                                   "dof > 0)")


def exponential_mean(mean: float, dim: int = 1) -> Distribution:
    return Distribution("exponential_mean", (float(mean),), dim)


def laplace(location: float, scale: float, dim: int = 1) -> Distribution:
    return Distribution("laplace", (float(location), float(scale)), dim)


def normal(mean: float, variance: float, dim: int = 1) -> Distribution:
    return Distribution("normal", (float(mean), float(variance)), dim)


def student_t(location: float, scale: float, dof: float,
              dim: int = 1) -> Distribution:
    return Distribution("student_t",
                        (float(location), float(scale), float(dof)), dim)


def product_of(*components: Distribution) -> Distribution:
    return Distribution("product", components=tuple(components))


def _transform(dist: Distribution, u: np.ndarray) -> np.ndarray:
    u = np.maximum(u, 2.0 ** -54)
    if dist.kind == "exponential_mean":
        return -dist.params[0] * np.log1p(-u)
    if dist.kind == "laplace":
        loc, sc = dist.params
        low = loc + sc * np.log(2.0 * u)
        high = loc - sc * np.log(2.0 * (1.0 - u))
        return np.where(u < 0.5, low, high)
    if dist.kind == "normal":
        mean, var = dist.params
        return mean + math.sqrt(var) * ndtri(u)
    if dist.kind == "student_t":
        loc, sc, dof = dist.params
        return loc + sc * stdtrit(dof, u)
    raise ProblemError(f"cannot transform kind {dist.kind!r}")


def _draw(dist: Distribution, count: int, gen: np.random.Generator) -> np.ndarray:
    if dist.kind == "product":
        cols = [_draw(c, count, gen) for c in dist.components]
        return np.concatenate(cols, axis=1)
    u = gen.random((count, dist.dim))
    return _transform(dist, u)


def _generator(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def sample(dist: Distribution, count: int, seed: int,
           stream: int = 0) -> np.ndarray:
    """Draw `count` i.i.d. rows, shape (count, dist.dim).

    Deterministic in (dist, count, seed, stream); rows for a given prefix
    count are a prefix of the rows for a larger count only within one
    generator, so always draw the full matrix you need in one call.
    """
    if count < 1:
        raise ProblemError("count must be positive")
    return _draw(dist, count, _generator(seed, stream))


@dataclass(frozen=True)
class SampleSet:
    """Train/calibration/test rows stacked as one matrix.

    Index ranges: train [0, K), calibration [K, K+L), test [K+L, K+L+V).
    """

    K: int
    L: int
    V: int
    rows: np.ndarray
    seed: int

    def __post_init__(self):
        if min(self.K, self.L, self.V) < 0:
            raise ProblemError("negative partition size")
        r = np.asarray(self.rows, dtype=float)
        if r.ndim != 2 or r.shape[0] != self.K + self.L + self.V:
            raise ProblemError(
                f"rows must be ({self.K + self.L + self.V}, d), "
                f"got {r.shape}")
        object.__setattr__(self, "rows", r)

    @property
    def train(self) -> np.ndarray:
        return self.rows[:self.K]

    @property
    def calib(self) -> np.ndarray:
        return self.rows[self.K:self.K + self.L]

    @property
    def test(self) -> np.ndarray:
        return self.rows[self.K + self.L:]


def make_sample_set(dist: Distribution, K: int, L: int, V: int, seed: int,
                    stream: int = 0,
                    test_dist: Distribution | None = None) -> SampleSet:
    """Sample a full dataset; test rows may come from a shifted distribution.

    All three blocks consume one generator in order, so the train and
    calibration rows do not depend on whether a test block follows.
    """
    gen = _generator(seed, stream)
    parts = []
    if K + L > 0:
        parts.append(_draw(dist, K + L, gen))
    if V > 0:
        td = dist if test_dist is None else test_dist
        if td.dim != dist.dim:
            raise ProblemError("test distribution dimension mismatch")
        parts.append(_draw(td, V, gen))
    rows = np.concatenate(parts, axis=0) if parts else np.zeros((0, dist.dim))
    return SampleSet(K, L, V, rows, seed)


def _check_indices(name: str, e: ex.Expr, n: int, d: int):
    mx, my = ex.max_indices(e)
    if mx >= n:
        raise ProblemError(f"{name} references x[{mx}] but n={n}")
    if my >= d:
        raise ProblemError(f"{name} references y[{my}] but d={d}")


@dataclass(frozen=True)
class CcoProblem:
    """A box-bounded chance-constrained program.

    chance_fns of length s > 1 means all s constraints must hold jointly
    with probability 1 - delta.  epsilon/divergence, when set, describe the
    anticipated distribution shift between sampling and deployment.  chi
    tightens every chance constraint to f <= -chi at solve time.
    """

    n: int
    d: int
    objective: ex.Expr
    sense: str
    chance_fns: tuple
    delta: float
    ineq: tuple = ()
    eq: tuple = ()
    var_bounds: tuple = ()
    epsilon: float | None = None
    divergence: str = "kl"
    chi: float = 0.0
    distribution: Distribution | None = None
    test_distribution: Distribution | None = None
    name: str = ""

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise ProblemError("n and d must be positive")
        if self.sense not in ("min", "max"):
            raise ProblemError(f"sense must be 'min' or 'max', "
                               f"got {self.sense!r}")
        if not 0.0 < self.delta < 1.0:
            raise ProblemError("delta must lie in (0, 1)")
        if len(self.chance_fns) < 1:
            raise ProblemError("at least one chance constraint is required")
        if self.chi < 0.0:
            raise ProblemError("chi must be nonnegative")
        if self.epsilon is not None and self.epsilon < 0.0:
            raise ProblemError("epsilon must be nonnegative")
        if self.divergence not in ("kl", "tv"):
            raise ProblemError(f"unknown divergence {self.divergence!r}")
        vb = tuple((float(lo), float(hi)) for lo, hi in self.var_bounds)
        if len(vb) != self.n:
            raise ProblemError(f"var_bounds must have {self.n} entries")
        for i, (lo, hi) in enumerate(vb):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ProblemError(f"bounds for x[{i}] must be a finite "
                                   f"interval, got [{lo}, {hi}]")
        object.__setattr__(self, "var_bounds", vb)
        object.__setattr__(self, "chance_fns", tuple(self.chance_fns))
        object.__setattr__(self, "ineq", tuple(self.ineq))
        object.__setattr__(self, "eq", tuple(self.eq))
        _check_indices("objective", self.objective, self.n, self.d)
        mx, my = ex.max_indices(self.objective)
        if my >= 0:
            raise ProblemError("objective must not depend on the sample")
        for j, f in enumerate(self.chance_fns):
            _check_indices(f"chance[{j}]", f, self.n, self.d)
        for j, h in enumerate(self.ineq):
            _check_indices(f"ineq[{j}]", h, self.n, self.d)
            if ex.max_indices(h)[1] >= 0:
                raise ProblemError(f"ineq[{j}] must not depend on the sample")
        for j, g in enumerate(self.eq):
            _check_indices(f"eq[{j}]", g, self.n, self.d)
            if ex.max_indices(g)[1] >= 0:
                raise ProblemError(f"eq[{j}] must not depend on the sample")
        if self.distribution is not None and self.distribution.dim != self.d:
            raise ProblemError(
                f"distribution dimension {self.distribution.dim} != d={self.d}")
        if (self.test_distribution is not None
                and self.test_distribution.dim != self.d):
            raise ProblemError("test distribution dimension mismatch")

    @property
    def lower(self) -> np.ndarray:
        return np.array([b[0] for b in self.var_bounds])

    @property
    def upper(self) -> np.ndarray:
        return np.array([b[1] for b in self.var_bounds])

    @property
    def min_objective(self) -> ex.Expr:
        """Objective in minimization sense (negated when sense is max)."""
        if self.sense == "max":
            return ex.neg(self.objective)
        return self.objective


def validate_sizes(problem: CcoProblem, K: int, L: int,
                   robust: bool = False) -> list[str]:
    """Check K and L against the admissible minimum; empty list means ok."""
    if robust:
        from .robust import Divergence, min_count
        if problem.epsilon is None:
            return ["robust mode requires the problem to set epsilon"]
        div = Divergence(problem.divergence, problem.epsilon)
        try:
            need = min_count(problem.delta, div)
        except ValueError as err:
            return [str(err)]
    else:
        need = ceil_guard((1.0 - problem.delta) / problem.delta)
    out = []
    if K < need:
        out.append(f"training size K={K} below minimal admissible {need}")
    if L < need:
        out.append(f"calibration size L={L} below minimal admissible {need}")
    return out


def _parse_dist(doc, where: str) -> Distribution:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ProblemError(f"{where}: distribution must be an object "
                           "with a 'kind'")
    kind = doc["kind"]
    try:
        if kind == "product":
            comps = [_parse_dist(c, where) for c in doc.get("components", [])]
            return product_of(*comps)
        dim = int(doc.get("dim", 1))
        if kind == "exponential_mean":
            return exponential_mean(doc["mean"], dim)
        if kind == "laplace":
            return laplace(doc["location"], doc["scale"], dim)
        if kind == "normal":
            return normal(doc["mean"], doc["variance"], dim)
        if kind == "student_t":
            return student_t(doc["location"], doc["scale"], doc["dof"], dim)
    except KeyError as err:
        raise ProblemError(f"{where}: missing distribution field {err}") from err
    raise ProblemError(f"{where}: unknown distribution kind {kind!r}")


def _parse_exprs(texts, n: int, d: int, where: str) -> tuple:
    if isinstance(texts, str):
        texts = [texts]
    out = []
    for i, t in enumerate(texts):
        try:
            out.append(ex.parse(t, n=n, d=d))
        except ex.ParseError as err:
            raise ProblemError(f"{where}[{i}]: {err}") from err
    return tuple(out)


def load_problem(source) -> CcoProblem:
    """Build a validated CcoProblem from a JSON file path, dict, or str.

    Document fields: n, d, sense, objective, chance, delta, ineq, eq,
    bounds, distribution, and optionally epsilon, divergence, chi,
    test_distribution, name.  Function fields are expression strings.
    """
    if isinstance(source, dict):
        doc = source
    elif isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as err:
                raise ProblemError(f"{source}: not valid JSON ({err})") from err
    elif isinstance(source, str):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as err:
            raise ProblemError(f"not a file path and not valid JSON ({err})") \
                from err
    else:
        raise ProblemError(f"cannot load problem from {type(source).__name__}")
    if not isinstance(doc, dict):
        raise ProblemError("problem document must be a JSON object")

    required = ("n", "d", "sense", "objective", "chance", "delta", "bounds")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ProblemError(f"missing required fields: {', '.join(missing)}")

    n, d = int(doc["n"]), int(doc["d"])
    try:
        objective = ex.parse(doc["objective"], n=n, d=d)
    except ex.ParseError as err:
        raise ProblemError(f"objective: {err}") from err
    chance = _parse_exprs(doc["chance"], n, d, "chance")
    ineq = _parse_exprs(doc.get("ineq", []), n, d, "ineq")
    eq = _parse_exprs(doc.get("eq", []), n, d, "eq")

    bounds = doc["bounds"]
    if (not isinstance(bounds, list)
            or any(not isinstance(b, list) or len(b) != 2 for b in bounds)):
        raise ProblemError("bounds must be a list of [lo, hi] pairs")

    dist = None
    if "distribution" in doc:
        dist = _parse_dist(doc["distribution"], "distribution")
    test_dist = None
    if "test_distribution" in doc:
        test_dist = _parse_dist(doc["test_distribution"], "test_distribution")

    eps = doc.get("epsilon")
    return CcoProblem(
        n=n, d=d, objective=objective, sense=str(doc["sense"]),
        chance_fns=chance, delta=float(doc["delta"]), ineq=ineq, eq=eq,
        var_bounds=tuple((b[0], b[1]) for b in bounds),
        epsilon=None if eps is None else float(eps),
        divergence=str(doc.get("divergence", "kl")),
        chi=float(doc.get("chi", 0.0)),
        distribution=dist, test_distribution=test_dist,
        name=str(doc.get("name", "")),
    )
