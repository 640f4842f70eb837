"""Repeated-trial experiment harness and the bundled case studies.

Each trial draws a fresh training set, solves the chance-constrained
problem with the configured method, and scores the solution on held-out
data: EC0 is the fraction of test samples satisfying the raw constraint,
C is the calibration-quantile bound certified from a separate calibration
draw, and ECC is the test fraction satisfying the constraint up to C.
Trials are deterministic functions of (master seed, trial index), so any
run can be replayed column by column.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .problem import CcoProblem, load_problem, make_sample_set, validate_sizes
from .quantile import certify, empirical_coverage
from .solve import SolveConfig, solve_cco

__all__ = [
    "BenchError", "CASES", "METHODS", "ExperimentConfig", "TrialReport",
    "analytic_oracle_case1", "case_defaults", "case_path", "emit_outputs",
    "load_case", "run_experiment", "run_trial", "summarize",
]

METHODS = ("cpp-mip", "cpp-kkt", "penalty", "sa", "saa",
           "rcpp-mip", "rcpp-kkt", "union", "max")
CASES = ("case1", "control", "portfolio", "jcco")

_HIST_METRICS = ("objective", "bound", "ec0", "ecc")
_HIST_BINS = 30


class BenchError(Exception):
    pass


def case_path(name: str) -> str:
    if name not in CASES:
        raise BenchError(f"unknown case {name!r}; bundled: {', '.join(CASES)}")
    return os.path.join(os.path.dirname(__file__), "problems", name + ".json")


def load_case(name: str) -> CcoProblem:
    return load_problem(case_path(name))


def case_defaults(name: str) -> dict:
    """Per-case experiment sizes; `trials_full` is the full-scale count."""
    table = {
        "case1": dict(train=500, calib=1000, test=1000, trials_full=300,
                      method="cpp-mip"),
        "control": dict(train=70, calib=200, test=1000, trials_full=100,
                        method="cpp-mip"),
        "portfolio": dict(train=80, calib=200, test=1000, trials_full=100,
                          method="rcpp-mip"),
        "jcco": dict(train=50, calib=300, test=1000, trials_full=100,
                     method="union"),
    }
    if name not in table:
        raise BenchError(f"unknown case {name!r}; bundled: {', '.join(CASES)}")
    return dict(table[name], trials=50)


@dataclass(frozen=True)
class ExperimentConfig:
    """Sizes, method, and seeding for one repeated-trial experiment."""

    trials: int = 50
    train: int = 50
    calib: int = 200
    test: int = 1000
    method: str = "cpp-mip"
    seed: int = 0
    omega: float | None = None
    iota: float = 0.0
    workers: int = 1
    solve: SolveConfig = field(default_factory=SolveConfig)
    out_dir: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise BenchError("trials must be >= 1")
        if self.test < 1:
            raise BenchError("test size must be >= 1")
        if min(self.train, self.calib) < 1:
            raise BenchError("train and calibration sizes must be >= 1")
        if self.workers < 1:
            raise BenchError("workers must be >= 1")
        if self.method not in METHODS:
            raise BenchError(f"unknown method {self.method!r}; "
                             f"known: {', '.join(METHODS)}")
        if self.method == "saa" and self.omega is None:
            raise BenchError("method 'saa' needs omega")


@dataclass(frozen=True)
class TrialReport:
    """One trial's outcome; floats are nan when the solve produced no point."""

    trial: int
    status: str
    x: tuple | None
    objective: float
    bound: float
    ec0: float
    ecc: float
    wall_time: float
    nodes: int
    message: str = ""

    @property
    def solved(self) -> bool:
        return self.x is not None


def _check_config(p: CcoProblem, cfg: ExperimentConfig) -> None:
    if p.distribution is None:
        raise BenchError("problem has no sampling distribution")
    robust = cfg.method.startswith("rcpp")
    bad = validate_sizes(p, cfg.train, cfg.calib, robust)
    if bad:
        raise BenchError("; ".join(bad))


def run_trial(p: CcoProblem, cfg: ExperimentConfig, j: int) -> TrialReport:
    """Sample, solve, certify, and score trial j; never raises on solve."""
    ss = make_sample_set(p.distribution, cfg.train, cfg.calib, cfg.test,
                         cfg.seed, stream=j,
                         test_dist=p.test_distribution)
    robust = cfg.method.startswith("rcpp")
    t0 = time.perf_counter()
    try:
        sol = solve_cco(p, ss.train, method=cfg.method, cfg=cfg.solve,
                        omega=cfg.omega, iota=cfg.iota)
    except Exception as err:
        wall = time.perf_counter() - t0
        return TrialReport(j, "error", None, math.nan, math.nan, math.nan,
                           math.nan, wall, 0, message=str(err))
    wall = time.perf_counter() - t0
    if sol.x is None:
        return TrialReport(j, sol.status, None, math.nan, math.nan,
                           math.nan, math.nan, wall, sol.nodes, sol.message)
    cert = certify(sol.x, p, ss.calib, robust=robust,
                   joint="union" if cfg.method == "union" else "max")
    ec0 = empirical_coverage(sol.x, p, ss.test, 0.0)
    ecc = empirical_coverage(sol.x, p, ss.test, cert.bound)
    return TrialReport(j, sol.status, tuple(float(v) for v in sol.x),
                       float(sol.objective), float(cert.bound), ec0, ecc,
                       wall, sol.nodes, sol.message)


def run_experiment(p: CcoProblem, cfg: ExperimentConfig):
    """All trials in index order plus their summary; writes nothing."""
    _check_config(p, cfg)
    idx = range(cfg.trials)
    if cfg.workers == 1:
        reports = [run_trial(p, cfg, j) for j in idx]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(lambda j: run_trial(p, cfg, j), idx))
    reports.sort(key=lambda r: r.trial)
    return reports, summarize(p, cfg, reports)


def _stats(vals) -> dict:
    vals = [v for v in vals if math.isfinite(v)]
    if not vals:
        return {"mean": None, "std": None}
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals))}


def summarize(p: CcoProblem, cfg: ExperimentConfig, reports) -> dict:
    solved = [r for r in reports if r.solved]
    out = {
        "problem": p.name,
        "method": cfg.method,
        "trials": cfg.trials,
        "sizes": {"train": cfg.train, "calib": cfg.calib, "test": cfg.test},
        "seed": cfg.seed,
        "solved": len(solved),
        "timeouts": sum(r.status == "timeout" for r in reports),
        "infeasible": sum(r.status == "infeasible" for r in reports),
        "errors": sum(r.status == "error" for r in reports),
    }
    for metric in _HIST_METRICS:
        out[metric] = _stats(getattr(r, metric) for r in solved)
    walls = [r.wall_time for r in reports]
    out["solve_seconds"] = {
        "mean": float(np.mean(walls)) if walls else None,
        "max": float(np.max(walls)) if walls else None,
    }
    return out


def analytic_oracle_case1(delta: float):
    """Population optimum of the bundled exponential case study.

    The chance constraint caps the decision at -ln(30 ln(1/delta)); the
    objective x^3 exp(x) falls until its interior stationary point at -3,
    so the optimum is whichever of the two is smaller.  Returns (x*, J*).
    """
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    x = min(-math.log(30.0 * math.log(1.0 / delta)), -3.0)
    return x, x ** 3 * math.exp(x)


def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    if not math.isfinite(v):
        return ""
    return repr(v)


def emit_outputs(reports, summary, out_dir: str, svg: bool = False) -> list:
    """Write trials.csv, summary.json, and 30-bin histogram tables.

    trials.csv carries only seed-determined columns (no wall times), so a
    re-run with the same master seed reproduces it byte for byte; timing
    statistics live in summary.json.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = []

    nx = max((len(r.x) for r in reports if r.x is not None), default=0)
    tpath = os.path.join(out_dir, "trials.csv")
    with open(tpath, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "status", "objective", "bound", "ec0", "ecc",
                    "nodes"] + [f"x{i}" for i in range(nx)])
        for r in reports:
            xs = [_fmt(r.x[i]) if r.x is not None and i < len(r.x) else ""
                  for i in range(nx)]
            w.writerow([r.trial, r.status, _fmt(r.objective), _fmt(r.bound),
                        _fmt(r.ec0), _fmt(r.ecc), r.nodes] + xs)
    paths.append(tpath)

    spath = os.path.join(out_dir, "summary.json")
    with open(spath, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    paths.append(spath)

    for metric in _HIST_METRICS:
        vals = [getattr(r, metric) for r in reports
                if r.solved and math.isfinite(getattr(r, metric))]
        if not vals:
            continue
        lo, hi = min(vals), max(vals)
        if lo == hi:
            lo, hi = lo - 0.5, hi + 0.5
        counts, edges = np.histogram(vals, bins=_HIST_BINS, range=(lo, hi))
        hpath = os.path.join(out_dir, f"hist_{metric}.csv")
        with open(hpath, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_lo", "bin_hi", "count"])
            for i, c in enumerate(counts):
                w.writerow([_fmt(edges[i]), _fmt(edges[i + 1]), int(c)])
        paths.append(hpath)
        if svg:
            gpath = os.path.join(out_dir, f"hist_{metric}.svg")
            with open(gpath, "w") as fh:
                fh.write(_svg_hist(edges, counts, metric))
            paths.append(gpath)
    return paths


def _svg_hist(edges, counts, title: str) -> str:
    """Minimal self-contained bar chart."""
    w, h, pad = 640, 320, 42
    top = max(int(counts.max()), 1)
    bw = (w - 2 * pad) / len(counts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect width="{w}" height="{h}" fill="white"/>',
        f'<text x="{w / 2:.1f}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    for i, c in enumerate(counts):
        bh = (h - 2 * pad) * (int(c) / top)
        x = pad + i * bw
        y = h - pad - bh
        parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{bw * 0.92:.2f}" '
                     f'height="{bh:.2f}" fill="#4878a8"/>')
    axis = (f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" '
            'stroke="black"/>')
    parts.append(axis)
    for frac, val in ((0.0, edges[0]), (1.0, edges[-1])):
        x = pad + frac * (w - 2 * pad)
        parts.append(f'<text x="{x:.1f}" y="{h - pad + 16}" '
                     'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{val:.4g}</text>')
    parts.append(f'<text x="{pad - 6}" y="{pad + 4}" text-anchor="end" '
                 f'font-family="sans-serif" font-size="11">{top}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
