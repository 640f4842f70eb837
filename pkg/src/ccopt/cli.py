"""Command-line front end.

Machine-readable JSON goes to stdout, human-readable tables and progress
notes to stderr, so pipelines can consume results directly.  Exit codes:
0 solved, 2 infeasible, 3 timeout, 4 bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .baselines import encode_sa, encode_saa
from .bench import (BenchError, CASES, METHODS, ExperimentConfig,
                    case_defaults, case_path, emit_outputs, run_experiment)
from .encode import EncodeError, build_program, program_to_dict
from .problem import (CcoProblem, ProblemError, load_problem,
                      make_sample_set, sample)
from .quantile import InfeasibleLevelError, certify
from .solve import SolveConfig, solve_cco

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_TIMEOUT = 3
EXIT_INPUT = 4

_INPUT_ERRORS = (ProblemError, EncodeError, BenchError,
                 InfeasibleLevelError, ValueError, OSError)


def _load(spec: str, args) -> CcoProblem:
    """Problem from a JSON path or a bundled case name, with CLI overrides."""
    if os.path.exists(spec):
        p = load_problem(spec)
    elif spec in CASES:
        p = load_problem(case_path(spec))
    else:
        raise ProblemError(f"no such file or bundled case: {spec}")
    over = {}
    if getattr(args, "epsilon", None) is not None:
        over["epsilon"] = args.epsilon
    if getattr(args, "divergence", None) is not None:
        over["divergence"] = args.divergence
    return replace(p, **over) if over else p


def _method(name: str) -> str:
    if name not in METHODS:
        raise BenchError(f"unknown method {name!r}; "
                         f"known: {', '.join(METHODS)}")
    return name


def _solve_config(args) -> SolveConfig:
    return SolveConfig(time_limit=args.time_limit,
                       abs_gap=getattr(args, "gap", 1e-6),
                       multistart=getattr(args, "multistart", 20),
                       backend=getattr(args, "backend", "bnb"))


def _cert_dict(cert) -> dict:
    lvl = cert.level
    out = {
        "bound": cert.bound,
        "rank": lvl.rank,
        "count": lvl.count,
        "delta": lvl.delta,
        "alpha": getattr(lvl, "alpha", None),
        "beta_l": cert.beta_l,
        "meets_coverage_prob": cert.meets_coverage_prob,
    }
    if hasattr(lvl, "divergence"):
        out["divergence"] = lvl.divergence.kind
        out["epsilon"] = lvl.divergence.epsilon
        out["delta_tilde"] = lvl.delta_tilde
    if cert.per_constraint is not None:
        out["per_constraint"] = list(cert.per_constraint)
    return out


def _exit_for(status: str) -> int:
    if status in ("optimal", "feasible"):
        return EXIT_OK
    if status == "timeout":
        return EXIT_TIMEOUT
    return EXIT_INFEASIBLE


def _need_dist(p: CcoProblem):
    if p.distribution is None:
        raise ProblemError("problem has no sampling distribution")


def cmd_solve(args) -> int:
    p = _load(args.problem, args)
    method = _method(args.method)
    _need_dist(p)
    rows = sample(p.distribution, args.k, args.seed, stream=0)
    sol = solve_cco(p, rows, method=method, cfg=_solve_config(args),
                    omega=args.omega, iota=args.iota)
    out = {
        "problem": p.name,
        "method": method,
        "status": sol.status,
        "objective": None if sol.x is None else sol.objective,
        "x": None if sol.x is None else [float(v) for v in sol.x],
        "nodes": sol.nodes,
        "wall_time": sol.wall_time,
    }
    if sol.message:
        out["message"] = sol.message
    if args.certify and sol.x is not None:
        calib = sample(p.distribution, args.l, args.seed, stream=1)
        cert = certify(np.array(sol.x), p, calib,
                       robust=method.startswith("rcpp"),
                       joint="union" if method == "union" else "max")
        out["certificate"] = _cert_dict(cert)
    json.dump(out, sys.stdout, indent=2)
    print()
    print(f"{p.name or args.problem}: {sol.status}, J = {out['objective']}",
          file=sys.stderr)
    return _exit_for(sol.status)


def cmd_certify(args) -> int:
    p = _load(args.problem, args)
    _need_dist(p)
    try:
        x = np.array([float(t) for t in args.x.split(",")])
    except ValueError as err:
        raise ProblemError(f"--x must be comma-separated numbers: {err}")
    if x.size != p.n:
        raise ProblemError(f"--x has {x.size} components, problem has {p.n}")
    calib = sample(p.distribution, args.l, args.seed, stream=1)
    cert = certify(x, p, calib, robust=args.robust, joint=args.joint)
    json.dump({"problem": p.name, "x": [float(v) for v in x],
               "certificate": _cert_dict(cert)}, sys.stdout, indent=2)
    print()
    return EXIT_OK


def _experiment_config(args, p: CcoProblem, method: str) -> ExperimentConfig:
    base = os.path.splitext(os.path.basename(args.problem))[0]
    if base in CASES:
        d = case_defaults(base)
    else:
        d = dict(train=50, calib=200, test=1000, trials=50, trials_full=300,
                 method="cpp-mip")
    trials = args.n if args.n is not None else (
        d["trials_full"] if args.paper_scale else d["trials"])
    return ExperimentConfig(
        trials=trials,
        train=args.k if args.k is not None else d["train"],
        calib=args.l if args.l is not None else d["calib"],
        test=args.v if args.v is not None else d["test"],
        method=method, seed=args.seed, omega=args.omega, iota=args.iota,
        workers=args.threads, solve=_solve_config(args))


def _summary_table(summaries) -> str:
    cols = [s["method"] for s in summaries]
    rows = [("J mean", "objective"), ("C mean", "bound"),
            ("EC0 mean", "ec0"), ("ECC mean", "ecc")]
    width = max(10, *(len(c) + 2 for c in cols))
    lines = [" " * 10 + "".join(c.rjust(width) for c in cols)]
    for label, key in rows:
        cells = []
        for s in summaries:
            v = s[key]["mean"]
            cells.append(("-" if v is None else f"{v:.4f}").rjust(width))
        lines.append(label.ljust(10) + "".join(cells))
    for label, key in (("timeouts", "timeouts"), ("errors", "errors")):
        lines.append(label.ljust(10) + "".join(
            str(s[key]).rjust(width) for s in summaries))
    return "\n".join(lines)


def cmd_experiment(args) -> int:
    p = _load(args.problem, args)
    method = _method(args.method) if args.method else None
    if method is None:
        base = os.path.splitext(os.path.basename(args.problem))[0]
        method = case_defaults(base)["method"] if base in CASES else "cpp-mip"
    cfg = _experiment_config(args, p, method)
    reports, summary = run_experiment(p, cfg)
    out_dir = args.output_dir or f"{p.name or 'experiment'}-{method}-out"
    paths = emit_outputs(reports, summary, out_dir, svg=args.svg)
    summary = dict(summary, output_dir=out_dir)
    json.dump(summary, sys.stdout, indent=2)
    print()
    print(_summary_table([summary]), file=sys.stderr)
    print(f"wrote {len(paths)} files to {out_dir}", file=sys.stderr)
    if summary["solved"] > 0:
        return EXIT_OK
    if summary["timeouts"] > 0:
        return EXIT_TIMEOUT
    return EXIT_INFEASIBLE


def cmd_compare(args) -> int:
    p = _load(args.problem, args)
    methods = [_method(m.strip()) for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise BenchError("--methods must name at least one method")
    if args.verbose:
        _need_dist(p)
        for j in range(min(args.n or 3, 3)):
            ss = make_sample_set(p.distribution, args.k or 50, args.l or 200,
                                 args.v or 1000, args.seed, stream=j,
                                 test_dist=p.test_distribution)
            digest = hashlib.sha256(ss.rows.tobytes()).hexdigest()[:16]
            print(f"trial {j} rows sha256 {digest} (shared by all methods)",
                  file=sys.stderr)
    summaries = []
    for m in methods:
        cfg = _experiment_config(args, p, m)
        _, summary = run_experiment(p, cfg)
        summaries.append(summary)
    json.dump(summaries, sys.stdout, indent=2)
    print()
    print(_summary_table(summaries), file=sys.stderr)
    return EXIT_OK


def cmd_emit_ir(args) -> int:
    p = _load(args.problem, args)
    method = _method(args.method)
    _need_dist(p)
    rows = sample(p.distribution, args.k, args.seed, stream=0)
    if method == "penalty":
        raise BenchError("the penalty backend solves the problem directly; "
                         "there is no encoded program to emit")
    if method == "sa":
        prog = encode_sa(p, rows)
    elif method == "saa":
        if args.omega is None:
            raise BenchError("method 'saa' needs --omega")
        prog = encode_saa(p, rows, args.omega, args.iota)
    else:
        prog = build_program(p, rows, method)
    json.dump(program_to_dict(prog), sys.stdout, indent=2)
    print()
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; that code means infeasible here."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _parser() -> argparse.ArgumentParser:
    ap = _Parser(
        prog="ccopt",
        description="sample-based chance-constrained optimization")
    ap.add_argument("--seed", type=int, default=0, help="master seed")
    ap.add_argument("--time-limit", type=float, default=100.0,
                    help="solver wall-clock limit per solve (s)")
    ap.add_argument("--threads", type=int, default=1,
                    help="parallel trial workers")
    ap.add_argument("--output-dir", default=None)
    sub = ap.add_subparsers(dest="command", required=True)

    def common_solver(sp):
        sp.add_argument("--backend", choices=("bnb", "enumerate", "penalty"),
                        default="bnb")
        sp.add_argument("--gap", type=float, default=1e-6,
                        help="absolute optimality gap")
        sp.add_argument("--multistart", type=int, default=20)
        sp.add_argument("--omega", type=float, default=None,
                        help="violation budget (saa only)")
        sp.add_argument("--iota", type=float, default=0.0,
                        help="score margin (saa only)")
        sp.add_argument("--epsilon", type=float, default=None,
                        help="override the problem's divergence radius")
        sp.add_argument("--divergence", choices=("kl", "tv"), default=None)

    s = sub.add_parser("solve", help="one solve on freshly sampled data")
    s.add_argument("problem")
    s.add_argument("--method", default="cpp-mip")
    s.add_argument("--k", type=int, default=50, help="training samples")
    s.add_argument("--l", type=int, default=200, help="calibration samples")
    s.add_argument("--certify", action="store_true",
                   help="also certify with a fresh calibration draw")
    common_solver(s)

    c = sub.add_parser("certify", help="certify a fixed decision")
    c.add_argument("problem")
    c.add_argument("--x", required=True, help="comma-separated decision")
    c.add_argument("--l", type=int, default=200)
    c.add_argument("--robust", action="store_true")
    c.add_argument("--joint", choices=("max", "union"), default="max")
    c.add_argument("--epsilon", type=float, default=None)
    c.add_argument("--divergence", choices=("kl", "tv"), default=None)

    e = sub.add_parser("experiment", help="repeated-trial evaluation")
    e.add_argument("problem")
    e.add_argument("--method", default=None)
    e.add_argument("--k", type=int, default=None)
    e.add_argument("--l", type=int, default=None)
    e.add_argument("--v", type=int, default=None)
    e.add_argument("--n", type=int, default=None, help="trial count")
    e.add_argument("--paper-scale", action="store_true",
                   help="use the full-scale trial count")
    e.add_argument("--svg", action="store_true",
                   help="also render histogram SVGs")
    common_solver(e)

    m = sub.add_parser("compare", help="several methods on shared datasets")
    m.add_argument("problem")
    m.add_argument("--methods", required=True,
                   help="comma-separated method names")
    m.add_argument("--k", type=int, default=None)
    m.add_argument("--l", type=int, default=None)
    m.add_argument("--v", type=int, default=None)
    m.add_argument("--n", type=int, default=None)
    m.add_argument("--paper-scale", action="store_true")
    m.add_argument("--verbose", action="store_true",
                   help="print per-trial dataset hashes")
    common_solver(m)

    i = sub.add_parser("emit-ir", help="dump the encoded program as JSON")
    i.add_argument("problem")
    i.add_argument("--method", default="cpp-mip")
    i.add_argument("--k", type=int, default=25)
    i.add_argument("--omega", type=float, default=None)
    i.add_argument("--iota", type=float, default=0.0)
    i.add_argument("--epsilon", type=float, default=None)
    i.add_argument("--divergence", choices=("kl", "tv"), default=None)
    return ap


_COMMANDS = {
    "solve": cmd_solve,
    "certify": cmd_certify,
    "experiment": cmd_experiment,
    "compare": cmd_compare,
    "emit-ir": cmd_emit_ir,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _INPUT_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
