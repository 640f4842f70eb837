"""Chance-constrained optimization with split-sample quantile calibration.

The package turns a probabilistic constraint Prob(f(x, Y) <= 0) >= 1 - delta
into sample-based deterministic programs (a rank-quantile reformulation, a
big-M mixed-integer encoding, and a pinball-loss KKT encoding), solves them
with a built-in branch-and-bound stack, and certifies any produced decision
with a held-out calibration quantile whose coverage properties are exact in
finite samples.  A distribution-shift extension adjusts the quantile level
through f-divergence balls, and an experiment harness reproduces the
empirical-coverage studies on the bundled case problems.
"""

__version__ = "0.1.0"

from .problem import (CcoProblem, ProblemError, load_problem, make_sample_set,
                      sample, validate_sizes)
from .quantile import (Certificate, ConformalLevel, InfeasibleLevelError,
                       certify, conformal_rank, empirical_coverage,
                       empirical_quantile, pinball_quantile, quantile_at)
from .robust import Divergence, RobustLevel, gaussian_kl
from .encode import (DetProgram, EncodeError, build_program, check_program,
                     encode_joint_union, encode_kkt, encode_mip,
                     program_to_dict)
from .baselines import encode_sa, encode_saa
from .solve import (Solution, SolveConfig, solve_bnb, solve_cco,
                    solve_enumerate, solve_program, solve_quantile_penalty)
from .bench import (ExperimentConfig, TrialReport, analytic_oracle_case1,
                    case_defaults, case_path, emit_outputs, run_experiment,
                    run_trial, summarize)

__all__ = [
    "CcoProblem", "ProblemError", "load_problem", "make_sample_set",
    "sample", "validate_sizes",
    "Certificate", "ConformalLevel", "InfeasibleLevelError", "certify",
    "conformal_rank", "empirical_coverage", "empirical_quantile",
    "pinball_quantile", "quantile_at",
    "Divergence", "RobustLevel", "gaussian_kl",
    "DetProgram", "EncodeError", "build_program", "check_program",
    "encode_joint_union", "encode_kkt", "encode_mip", "program_to_dict",
    "encode_sa", "encode_saa",
    "Solution", "SolveConfig", "solve_bnb", "solve_cco", "solve_enumerate",
    "solve_program", "solve_quantile_penalty",
    "ExperimentConfig", "TrialReport", "analytic_oracle_case1",
    "case_defaults", "case_path", "emit_outputs", "run_experiment",
    "run_trial", "summarize",
]
