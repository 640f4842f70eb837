"""Distribution shift on the bundled portfolio case: vanilla vs robust.

Training returns come from one product-of-normals market model and test
returns from a slightly different one.  The vanilla calibrated encoding
targets 80% coverage under the training law and loses some of it under the
shift; the f-divergence-robust variant widens its quantile level by the
KL budget between the two models and holds the line at the price of a
more conservative objective.
"""

import argparse

import numpy as np

from ccopt import (ExperimentConfig, case_path, gaussian_kl, load_problem,
                   run_experiment)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=5)
    args = ap.parse_args()

    problem = load_problem(case_path("portfolio"))
    test_p = [c.params for c in problem.test_distribution.components]
    train_p = [c.params for c in problem.distribution.components]
    kl = gaussian_kl([m for m, _ in test_p], [v for _, v in test_p],
                     [m for m, _ in train_p], [v for _, v in train_p])
    print(f"KL budget between market models: {kl:.6f} "
          f"(problem file carries epsilon = {problem.epsilon})")

    base = dict(trials=args.trials, train=80, calib=200, test=1000,
                seed=args.seed)
    for method in ("cpp-mip", "rcpp-mip"):
        reports, summary = run_experiment(
            problem, ExperimentConfig(method=method, **base))
        rets = [r.objective for r in reports if r.solved]
        print(f"\n{method}: {summary['solved']}/{args.trials} solved")
        print(f"  mean portfolio return  {np.mean(rets):8.4f}")
        print(f"  mean EC0 (shifted law) {summary['ec0']['mean']:8.4f}  "
              f"target 0.80")
        print(f"  mean ECC               {summary['ecc']['mean']:8.4f}")


if __name__ == "__main__":
    main()
