"""Empirical distribution of the aligned score matrix vs its limit law.

Compares the Monte Carlo covariance and mean of
vec(W_U^T Rhat W_V - R) with the theoretical covariance and bias for one
block of a directed multi-layer SBM design.
"""

import argparse

from specagg.harness import ExperimentConfig, run_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=22)
    ap.add_argument("--replicates", type=int, default=None)
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--out", default="out/score_normality")
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    n = 2000 if args.full else 800
    replicates = args.replicates or (1000 if args.full else 300)
    config = ExperimentConfig(
        kind="score_normality",
        seed=args.seed,
        replicates=replicates,
        threads=args.threads,
        out=args.out,
        params={"n": n, "K": 3, "m": 3, "block": 0},
    )
    report = run_study(config)
    print(f"covariance relative error = {report.summary['cov_rel_error']:.4f}")
    print(f"max |z| of mean vs bias   = {report.summary['max_abs_mean_z']:.2f}")


if __name__ == "__main__":
    main()
