"""Log-log error-rate fits for the aggregated subspace estimate.

Sweeps the number of blocks/nodes (or n) and fits the slope of the mean
Procrustes Frobenius error; the expected slope against the number of
aggregated matrices is -1/2.
"""

import argparse

from specagg.harness import ExperimentConfig, run_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", choices=("cosie", "dpca"), default="cosie")
    ap.add_argument("--param", choices=("m", "n"), default="m")
    ap.add_argument("--values", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--seed", type=int, default=22)
    ap.add_argument("--replicates", type=int, default=50)
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--out", default="out/rate_study")
    args = ap.parse_args()

    if args.family == "cosie":
        params = {"family": "cosie", "n": 800, "K": 3, "m": 3}
    else:
        params = {"family": "dpca", "D": 200, "lam": [40.0, 20.0, 10.0],
                  "sigma2": 1.0, "n": 500, "m": 10}
    params["sweep"] = {"param": args.param, "values": args.values}
    config = ExperimentConfig(
        kind="rate",
        seed=args.seed,
        replicates=args.replicates,
        threads=args.threads,
        out=args.out,
        params=params,
    )
    report = run_study(config)
    s = report.summary
    print(f"slope = {s['slope']:.4f} +- {2 * s['slope_se']:.4f} "
          f"(CI [{s['slope_ci_lo']:.4f}, {s['slope_ci_hi']:.4f}])")


if __name__ == "__main__":
    main()
