"""Chi-square calibration of the two-sample score test.

Desk scale by default (n=800, 300 replicates); pass --full for the
reference design (n=2000, 1000 replicates).  Use --alternative for the
local-alternative power variant B2 = B1 + (1/n) 11^T.
"""

import argparse

from specagg.harness import ExperimentConfig, run_study


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=22)
    ap.add_argument("--replicates", type=int, default=None)
    ap.add_argument("--threads", type=int, default=2)
    ap.add_argument("--out", default="out/null_calibration")
    ap.add_argument("--full", action="store_true",
                    help="reference scale: n=2000, 1000 replicates")
    ap.add_argument("--alternative", action="store_true")
    args = ap.parse_args()

    n = 2000 if args.full else 800
    replicates = args.replicates or (1000 if args.full else 300)
    config = ExperimentConfig(
        kind="test_calibration",
        seed=args.seed,
        replicates=replicates,
        threads=args.threads,
        out=args.out,
        params={"n": n, "K": 3, "m": 3, "alternative": args.alternative},
    )
    report = run_study(config)
    print(f"mean T = {report.summary['mean_statistic']:.3f}  "
          f"df = {report.summary['df']}  "
          f"KS = {report.summary['ks_distance']:.4f}")
    for row in report.rows:
        print(f"  alpha={row['alpha']:.2f}  rejection={row['rejection_rate']:.4f}")


if __name__ == "__main__":
    main()
