"""Command-line interface.

Subcommands: ``simulate`` (draw graphs from a model document),
``estimate`` (joint subspace estimation to CSV), ``test`` (two-/multi-
sample and change-point chi-square tests), ``dpca`` (distributed PCA over
CSV data matrices), ``multiness`` (common/individual decomposition), and
``study <kind>`` (seeded Monte Carlo studies).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import dpca as dpca_mod
from . import harness, inference, multiness
from .estimation import estimate_cosie, save_estimate
from .models import (
    load_adjacency_csv,
    load_edge_list,
    load_model,
    sample_cosie,
    sample_spiked,
    save_adjacency_csv,
    save_edge_list,
    save_model,
)
from .streams import stream


def _load_config(path: str) -> dict:
    return json.loads(Path(path).read_text())


def _load_sample(cfg: dict):
    directed = bool(cfg.get("directed", True))
    if "adjacency" in cfg:
        return load_adjacency_csv(cfg["adjacency"], directed=directed)
    if "edge_list" in cfg:
        e = cfg["edge_list"]
        return load_edge_list(e["path"], n=int(e["n"]), m=int(e["m"]),
                              directed=directed)
    raise SystemExit("config must provide 'adjacency' (CSV paths) or 'edge_list'")


def _cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    model = load_model(cfg["model"]) if "model" in cfg else load_model(args.config)
    rng = stream(args.seed, 0)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sample = sample_cosie(model, rng)
    if cfg.get("edge_list_output"):
        save_edge_list(sample, out / "edges.csv")
    else:
        save_adjacency_csv(sample, out)
    save_model(model, out / "model.json")
    (out / "manifest.json").write_text(json.dumps(
        {"n": model.n, "m": model.m, "d": model.d, "directed": model.directed,
         "seed": args.seed}, sort_keys=True, indent=2))
    print(f"wrote {model.m} layers to {out}")
    return 0


def _cmd_estimate(args) -> int:
    cfg = _load_config(args.config)
    sample = _load_sample(cfg)
    dims = cfg.get("dims")
    d = cfg.get("d")
    est = estimate_cosie(sample, dims=dims, d=d)
    out = Path(args.out)
    save_estimate(est, out, manifest={"seed": args.seed, "config": args.config})
    print(f"estimated d={est.d} subspaces for m={est.m} graphs -> {out}")
    return 0


def _cmd_test(args) -> int:
    cfg = _load_config(args.config)
    sample = _load_sample(cfg)
    est = estimate_cosie(sample, dims=cfg.get("dims"), d=cfg.get("d"))
    mode = cfg.get("mode", "two_sample")
    alpha = float(cfg.get("alpha", 0.05))
    ridge = cfg.get("ridge")
    reports = []
    if mode == "two_sample":
        pairs = cfg.get("pairs")
        if pairs is None:
            pairs = [(i, j) for i in range(est.m) for j in range(i + 1, est.m)]
        family = int(cfg.get("family_size", len(pairs)))
        for i, j in pairs:
            rep = inference.two_sample_test(est, int(i), int(j), ridge=ridge)
            reports.append((rep, rep.p_value < alpha / family))
    elif mode == "multi_sample":
        rep = inference.multi_sample_test(est, ridge=ridge)
        reports.append((rep, rep.p_value < alpha))
    elif mode == "changepoint":
        for rep in inference.changepoint_scan(est, alpha, ridge=ridge):
            reports.append((rep, rep.reject))
    else:
        raise SystemExit(f"unknown test mode {mode!r}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["i,j,statistic,df,p"]
    for rep, _ in reports:
        i = rep.pair[0] if rep.pair else ""
        j = rep.pair[1] if len(rep.pair) > 1 else ""
        lines.append(f"{i},{j},{rep.statistic!r},{rep.df},{rep.p_value!r}")
    (out / "test_reports.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "mode": mode,
        "alpha": alpha,
        "family_size": len(reports),
        "rejections": [dict(pair=list(rep.pair), statistic=rep.statistic,
                            df=rep.df, p=rep.p_value, reject=bool(flag))
                       for rep, flag in reports],
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2))
    n_rej = sum(1 for _, flag in reports if flag)
    print(f"{mode}: {len(reports)} tests, {n_rej} rejections at alpha={alpha}")
    return 0


def _cmd_dpca(args) -> int:
    cfg = _load_config(args.config)
    d = int(cfg["d"])
    demean = bool(cfg.get("demean", False))
    if "data" in cfg:
        mats = [np.loadtxt(p, delimiter=",", ndmin=2) for p in cfg["data"]]
    elif "spiked" in cfg:
        s = cfg["spiked"]
        rng = stream(args.seed, 0)
        model = harness.draw_spiked_design(int(s["D"]), s["lam"],
                                           float(s["sigma2"]), rng)
        mats = sample_spiked(model, int(s["n"]), int(s["m"]), rng, demean=demean)
    else:
        raise SystemExit("config must provide 'data' (CSV paths) or 'spiked'")
    locs = [dpca_mod.local_pca(X, d, demean=demean) for X in mats]
    agg = dpca_mod.aggregate_pca(locs)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "Uhat.csv", agg.Uhat, delimiter=",")
    for i, B in enumerate(agg.locals):
        np.savetxt(out / f"local_{i + 1:03d}.csv", B, delimiter=",")
    (out / "manifest.json").write_text(json.dumps(
        {"D": agg.D, "d": agg.d, "m": agg.m, "demean": demean,
         "seed": args.seed}, sort_keys=True, indent=2))
    print(f"aggregated {agg.m} nodes -> {out}")
    return 0


def _cmd_multiness(args) -> int:
    cfg = _load_config(args.config)
    mats = [np.loadtxt(p, delimiter=",", ndmin=2) for p in cfg["matrices"]]
    est = multiness.estimate_multiness(mats, int(cfg["d1"]), int(cfg["d2"]))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    np.savetxt(out / "Fhat.csv", est.Fhat, delimiter=",")
    for i in range(est.m):
        np.savetxt(out / f"Ghat_{i + 1:03d}.csv", est.Ghat[i], delimiter=",")
        np.savetxt(out / f"Phat_{i + 1:03d}.csv", est.Phat[i], delimiter=",")
    (out / "manifest.json").write_text(json.dumps(
        {"m": est.m, "d1": int(cfg["d1"]), "d2": int(cfg["d2"]),
         "degenerate": list(est.degenerate)}, sort_keys=True, indent=2))
    print(f"decomposed {est.m} matrices -> {out}")
    return 0


def _cmd_study(args) -> int:
    if args.config:
        config = harness.ExperimentConfig.from_json(args.config)
        if args.kind and args.kind != config.kind:
            raise SystemExit(
                f"study kind {args.kind!r} conflicts with config kind "
                f"{config.kind!r}")
    else:
        if not args.kind:
            raise SystemExit("study needs a kind or a --config file")
        if args.seed is None:
            raise SystemExit("--seed is required without a config file")
        config = harness.ExperimentConfig(kind=args.kind, seed=args.seed,
                                          replicates=args.replicates or 100)
    if args.seed is not None:
        config.seed = args.seed
    if args.replicates is not None:
        config.replicates = args.replicates
    if args.threads is not None:
        config.threads = args.threads
    if args.out is not None:
        config.out = args.out
    if args.keep_raw:
        config.keep_raw = True
    report = harness.run_study(config)
    summary_bits = {k: v for k, v in report.summary.items()
                    if isinstance(v, (int, float, str, bool)) and v is not None}
    print(f"{config.kind}: replicates={config.replicates} seed={config.seed}")
    for key in sorted(summary_bits):
        print(f"  {key} = {summary_bits[key]}")
    if config.out:
        print(f"reports written to {config.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specagg",
        description="Distributed shared-subspace estimation, testing, and studies")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, need_out=True):
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--seed", type=int, default=0, help="master seed")
        if need_out:
            sp.add_argument("--out", required=True, help="output directory")

    sp = sub.add_parser("simulate", help="sample graphs from a model document")
    common(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("estimate", help="joint subspace estimation")
    common(sp)
    sp.set_defaults(func=_cmd_estimate)

    sp = sub.add_parser("test", help="chi-square score-matrix tests")
    common(sp)
    sp.set_defaults(func=_cmd_test)

    sp = sub.add_parser("dpca", help="distributed PCA over data matrices")
    common(sp)
    sp.set_defaults(func=_cmd_dpca)

    sp = sub.add_parser("multiness", help="common/individual decomposition")
    common(sp)
    sp.set_defaults(func=_cmd_multiness)

    sp = sub.add_parser("study", help="run a seeded Monte Carlo study")
    sp.add_argument("kind", nargs="?", default=None,
                    help=f"one of {sorted(harness.EXPERIMENT_IDS)}")
    sp.add_argument("--config", default=None, help="ExperimentConfig JSON")
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--replicates", type=int, default=None)
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--out", default=None)
    sp.add_argument("--keep-raw", action="store_true")
    sp.set_defaults(func=_cmd_study)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
