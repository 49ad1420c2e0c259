"""Seeded Monte Carlo experiment runner.

Reproduces the simulation studies at desk scale: empirical distributions
of aligned estimators against their theoretical covariances and biases,
chi-square test calibration under null and local alternatives, row-wise
normality for graph and distributed-PCA estimates, log-log error-rate
fits, and common/individual decomposition error sweeps.  Reports are
emitted as CSV plus a JSON summary; replicate streams are derived from
(master seed, experiment id, replicate), so output bytes are identical
at any thread count.

Desk-scale defaults shrink the reference design (n=2000, 1000 replicates)
to n=800 and a few hundred replicates; the full design is reachable by
overriding the parameters.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import dpca as dpca_mod
from . import inference, multiness
from .estimation import estimate_cosie
from .linalg import _sign_fix
from .models import (
    CosieModel,
    MultinessModel,
    SbmSpec,
    SpikedModel,
    random_memberships,
    sample_cosie,
    sample_multiness,
    sample_spiked,
    sbm_to_cosie,
)
from .streams import stream

__all__ = [
    "ExperimentConfig",
    "CalibrationReport",
    "run_study",
    "run_score_normality",
    "run_test_calibration",
    "run_row_normality",
    "run_rate_study",
    "run_multiness_study",
    "ks_distance",
    "loglog_slope",
    "draw_sbm_design",
    "draw_spiked_design",
    "draw_multiness_design",
]

EXPERIMENT_IDS = {
    "score_normality": 1,
    "test_calibration": 2,
    "row_normality": 3,
    "rate": 4,
    "multiness": 5,
}


@dataclass
class ExperimentConfig:
    """One study: kind, model parameters, replicate count, explicit seed."""

    kind: str
    seed: int
    replicates: int
    threads: int = 1
    out: str | None = None
    keep_raw: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EXPERIMENT_IDS:
            raise ValueError(
                f"unknown study kind {self.kind!r}; expected one of "
                f"{sorted(EXPERIMENT_IDS)}"
            )
        if self.seed is None:
            raise ValueError("seed must be explicit (no wall-clock default)")
        self.seed = int(self.seed)
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text())
        return cls(**doc)

    def to_json(self, path) -> None:
        doc = {
            "kind": self.kind,
            "seed": self.seed,
            "replicates": self.replicates,
            "threads": self.threads,
            "out": self.out,
            "keep_raw": self.keep_raw,
            "params": self.params,
        }
        Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2))


@dataclass
class CalibrationReport:
    """Aggregated study output: summary metrics plus tabular rows."""

    kind: str
    replicates: int
    seed: int
    summary: dict
    rows: list[dict]
    raw: list[dict] | None = None

    def write(self, outdir, keep_raw: bool = False) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        _write_csv(outdir / "report.csv", self.rows)
        payload = {
            "kind": self.kind,
            "replicates": self.replicates,
            "seed": self.seed,
            **self.summary,
        }
        (outdir / "summary.json").write_text(
            json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n")
        if keep_raw and self.raw is not None:
            _write_csv(outdir / "raw.csv", self.raw)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def _write_csv(path: Path, rows: list[dict]) -> None:
    if not rows:
        path.write_text("")
        return
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(col)) for col in header))
    path.write_text("\n".join(lines) + "\n")


def _run_replicates(worker, n_rep: int, threads: int) -> list:
    """Execute replicates, preserving replicate order in the results.

    BLAS pools are pinned to one thread on every path: replicate-level
    parallelism then cannot oversubscribe the cores, and single- and
    multi-worker runs share the same in-BLAS reduction order, keeping
    study output bytes identical at any thread count.
    """
    with threadpool_limits(limits=1):
        if threads <= 1:
            return [worker(r) for r in range(n_rep)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, range(n_rep)))


# ---------------------------------------------------------------------------
# Calibration metrics
# ---------------------------------------------------------------------------

def ks_distance(samples, cdf) -> float:
    """One-sample Kolmogorov-Smirnov distance against a reference CDF."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("no samples")
    F = np.array([cdf(v) for v in x])
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(max(np.max(grid_hi - F), np.max(F - grid_lo)))


def loglog_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of log y against log x with its standard error."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise ValueError("sweep of length < 3; slope fit undefined")
    if np.ptp(x) == 0:
        raise ValueError("constant sweep; slope fit undefined")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit requires positive values")
    lx, ly = np.log(x), np.log(y)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, _, _, _ = np.linalg.lstsq(A, ly, rcond=None)
    fitted = A @ coef
    dof = x.size - 2
    s2 = float(np.sum((ly - fitted) ** 2) / dof) if dof > 0 else 0.0
    se = math.sqrt(s2 / float(np.sum((lx - lx.mean()) ** 2)))
    return float(coef[0]), se


def _rel_fro_error(empirical: np.ndarray, theoretical: np.ndarray) -> float:
    denom = np.linalg.norm(theoretical, "fro")
    diff = np.linalg.norm(empirical - theoretical, "fro")
    if denom == 0.0:
        return float(diff)
    return float(diff / denom)


# ---------------------------------------------------------------------------
# Design draws
# ---------------------------------------------------------------------------

def draw_sbm_design(n: int, K: int, m: int, rng, directed: bool = True,
                    equal_pair=None, shift_pair=None, max_cond=None,
                    max_tries: int = 1000) -> tuple[SbmSpec, CosieModel]:
    """Random multi-layer SBM with uniform memberships and U(0,1) blocks.

    ``equal_pair=(i, j)`` copies block matrix i onto j (null designs);
    ``shift_pair=(i, j)`` sets B_j = B_i + (1/n) 11^T (local alternatives).
    ``max_cond`` resamples individual block matrices until every score
    matrix has condition number at most that bound, enforcing the
    bounded-condition assumption the limit theory places on the design.
    Draws are retried until the resulting probabilities are valid.
    """
    def draw_block():
        for _ in range(max_tries):
            Bi = rng.random((K, K))
            if not directed:
                Bi = 0.5 * (Bi + Bi.T)
            if max_cond is None or np.linalg.cond(Bi) <= max_cond:
                return Bi
        raise RuntimeError("could not draw a block matrix within the "
                           "condition bound")

    for _ in range(max_tries):
        tau = random_memberships(n, K, rng)
        phi = random_memberships(n, K, rng) if directed else None
        B = [draw_block() for _ in range(m)]
        if equal_pair is not None:
            i, j = equal_pair
            B[j] = B[i].copy()
        if shift_pair is not None:
            i, j = shift_pair
            shifted = B[i] + 1.0 / n
            if shifted.max() > 1.0:
                continue
            B[j] = shifted
        try:
            spec = SbmSpec(tau=tau, B=tuple(B), phi=phi)
            model = sbm_to_cosie(spec)
        except ValueError:
            continue
        if max_cond is not None and any(np.linalg.cond(R) > 2 * max_cond
                                        for R in model.R):
            continue
        return spec, model
    raise RuntimeError("could not draw a valid SBM design")


def draw_spiked_design(D: int, lam, sigma2: float, rng) -> SpikedModel:
    """Spiked model with a Haar-random basis and the given spike profile."""
    lam = np.asarray(lam, dtype=np.float64)
    G = rng.standard_normal((D, lam.size))
    Q, Rfac = np.linalg.qr(G)
    Q = Q * np.sign(np.diag(Rfac))
    return SpikedModel(U=_sign_fix(Q), lam=lam, sigma2=sigma2)


def draw_multiness_design(n: int, m: int, d1: int, d2: int, sigma: float,
                          rng, scale: float = 1.0) -> MultinessModel:
    """Gaussian latent factors for the common/individual ground truth."""
    Xc = scale * rng.standard_normal((n, d1))
    Xs = tuple(scale * rng.standard_normal((n, d2)) for _ in range(m))
    return MultinessModel(Xc=Xc, Xs=Xs, sigma=sigma)


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def run_score_normality(config: ExperimentConfig) -> CalibrationReport:
    """Empirical distribution of the aligned score matrix for one block.

    A fixed design is drawn from the setup stream; each replicate samples
    graphs, estimates, aligns to the truth, and records
    vec(W_U^T Rhat W_V - R).  The report compares the empirical covariance
    with the theoretical one (relative Frobenius) and the empirical mean
    with the theoretical bias, coordinate by coordinate.
    """
    p = config.params
    n = int(p.get("n", 800))
    K = int(p.get("K", 3))
    m = int(p.get("m", 3))
    directed = bool(p.get("directed", True))
    block = int(p.get("block", 0))
    equal_pair = p.get("equal_pair")
    exp_id = EXPERIMENT_IDS[config.kind]
    setup = stream(config.seed, exp_id, 0)
    _, model = draw_sbm_design(n, K, m, setup, directed=directed,
                               equal_pair=tuple(equal_pair) if equal_pair else None)
    d = model.d
    dims = (d,) * m

    def worker(r: int):
        rng = stream(config.seed, exp_id, r + 1)
        sample = sample_cosie(model, rng)
        est = estimate_cosie(sample, dims=dims, d=d, truth=model)
        aligned = est.W_U.T @ est.Rhat[block] @ est.W_V
        return (aligned - model.R[block]).reshape(-1, order="F")

    devs = np.array(_run_replicates(worker, config.replicates, config.threads))
    sigma = inference.sigma_score(model, block).matrix
    mu = inference.mu_bias(model, block).mu
    emp_mean = devs.mean(axis=0)
    summary: dict = {
        "n": n, "K": K, "m": m, "d": d, "block": block, "directed": directed,
    }
    rows = []
    if config.replicates < 2:
        summary["variance_undefined"] = True
        summary["cov_rel_error"] = None
        emp_sd = np.full(d * d, np.nan)
    else:
        emp_cov = np.cov(devs.T, ddof=1)
        emp_cov = np.atleast_2d(emp_cov)
        summary["variance_undefined"] = False
        summary["cov_rel_error"] = _rel_fro_error(emp_cov, sigma)
        emp_sd = np.sqrt(np.diag(emp_cov))
    se = emp_sd / math.sqrt(config.replicates)
    zs = []
    for c in range(d * d):
        z = ((emp_mean[c] - mu[c]) / se[c]) if se[c] > 0 else math.nan
        zs.append(z)
        rows.append({
            "coord": c,
            "empirical_mean": emp_mean[c],
            "theoretical_bias": mu[c],
            "empirical_sd": emp_sd[c],
            "z": z,
        })
    finite_z = [abs(z) for z in zs if not math.isnan(z)]
    summary["max_abs_mean_z"] = max(finite_z) if finite_z else None
    summary["sigma_fro_norm"] = float(np.linalg.norm(sigma, "fro"))
    raw = None
    if config.keep_raw:
        raw = [{"replicate": r, **{f"c{c}": devs[r, c] for c in range(d * d)}}
               for r in range(config.replicates)]
    return CalibrationReport(kind=config.kind, replicates=config.replicates,
                             seed=config.seed, summary=summary, rows=rows, raw=raw)


def run_test_calibration(config: ExperimentConfig) -> CalibrationReport:
    """Null / local-alternative calibration of the two-sample statistic.

    Under the null the target is the central chi-square; under the local
    alternative (B_j = B_i + (1/n) 11^T) the target is noncentral with
    the oracle noncentrality.  Reports KS distance, moments, and a
    rejection-rate table over the alpha grid.
    """
    p = config.params
    n = int(p.get("n", 800))
    K = int(p.get("K", 3))
    m = int(p.get("m", 3))
    directed = bool(p.get("directed", True))
    pair = tuple(p.get("pair", (0, 1)))
    alternative = bool(p.get("alternative", False))
    alphas = [float(a) for a in p.get("alphas", (0.01, 0.05, 0.10))]
    exp_id = EXPERIMENT_IDS[config.kind]
    setup = stream(config.seed, exp_id, 0)
    if alternative:
        _, model = draw_sbm_design(n, K, m, setup, directed=directed,
                                   shift_pair=pair)
        eta = inference.noncentrality_two_sample(model, *pair)
    else:
        _, model = draw_sbm_design(n, K, m, setup, directed=directed,
                                   equal_pair=pair)
        eta = None
    d = model.d
    dims = (d,) * m

    def worker(r: int):
        rng = stream(config.seed, exp_id, r + 1)
        sample = sample_cosie(model, rng)
        est = estimate_cosie(sample, dims=dims, d=d)
        rep = inference.two_sample_test(est, *pair)
        return rep.statistic, rep.p_value

    results = _run_replicates(worker, config.replicates, config.threads)
    stats = np.array([t for t, _ in results])
    pvals = np.array([pv for _, pv in results])
    df = d * d if directed else d * (d + 1) // 2
    if eta is None:
        cdf = lambda v: inference.chi2_cdf(v, df)  # noqa: E731
    else:
        cdf = lambda v: inference.noncentral_chi2_cdf(v, df, eta)  # noqa: E731
    summary = {
        "n": n, "K": K, "m": m, "d": d, "directed": directed,
        "pair": list(pair),
        "alternative": alternative,
        "df": df,
        "noncentrality": eta,
        "mean_statistic": float(stats.mean()),
        "var_statistic": float(stats.var(ddof=1)) if stats.size > 1 else None,
        "ks_distance": ks_distance(stats, cdf),
    }
    rows = [{"alpha": a, "rejection_rate": float(np.mean(pvals < a))}
            for a in alphas]
    raw = None
    if config.keep_raw:
        raw = [{"replicate": r, "statistic": stats[r], "p_value": pvals[r]}
               for r in range(config.replicates)]
    return CalibrationReport(kind=config.kind, replicates=config.replicates,
                             seed=config.seed, summary=summary, rows=rows, raw=raw)


def run_row_normality(config: ExperimentConfig) -> CalibrationReport:
    """Empirical row-wise covariance against the theoretical one.

    ``family="cosie"`` records W_U^T uhat_k - u_k over replicates of the
    SBM design and compares with the theoretical row covariance;
    ``family="dpca"`` does the same for the aggregated principal
    components of spiked Gaussian data against (sigma^2/N) Lambda^{-1}.
    """
    p = config.params
    family = p.get("family", "cosie")
    exp_id = EXPERIMENT_IDS[config.kind]
    setup = stream(config.seed, exp_id, 0)

    if family == "cosie":
        n = int(p.get("n", 800))
        K = int(p.get("K", 3))
        m = int(p.get("m", 3))
        directed = bool(p.get("directed", True))
        _, model = draw_sbm_design(n, K, m, setup, directed=directed)
        d = model.d
        dims = (d,) * m
        rows_req = p.get("rows", 3)
        if isinstance(rows_req, int):
            ks = sorted(int(v) for v in setup.choice(n, size=rows_req, replace=False))
        else:
            ks = [int(v) for v in rows_req]
        targets = {k: inference.upsilon_row(model, k).matrix for k in ks}

        def worker(r: int):
            rng = stream(config.seed, exp_id, r + 1)
            sample = sample_cosie(model, rng)
            est = estimate_cosie(sample, dims=dims, d=d, truth=model)
            resid = est.Uhat @ est.W_U - model.U
            return np.array([resid[k] for k in ks])

        design_summary = {"family": family, "n": n, "K": K, "m": m, "d": d,
                          "directed": directed}
    elif family == "dpca":
        D = int(p.get("D", 200))
        lam = np.asarray(p.get("lam", (40.0, 20.0, 10.0)), dtype=np.float64)
        sigma2 = float(p.get("sigma2", 1.0))
        n_node = int(p.get("n", 500))
        m = int(p.get("m", 10))
        demean = bool(p.get("demean", False))
        model = draw_spiked_design(D, lam, sigma2, setup)
        d = model.d
        N = n_node * m
        rows_req = p.get("rows", (0,))
        if isinstance(rows_req, int):
            ks = sorted(int(v) for v in setup.choice(D, size=rows_req, replace=False))
        else:
            ks = [int(v) for v in rows_req]
        ups = dpca_mod.dpca_row_covariance(model, N).matrix
        targets = {k: ups for k in ks}

        def worker(r: int):
            rng = stream(config.seed, exp_id, r + 1)
            data = sample_spiked(model, n_node, m, rng, demean=demean)
            locs = [dpca_mod.local_pca(X, d, demean=demean) for X in data]
            agg = dpca_mod.aggregate_pca(locs)
            W = agg.align_to(model)
            resid = agg.Uhat @ W - model.U
            return np.array([resid[k] for k in ks])

        design_summary = {"family": family, "D": D, "lam": lam.tolist(),
                          "sigma2": sigma2, "n": n_node, "m": m, "N": N,
                          "demean": demean}
    else:
        raise ValueError(f"unknown family {family!r}")

    devs = np.array(_run_replicates(worker, config.replicates, config.threads))
    rows = []
    rel_errors = []
    for idx, k in enumerate(ks):
        block = devs[:, idx, :]
        if config.replicates < 2:
            rel = math.nan
        else:
            emp = np.atleast_2d(np.cov(block.T, ddof=1))
            rel = _rel_fro_error(emp, targets[k])
            rel_errors.append(rel)
        rows.append({"row": k, "cov_rel_error": rel, "coords": block.shape[1]})
    summary = {**design_summary,
               "rows_checked": ks,
               "max_cov_rel_error": max(rel_errors) if rel_errors else None,
               "variance_undefined": config.replicates < 2}
    raw = None
    if config.keep_raw:
        raw = []
        for r in range(config.replicates):
            for idx, k in enumerate(ks):
                entry = {"replicate": r, "row": k}
                entry.update({f"c{c}": devs[r, idx, c]
                              for c in range(devs.shape[2])})
                raw.append(entry)
    return CalibrationReport(kind=config.kind, replicates=config.replicates,
                             seed=config.seed, summary=summary, rows=rows, raw=raw)


def run_rate_study(config: ExperimentConfig) -> CalibrationReport:
    """Log-log slope of the mean Procrustes error against a swept parameter.

    For ``family="cosie"`` the error is ||Uhat W_U - U||_F on fresh SBM
    designs per replicate, swept over the number of graphs m or over n;
    for ``family="dpca"`` over the number of nodes.  The slope and a
    two-standard-error confidence band are reported.
    """
    p = config.params
    family = p.get("family", "cosie")
    sweep = p.get("sweep", {})
    param = sweep.get("param", "m")
    values = [int(v) for v in sweep.get("values", (2, 4, 8, 16))]
    if len(values) < 3:
        raise ValueError("sweep of length < 3; rate fit undefined")
    exp_id = EXPERIMENT_IDS[config.kind]

    xs, means = [], []
    rows = []
    for pt, value in enumerate(values):
        if family == "cosie":
            n = value if param == "n" else int(p.get("n", 800))
            m = value if param == "m" else int(p.get("m", 3))
            K = int(p.get("K", 3))
            directed = bool(p.get("directed", True))
            max_cond = p.get("max_cond")

            def worker(r: int, n=n, m=m, pt=pt):
                rng = stream(config.seed, exp_id, pt + 1, r + 1)
                _, model = draw_sbm_design(n, K, m, rng, directed=directed,
                                           max_cond=max_cond)
                sample = sample_cosie(model, rng)
                est = estimate_cosie(sample, dims=(model.d,) * m, d=model.d,
                                     truth=model)
                err = np.linalg.norm(est.Uhat @ est.W_U - model.U, "fro")
                return err, model.density()

            out = _run_replicates(worker, config.replicates, config.threads)
            errs = np.array([e for e, _ in out])
            dens = float(np.mean([rho for _, rho in out]))
            x = value * dens if param == "n" else value
        elif family == "dpca":
            D = int(p.get("D", 200))
            lam = np.asarray(p.get("lam", (40.0, 20.0, 10.0)), dtype=np.float64)
            sigma2 = float(p.get("sigma2", 1.0))
            n_node = value if param == "n" else int(p.get("n", 500))
            m = value if param == "m" else int(p.get("m", 10))

            def worker(r: int, n_node=n_node, m=m, pt=pt):
                rng = stream(config.seed, exp_id, pt + 1, r + 1)
                model = draw_spiked_design(D, lam, sigma2, rng)
                data = sample_spiked(model, n_node, m, rng)
                locs = [dpca_mod.local_pca(X, model.d) for X in data]
                agg = dpca_mod.aggregate_pca(locs)
                return dpca_mod.dpca_errors(agg, model)["procrustes_frobenius"]

            errs = np.array(_run_replicates(worker, config.replicates,
                                            config.threads))
            x = value
        else:
            raise ValueError(f"unknown family {family!r}")
        xs.append(float(x))
        means.append(float(errs.mean()))
        rows.append({"sweep_param": param, "sweep_value": value, "x": float(x),
                     "mean_error": float(errs.mean()),
                     "sd_error": float(errs.std(ddof=1)) if errs.size > 1 else math.nan,
                     "replicates": config.replicates})
    slope, se = loglog_slope(xs, means)
    summary = {
        "family": family,
        "sweep_param": param,
        "sweep_values": values,
        "slope": slope,
        "slope_se": se,
        "slope_ci_lo": slope - 2 * se,
        "slope_ci_hi": slope + 2 * se,
    }
    return CalibrationReport(kind=config.kind, replicates=config.replicates,
                             seed=config.seed, summary=summary, rows=rows)


def run_multiness_study(config: ExperimentConfig) -> CalibrationReport:
    """Relative-error summaries of the common/individual decomposition.

    Sweeps n or m (fresh Gaussian designs per replicate) and reports the
    mean and 0.05/0.95 quantiles of ErrF, ErrG, ErrP per sweep point.
    """
    p = config.params
    d1 = int(p.get("d1", 2))
    d2 = int(p.get("d2", 2))
    sigma = float(p.get("sigma", 1.0))
    scale = float(p.get("scale", 1.0))
    sweep = p.get("sweep")
    if sweep:
        param = sweep.get("param", "n")
        values = [int(v) for v in sweep["values"]]
    else:
        param = "n"
        values = [int(p.get("n", 400))]
    exp_id = EXPERIMENT_IDS[config.kind]
    rows = []
    means: dict[str, list[float]] = {"ErrF": [], "ErrG": [], "ErrP": []}
    for pt, value in enumerate(values):
        n = value if param == "n" else int(p.get("n", 400))
        m = value if param == "m" else int(p.get("m", 8))

        def worker(r: int, n=n, m=m, pt=pt):
            rng = stream(config.seed, exp_id, pt + 1, r + 1)
            model = draw_multiness_design(n, m, d1, d2, sigma, rng, scale=scale)
            mats = sample_multiness(model, rng)
            est = multiness.estimate_multiness(mats, d1, d2)
            return multiness.multiness_errors(est, model)

        res = _run_replicates(worker, config.replicates, config.threads)
        for metric in ("ErrF", "ErrG", "ErrP"):
            vals = np.array([r[metric] for r in res])
            means[metric].append(float(vals.mean()))
            rows.append({
                "sweep_param": param, "sweep_value": value, "metric": metric,
                "mean": float(vals.mean()),
                "q05": float(np.quantile(vals, 0.05)),
                "q95": float(np.quantile(vals, 0.95)),
            })
    summary: dict = {"d1": d1, "d2": d2, "sigma": sigma,
                     "sweep_param": param, "sweep_values": values}
    if len(values) >= 2 and param == "n" and values == sorted(values):
        diffs = np.diff(means["ErrP"])
        summary["errp_monotone_decreasing"] = bool(np.all(diffs < 0))
    else:
        summary["errp_monotone_decreasing"] = None
    for metric in ("ErrF", "ErrG", "ErrP"):
        summary[f"mean_{metric}"] = means[metric]
    return CalibrationReport(kind=config.kind, replicates=config.replicates,
                             seed=config.seed, summary=summary, rows=rows)


_RUNNERS = {
    "score_normality": run_score_normality,
    "test_calibration": run_test_calibration,
    "row_normality": run_row_normality,
    "rate": run_rate_study,
    "multiness": run_multiness_study,
}


def run_study(config: ExperimentConfig) -> CalibrationReport:
    """Dispatch a study by kind and write its reports when requested."""
    report = _RUNNERS[config.kind](config)
    if config.out:
        report.write(Path(config.out), keep_raw=config.keep_raw)
    return report
