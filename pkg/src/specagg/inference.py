"""Limit-theorem covariances, bias vectors, and chi-square tests.

Implements the theoretical row covariance of the aggregated subspace
estimate, the d^2 x d^2 score covariance and its plug-in version, the
score bias vector, two-/multi-sample chi-square statistics with
change-point scanning, the undirected half-vectorized variants, and a
self-contained regularized incomplete-gamma chi-square CDF/quantile.

Covariance assembly streams entrywise Bernoulli-variance weights; the
n^2 x n^2 diagonal weight matrix is never materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, elimination, vech
from .models import CosieModel
from .estimation import SubspaceEstimate

__all__ = [
    "RowCovariance",
    "ScoreCovariance",
    "BiasVector",
    "TestReport",
    "UndirectedScoreQuantities",
    "upsilon_row",
    "upsilon_row_shared",
    "sigma_score",
    "sigma_score_plugin",
    "mu_bias",
    "mu_bias_plugin",
    "two_sample_test",
    "multi_sample_test",
    "changepoint_scan",
    "noncentrality_two_sample",
    "noncentrality_multi_sample",
    "undirected_score_quantities",
    "chi2_cdf",
    "chi2_quantile",
    "noncentral_chi2_cdf",
]

CONDITION_LIMIT = 1e12
R_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class RowCovariance:
    """Theoretical covariance of one aligned row of the subspace estimate."""

    k: int
    matrix: np.ndarray
    side: str = "U"

    def __post_init__(self):
        M = as_matrix(self.matrix, "matrix")
        if np.max(np.abs(M - M.T)) > 1e-12:
            raise ValueError("row covariance must be symmetric to 1e-12")
        if np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) < -1e-12:
            raise ValueError("row covariance must be PSD (eigenvalue floor -1e-12)")
        object.__setattr__(self, "matrix", 0.5 * (M + M.T))


@dataclass(frozen=True)
class ScoreCovariance:
    """Covariance of the vectorized aligned score matrix for one block."""

    i: int
    matrix: np.ndarray
    plugin: bool = False

    def __post_init__(self):
        M = as_matrix(self.matrix, "matrix")
        if np.max(np.abs(M - M.T)) > 1e-10:
            raise ValueError("score covariance must be symmetric to 1e-10")
        if np.min(np.linalg.eigvalsh(0.5 * (M + M.T))) < -1e-10:
            raise ValueError("score covariance must be PSD (eigenvalue floor -1e-10)")
        object.__setattr__(self, "matrix", 0.5 * (M + M.T))


@dataclass(frozen=True)
class BiasVector:
    """First-order bias of the vectorized aligned score matrix."""

    i: int
    mu: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).ravel()
        if not np.all(np.isfinite(mu)):
            raise ValueError("bias vector must be finite")
        object.__setattr__(self, "mu", mu)


@dataclass(frozen=True)
class TestReport:
    """Chi-square test outcome for a block pair or family."""

    statistic: float
    df: int
    p_value: float
    kind: str
    pair: tuple[int, ...] = ()
    noncentrality: float | None = None
    reject: bool | None = None

    def __post_init__(self):
        if self.statistic < 0:
            raise ValueError("statistic must be non-negative")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p-value must lie in [0, 1]")


@dataclass(frozen=True)
class UndirectedScoreQuantities:
    """Half-vectorized covariance/bias for symmetric-noise score matrices."""

    vech_cov: np.ndarray
    vech_bias: np.ndarray
    upsilon: np.ndarray
    plugin: bool


# ---------------------------------------------------------------------------
# Covariance and bias assemblies
# ---------------------------------------------------------------------------

def _bern_weights(P: np.ndarray) -> np.ndarray:
    """Entrywise Bernoulli variances after clamping probabilities to [0, 1]."""
    C = np.clip(P, 0.0, 1.0)
    return C * (1.0 - C)


def _inv(R: np.ndarray, label: str) -> np.ndarray:
    svals = np.linalg.svd(R, compute_uv=False)
    if svals[-1] <= R_SINGULAR_TOL:
        raise ValueError(f"{label} is numerically singular (sigma_min={svals[-1]:.3e})")
    return np.linalg.inv(R)


def _score_cov_core(U: np.ndarray, V: np.ndarray, W: np.ndarray) -> np.ndarray:
    """sum_{s,t} W_st (v_t kron u_s)(v_t kron u_s)^T without forming n^2 rows."""
    n, d = U.shape
    UU = np.einsum("sa,sb->sab", U, U).reshape(n, d * d)
    G = (W.T @ UU).reshape(n, d, d)
    VV = np.einsum("ta,tb->tab", V, V).reshape(n, d * d)
    T4 = np.tensordot(VV, G, axes=(0, 0)).reshape(d, d, d, d)
    S = T4.transpose(0, 2, 1, 3).reshape(d * d, d * d)
    return 0.5 * (S + S.T)


def _score_cov_swap(U: np.ndarray, W: np.ndarray) -> np.ndarray:
    """sum_{s,t} W_st (u_t kron u_s)(u_s kron u_t)^T, the symmetric cross term."""
    n, d = U.shape
    UU = np.einsum("sa,sb->sab", U, U).reshape(n, d * d)
    G = (W.T @ UU).reshape(n, d, d)
    T4 = np.tensordot(UU, G, axes=(0, 0)).reshape(d, d, d, d)
    return T4.transpose(0, 2, 3, 1).reshape(d * d, d * d)


def _score_cov_diag(U: np.ndarray, wdiag: np.ndarray) -> np.ndarray:
    """sum_s w_ss (u_s kron u_s)(u_s kron u_s)^T."""
    n, d = U.shape
    K = np.einsum("sb,sa->sba", U, U).reshape(n, d * d)
    return K.T @ (wdiag[:, None] * K)


def upsilon_row(model: CosieModel, k: int, side: str = "U") -> RowCovariance:
    """Theoretical covariance of row ``k`` of the aligned subspace estimate.

    For the U side this is m^{-2} sum_i (R^(i)T)^{-1} V^T Xi^(k,i) V (R^(i))^{-1}
    with Xi^(k,i) the diagonal of Bernoulli variances along row k of
    P^(i); the V side swaps the roles of U/V, uses column k, and
    transposes the score matrices.
    """
    if side not in ("U", "V"):
        raise ValueError("side must be 'U' or 'V'")
    n, d, m = model.n, model.d, model.m
    if not 0 <= k < n:
        raise ValueError(f"row index {k} out of range [0, {n})")
    acc = np.zeros((d, d))
    for i in range(m):
        P = model.probability(i)
        if side == "U":
            w = _bern_weights(P[k, :])
            Rinv = _inv(model.R[i], f"R[{i}]")
            B = model.V * w[:, None]
            acc += Rinv.T @ (model.V.T @ B) @ Rinv
        else:
            w = _bern_weights(P[:, k])
            Rinv_t = _inv(model.R[i].T, f"R[{i}]^T")
            B = model.U * w[:, None]
            acc += Rinv_t.T @ (model.U.T @ B) @ Rinv_t
    return RowCovariance(k=k, matrix=acc / m**2, side=side)


def upsilon_row_shared(Uc, U_blocks, V_blocks, R_blocks, k: int) -> RowCovariance:
    """Row covariance of the estimated shared subspace.

    Arguments are the common basis ``Uc``, the per-block full bases
    ``U_blocks[i] = [Uc | Us^(i)]`` and ``V_blocks[i]``, and the per-block
    score matrices.  For the V-side quantity call with the V/U roles
    swapped and the score matrices transposed.
    """
    Uc = as_matrix(Uc, "Uc")
    d0 = Uc.shape[1]
    m = len(R_blocks)
    acc = np.zeros((d0, d0))
    for i in range(m):
        Ui = as_matrix(U_blocks[i], f"U_blocks[{i}]")
        Vi = as_matrix(V_blocks[i], f"V_blocks[{i}]")
        Ri = as_matrix(R_blocks[i], f"R_blocks[{i}]")
        P = Ui @ Ri @ Vi.T
        w = _bern_weights(P[k, :])
        Rinv = _inv(Ri, f"R_blocks[{i}]")
        core = Rinv.T @ (Vi.T @ (Vi * w[:, None])) @ Rinv
        J = Ui.T @ Uc
        acc += J.T @ core @ J
    return RowCovariance(k=k, matrix=acc / m**2, side="Uc")


def sigma_score(model: CosieModel, i: int) -> ScoreCovariance:
    """Oracle d^2 x d^2 covariance (V kron U)^T D^(i) (V kron U)."""
    W = _bern_weights(model.probability(i))
    return ScoreCovariance(i=i, matrix=_score_cov_core(model.U, model.V, W),
                           plugin=False)


def sigma_score_plugin(estimate: SubspaceEstimate, i: int) -> ScoreCovariance:
    """Plug-in score covariance from Phat^(i) = Uhat Rhat^(i) Vhat^T.

    Estimated probabilities are clamped to [0, 1] before the Bernoulli
    weights are evaluated.
    """
    W = _bern_weights(estimate.phat(i))
    return ScoreCovariance(
        i=i, matrix=_score_cov_core(estimate.Uhat, estimate.Vhat, W), plugin=True)


def _mu_terms(U, V, R, i: int) -> np.ndarray:
    m = len(R)
    d = U.shape[1]
    Rinv = [_inv(Ri, f"R[{j}]") for j, Ri in enumerate(R)]
    row_mass, col_mass = [], []
    for j in range(m):
        W = _bern_weights(U @ R[j] @ V.T)
        dtilde = W.sum(axis=1)
        dbreve = W.sum(axis=0)
        row_mass.append(U.T @ (U * dtilde[:, None]))
        col_mass.append(V.T @ (V * dbreve[:, None]))
    term1 = row_mass[i] @ Rinv[i].T / m
    term2 = np.zeros((d, d))
    for j in range(m):
        term2 += R[i] @ Rinv[j] @ row_mass[j] @ Rinv[j].T
    term1 -= term2 / (2 * m**2)
    term3 = Rinv[i].T @ col_mass[i] / m
    term4 = np.zeros((d, d))
    for j in range(m):
        term4 += Rinv[j].T @ col_mass[j] @ Rinv[j] @ R[i]
    term3 -= term4 / (2 * m**2)
    return (term1 + term3).reshape(-1, order="F")


def mu_bias(model: CosieModel, i: int) -> BiasVector:
    """Oracle first-order bias vector of the aligned score matrix."""
    if not 0 <= i < model.m:
        raise ValueError(f"block index {i} out of range")
    return BiasVector(i=i, mu=_mu_terms(model.U, model.V, model.R, i))


def mu_bias_plugin(estimate: SubspaceEstimate, i: int) -> BiasVector:
    """Plug-in bias vector evaluated at the estimated parameters."""
    if not 0 <= i < estimate.m:
        raise ValueError(f"block index {i} out of range")
    return BiasVector(i=i, mu=_mu_terms(estimate.Uhat, estimate.Vhat,
                                        list(estimate.Rhat), i))


# ---------------------------------------------------------------------------
# Chi-square statistics
# ---------------------------------------------------------------------------

def _solve_psd(S: np.ndarray, rhs: np.ndarray, ridge: float | None):
    """Solve S x = rhs for symmetric PSD S with condition monitoring."""
    p = S.shape[0]
    M = 0.5 * (S + S.T)
    if ridge is not None:
        M = M + float(ridge) * (np.trace(M) / p) * np.eye(p)
    vals, vecs = np.linalg.eigh(M)
    if vals[0] <= 0 or vals[-1] / vals[0] >= CONDITION_LIMIT:
        cond = math.inf if vals[0] <= 0 else vals[-1] / vals[0]
        raise ValueError(
            f"covariance is numerically singular (condition estimate {cond:.3e}); "
            "pass a ridge factor to regularize"
        )
    return vecs @ ((vecs.T @ rhs) / vals)


def _block_cov(estimate: SubspaceEstimate, i: int) -> np.ndarray:
    """Plug-in covariance in the vectorization matching the estimate kind."""
    if estimate.directed:
        return sigma_score_plugin(estimate, i).matrix
    return undirected_score_quantities(estimate, i).vech_cov


def _score_vec(estimate: SubspaceEstimate, M: np.ndarray) -> np.ndarray:
    if estimate.directed:
        return M.reshape(-1, order="F")
    return vech(0.5 * (M + M.T))


def two_sample_test(estimate: SubspaceEstimate, i: int, j: int,
                    ridge: float | None = None) -> TestReport:
    """Mahalanobis test of equal score matrices for blocks ``i`` and ``j``.

    The statistic is vec(Rhat_i - Rhat_j)^T (Sig_i + Sig_j)^{-1}
    vec(Rhat_i - Rhat_j), chi-square with d^2 degrees of freedom under
    the null (d(d+1)/2 and half-vectorization for undirected input).
    """
    m = estimate.m
    if not (0 <= i < m and 0 <= j < m):
        raise ValueError("block indices out of range")
    Si = _block_cov(estimate, i)
    Sj = _block_cov(estimate, j)
    diff = _score_vec(estimate, estimate.Rhat[i] - estimate.Rhat[j])
    x = _solve_psd(Si + Sj, diff, ridge)
    stat = float(diff @ x)
    stat = max(stat, 0.0)
    df = diff.size
    return TestReport(statistic=stat, df=df, p_value=1.0 - chi2_cdf(stat, df),
                      kind="two_sample", pair=(i, j))


def multi_sample_test(estimate: SubspaceEstimate,
                      ridge: float | None = None) -> TestReport:
    """Joint test that all m score matrices coincide.

    Sums the Mahalanobis distances of each block to the average score
    matrix, using the averaged plug-in covariance; the null distribution
    is chi-square with (m-1) d^2 degrees of freedom.
    """
    m = estimate.m
    if m < 2:
        raise ValueError("multi-sample test needs at least two blocks")
    covs = [_block_cov(estimate, i) for i in range(m)]
    Sbar = sum(covs) / m
    Rbar = sum(estimate.Rhat) / m
    stat = 0.0
    for i in range(m):
        diff = _score_vec(estimate, estimate.Rhat[i] - Rbar)
        stat += float(diff @ _solve_psd(Sbar, diff, ridge))
    stat = max(stat, 0.0)
    df = (m - 1) * _score_vec(estimate, estimate.Rhat[0]).size
    return TestReport(statistic=stat, df=df, p_value=1.0 - chi2_cdf(stat, df),
                      kind="multi_sample", pair=tuple(range(m)))


def changepoint_scan(estimate: SubspaceEstimate, alpha: float,
                     ridge: float | None = None) -> list[TestReport]:
    """Consecutive-pair tests with Bonferroni-adjusted decisions.

    Computes the two-sample statistic for every pair (i, i+1) and flags
    the pairs whose p-value falls below alpha / (m - 1).
    """
    m = estimate.m
    if m < 2:
        raise ValueError("change-point scan needs at least two blocks")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    level = alpha / (m - 1)
    out = []
    for i in range(m - 1):
        rep = two_sample_test(estimate, i, i + 1, ridge)
        out.append(TestReport(statistic=rep.statistic, df=rep.df,
                              p_value=rep.p_value, kind="changepoint",
                              pair=(i, i + 1), reject=rep.p_value < level))
    return out


def noncentrality_two_sample(model: CosieModel, i: int, j: int) -> float:
    """Oracle noncentrality of the two-sample statistic under the truth."""
    if model.directed:
        Si = sigma_score(model, i).matrix
        Sj = sigma_score(model, j).matrix
        diff = (model.R[i] - model.R[j]).reshape(-1, order="F")
    else:
        Si = undirected_score_quantities(model, i).vech_cov
        Sj = undirected_score_quantities(model, j).vech_cov
        diff = vech(model.R[i] - model.R[j])
    return float(diff @ _solve_psd(Si + Sj, diff, None))


def noncentrality_multi_sample(model: CosieModel) -> float:
    """Oracle noncentrality of the multi-sample statistic under the truth."""
    m = model.m
    if model.directed:
        covs = [sigma_score(model, i).matrix for i in range(m)]
        vecs = [(model.R[i] - sum(model.R) / m).reshape(-1, order="F")
                for i in range(m)]
    else:
        covs = [undirected_score_quantities(model, i).vech_cov for i in range(m)]
        vecs = [vech(model.R[i] - sum(model.R) / m) for i in range(m)]
    Sbar = sum(covs) / m
    return float(sum(v @ _solve_psd(Sbar, v, None) for v in vecs))


# ---------------------------------------------------------------------------
# Undirected (half-vectorized) variants
# ---------------------------------------------------------------------------

def undirected_score_quantities(source: CosieModel | SubspaceEstimate,
                                i: int) -> UndirectedScoreQuantities:
    """Symmetric-noise score covariance, bias, and their vech compressions.

    The vec-level covariance is (U kron U)^T Dup_n D^(i) Dup_n^T (U kron U)
    with D^(i) the diagonal of half-vectorized Bernoulli weights; tests on
    undirected data use the d(d+1)/2-dimensional compression by the
    elimination matrix.  Works from the true model or from an estimate
    (plug-in, with clamped probabilities).
    """
    if isinstance(source, CosieModel):
        if source.directed:
            raise ValueError("undirected quantities require an undirected model")
        U = source.U
        P = source.probability(i)
        R = list(source.R)
        plugin = False
    elif isinstance(source, SubspaceEstimate):
        if source.directed:
            raise ValueError("undirected quantities require an undirected estimate")
        U = source.Uhat
        P = source.phat(i)
        R = list(source.Rhat)
        plugin = True
    else:
        raise TypeError("source must be a CosieModel or SubspaceEstimate")
    d = U.shape[1]
    W = _bern_weights(P)
    S1 = _score_cov_core(U, U, W)
    S2 = _score_cov_swap(U, W)
    D0 = _score_cov_diag(U, np.diag(W))
    upsilon = S1 + S2 - D0
    upsilon = 0.5 * (upsilon + upsilon.T)
    L = elimination(d)
    vech_cov = L @ upsilon @ L.T
    mu = _mu_terms(U, U, R, i)
    vech_bias = L @ mu
    return UndirectedScoreQuantities(vech_cov=vech_cov, vech_bias=vech_bias,
                                     upsilon=upsilon, plugin=plugin)


# ---------------------------------------------------------------------------
# Chi-square distribution (regularized incomplete gamma)
# ---------------------------------------------------------------------------

_GAMMA_EPS = 1e-16
_GAMMA_MAX_ITER = 10_000


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by power series; accurate for x < a+1."""
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise RuntimeError("incomplete gamma series failed to converge")


def _gamma_q_contfrac(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by Lentz continued fraction; x >= a+1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for n in range(1, _GAMMA_MAX_ITER + 1):
        an = -n * (n - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            return h * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise RuntimeError("incomplete gamma continued fraction failed to converge")


def _gamma_p(a: float, x: float) -> float:
    if a <= 0:
        raise ValueError("shape parameter must be positive")
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 0.0
    if x < a + 1.0:
        return min(_gamma_p_series(a, x), 1.0)
    return min(max(1.0 - _gamma_q_contfrac(a, x), 0.0), 1.0)


def chi2_cdf(x: float, df: int) -> float:
    """Chi-square CDF via the regularized lower incomplete gamma P(df/2, x/2)."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if x < 0:
        raise ValueError("x must be non-negative")
    return _gamma_p(df / 2.0, x / 2.0)


def _chi2_pdf(x: float, df: int) -> float:
    if x <= 0:
        return 0.0
    a = df / 2.0
    return math.exp((a - 1.0) * math.log(x) - x / 2.0 - math.lgamma(a) - a * math.log(2.0))


def chi2_quantile(p: float, df: int) -> float:
    """Inverse chi-square CDF by bracketed Newton iteration."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    if p == 0.0:
        return 0.0
    # Wilson-Hilferty starting point, then expand to a sure bracket.
    z = _normal_quantile(p)
    x = df * (1.0 - 2.0 / (9.0 * df) + z * math.sqrt(2.0 / (9.0 * df))) ** 3
    x = max(x, 1e-8)
    lo, hi = 0.0, max(2.0 * x, 1.0)
    while chi2_cdf(hi, df) < p:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("quantile bracket expansion failed")
    for _ in range(200):
        f = chi2_cdf(x, df) - p
        if f > 0:
            hi = x
        else:
            lo = x
        deriv = _chi2_pdf(x, df)
        if deriv > 0:
            step = x - f / deriv
        else:
            step = 0.5 * (lo + hi)
        x_new = step if lo < step < hi else 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-12 * max(1.0, x):
            return x_new
        x = x_new
    return x


def _normal_quantile(p: float) -> float:
    """Acklam-style rational approximation, adequate for a Newton start."""
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    a = [-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00]
    b = [-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01]
    c = [-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00]
    dd = [7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00]
    plow, phigh = 0.02425, 1 - 0.02425
    if p < plow:
        q = math.sqrt(-2 * math.log(p))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1)
    if p > phigh:
        q = math.sqrt(-2 * math.log(1 - p))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
               ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1)
    q = p - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)


def noncentral_chi2_cdf(x: float, df: int, nc: float) -> float:
    """Noncentral chi-square CDF as a Poisson mixture of central CDFs."""
    if nc < 0:
        raise ValueError("noncentrality must be non-negative")
    if nc == 0.0:
        return chi2_cdf(x, df)
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 0.0
    half = nc / 2.0
    weight = math.exp(-half)
    total_weight = weight
    total = weight * chi2_cdf(x, df)
    j = 0
    while total_weight < 1.0 - 1e-14 and j < _GAMMA_MAX_ITER:
        j += 1
        weight *= half / j
        total_weight += weight
        total += weight * chi2_cdf(x, df + 2 * j)
    return min(max(total, 0.0), 1.0)
