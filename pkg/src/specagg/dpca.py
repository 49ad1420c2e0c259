"""Distributed PCA under a spiked covariance.

Each node computes the leading eigenvectors of its local sample
covariance; only these D x d summaries cross the aggregation boundary,
mirroring a communication/privacy-constrained deployment.  The central
step takes the leading left singular vectors of the stacked summaries,
which equals the leading eigenspace of the averaged projections.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    _sign_fix,
    as_matrix,
    eig_sym_top,
    procrustes_align,
    sin_theta,
    two_to_inf_norm,
)
from .models import SpikedModel

__all__ = [
    "DpcaEstimate",
    "DpcaRowCov",
    "local_pca",
    "aggregate_pca",
    "dpca_row_covariance",
    "dpca_row_covariance_hetero",
    "dpca_errors",
]


@dataclass
class DpcaEstimate:
    """Aggregated principal-subspace estimate with its node summaries."""

    Uhat: np.ndarray
    locals: tuple[np.ndarray, ...]
    W: np.ndarray | None = None

    @property
    def D(self) -> int:
        return self.Uhat.shape[0]

    @property
    def d(self) -> int:
        return self.Uhat.shape[1]

    @property
    def m(self) -> int:
        return len(self.locals)

    def align_to(self, model: SpikedModel) -> np.ndarray:
        self.W = procrustes_align(self.Uhat, model.U)
        return self.W


@dataclass(frozen=True)
class DpcaRowCov:
    """Theoretical covariance of one aligned row of the aggregate."""

    matrix: np.ndarray

    def __post_init__(self):
        M = as_matrix(self.matrix, "matrix")
        if np.any(np.diag(M) <= 0):
            raise ValueError("row covariance must have a positive diagonal")
        object.__setattr__(self, "matrix", M)


def local_pca(X, d: int, demean: bool = False) -> np.ndarray:
    """Leading d eigenvectors of the local sample covariance.

    The covariance is X X^T / n, or the demeaned version
    sum_j (X_j - Xbar)(X_j - Xbar)^T / n (still normalized by n).
    """
    X = as_matrix(X, "X")
    D, n = X.shape
    need = d + 1 if demean else d
    if n < need:
        raise ValueError(f"need at least {need} samples per node, got {n}")
    if not 1 <= d <= D:
        raise ValueError(f"d={d} out of range [1, {D}]")
    if demean:
        X = X - X.mean(axis=1, keepdims=True)
    cov = (X @ X.T) / n
    return eig_sym_top(cov, d).vectors


def aggregate_pca(locals_) -> DpcaEstimate:
    """Leading left singular vectors of the stacked D x dm node summaries.

    Equals the top-d eigenvectors of m^{-1} sum_i Uhat^(i) Uhat^(i)^T.
    The aggregator sees only the summaries, never raw data.
    """
    mats = tuple(as_matrix(B, f"locals[{i}]") for i, B in enumerate(locals_))
    if not mats:
        raise ValueError("no local bases to aggregate")
    D, d = mats[0].shape
    for i, B in enumerate(mats):
        if B.shape != (D, d):
            raise ValueError(f"locals[{i}] has shape {B.shape}, expected {(D, d)}")
    S = np.concatenate(mats, axis=1)
    Q, _, _ = np.linalg.svd(S, full_matrices=False)
    return DpcaEstimate(Uhat=_sign_fix(Q[:, :d]), locals=mats)


def dpca_row_covariance(model: SpikedModel, N: int) -> DpcaRowCov:
    """Row covariance (sigma^2 / N) Lambda^{-1} of the aggregate."""
    if N < 1:
        raise ValueError("N must be positive")
    return DpcaRowCov(matrix=np.diag(model.sigma2 / (N * model.lam)))


def dpca_row_covariance_hetero(lams, zetas, N: int) -> DpcaRowCov:
    """Heterogeneous-spike variant (1/(N m)) sum_i zeta_k^(i) (Lambda^(i))^{-1}.

    ``lams[i]`` holds node i's spiked eigenvalues and ``zetas[i]`` the
    residual variance of the target coordinate not captured by the
    leading components on that node.
    """
    if N < 1:
        raise ValueError("N must be positive")
    lams = [np.asarray(l, dtype=np.float64).ravel() for l in lams]
    zetas = [float(z) for z in zetas]
    if len(lams) != len(zetas) or not lams:
        raise ValueError("need one zeta per node")
    m = len(lams)
    d = lams[0].size
    acc = np.zeros(d)
    for lam_i, zeta_i in zip(lams, zetas):
        if lam_i.size != d:
            raise ValueError("all nodes must share the spike dimension")
        if np.any(lam_i <= 0) or zeta_i < 0:
            raise ValueError("spikes must be positive and zetas non-negative")
        acc += zeta_i / lam_i
    return DpcaRowCov(matrix=np.diag(acc / (N * m)))


def dpca_errors(estimate: DpcaEstimate, model: SpikedModel) -> dict[str, float]:
    """Alignment-based error metrics of the aggregate against the truth."""
    W = procrustes_align(estimate.Uhat, model.U)
    diff = estimate.Uhat @ W - model.U
    return {
        "procrustes_frobenius": float(np.linalg.norm(diff, "fro")),
        "sin_theta": sin_theta(estimate.Uhat, model.U),
        "two_to_inf": two_to_inf_norm(diff),
    }
