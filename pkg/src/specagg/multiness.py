"""Common/individual low-rank decomposition of symmetric matrix collections.

Given noisy symmetric observations sharing a common low-rank component,
estimate the common part from the averaged observation sandwiched by the
shared-subspace projection, and each individual part from the residual
projections.  Error metrics are relative Frobenius norms with the
diagonal zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import estimate_shared_individual
from .linalg import as_matrix
from .models import MultinessModel

__all__ = [
    "MultinessEstimate",
    "estimate_multiness",
    "multiness_errors",
]


@dataclass
class MultinessEstimate:
    """Estimated common (Fhat), individual (Ghat), and total (Phat) parts."""

    Fhat: np.ndarray
    Ghat: tuple[np.ndarray, ...]
    Phat: tuple[np.ndarray, ...]
    Uc: np.ndarray
    Us: tuple[np.ndarray, ...]
    degenerate: tuple[bool, ...] = ()

    @property
    def m(self) -> int:
        return len(self.Ghat)


def estimate_multiness(samples, d1: int, d2: int) -> MultinessEstimate:
    """Decompose symmetric observations into shared and individual parts.

    Per matrix, the d1+d2 leading eigenvectors (by absolute eigenvalue)
    form the block basis; the shared basis Uc comes from their stacked
    aggregation, the individual bases from the projected residuals.  The
    estimators are the projection sandwiches
    Fhat = Pc Abar Pc, Ghat_i = Ps_i A_i Ps_i, and Phat_i built from the
    combined basis [Uc | Us_i].
    """
    mats = [as_matrix(A, f"A[{i}]") for i, A in enumerate(samples)]
    if not mats:
        raise ValueError("no input matrices")
    n = mats[0].shape[0]
    for i, A in enumerate(mats):
        if A.shape != (n, n):
            raise ValueError(f"A[{i}] must be {n}x{n}")
        if np.max(np.abs(A - A.T)) > 1e-8 * max(np.max(np.abs(A)), 1.0):
            raise ValueError(f"A[{i}] must be symmetric")
    if len(mats) < 2:
        raise ValueError(
            "need at least two matrices: the averaged projection has no "
            "shared/individual eigenvalue separation for m=1"
        )
    if d1 < 1 or d2 < 0 or d1 + d2 > n:
        raise ValueError(f"need 1 <= d1 and d1+d2 <= n, got d1={d1}, d2={d2}")
    split = estimate_shared_individual(mats, dims=(d1 + d2,) * len(mats), d0=d1)
    Uc, Us = split.Uc, split.Us
    Abar = sum(mats) / len(mats)
    Pc = Uc @ Uc.T
    Fhat = Pc @ Abar @ Pc
    Ghat, Phat = [], []
    for A, Usi in zip(mats, Us):
        Ps = Usi @ Usi.T
        Ghat.append(Ps @ A @ Ps)
        combined = np.column_stack([Uc, Usi])
        Pcs = combined @ combined.T
        Phat.append(Pcs @ A @ Pcs)
    return MultinessEstimate(Fhat=Fhat, Ghat=tuple(Ghat), Phat=tuple(Phat),
                             Uc=Uc, Us=Us, degenerate=split.degenerate_u)


def _offdiag_fro(M: np.ndarray) -> float:
    M = M - np.diag(np.diag(M))
    return float(np.linalg.norm(M, "fro"))


def multiness_errors(estimate: MultinessEstimate,
                     truth: MultinessModel) -> dict[str, float]:
    """Relative diagonal-zeroed Frobenius errors ErrF, ErrG, ErrP.

    ErrG and ErrP are averaged over the m matrices; a zero-denominator
    ground-truth component is an error.
    """
    if estimate.m != truth.m:
        raise ValueError("estimate and truth have different numbers of matrices")
    F = truth.common()
    denom_f = _offdiag_fro(F)
    if denom_f == 0.0:
        raise ValueError("ground-truth common part has zero off-diagonal norm")
    err_f = _offdiag_fro(estimate.Fhat - F) / denom_f
    errs_g, errs_p = [], []
    for i in range(truth.m):
        G = truth.individual(i)
        P = truth.expectation(i)
        dg, dp = _offdiag_fro(G), _offdiag_fro(P)
        if dg == 0.0 or dp == 0.0:
            raise ValueError(f"ground-truth component {i} has zero off-diagonal norm")
        errs_g.append(_offdiag_fro(estimate.Ghat[i] - G) / dg)
        errs_p.append(_offdiag_fro(estimate.Phat[i] - P) / dp)
    return {
        "ErrF": err_f,
        "ErrG": float(np.mean(errs_g)),
        "ErrP": float(np.mean(errs_p)),
    }
