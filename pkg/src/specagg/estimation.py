"""Joint estimation of common subspaces across a matrix collection.

The core estimator runs in three steps: per-block leading singular
subspaces, aggregation of the stacked block bases through a thin SVD
(equivalently the leading eigenvectors of the averaged projection
matrices), and score-matrix extraction.  Also here: automatic embedding
dimension selection, the shared/individual subspace split, and k-means
community recovery on the estimated rows.
"""

from __future__ import annotations

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla
from scipy.cluster.vq import kmeans2
from scipy.optimize import linear_sum_assignment

from .linalg import _sign_fix, as_matrix, procrustes_align, svd_top
from .models import CosieModel, GraphSample

__all__ = [
    "SubspaceEstimate",
    "SharedIndividualEstimate",
    "estimate_cosie",
    "select_block_dims",
    "estimate_shared_individual",
    "recover_communities",
    "misclassification_rate",
    "save_estimate",
]

RESIDUAL_RANK_RTOL = 1e-8


@dataclass
class SubspaceEstimate:
    """Output of the joint estimator.

    ``Uhat``/``Vhat`` are the aggregated n x d orthonormal bases and
    ``Rhat[i] = Uhat^T A^(i) Vhat`` the per-block score matrices.  When a
    ground-truth model is supplied the Procrustes alignments ``W_U`` and
    ``W_V`` are attached.
    """

    Uhat: np.ndarray
    Vhat: np.ndarray
    Rhat: tuple[np.ndarray, ...]
    dims: tuple[int, ...]
    d: int
    directed: bool
    W_U: np.ndarray | None = None
    W_V: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.Uhat.shape[0]

    @property
    def m(self) -> int:
        return len(self.Rhat)

    def phat(self, i: int) -> np.ndarray:
        """Estimated edge-expectation matrix Uhat Rhat^(i) Vhat^T (unclamped)."""
        return self.Uhat @ self.Rhat[i] @ self.Vhat.T

    def align_to(self, model: CosieModel) -> tuple[np.ndarray, np.ndarray]:
        """Attach and return Procrustes alignments (W_U, W_V) to the truth."""
        self.W_U = procrustes_align(self.Uhat, model.U)
        self.W_V = self.W_U if not self.directed else procrustes_align(self.Vhat, model.V)
        return self.W_U, self.W_V


@dataclass
class SharedIndividualEstimate:
    """Shared and individual subspace estimates on both sides.

    ``Uc`` spans the estimated common column space; ``Us[i]`` holds the
    block-specific directions, orthogonal to ``Uc`` by construction.
    ``degenerate_u[i]`` flags blocks whose residual after projecting out
    the common part was numerically rank deficient and had to be filled
    from the orthogonal complement.
    """

    Uc: np.ndarray
    Us: tuple[np.ndarray, ...]
    Vc: np.ndarray
    Vs: tuple[np.ndarray, ...]
    d0_u: int
    d0_v: int
    dims: tuple[int, ...]
    pi_eigenvalues_u: np.ndarray
    pi_eigenvalues_v: np.ndarray
    degenerate_u: tuple[bool, ...] = ()
    degenerate_v: tuple[bool, ...] = ()


def _eig_top_abs(A: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal basis of the k leading eigenvectors of symmetric A by |eigenvalue|."""
    n = A.shape[0]
    S = 0.5 * (A + A.T)
    if 2 * k >= n:
        vals, vecs = np.linalg.eigh(S)
        order = np.argsort(-np.abs(vals), kind="stable")[:k]
        return _sign_fix(vecs[:, order])
    top = sla.eigh(S, subset_by_index=[n - k, n - 1], check_finite=False)
    bot = sla.eigh(S, subset_by_index=[0, k - 1], check_finite=False)
    vals = np.concatenate([top[0][::-1], bot[0]])
    vecs = np.concatenate([top[1][:, ::-1], bot[1]], axis=1)
    order = np.argsort(-np.abs(vals), kind="stable")[:k]
    return _sign_fix(vecs[:, order])


def _block_bases(mats, dims, directed: bool):
    """Step 1: per-block leading left/right singular subspaces."""
    lefts, rights = [], []
    for Ai, di in zip(mats, dims):
        if directed:
            lp, rp = svd_top(Ai, di)
            lefts.append(lp.vectors)
            rights.append(rp.vectors)
        else:
            U = _eig_top_abs(Ai, di)
            lefts.append(U)
            rights.append(U)
    return lefts, rights


def _stacked_left_singular(bases, d: int):
    """Leading d left singular vectors of [B1 | ... | Bm] via a thin SVD.

    Returns the basis and all squared-singular-values/m, which are the
    eigenvalues of the averaged projection matrix m^{-1} sum B_i B_i^T.
    """
    S = np.concatenate(bases, axis=1)
    Q, svals, _ = np.linalg.svd(S, full_matrices=False)
    m = len(bases)
    pi_eigs = svals**2 / m
    if d > S.shape[1]:
        raise ValueError(f"d={d} exceeds the stacked rank bound {S.shape[1]}")
    return _sign_fix(Q[:, :d]), pi_eigs


def _as_mats(sample) -> tuple[tuple[np.ndarray, ...], bool]:
    if isinstance(sample, GraphSample):
        return sample.A, sample.directed
    mats = tuple(as_matrix(Ai, f"A[{i}]") for i, Ai in enumerate(sample))
    if not mats:
        raise ValueError("empty sample")
    sym = all(np.array_equal(Ai, Ai.T) for Ai in mats)
    return mats, not sym


def estimate_cosie(sample, dims=None, d: int | None = None,
                   truth: CosieModel | None = None) -> SubspaceEstimate:
    """Jointly estimate (Uhat, Vhat, {Rhat}) from a graph collection.

    With ``dims``/``d`` omitted they are selected automatically via
    :func:`select_block_dims`.  Undirected input uses per-block
    eigenvectors ordered by absolute eigenvalue in step 1 and sets
    ``Vhat = Uhat``.
    """
    mats, directed = _as_mats(sample)
    n = mats[0].shape[0]
    if dims is None:
        auto_dims, auto_d = select_block_dims(sample)
        dims = auto_dims
        d = d if d is not None else auto_d
    else:
        if np.isscalar(dims):
            dims = (int(dims),) * len(mats)
        else:
            dims = tuple(int(x) for x in dims)
        if len(dims) == 1 and len(mats) > 1:
            dims = dims * len(mats)
        if d is None:
            d = _mode(dims)
    if len(dims) != len(mats):
        raise ValueError(f"got {len(dims)} dims for {len(mats)} blocks")
    if any(di < 1 for di in dims):
        raise ValueError(f"block dimensions must be positive, got {dims}")
    if not 1 <= d <= min(dims):
        raise ValueError(f"d={d} must satisfy 1 <= d <= min(dims)={min(dims)}")
    if max(dims) > n:
        raise ValueError("block dimension exceeds matrix size")

    lefts, rights = _block_bases(mats, dims, directed)
    Uhat, _ = _stacked_left_singular(lefts, d)
    if directed:
        Vhat, _ = _stacked_left_singular(rights, d)
    else:
        Vhat = Uhat
    Rhat = tuple(Uhat.T @ Ai @ Vhat for Ai in mats)
    est = SubspaceEstimate(Uhat=Uhat, Vhat=Vhat, Rhat=Rhat, dims=tuple(dims),
                           d=int(d), directed=directed)
    if truth is not None:
        est.align_to(truth)
    return est


def _mode(values) -> int:
    counts = Counter(values)
    best = max(counts.items(), key=lambda kv: (kv[1], -kv[0]))
    return int(best[0])


def select_block_dims(sample) -> tuple[tuple[int, ...], int]:
    """Per-block embedding dimensions from the spectral threshold rule.

    For each block, count the singular values (eigenvalues, when
    undirected, in modulus) exceeding 4 sqrt(delta), where delta is the
    maximum degree (for directed input the larger of the max row-sum and
    max column-sum).  The final dimension is the mode of the counts; ties
    resolve to the smallest modal value.
    """
    mats, directed = _as_mats(sample)
    dims = []
    for Ai in mats:
        if directed:
            delta = max(Ai.sum(axis=1).max(), Ai.sum(axis=0).max())
            spectrum = np.linalg.svd(Ai, compute_uv=False)
        else:
            delta = Ai.sum(axis=1).max()
            spectrum = np.abs(np.linalg.eigvalsh(Ai))
        thresh = 4.0 * np.sqrt(delta)
        dims.append(int(np.sum(spectrum > thresh)))
    if all(di == 0 for di in dims):
        raise ValueError(
            "no eigenvalue exceeds the 4*sqrt(max degree) threshold in any "
            "block; signal too weak for dimension selection"
        )
    return tuple(dims), _mode(dims)


def _complete_orthonormal(Q: np.ndarray, k: int) -> np.ndarray:
    """Deterministically extend Q by k orthonormal columns from its complement."""
    n = Q.shape[0]
    cols = []
    basis = Q
    for j in range(n):
        if len(cols) == k:
            break
        v = np.zeros(n)
        v[j] = 1.0
        v = v - basis @ (basis.T @ v)
        for c in cols:
            v = v - c * (c @ v)
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            cols.append(v / norm)
    if len(cols) < k:
        raise ValueError("orthogonal complement exhausted")
    return np.column_stack(cols)


def _auto_d0(pi_eigs: np.ndarray, sample, side: str) -> int:
    """Count averaged-projection eigenvalues that are approximately one.

    The threshold is 1 - (n rho)^{-1/2} log n with rho the empirical edge
    density, so auto selection is only defined for binary graph samples.
    """
    if not isinstance(sample, GraphSample):
        raise ValueError(
            "automatic shared-dimension selection needs a binary GraphSample "
            "(the density threshold is undefined otherwise); pass d0 explicitly"
        )
    rho = sample.density()
    if rho <= 0:
        raise ValueError("empirical density is zero; cannot select shared dimension")
    n = sample.n
    thresh = 1.0 - np.log(n) / np.sqrt(n * rho)
    if thresh <= 0:
        raise ValueError(
            f"shared-dimension threshold {thresh:.3g} is non-positive "
            f"(density too small at n={n})"
        )
    d0 = int(np.sum(pi_eigs >= thresh))
    if d0 == 0:
        raise ValueError(
            f"no {side}-side projection eigenvalue reaches the shared-subspace "
            f"threshold {thresh:.4f} (largest is {pi_eigs.max():.4f})"
        )
    return d0


def _split_side(bases, d0: int, dims) -> tuple[np.ndarray, tuple, np.ndarray, tuple]:
    Qc, pi_eigs = _stacked_left_singular(bases, d0)
    specific = []
    degenerate = []
    for Bi, di in zip(bases, dims):
        ks = di - d0
        if ks == 0:
            specific.append(np.zeros((Bi.shape[0], 0)))
            degenerate.append(False)
            continue
        resid = Bi - Qc @ (Qc.T @ Bi)
        Q, svals, _ = np.linalg.svd(resid, full_matrices=False)
        rank = int(np.sum(svals > RESIDUAL_RANK_RTOL * max(svals[0], 1.0)))
        if rank >= ks:
            specific.append(_sign_fix(Q[:, :ks]))
            degenerate.append(False)
        else:
            kept = _sign_fix(Q[:, :rank])
            fill = _complete_orthonormal(np.column_stack([Qc, kept]), ks - rank)
            specific.append(np.column_stack([kept, fill]))
            degenerate.append(True)
    return Qc, tuple(specific), pi_eigs, tuple(degenerate)


def estimate_shared_individual(sample, dims, d0: int | str = "auto",
                               d0_v: int | str | None = None) -> SharedIndividualEstimate:
    """Split block subspaces into shared and individual parts.

    ``Uc`` collects the top-d0 eigenvectors of the averaged projection
    m^{-1} sum Uhat^(i) Uhat^(i)^T (computed through the stacked thin
    SVD); ``Us[i]`` holds the leading left singular vectors of
    (I - Uc Uc^T) Uhat^(i).  The V side is constructed symmetrically and
    may use a different shared dimension.  ``d0="auto"`` counts the
    projection eigenvalues that are approximately one.
    """
    mats, directed = _as_mats(sample)
    dims = tuple(int(x) for x in dims)
    if len(dims) == 1 and len(mats) > 1:
        dims = dims * len(mats)
    if len(dims) != len(mats):
        raise ValueError(f"got {len(dims)} dims for {len(mats)} blocks")
    lefts, rights = _block_bases(mats, dims, directed)

    if d0 == "auto":
        _, pi_all = _stacked_left_singular(lefts, 1)
        d0u = _auto_d0(pi_all, sample, "U")
    else:
        d0u = int(d0)
    if d0u > min(dims):
        raise ValueError(f"d0={d0u} exceeds the smallest block dimension {min(dims)}")
    Uc, Us, pi_u, deg_u = _split_side(lefts, d0u, dims)

    if not directed:
        return SharedIndividualEstimate(
            Uc=Uc, Us=Us, Vc=Uc, Vs=Us, d0_u=d0u, d0_v=d0u, dims=dims,
            pi_eigenvalues_u=pi_u, pi_eigenvalues_v=pi_u,
            degenerate_u=deg_u, degenerate_v=deg_u)

    d0v_req = d0 if d0_v is None else d0_v
    if d0v_req == "auto":
        _, pi_all_v = _stacked_left_singular(rights, 1)
        d0v = _auto_d0(pi_all_v, sample, "V")
    else:
        d0v = int(d0v_req)
    if d0v > min(dims):
        raise ValueError(f"d0_v={d0v} exceeds the smallest block dimension {min(dims)}")
    Vc, Vs, pi_v, deg_v = _split_side(rights, d0v, dims)
    return SharedIndividualEstimate(
        Uc=Uc, Us=Us, Vc=Vc, Vs=Vs, d0_u=d0u, d0_v=d0v, dims=dims,
        pi_eigenvalues_u=pi_u, pi_eigenvalues_v=pi_v,
        degenerate_u=deg_u, degenerate_v=deg_v)


def recover_communities(Uhat, K: int, seed: int = 0, restarts: int = 20) -> np.ndarray:
    """k-means labels (best of ``restarts`` seeded runs) on the rows of Uhat.

    Restarts that collapse a cluster are kept only as a fallback when
    every restart collapses.
    """
    U = as_matrix(Uhat, "Uhat")
    n = U.shape[0]
    if K < 1:
        raise ValueError("K must be positive")
    if K > n:
        raise ValueError(f"K={K} exceeds the number of rows {n}")
    best = {True: (np.inf, None), False: (np.inf, None)}
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), r)))
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message=".*clusters is empty.*")
            centroids, labels = kmeans2(U, K, minit="++", seed=rng)
        cost = float(np.sum((U - centroids[labels]) ** 2))
        full = np.unique(labels).size == K
        if cost < best[full][0]:
            best[full] = (cost, labels)
    labels = best[True][1] if best[True][1] is not None else best[False][1]
    return np.asarray(labels, dtype=np.int64)


def misclassification_rate(labels, truth) -> float:
    """Fraction of misassigned points, minimized over label permutations."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if labels.size != truth.size:
        raise ValueError("label vectors must have equal length")
    K = int(max(labels.max(), truth.max())) + 1
    confusion = np.zeros((K, K))
    for a, b in zip(labels, truth):
        confusion[a, b] += 1
    rows, cols = linear_sum_assignment(-confusion)
    agree = confusion[rows, cols].sum()
    return float(1.0 - agree / labels.size)


def save_estimate(est: SubspaceEstimate, outdir, manifest: dict | None = None) -> None:
    """Export Uhat/Vhat/Rhat as CSV matrices plus a JSON manifest."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    np.savetxt(outdir / "Uhat.csv", est.Uhat, delimiter=",")
    np.savetxt(outdir / "Vhat.csv", est.Vhat, delimiter=",")
    for i, Ri in enumerate(est.Rhat):
        np.savetxt(outdir / f"Rhat_{i + 1:03d}.csv", Ri, delimiter=",")
    doc = {
        "n": est.n,
        "m": est.m,
        "d": est.d,
        "dims": list(est.dims),
        "directed": est.directed,
        "aligned": est.W_U is not None,
    }
    if manifest:
        doc.update(manifest)
    (outdir / "manifest.json").write_text(json.dumps(doc, sort_keys=True, indent=2))
