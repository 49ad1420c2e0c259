"""Ground-truth models and samplers.

Covers COSIE graph models (directed and undirected), multi-layer SBM
construction mapped into COSIE form, MultiNeSS-style common/individual
ground truth with Gaussian noise, and spiked-covariance Gaussian data for
distributed PCA.  Model import/export and adjacency export live here too.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import ORTHONORMALITY_TOL, as_matrix

__all__ = [
    "CosieModel",
    "GraphSample",
    "SbmSpec",
    "MultinessModel",
    "SpikedModel",
    "sbm_to_cosie",
    "sample_cosie",
    "sample_multiness",
    "sample_spiked",
    "random_memberships",
    "save_model",
    "load_model",
    "save_adjacency_csv",
    "load_adjacency_csv",
    "save_edge_list",
    "load_edge_list",
]

PROB_TOL = 1e-9


def _check_orthonormal(M: np.ndarray, name: str) -> None:
    dev = np.max(np.abs(M.T @ M - np.eye(M.shape[1])))
    if dev > ORTHONORMALITY_TOL:
        raise ValueError(f"{name} must have orthonormal columns (deviation {dev:.3e})")


@dataclass(frozen=True)
class CosieModel:
    """Edge-probability model P^(i) = U R^(i) V^T with shared subspaces.

    ``U`` and ``V`` are orthonormal n x d; ``R`` holds one d x d score
    matrix per graph.  Undirected models have ``V = U`` and symmetric
    score matrices.  Every probability entry must lie in [0, 1].
    """

    U: np.ndarray
    V: np.ndarray
    R: tuple[np.ndarray, ...]
    directed: bool = True

    def __post_init__(self):
        U = as_matrix(self.U, "U")
        V = as_matrix(self.V, "V")
        R = tuple(as_matrix(Ri, f"R[{i}]") for i, Ri in enumerate(self.R))
        if not R:
            raise ValueError("at least one score matrix is required")
        _check_orthonormal(U, "U")
        _check_orthonormal(V, "V")
        n, d = U.shape
        if V.shape != (n, d):
            raise ValueError("U and V must have identical shapes")
        for i, Ri in enumerate(R):
            if Ri.shape != (d, d):
                raise ValueError(f"R[{i}] must be {d}x{d}, got {Ri.shape}")
            P = U @ Ri @ V.T
            if P.min() < -PROB_TOL or P.max() > 1.0 + PROB_TOL:
                raise ValueError(
                    f"P[{i}] entries outside [0,1]: range "
                    f"[{P.min():.6g}, {P.max():.6g}]"
                )
        if not self.directed:
            if np.max(np.abs(U - V)) > ORTHONORMALITY_TOL:
                raise ValueError("undirected model requires V = U")
            for i, Ri in enumerate(R):
                if np.max(np.abs(Ri - Ri.T)) > 1e-10 * max(np.max(np.abs(Ri)), 1.0):
                    raise ValueError(f"undirected model requires symmetric R[{i}]")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "R", R)

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    @property
    def m(self) -> int:
        return len(self.R)

    def probability(self, i: int) -> np.ndarray:
        """Edge-probability matrix of graph ``i``."""
        return self.U @ self.R[i] @ self.V.T

    def density(self) -> float:
        """Mean edge probability across all graphs."""
        return float(np.mean([np.mean(self.probability(i)) for i in range(self.m)]))


@dataclass(frozen=True)
class GraphSample:
    """A collection of m binary n x n adjacency matrices."""

    A: tuple[np.ndarray, ...]
    directed: bool = True

    def __post_init__(self):
        A = tuple(as_matrix(Ai, f"A[{i}]") for i, Ai in enumerate(self.A))
        if not A:
            raise ValueError("at least one adjacency matrix is required")
        n = A[0].shape[0]
        for i, Ai in enumerate(A):
            if Ai.shape != (n, n):
                raise ValueError(f"A[{i}] must be {n}x{n}")
            if not np.all((Ai == 0.0) | (Ai == 1.0)):
                raise ValueError(f"A[{i}] must be binary")
            if not self.directed and np.any(Ai != Ai.T):
                raise ValueError(f"undirected sample requires symmetric A[{i}]")
        object.__setattr__(self, "A", A)

    @property
    def n(self) -> int:
        return self.A[0].shape[0]

    @property
    def m(self) -> int:
        return len(self.A)

    def density(self) -> float:
        """Fraction of ones over all m*n^2 entries."""
        return float(np.mean([Ai.mean() for Ai in self.A]))


@dataclass(frozen=True)
class SbmSpec:
    """Multi-layer SBM: memberships plus per-layer block matrices.

    ``tau`` assigns each vertex an outgoing block in {0, ..., K-1}; for
    directed models ``phi`` assigns the incoming block.  ``B`` holds one
    K x K probability matrix per layer.
    """

    tau: np.ndarray
    B: tuple[np.ndarray, ...]
    phi: np.ndarray | None = None

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.int64).ravel()
        B = tuple(as_matrix(Bi, f"B[{i}]") for i, Bi in enumerate(self.B))
        if not B:
            raise ValueError("at least one block matrix is required")
        K = B[0].shape[0]
        for i, Bi in enumerate(B):
            if Bi.shape != (K, K):
                raise ValueError(f"B[{i}] must be {K}x{K}")
            if Bi.min() < 0.0 or Bi.max() > 1.0:
                raise ValueError(f"B[{i}] entries must lie in [0,1]")
        self._check_labels(tau, K, "tau")
        phi = self.phi
        if phi is not None:
            phi = np.asarray(phi, dtype=np.int64).ravel()
            if phi.size != tau.size:
                raise ValueError("tau and phi must have equal length")
            self._check_labels(phi, K, "phi")
        else:
            for i, Bi in enumerate(B):
                if np.max(np.abs(Bi - Bi.T)) > 0.0:
                    raise ValueError(
                        f"undirected spec (phi=None) requires symmetric B[{i}]"
                    )
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "phi", phi)

    @staticmethod
    def _check_labels(labels: np.ndarray, K: int, name: str) -> None:
        if labels.min() < 0 or labels.max() >= K:
            raise ValueError(f"{name} labels must lie in [0, {K - 1}]")
        counts = np.bincount(labels, minlength=K)
        if np.any(counts == 0):
            empty = np.flatnonzero(counts == 0).tolist()
            raise ValueError(f"{name} leaves blocks {empty} empty")

    @property
    def n(self) -> int:
        return self.tau.size

    @property
    def K(self) -> int:
        return self.B[0].shape[0]

    @property
    def m(self) -> int:
        return len(self.B)

    @property
    def directed(self) -> bool:
        return self.phi is not None


def _membership_matrix(labels: np.ndarray, K: int) -> np.ndarray:
    Z = np.zeros((labels.size, K))
    Z[np.arange(labels.size), labels] = 1.0
    return Z


def random_memberships(n: int, K: int, rng: np.random.Generator,
                       max_tries: int = 1000) -> np.ndarray:
    """iid uniform labels over [K], resampled until every block is non-empty."""
    for _ in range(max_tries):
        labels = rng.integers(0, K, size=n)
        if np.bincount(labels, minlength=K).min() > 0:
            return labels
    raise RuntimeError(f"could not draw non-empty {K}-block memberships for n={n}")


def sbm_to_cosie(spec: SbmSpec) -> CosieModel:
    """Map a multi-layer SBM into COSIE form.

    U = Z_tau (Z_tau^T Z_tau)^{-1/2}, V analogous with phi, and
    R^(i) = (Z_tau^T Z_tau)^{1/2} B^(i) (Z_phi^T Z_phi)^{1/2}, which keeps
    U R^(i) V^T equal to Z_tau B^(i) Z_phi^T entrywise.
    """
    K = spec.K
    Zt = _membership_matrix(spec.tau, K)
    ct = Zt.sum(axis=0)
    U = Zt / np.sqrt(ct)
    if spec.directed:
        Zp = _membership_matrix(spec.phi, K)
        cp = Zp.sum(axis=0)
        V = Zp / np.sqrt(cp)
    else:
        cp = ct
        V = U
    scale = np.sqrt(ct)[:, None] * np.sqrt(cp)[None, :]
    R = tuple(scale * Bi for Bi in spec.B)
    return CosieModel(U=U, V=V if spec.directed else U, R=R, directed=spec.directed)


def sample_cosie(model: CosieModel, rng: np.random.Generator) -> GraphSample:
    """Draw independent Bernoulli adjacency matrices from a COSIE model.

    Directed models sample all n^2 entries independently; undirected
    models sample the upper triangle (diagonal included, so self-loops
    are allowed) and mirror it below.
    """
    n = model.n
    mats = []
    for i in range(model.m):
        P = model.probability(i)
        if model.directed:
            A = (rng.random((n, n)) < P).astype(np.float64)
        else:
            A = np.zeros((n, n))
            iu, ju = np.triu_indices(n)
            draws = (rng.random(iu.size) < P[iu, ju]).astype(np.float64)
            A[iu, ju] = draws
            A[ju, iu] = draws
        mats.append(A)
    return GraphSample(A=tuple(mats), directed=model.directed)


@dataclass(frozen=True)
class MultinessModel:
    """Common/individual low-rank truth P^(i) = Xc Xc^T + Xs^(i) Xs^(i)^T."""

    Xc: np.ndarray
    Xs: tuple[np.ndarray, ...]
    sigma: float

    def __post_init__(self):
        Xc = as_matrix(self.Xc, "Xc")
        Xs = tuple(as_matrix(Xi, f"Xs[{i}]") for i, Xi in enumerate(self.Xs))
        if not Xs:
            raise ValueError("at least one individual factor is required")
        n = Xc.shape[0]
        d2 = Xs[0].shape[1]
        for i, Xi in enumerate(Xs):
            if Xi.shape != (n, d2):
                raise ValueError(f"Xs[{i}] must be {n}x{d2}")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "Xc", Xc)
        object.__setattr__(self, "Xs", Xs)

    @property
    def n(self) -> int:
        return self.Xc.shape[0]

    @property
    def m(self) -> int:
        return len(self.Xs)

    @property
    def d1(self) -> int:
        return self.Xc.shape[1]

    @property
    def d2(self) -> int:
        return self.Xs[0].shape[1]

    def common(self) -> np.ndarray:
        return self.Xc @ self.Xc.T

    def individual(self, i: int) -> np.ndarray:
        return self.Xs[i] @ self.Xs[i].T

    def expectation(self, i: int) -> np.ndarray:
        return self.common() + self.individual(i)


def sample_multiness(model: MultinessModel,
                     rng: np.random.Generator) -> list[np.ndarray]:
    """Observe A^(i) = P^(i) + E^(i) with symmetric Gaussian noise.

    Upper-triangular noise entries (diagonal included) are iid
    N(0, sigma^2) and mirrored below the diagonal.
    """
    n = model.n
    out = []
    iu, ju = np.triu_indices(n)
    for i in range(model.m):
        E = np.zeros((n, n))
        draws = model.sigma * rng.standard_normal(iu.size)
        E[iu, ju] = draws
        E[ju, iu] = draws
        out.append(model.expectation(i) + E)
    return out


@dataclass(frozen=True)
class SpikedModel:
    """Spiked covariance Sigma = U Lam U^T + sigma2 (I - U U^T).

    ``lam`` holds the d spiked eigenvalues sorted descending, all strictly
    above the noise level ``sigma2 > 0``.
    """

    U: np.ndarray
    lam: np.ndarray
    sigma2: float

    def __post_init__(self):
        U = as_matrix(self.U, "U")
        lam = np.asarray(self.lam, dtype=np.float64).ravel()
        _check_orthonormal(U, "U")
        if lam.size != U.shape[1]:
            raise ValueError("lam must have one entry per column of U")
        if np.any(np.diff(lam) > 0):
            raise ValueError("lam must be sorted non-increasing")
        if not (self.sigma2 > 0):
            raise ValueError("sigma2 must be positive")
        if lam[-1] <= self.sigma2:
            raise ValueError(
                f"smallest spike {lam[-1]:.6g} must exceed sigma2={self.sigma2:.6g}"
            )
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "lam", lam)

    @property
    def D(self) -> int:
        return self.U.shape[0]

    @property
    def d(self) -> int:
        return self.U.shape[1]

    def covariance(self) -> np.ndarray:
        PU = self.U @ self.U.T
        return self.U @ np.diag(self.lam) @ self.U.T + self.sigma2 * (np.eye(self.D) - PU)

    def trace(self) -> float:
        return float(self.lam.sum() + (self.D - self.d) * self.sigma2)

    @property
    def effective_rank(self) -> float:
        """tr(Sigma) / lambda_1, the complexity measure for sample-size needs."""
        return self.trace() / float(self.lam[0])


def sample_spiked(model: SpikedModel, n: int, m: int,
                  rng: np.random.Generator,
                  demean: bool = False) -> list[np.ndarray]:
    """Draw m nodes x n Gaussian samples each from the spiked model.

    Columns are drawn as U (Lam - sigma2 I)^{1/2} F + sigma Z with F, Z
    standard Gaussian, which reproduces N(0, Sigma) exactly.  With
    ``demean`` set, a common mean vector (drawn once from the stream) is
    added to every column so downstream consumers must demean; this
    requires n >= d + 1 so the demeaned covariance keeps enough samples.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if demean and n < model.d + 1:
        raise ValueError(f"demeaning requires n >= d+1 = {model.d + 1}, got n={n}")
    D, d = model.D, model.d
    root = np.sqrt(model.lam - model.sigma2)
    sigma = np.sqrt(model.sigma2)
    mu = rng.standard_normal(D) if demean else None
    out = []
    for _ in range(m):
        F = rng.standard_normal((d, n))
        Z = rng.standard_normal((D, n))
        X = model.U @ (root[:, None] * F) + sigma * Z
        if mu is not None:
            X = X + mu[:, None]
        out.append(X)
    return out


# ---------------------------------------------------------------------------
# Import / export
# ---------------------------------------------------------------------------

def save_model(obj: CosieModel | SbmSpec, path) -> None:
    """Write a model document (JSON with fixed field names)."""
    path = Path(path)
    if isinstance(obj, CosieModel):
        doc = {
            "n": obj.n,
            "d": obj.d,
            "directed": obj.directed,
            "U": obj.U.tolist(),
            "V": obj.V.tolist(),
            "R": [Ri.tolist() for Ri in obj.R],
        }
    elif isinstance(obj, SbmSpec):
        doc = {
            "sbm": {
                "tau": obj.tau.tolist(),
                "phi": obj.phi.tolist() if obj.phi is not None else None,
                "B": [Bi.tolist() for Bi in obj.B],
            }
        }
    else:
        raise TypeError(f"cannot export {type(obj).__name__}")
    path.write_text(json.dumps(doc, sort_keys=True))


def load_model(path) -> CosieModel:
    """Read a model document; SBM documents are mapped into COSIE form."""
    doc = json.loads(Path(path).read_text())
    if "sbm" in doc:
        s = doc["sbm"]
        spec = SbmSpec(
            tau=np.asarray(s["tau"], dtype=np.int64),
            B=tuple(np.asarray(Bi, dtype=np.float64) for Bi in s["B"]),
            phi=None if s.get("phi") is None else np.asarray(s["phi"], dtype=np.int64),
        )
        return sbm_to_cosie(spec)
    model = CosieModel(
        U=np.asarray(doc["U"], dtype=np.float64),
        V=np.asarray(doc["V"], dtype=np.float64),
        R=tuple(np.asarray(Ri, dtype=np.float64) for Ri in doc["R"]),
        directed=bool(doc["directed"]),
    )
    if model.n != doc["n"] or model.d != doc["d"]:
        raise ValueError("model document dimensions disagree with its matrices")
    return model


def save_adjacency_csv(sample: GraphSample, outdir) -> list[Path]:
    """Write one dense CSV per layer; returns the paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, Ai in enumerate(sample.A):
        p = outdir / f"layer_{i + 1:03d}.csv"
        np.savetxt(p, Ai.astype(np.int64), fmt="%d", delimiter=",")
        paths.append(p)
    return paths


def load_adjacency_csv(paths, directed: bool = True) -> GraphSample:
    mats = tuple(np.loadtxt(p, delimiter=",", ndmin=2) for p in paths)
    return GraphSample(A=mats, directed=directed)


def save_edge_list(sample: GraphSample, path) -> None:
    """Write edges as (i, j, layer) triples, 1-based, one per line."""
    path = Path(path)
    lines = ["i,j,layer"]
    for layer, Ai in enumerate(sample.A, start=1):
        rows, cols = np.nonzero(Ai)
        for r, c in zip(rows, cols):
            lines.append(f"{r + 1},{c + 1},{layer}")
    path.write_text("\n".join(lines) + "\n")


def load_edge_list(path, n: int, m: int, directed: bool = True) -> GraphSample:
    mats = [np.zeros((n, n)) for _ in range(m)]
    with open(path) as fh:
        header = fh.readline()
        if header.strip() != "i,j,layer":
            raise ValueError("edge list must start with header 'i,j,layer'")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            i, j, layer = (int(tok) for tok in line.split(","))
            mats[layer - 1][i - 1, j - 1] = 1.0
    return GraphSample(A=tuple(mats), directed=directed)
