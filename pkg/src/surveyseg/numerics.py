"""Deterministic numeric kernels shared by the analysis modules.

Eigendecomposition uses a cyclic Jacobi sweep (matrices here are at most a
few hundred square, so O(n^3) sweeps are fine and fully reproducible).
Randomness everywhere in the toolkit flows through :func:`seeded_rng`, which
wraps numpy's PCG64 so that a given 64-bit seed produces the same stream on
every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyInput,
    InvalidDf,
    NoConvergence,
    NotSymmetric,
    RankTooLarge,
)

_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 100
_GAMMA_TOL = 1e-14
_GAMMA_MAX_ITER = 10_000


@dataclass
class EigenResult:
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # orthonormal columns, eigenvectors[:, i] pairs with eigenvalues[i]


@dataclass
class SvdResult:
    u: np.ndarray
    singular_values: np.ndarray  # descending, nonnegative
    v: np.ndarray                # right singular vectors as columns


def seeded_rng(seed: int) -> np.random.Generator:
    """Deterministic generator (PCG64 seeded through SeedSequence)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_seeds(seed: int, n: int) -> list[int]:
    """Derive n independent child seeds for parallel or repeated work."""
    ss = np.random.SeedSequence(seed)
    return [int(child.generate_state(1, np.uint64)[0]) for child in ss.spawn(n)]


def sym_eig(a: np.ndarray) -> EigenResult:
    """All eigenpairs of a symmetric matrix via cyclic Jacobi rotations.

    Eigenvalues are returned in descending order; each eigenvector is
    sign-fixed so its largest-magnitude component is positive.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a - a.T).max() > 1e-10 * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")

    n = a.shape[0]
    m = 0.5 * (a + a.T)  # symmetrize round-off
    v = np.eye(n)
    norm = np.linalg.norm(m, "fro")
    if n == 1 or norm == 0.0:
        return _finalize_eig(np.diag(m).copy(), v)

    threshold = _JACOBI_TOL * norm
    for _ in range(_JACOBI_MAX_SWEEPS):
        # norm of the strictly off-diagonal part, computed directly (the
        # sum(m^2) - sum(diag^2) form cancels catastrophically near zero)
        off = float(np.linalg.norm(m - np.diag(np.diag(m))))
        if off <= threshold:
            return _finalize_eig(np.diag(m).copy(), v)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = m[p, q]
                if abs(apq) <= threshold / (n * n):
                    continue
                app, aqq = m[p, p], m[q, q]
                theta = (aqq - app) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta**2 + 1.0))
                c = 1.0 / math.sqrt(t**2 + 1.0)
                s = t * c
                rot_p = c * m[:, p] - s * m[:, q]
                rot_q = s * m[:, p] + c * m[:, q]
                m[:, p], m[:, q] = rot_p, rot_q
                m[p, :], m[q, :] = m[:, p].copy(), m[:, q].copy()
                # recompute the 2x2 block exactly
                m[p, p] = app - t * apq
                m[q, q] = aqq + t * apq
                m[p, q] = m[q, p] = 0.0
                vp = c * v[:, p] - s * v[:, q]
                vq = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vp, vq
    raise NoConvergence(f"Jacobi sweep cap ({_JACOBI_MAX_SWEEPS}) reached")


def _finalize_eig(eigenvalues: np.ndarray, vectors: np.ndarray) -> EigenResult:
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = vectors[:, order]
    for i in range(vectors.shape[1]):
        j = int(np.argmax(np.abs(vectors[:, i])))
        if vectors[j, i] < 0:
            vectors[:, i] = -vectors[:, i]
    return EigenResult(eigenvalues=eigenvalues, eigenvectors=vectors)


def svd(x: np.ndarray, k: int | None = None) -> SvdResult:
    """Thin SVD via eigendecomposition of the Gram matrix of the smaller side.

    Adequate at survey scale; zero singular directions are completed with a
    deterministic orthonormal basis so the factors stay orthonormal.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    r = min(n, p)
    if k is None:
        k = r
    if k > r:
        raise RankTooLarge(f"k={k} exceeds min(n, p)={r}")

    if p <= n:
        gram = x.T @ x
        eig = sym_eig(gram)
        sing = np.sqrt(np.clip(eig.eigenvalues[:k], 0.0, None))
        v = eig.eigenvectors[:, :k]
        u = _left_factors(x, v, sing)
    else:
        gram = x @ x.T
        eig = sym_eig(gram)
        sing = np.sqrt(np.clip(eig.eigenvalues[:k], 0.0, None))
        u = eig.eigenvectors[:, :k]
        v = _left_factors(x.T, u, sing)
    return SvdResult(u=u, singular_values=sing, v=v)


def _left_factors(x: np.ndarray, right: np.ndarray, sing: np.ndarray) -> np.ndarray:
    """U = X V / sigma, with orthonormal completion for zero singular values."""
    n = x.shape[0]
    k = right.shape[1]
    u = np.zeros((n, k))
    tol = max(sing[0], 1.0) * 1e-12 if k else 0.0
    for i in range(k):
        if sing[i] > tol:
            u[:, i] = x @ right[:, i] / sing[i]
        else:
            u[:, i] = _complete_column(u, i, n)
    return u


def _complete_column(u: np.ndarray, i: int, n: int) -> np.ndarray:
    for basis in range(n):
        cand = np.zeros(n)
        cand[basis] = 1.0
        for j in range(i):
            cand -= (u[:, j] @ cand) * u[:, j]
        nrm = np.linalg.norm(cand)
        if nrm > 1e-6:
            return cand / nrm
    raise NoConvergence("could not complete an orthonormal basis")


def chi2_sf(x: float, df: int) -> float:
    """Upper-tail chi-square probability Q(df/2, x/2).

    Regularized incomplete gamma: power series below the a+1 switch point,
    Lentz continued fraction above (absolute error <= 1e-10).
    """
    if not isinstance(df, (int, np.integer)) or df < 1:
        raise InvalidDf(f"df must be a positive integer, got {df!r}")
    if x < 0:
        raise InvalidDf(f"statistic must be >= 0, got {x}")
    if x == 0.0:
        return 1.0
    a = 0.5 * df
    xs = 0.5 * x
    if xs < a + 1.0:
        return 1.0 - _gamma_p_series(a, xs)
    return _gamma_q_contfrac(a, xs)


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_TOL:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_q_contfrac(a: float, x: float) -> float:
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
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
        if abs(delta - 1.0) < _GAMMA_TOL:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def percentile(values, q: float) -> float:
    """Linear-interpolation quantile (rank q/100 * (m-1) on sorted values)."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        raise EmptyInput("percentile of an empty list")
    if not np.all(np.isfinite(arr)):
        raise EmptyInput("percentile requires finite values")
    return float(np.percentile(arr, q))


def pairwise_distances(x: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """Dense symmetric distance matrix with an exactly zero diagonal."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    sq = np.sum(x**2, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.clip(d2, 0.0, None, out=d2)
    np.fill_diagonal(d2, 0.0)
    d2 = 0.5 * (d2 + d2.T)
    if metric == "squared_euclidean":
        return d2
    if metric == "euclidean":
        return np.sqrt(d2)
    raise ValueError(f"unknown metric {metric!r}")
