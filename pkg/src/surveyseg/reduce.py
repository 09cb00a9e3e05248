"""Dimensionality reduction: PCA, truncated SVD, and exact t-SNE.

All methods z-score each column first (zero-variance columns are zeroed,
not divided), because the encoded matrix mixes 0/1 indicators with ordinal
codes and counts. Pass standardize=False to opt out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooLarge, PerplexityTooLarge, RankTooLarge
from .numerics import pairwise_distances, seeded_rng, svd


@dataclass
class Embedding:
    coords: np.ndarray
    method: str
    d: int
    diagnostics: dict = field(default_factory=dict)
    seed: int | None = None


@dataclass
class TsneConfig:
    perplexity: float | None = None   # default min(30, (n-1)/3)
    iterations: int = 1000
    learning_rate: float = 200.0
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    momentum_start: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    seed: int = 0


def standardize(x: np.ndarray) -> np.ndarray:
    """Column z-scores; constant columns become exactly zero."""
    x = np.asarray(x, dtype=float)
    mean = x.mean(axis=0)
    std = x.std(axis=0, ddof=1) if x.shape[0] > 1 else np.ones(x.shape[1])
    safe = np.where(std > 0, std, 1.0)
    z = (x - mean) / safe
    z[:, std == 0] = 0.0
    return z


def pca(x: np.ndarray, d: int, standardize_input: bool = True) -> tuple[Embedding, np.ndarray]:
    """Project onto the top-d principal axes; returns (embedding, loadings).

    Computed through the SVD of the centered/standardized matrix, which is
    the stable route when p approaches or exceeds n.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if d > min(n - 1, p):
        raise DimensionTooLarge(f"d={d} exceeds min(n-1, p)={min(n - 1, p)}")
    z = standardize(x) if standardize_input else x - x.mean(axis=0)
    res = svd(z, min(n, p))
    eigvals = res.singular_values**2 / (n - 1)
    total = float(eigvals.sum())
    loadings = res.v[:, :d].copy()
    # sign convention: largest-|loading| entry of each axis is positive
    for i in range(d):
        j = int(np.argmax(np.abs(loadings[:, i])))
        if loadings[j, i] < 0:
            loadings[:, i] = -loadings[:, i]
    coords = z @ loadings
    ratios = (eigvals[:d] / total).tolist() if total > 0 else [0.0] * d
    emb = Embedding(
        coords=coords, method="pca", d=d,
        diagnostics={"explained_variance_ratio": ratios,
                     "eigenvalues": eigvals[:d].tolist()},
    )
    return emb, loadings


def svd_reduce(x: np.ndarray, d: int, standardize_input: bool = True) -> Embedding:
    """coords = U_d Sigma_d of the centered (standardized) matrix."""
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if d > min(n, p, 30):
        raise RankTooLarge(f"d={d} exceeds min(n, p, 30)={min(n, p, 30)}")
    z = standardize(x) if standardize_input else x - x.mean(axis=0)
    res = svd(z, d)
    # match the PCA sign convention on the right singular vectors
    coords = res.u * res.singular_values
    for i in range(d):
        j = int(np.argmax(np.abs(res.v[:, i])))
        if res.v[j, i] < 0:
            coords[:, i] = -coords[:, i]
    recon_err = _frobenius_gap(z, res)
    total = float(np.sum(z**2))
    ratios = ((res.singular_values**2) / total).tolist() if total > 0 else [0.0] * d
    return Embedding(
        coords=coords, method="svd", d=d,
        diagnostics={"reconstruction_error": recon_err,
                     "explained_variance_ratio": ratios},
    )


def _frobenius_gap(z: np.ndarray, res) -> float:
    approx = (res.u * res.singular_values) @ res.v.T
    return float(np.linalg.norm(z - approx))


# --------------------------------------------------------------------------
# t-SNE


def tsne_affinities(x: np.ndarray, perplexity: float,
                    tol: float = 1e-5, max_steps: int = 50) -> np.ndarray:
    """Symmetrized Gaussian affinities P calibrated to the target perplexity.

    Per-point precision beta is found by bisection on log-perplexity.
    Returns an n x n matrix with zero diagonal summing to 1.
    """
    d2 = pairwise_distances(x, "squared_euclidean")
    n = d2.shape[0]
    target = math.log(perplexity)
    p_cond = np.zeros((n, n))
    for i in range(n):
        row = np.delete(d2[i], i)
        beta_lo, beta_hi = 0.0, math.inf
        beta = 1.0
        for _ in range(max_steps):
            logits = -beta * row
            logits -= logits.max()
            w = np.exp(logits)
            s = w.sum()
            p = w / s
            h = -np.sum(p * np.log(np.clip(p, 1e-300, None)))  # Shannon entropy
            diff = h - target
            if abs(diff) < tol:
                break
            if diff > 0:           # too flat: raise beta
                beta_lo = beta
                beta = beta * 2.0 if beta_hi == math.inf else 0.5 * (beta_lo + beta_hi)
            else:
                beta_hi = beta
                beta = 0.5 * (beta_lo + beta_hi)
        p_full = np.insert(p, i, 0.0)
        p_cond[i] = p_full
    p_sym = (p_cond + p_cond.T) / (2.0 * n)
    np.fill_diagonal(p_sym, 0.0)
    return p_sym


def _tsne_q(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d2 = pairwise_distances(y, "squared_euclidean")
    num = 1.0 / (1.0 + d2)
    np.fill_diagonal(num, 0.0)
    q = num / num.sum()
    return q, num


def tsne_kl(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / np.clip(q[mask], 1e-300, None))))


def tsne(x: np.ndarray, config: TsneConfig | None = None,
         standardize_input: bool = True) -> Embedding:
    """Exact-gradient 2D t-SNE with early exaggeration and momentum.

    O(n^2) per iteration; more than adequate at survey scale.
    """
    config = config or TsneConfig()
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if n < 5:
        raise PerplexityTooLarge("need at least 5 rows")
    perplexity = config.perplexity
    if perplexity is None:
        perplexity = min(30.0, (n - 1) / 3.0)
    if not 1.0 <= perplexity <= (n - 1) / 3.0:
        raise PerplexityTooLarge(
            f"perplexity {perplexity} outside [1, (n-1)/3] for n={n}")

    z = standardize(x) if standardize_input else x
    p = tsne_affinities(z, perplexity)

    rng = seeded_rng(config.seed)
    y = rng.normal(0.0, 1e-4, size=(n, 2))
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)

    kl_trace = []
    for it in range(config.iterations):
        p_eff = p * config.early_exaggeration if it < config.exaggeration_iters else p
        q, num = _tsne_q(y)
        pq = (p_eff - q) * num
        grad = 4.0 * (np.diag(pq.sum(axis=1)) - pq) @ y
        momentum = (config.momentum_start if it < config.momentum_switch
                    else config.momentum_final)
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.clip(gains, 0.01, None, out=gains)
        velocity = momentum * velocity - config.learning_rate * gains * grad
        y = y + velocity
        y = y - y.mean(axis=0)
        if (it + 1) % 50 == 0 or it == config.iterations - 1:
            q, _ = _tsne_q(y)
            kl_trace.append(tsne_kl(p, q))
    q, _ = _tsne_q(y)
    return Embedding(
        coords=y, method="tsne", d=2, seed=config.seed,
        diagnostics={"final_kl": tsne_kl(p, q), "kl_trace": kl_trace,
                     "perplexity": perplexity},
    )
