"""Clustering: Lloyd k-means, Ward agglomeration, spectral partitioning,
and DBSCAN. Everything is deterministic given (data, params, seed)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSimilarity, KTooLarge
from .numerics import pairwise_distances, seeded_rng, spawn_seeds, sym_eig


@dataclass
class ClusterAssignment:
    labels: np.ndarray            # int, -1 reserved for DBSCAN noise
    k_effective: int
    method: str
    params: dict = field(default_factory=dict)
    seed: int | None = None


@dataclass
class KMeansModel:
    centroids: np.ndarray
    inertia: float
    iterations_run: int
    n_init_best: int
    inertia_trace: list = field(default_factory=list)


# --------------------------------------------------------------------------
# k-means


def _kmeans_pp_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = x.shape[0]
    centroids = np.empty((k, x.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = x[first]
    d2 = np.sum((x - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids[i] = x[idx]
        d2 = np.minimum(d2, np.sum((x - centroids[i]) ** 2, axis=1))
    return centroids


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float):
    k = centroids.shape[0]
    trace = []
    labels = np.zeros(x.shape[0], dtype=int)
    for it in range(1, max_iter + 1):
        d2 = (np.sum(x**2, axis=1)[:, None] - 2.0 * x @ centroids.T
              + np.sum(centroids**2, axis=1)[None, :])
        labels = np.argmin(d2, axis=1)
        new_centroids = centroids.copy()
        for j in range(k):
            members = x[labels == j]
            if len(members):
                new_centroids[j] = members.mean(axis=0)
        # repair empty clusters with the point farthest from its centroid
        for j in range(k):
            if not np.any(labels == j):
                dist_own = np.sum((x - new_centroids[labels]) ** 2, axis=1)
                far = int(np.argmax(dist_own))
                new_centroids[j] = x[far]
                labels[far] = j
                for jj in range(k):
                    members = x[labels == jj]
                    if len(members):
                        new_centroids[jj] = members.mean(axis=0)
        inertia = float(np.sum((x - new_centroids[labels]) ** 2))
        trace.append(inertia)
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break
    return labels, centroids, trace, it


def kmeans(x: np.ndarray, k: int, seed: int = 0, n_init: int = 10,
           max_iter: int = 300, tol: float = 1e-4) -> tuple[ClusterAssignment, KMeansModel]:
    """Best-of-n_init Lloyd runs with k-means++ seeding."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} outside [1, n={n}]")
    best = None
    for restart, child_seed in enumerate(spawn_seeds(seed, n_init)):
        rng = seeded_rng(child_seed)
        init = _kmeans_pp_init(x, k, rng)
        labels, centroids, trace, iters = _lloyd(x, init, max_iter, tol)
        inertia = trace[-1]
        if best is None or inertia < best[0] - 1e-12:
            best = (inertia, labels, centroids, trace, iters, restart)
    inertia, labels, centroids, trace, iters, restart = best
    labels = _relabel_contiguous(labels)
    model = KMeansModel(centroids=centroids, inertia=inertia,
                        iterations_run=iters, n_init_best=restart,
                        inertia_trace=trace)
    assign = ClusterAssignment(labels=labels, k_effective=len(set(labels.tolist())),
                               method="kmeans", params={"k": k, "n_init": n_init},
                               seed=seed)
    return assign, model


def _relabel_contiguous(labels: np.ndarray) -> np.ndarray:
    """Renumber clusters 0..k-1 in first-appearance order (-1 preserved)."""
    remap: dict[int, int] = {}
    out = np.empty_like(labels)
    for i, lab in enumerate(labels):
        if lab == -1:
            out[i] = -1
            continue
        if lab not in remap:
            remap[lab] = len(remap)
        out[i] = remap[lab]
    return out


# --------------------------------------------------------------------------
# Ward agglomeration


def ward(x: np.ndarray, k: int) -> tuple[ClusterAssignment, list]:
    """Agglomerative merging minimizing the within-cluster variance increase.

    Merge costs are maintained with the Lance-Williams recurrence (exact for
    Ward); ties break on the lowest pair of cluster indices. Returns the
    assignment cut at k clusters and the full merge dendrogram
    [(a, b, cost, new_id), ...].
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise KTooLarge(f"k={k} outside [1, n={n}]")

    # active clusters keyed by id; ids 0..n-1 are leaves, merges get n, n+1, ...
    size = {i: 1 for i in range(n)}
    members = {i: [i] for i in range(n)}
    d2 = pairwise_distances(x, "squared_euclidean")
    cost = {}
    for i in range(n):
        for j in range(i + 1, n):
            cost[(i, j)] = 0.5 * d2[i, j]   # n=1,1 -> (1*1/2)*||diff||^2

    dendrogram = []
    next_id = n
    active = set(range(n))
    while len(active) > k:
        (a, b), merge_cost = min(cost.items(), key=lambda kv: (kv[1], kv[0]))
        del cost[(a, b)]
        new = next_id
        next_id += 1
        for c in sorted(active - {a, b}):
            key_ac = (min(a, c), max(a, c))
            key_bc = (min(b, c), max(b, c))
            d_ac = cost.pop(key_ac)
            d_bc = cost.pop(key_bc)
            na, nb, nc = size[a], size[b], size[c]
            total = na + nb + nc
            cost[(c, new)] = ((na + nc) * d_ac + (nb + nc) * d_bc
                              - nc * merge_cost) / total
        size[new] = size[a] + size[b]
        members[new] = members[a] + members[b]
        active.discard(a)
        active.discard(b)
        active.add(new)
        dendrogram.append((a, b, merge_cost, new))

    labels = np.empty(n, dtype=int)
    for rank, cid in enumerate(sorted(active, key=lambda c: min(members[c]))):
        for idx in members[cid]:
            labels[idx] = rank
    assign = ClusterAssignment(labels=labels, k_effective=len(active),
                               method="ward", params={"k": k})
    return assign, dendrogram


# --------------------------------------------------------------------------
# spectral


@dataclass
class SimilarityConfig:
    kind: str = "rbf"              # 'rbf', 'knn', or 'precomputed'
    sigma: float | None = None     # default: median pairwise distance
    n_neighbors: int = 10
    matrix: np.ndarray | None = None


def similarity_matrix(x: np.ndarray, config: SimilarityConfig) -> np.ndarray:
    if config.kind == "precomputed":
        return np.asarray(config.matrix, dtype=float)
    d = pairwise_distances(x, "euclidean")
    if config.kind == "rbf":
        sigma = config.sigma
        if sigma is None:
            iu = np.triu_indices(d.shape[0], k=1)
            sigma = float(np.median(d[iu])) if iu[0].size else 1.0
        if sigma <= 0:
            sigma = 1.0
        w = np.exp(-(d**2) / (2.0 * sigma**2))
        np.fill_diagonal(w, 0.0)
        return w
    if config.kind == "knn":
        n = d.shape[0]
        w = np.zeros((n, n))
        for i in range(n):
            order = np.argsort(d[i], kind="stable")
            neigh = [j for j in order if j != i][: config.n_neighbors]
            w[i, neigh] = 1.0
        w = np.maximum(w, w.T)
        return w
    raise DegenerateSimilarity(f"unknown similarity kind {config.kind!r}")


def spectral_basis(x: np.ndarray, similarity: SimilarityConfig | None = None):
    """Eigendecomposition of the symmetric normalized Laplacian.

    Computed once and reusable across different k (the k smallest
    eigenvectors are a suffix of the descending-sorted basis).
    """
    similarity = similarity or SimilarityConfig()
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    w = similarity_matrix(x, similarity)
    if np.all(w == 0):
        raise DegenerateSimilarity("all-zero similarity matrix")
    n = w.shape[0]
    deg = w.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    l_sym = np.eye(n) - (inv_sqrt[:, None] * w * inv_sqrt[None, :])
    return sym_eig(l_sym)


def spectral(x: np.ndarray, k: int, seed: int = 0,
             similarity: SimilarityConfig | None = None,
             basis=None) -> ClusterAssignment:
    """Normalized-Laplacian spectral clustering.

    Rows are embedded into the k eigenvectors of L_sym with the smallest
    eigenvalues, row-normalized, and partitioned with k-means.
    """
    similarity = similarity or SimilarityConfig()
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if basis is None:
        basis = spectral_basis(x, similarity)
    eig = basis
    n = eig.eigenvectors.shape[0]
    if not 2 <= k <= n:
        raise KTooLarge(f"k={k} outside [2, n={n}]")
    # eigenvalues are descending; take the k smallest
    embed = eig.eigenvectors[:, -k:]
    norms = np.linalg.norm(embed, axis=1)
    embed = embed / np.where(norms > 0, norms, 1.0)[:, None]
    assign, _ = kmeans(embed, k, seed=seed)
    assign.method = "spectral"
    assign.params = {"k": k, "similarity": similarity.kind}
    assign.seed = seed
    return assign


# --------------------------------------------------------------------------
# DBSCAN


def dbscan(x: np.ndarray, eps: float, min_samples: int) -> ClusterAssignment:
    """Density-connected expansion; noise labeled -1.

    Neighborhoods are inclusive (<= eps) and contain the query point.
    Expansion scans rows in index order, so the outcome is deterministic.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if eps <= 0 or min_samples < 1:
        raise KTooLarge("eps must be > 0 and min_samples >= 1")
    n = x.shape[0]
    d = pairwise_distances(x, "euclidean")
    neighbors = [np.flatnonzero(d[i] <= eps) for i in range(n)]  # includes i
    core = np.array([len(nb) >= min_samples for nb in neighbors])
    labels = np.full(n, -2, dtype=int)   # -2 = unvisited
    cluster = 0
    for i in range(n):
        if labels[i] != -2:
            continue
        if not core[i]:
            labels[i] = -1
            continue
        labels[i] = cluster
        frontier = list(neighbors[i])
        while frontier:
            j = frontier.pop(0)
            if labels[j] == -1:
                labels[j] = cluster       # border point claimed by this cluster
            if labels[j] != -2:
                continue
            labels[j] = cluster
            if core[j]:
                frontier.extend(neighbors[j])
        cluster += 1
    labels = _relabel_contiguous(labels)
    k_eff = len({l for l in labels.tolist() if l >= 0})
    return ClusterAssignment(labels=labels, k_effective=max(k_eff, 0),
                             method="dbscan",
                             params={"eps": eps, "min_samples": min_samples})


def default_eps(x: np.ndarray, k: int = 4) -> float:
    """Median k-NN distance, a standard exploratory eps."""
    d = pairwise_distances(np.asarray(x, dtype=float), "euclidean")
    n = d.shape[0]
    kth = []
    for i in range(n):
        row = np.sort(np.delete(d[i], i))
        kth.append(row[min(k, n - 2)] if n > 1 else 0.0)
    return float(np.median(kth))
