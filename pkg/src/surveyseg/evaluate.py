"""Internal validation, stability, and model selection for clusterings."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import cluster as _cluster
from .errors import (
    ClassTooSmall,
    CoincidentCentroids,
    DegenerateK,
    LengthMismatch,
    SingleCluster,
)
from .ingest import DataTable
from .numerics import pairwise_distances, seeded_rng, spawn_seeds


@dataclass
class ValidationReport:
    silhouette_mean: float
    per_sample_silhouette: np.ndarray
    calinski_harabasz: float
    davies_bouldin: float
    k: int
    n_scored: int
    n_noise_excluded: int = 0
    ch_infinite: bool = False


@dataclass
class StabilityReport:
    ari_samples: list[float]
    ari_mean: float
    ari_sd: float
    per_cluster_jaccard: dict[int, float]
    n_replicates: int
    n_skipped: int
    seed: int


@dataclass
class ProbeReport:
    cv_accuracy: float
    fold_accuracies: list[float]
    l2: float
    iterations: list[int]


def _strip_noise(x: np.ndarray, labels: np.ndarray):
    mask = labels >= 0
    return x[mask], labels[mask], int((~mask).sum())


def silhouette(x: np.ndarray, labels: np.ndarray,
               precomputed: bool = False) -> tuple[float, np.ndarray, int]:
    """Mean and per-sample silhouette; singleton clusters score 0.

    DBSCAN noise rows (-1) are excluded before scoring. Returns
    (mean, per-sample values, n_noise_excluded).
    """
    labels = np.asarray(labels)
    x = np.asarray(x, dtype=float)
    if precomputed:
        keep = labels >= 0
        d = x[np.ix_(keep, keep)]
        labels_kept = labels[keep]
        n_noise = int((~keep).sum())
    else:
        if x.ndim == 1:
            x = x[:, None]
        xk, labels_kept, n_noise = _strip_noise(x, labels)
        d = pairwise_distances(xk, "euclidean")
    uniq = sorted(set(labels_kept.tolist()))
    if len(uniq) < 2:
        raise SingleCluster("silhouette needs at least two clusters")
    n = len(labels_kept)
    svals = np.zeros(n)
    masks = {c: labels_kept == c for c in uniq}
    sizes = {c: int(masks[c].sum()) for c in uniq}
    for i in range(n):
        own = labels_kept[i]
        if sizes[own] == 1:
            svals[i] = 0.0
            continue
        a = d[i, masks[own]].sum() / (sizes[own] - 1)
        b = min(d[i, masks[c]].mean() for c in uniq if c != own)
        svals[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(svals.mean()), svals, n_noise


def calinski_harabasz(x: np.ndarray, labels: np.ndarray) -> tuple[float, bool]:
    """(CH value, flagged_infinite). Zero within-dispersion reports inf."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x, labels, _ = _strip_noise(x, np.asarray(labels))
    uniq = sorted(set(labels.tolist()))
    n, k = len(labels), len(uniq)
    if not 2 <= k <= n - 1:
        raise DegenerateK(f"need 2 <= k <= n-1, got k={k}, n={n}")
    mu = x.mean(axis=0)
    tr_b = 0.0
    tr_w = 0.0
    for c in uniq:
        members = x[labels == c]
        mu_c = members.mean(axis=0)
        tr_b += len(members) * float(np.sum((mu_c - mu) ** 2))
        tr_w += float(np.sum((members - mu_c) ** 2))
    if tr_w == 0.0:
        return math.inf, True
    return (tr_b / (k - 1)) / (tr_w / (n - k)), False


def davies_bouldin(x: np.ndarray, labels: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    x, labels, _ = _strip_noise(x, np.asarray(labels))
    uniq = sorted(set(labels.tolist()))
    k = len(uniq)
    if k < 2:
        raise DegenerateK("need at least 2 clusters")
    centroids = np.array([x[labels == c].mean(axis=0) for c in uniq])
    scatter = np.array([
        float(np.mean(np.linalg.norm(x[labels == c] - centroids[i], axis=1)))
        for i, c in enumerate(uniq)
    ])
    total = 0.0
    for i in range(k):
        worst = 0.0
        for j in range(k):
            if i == j:
                continue
            m_ij = float(np.linalg.norm(centroids[i] - centroids[j]))
            if m_ij == 0.0:
                raise CoincidentCentroids(f"clusters {uniq[i]} and {uniq[j]} share a centroid")
            worst = max(worst, (scatter[i] + scatter[j]) / m_ij)
        total += worst
    return total / k


def validation_report(x: np.ndarray, labels: np.ndarray) -> ValidationReport:
    mean_s, per_s, n_noise = silhouette(x, labels)
    ch, ch_inf = calinski_harabasz(x, labels)
    db = davies_bouldin(x, labels)
    kept = np.asarray(labels)[np.asarray(labels) >= 0]
    return ValidationReport(
        silhouette_mean=mean_s, per_sample_silhouette=per_s,
        calinski_harabasz=ch, davies_bouldin=db,
        k=len(set(kept.tolist())), n_scored=len(kept),
        n_noise_excluded=n_noise, ch_infinite=ch_inf,
    )


def adjusted_rand(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement between two partitions."""
    a = list(labels_a)
    b = list(labels_b)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)}")
    n = len(a)
    table = Counter(zip(a, b))
    a_marg = Counter(a)
    b_marg = Counter(b)
    comb2 = lambda m: m * (m - 1) // 2
    index = sum(comb2(c) for c in table.values())
    sum_a = sum(comb2(c) for c in a_marg.values())
    sum_b = sum(comb2(c) for c in b_marg.values())
    total = comb2(n)
    # keep everything integer until the final division so the canonical
    # fixtures come out exact
    num = 2 * index * total - 2 * sum_a * sum_b
    den = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if den == 0:
        return 1.0
    return num / den


# --------------------------------------------------------------------------
# bootstrap stability


@dataclass
class ClustererConfig:
    method: str = "kmeans"    # kmeans | ward | spectral | dbscan
    k: int = 4
    eps: float | None = None
    min_samples: int = 5


def fit_clusterer(x: np.ndarray, config: ClustererConfig, seed: int,
                  spectral_basis=None) -> _cluster.ClusterAssignment:
    if config.method == "kmeans":
        assign, _ = _cluster.kmeans(x, config.k, seed=seed)
        return assign
    if config.method == "ward":
        assign, _ = _cluster.ward(x, config.k)
        return assign
    if config.method == "spectral":
        return _cluster.spectral(x, config.k, seed=seed, basis=spectral_basis)
    if config.method == "dbscan":
        eps = config.eps if config.eps is not None else _cluster.default_eps(x)
        return _cluster.dbscan(x, eps, config.min_samples)
    raise ValueError(f"unknown clusterer {config.method!r}")


def bootstrap_stability(x: np.ndarray, config: ClustererConfig,
                        reference: np.ndarray, n_replicates: int = 100,
                        seed: int = 0) -> StabilityReport:
    """Resample-refit stability against a reference clustering.

    Each replicate resamples n rows with replacement, refits, and extends
    the fitted labels to every original row: centroid methods assign to the
    nearest refit centroid, others copy the nearest resampled neighbor's
    label. ARI is computed against the reference over all original rows;
    per-cluster Jaccard takes each reference cluster's best-matching refit
    cluster per replicate and averages over replicates.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    reference = np.asarray(reference)
    n = x.shape[0]
    seeds = spawn_seeds(seed, n_replicates)
    ari_samples: list[float] = []
    ref_clusters = sorted(set(reference.tolist()) - {-1})
    jaccard_sums = {c: 0.0 for c in ref_clusters}
    skipped = 0
    for child in seeds:
        rng = seeded_rng(child)
        idx = rng.integers(0, n, size=n)
        sample = x[idx]
        try:
            fitted = fit_clusterer(sample, config, seed=child)
        except Exception:
            skipped += 1
            continue
        extended = _extend_labels(x, sample, fitted)
        ari_samples.append(adjusted_rand(reference, extended))
        for c in ref_clusters:
            ref_set = reference == c
            best = 0.0
            for f in set(extended.tolist()) - {-1}:
                fit_set = extended == f
                inter = int(np.sum(ref_set & fit_set))
                union = int(np.sum(ref_set | fit_set))
                if union:
                    best = max(best, inter / union)
            jaccard_sums[c] += best
    n_ok = len(ari_samples)
    if n_ok == 0:
        raise DegenerateK("every bootstrap replicate failed")
    ari_arr = np.array(ari_samples)
    return StabilityReport(
        ari_samples=[float(v) for v in ari_samples],
        ari_mean=float(ari_arr.mean()),
        ari_sd=float(ari_arr.std(ddof=1)) if n_ok > 1 else 0.0,
        per_cluster_jaccard={c: s / n_ok for c, s in jaccard_sums.items()},
        n_replicates=n_ok, n_skipped=skipped, seed=seed,
    )


def _extend_labels(x: np.ndarray, sample: np.ndarray,
                   fitted: _cluster.ClusterAssignment) -> np.ndarray:
    if fitted.method == "kmeans":
        centroids = np.array([
            sample[fitted.labels == c].mean(axis=0)
            for c in sorted(set(fitted.labels.tolist()))
        ])
        d2 = (np.sum(x**2, axis=1)[:, None] - 2.0 * x @ centroids.T
              + np.sum(centroids**2, axis=1)[None, :])
        return np.argmin(d2, axis=1)
    # nearest resampled neighbor
    d2 = (np.sum(x**2, axis=1)[:, None] - 2.0 * x @ sample.T
          + np.sum(sample**2, axis=1)[None, :])
    nearest = np.argmin(d2, axis=1)
    return fitted.labels[nearest]


# --------------------------------------------------------------------------
# logistic probe


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _fit_multinomial(x: np.ndarray, y: np.ndarray, n_classes: int, l2: float,
                     max_iter: int = 500, tol: float = 1e-6):
    """L2-penalized multinomial logistic fit by gradient descent with
    backtracking line search (loss is guaranteed non-increasing)."""
    n, p = x.shape
    xb = np.hstack([x, np.ones((n, 1))])
    w = np.zeros((p + 1, n_classes))
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0

    def loss_of(wm):
        probs = _softmax(xb @ wm)
        nll = -np.sum(onehot * np.log(np.clip(probs, 1e-300, None))) / n
        return nll + 0.5 * l2 * float(np.sum(wm[:-1] ** 2)) / n

    loss = loss_of(w)
    trace = [loss]
    step = 1.0
    iters = 0
    for iters in range(1, max_iter + 1):
        probs = _softmax(xb @ w)
        grad = xb.T @ (probs - onehot) / n
        grad[:-1] += l2 * w[:-1] / n
        gnorm = float(np.linalg.norm(grad))
        if gnorm < tol:
            break
        # backtracking from a slightly optimistic step
        step = min(step * 2.0, 1e4)
        while step > 1e-12:
            cand = w - step * grad
            cand_loss = loss_of(cand)
            if cand_loss <= loss - 1e-4 * step * gnorm**2:
                break
            step *= 0.5
        w = w - step * grad
        loss = loss_of(w)
        trace.append(loss)
    return w, trace, iters


def _stratified_folds(y: np.ndarray, n_folds: int, rng) -> list[np.ndarray]:
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for c in sorted(set(y.tolist())):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(len(idx))]
        for pos, i in enumerate(idx):
            folds[pos % n_folds].append(int(i))
    return [np.array(sorted(f)) for f in folds]


def logistic_probe(x: np.ndarray, labels: np.ndarray, n_folds: int = 5,
                   l2: float = 1.0, seed: int = 0) -> ProbeReport:
    """Stratified cross-validated accuracy of predicting cluster labels."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    remap = {c: i for i, c in enumerate(classes)}
    y = np.array([remap[c] for c in labels])
    counts = Counter(y.tolist())
    if min(counts.values()) < n_folds:
        raise ClassTooSmall(
            f"smallest class has {min(counts.values())} members < {n_folds} folds")
    rng = seeded_rng(seed)
    folds = _stratified_folds(y, n_folds, rng)
    accs = []
    iter_counts = []
    for f in range(n_folds):
        test_idx = folds[f]
        train_idx = np.array(sorted(set(range(len(y))) - set(test_idx.tolist())))
        mu = x[train_idx].mean(axis=0)
        sd = x[train_idx].std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        xtr = (x[train_idx] - mu) / sd
        xte = (x[test_idx] - mu) / sd
        w, _, iters = _fit_multinomial(xtr, y[train_idx], len(classes), l2)
        probs = _softmax(np.hstack([xte, np.ones((len(xte), 1))]) @ w)
        pred = probs.argmax(axis=1)
        accs.append(float(np.mean(pred == y[test_idx])))
        iter_counts.append(iters)
    return ProbeReport(cv_accuracy=float(np.mean(accs)), fold_accuracies=accs,
                       l2=l2, iterations=iter_counts)


# --------------------------------------------------------------------------
# model-selection grid


@dataclass
class GridCell:
    reducer: str
    clusterer: str
    k: int
    silhouette: float | None = None
    calinski_harabasz: float | None = None
    davies_bouldin: float | None = None
    k_effective: int | None = None
    error: str | None = None


@dataclass
class ModelSelectionReport:
    cells: list[GridCell]
    ranking: list[int]          # indices into cells, best first
    chosen: GridCell | None


def grid_search(x: np.ndarray, reducers: list[dict], clusterers: list[dict],
                k_range, seed: int = 0,
                reduce_fn=None) -> tuple[ModelSelectionReport, dict]:
    """Evaluate every (reducer, clusterer, k) cell and rank the results.

    Ranking: max silhouette, ties broken by min Davies-Bouldin. Returns the
    report plus the fitted artifacts {reducer_name: (embedding, {(cl, k): labels})}.
    """
    from . import reduce as _reduce

    x = np.asarray(x, dtype=float)
    cells: list[GridCell] = []
    artifacts: dict = {"embeddings": {}, "labels": {}}
    cell_seeds = spawn_seeds(seed, 1_000)
    for r_i, rconf in enumerate(reducers):
        rname = rconf.get("name") or f"{rconf['method']}{rconf.get('d', 2)}"
        try:
            if rconf["method"] == "pca":
                emb, _ = _reduce.pca(x, rconf.get("d", 2))
            elif rconf["method"] == "svd":
                emb = _reduce.svd_reduce(x, rconf.get("d", 2))
            elif rconf["method"] == "tsne":
                cfg = _reduce.TsneConfig(seed=spawn_seeds(seed, len(reducers))[r_i],
                                         perplexity=rconf.get("perplexity"))
                emb = _reduce.tsne(x, cfg)
            elif rconf["method"] == "none":
                emb = _reduce.Embedding(coords=_reduce.standardize(x),
                                        method="none", d=x.shape[1])
            else:
                raise ValueError(f"unknown reducer {rconf['method']!r}")
        except Exception as exc:
            for cconf in clusterers:
                for k in k_range:
                    cells.append(GridCell(rname, cconf["method"], k,
                                          error=f"reducer failed: {exc}"))
            continue
        artifacts["embeddings"][rname] = emb
        spec_basis = None
        for cconf in clusterers:
            ks = [0] if cconf["method"] == "dbscan" else list(k_range)
            for k in ks:
                cell = GridCell(rname, cconf["method"], k)
                try:
                    config = ClustererConfig(
                        method=cconf["method"], k=k,
                        eps=cconf.get("eps"),
                        min_samples=cconf.get("min_samples", 5),
                    )
                    if cconf["method"] == "spectral" and spec_basis is None:
                        spec_basis = _cluster.spectral_basis(emb.coords)
                    assign = fit_clusterer(emb.coords, config,
                                           seed=cell_seeds[len(cells) % 1_000],
                                           spectral_basis=spec_basis)
                    rep = validation_report(emb.coords, assign.labels)
                    cell.silhouette = rep.silhouette_mean
                    cell.calinski_harabasz = rep.calinski_harabasz
                    cell.davies_bouldin = rep.davies_bouldin
                    cell.k_effective = assign.k_effective
                    artifacts["labels"][(rname, cconf["method"], k)] = assign.labels
                except Exception as exc:
                    cell.error = str(exc)
                cells.append(cell)
    scored = [i for i, c in enumerate(cells) if c.error is None]
    ranking = sorted(
        scored,
        key=lambda i: (-cells[i].silhouette, cells[i].davies_bouldin),
    )
    chosen = cells[ranking[0]] if ranking else None
    return ModelSelectionReport(cells=cells, ranking=ranking, chosen=chosen), artifacts


# --------------------------------------------------------------------------
# cluster profiling


def profile_clusters(table: DataTable, labels) -> dict:
    """Per-cluster modal categories, medians, and top-deviating features."""
    labels = list(labels)
    if len(labels) != table.n_rows:
        raise LengthMismatch(f"{len(labels)} labels vs {table.n_rows} rows")
    clusters = sorted(set(labels))
    global_props = _category_proportions(table, range(table.n_rows))
    profiles = {}
    for c in clusters:
        rows = [i for i, lab in enumerate(labels) if lab == c]
        props = _category_proportions(table, rows)
        deviations = []
        for key, p_local in props.items():
            p_global = global_props.get(key, 0.0)
            deviations.append((abs(p_local - p_global), key, p_local, p_global))
        deviations.sort(key=lambda t: (-t[0], t[1]))
        summary = {"size": len(rows), "modes": {}, "medians": {},
                   "top_deviations": [
                       {"feature": key, "proportion": p_l, "global": p_g,
                        "abs_difference": dev}
                       for dev, key, p_l, p_g in deviations[:5]
                   ]}
        for col in table.columns:
            vals = [table.rows[i][table.column_index(col.name)] for i in rows]
            vals = [v for v in vals if v is not None]
            if not vals:
                continue
            if col.kind in ("nominal", "boolean"):
                counts = Counter(str(v) for v in vals)
                mode, freq = counts.most_common(1)[0]
                summary["modes"][col.name] = {"value": mode,
                                              "frequency": freq / len(vals)}
            elif col.kind == "ordinal":
                codes = sorted(col.ordinal_order.index(str(v)) for v in vals)
                med = codes[len(codes) // 2]
                summary["medians"][col.name] = col.ordinal_order[med]
            elif col.kind == "numeric":
                summary["medians"][col.name] = float(np.median([float(v) for v in vals]))
        profiles[c] = summary
    return profiles


def _category_proportions(table: DataTable, rows) -> dict:
    rows = list(rows)
    props: dict[str, float] = {}
    if not rows:
        return props
    for col in table.columns:
        idx = table.column_index(col.name)
        if col.kind in ("nominal", "ordinal", "boolean"):
            counts = Counter(
                str(table.rows[i][idx]) for i in rows
                if table.rows[i][idx] is not None
            )
            for cat, cnt in counts.items():
                props[f"{col.name}={cat}"] = cnt / len(rows)
        elif col.kind == "multiselect":
            for i in rows:
                for tok in (table.rows[i][idx] or ()):
                    key = f"{col.name}={tok}"
                    props[key] = props.get(key, 0.0) + 1.0 / len(rows)
    return props
