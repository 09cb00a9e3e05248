"""Pairwise association battery for mixed-type features.

Categorical strength comes from the chi-square family (bias-corrected
Cramer's V, Tschuprow's T), directional predictability from Theil's U, and
monotonic association from Spearman's rho. Chi-square p-values are
FDR-adjusted across all tested pairs before screening.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConstantInput,
    DegenerateTable,
    EmptyInput,
    InvalidP,
    LengthMismatch,
)
from .ingest import FeatureMatrix
from .numerics import chi2_sf

P_FLOOR = 1e-300


@dataclass
class ContingencyTable:
    counts: np.ndarray
    row_labels: list[str]
    col_labels: list[str]

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass
class ScreeningConfig:
    alpha: float = 0.05
    rho_min: float = 0.50
    v_min: float = 0.30
    t_min: float = 0.30
    u_min: float = 0.20


@dataclass
class AssociationResult:
    feature_a: str
    feature_b: str
    cramers_v_corrected: float
    tschuprow_t: float
    theil_u_ab: float
    theil_u_ba: float
    spearman_rho: float | None
    chi2: float
    df: int
    p_raw: float
    p_adjusted: float = 1.0
    neg_log10_p: float = 0.0
    verdicts: dict = field(default_factory=dict)


def contingency(x, y) -> ContingencyTable:
    """Cross-tabulate two equal-length categorical vectors."""
    x, y = list(x), list(y)
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)}")
    if not x:
        raise EmptyInput("empty vectors")
    row_labels = sorted({str(v) for v in x})
    col_labels = sorted({str(v) for v in y})
    counts = np.zeros((len(row_labels), len(col_labels)), dtype=int)
    ri = {v: i for i, v in enumerate(row_labels)}
    ci = {v: i for i, v in enumerate(col_labels)}
    for a, b in zip(x, y):
        counts[ri[str(a)], ci[str(b)]] += 1
    # prune empty margins (cannot occur from raw tallies, but keep the invariant)
    keep_r = counts.sum(axis=1) > 0
    keep_c = counts.sum(axis=0) > 0
    counts = counts[keep_r][:, keep_c]
    row_labels = [l for l, k in zip(row_labels, keep_r) if k]
    col_labels = [l for l, k in zip(col_labels, keep_c) if k]
    return ContingencyTable(counts=counts, row_labels=row_labels, col_labels=col_labels)


def chi_square(t: ContingencyTable) -> tuple[float, int, float]:
    r, c = t.counts.shape
    if r < 2 or c < 2:
        raise DegenerateTable(f"need a table of at least 2x2, got {r}x{c}")
    n = t.n
    if n == 0:
        raise DegenerateTable("empty table")
    obs = t.counts.astype(float)
    expected = np.outer(obs.sum(axis=1), obs.sum(axis=0)) / n
    stat = float(np.sum((obs - expected) ** 2 / expected))
    df = (r - 1) * (c - 1)
    return stat, df, chi2_sf(stat, df)


def _corrected_phi2(t: ContingencyTable) -> tuple[float, float, float]:
    """Bias-corrected phi^2 and the corrected table dimensions (Bergsma)."""
    stat, _, _ = chi_square(t)
    r, c = t.counts.shape
    n = t.n
    phi2 = stat / n
    phi2c = max(0.0, phi2 - (r - 1) * (c - 1) / (n - 1))
    r_c = r - (r - 1) ** 2 / (n - 1)
    c_c = c - (c - 1) ** 2 / (n - 1)
    return phi2c, r_c, c_c


def cramers_v_corrected(t: ContingencyTable) -> float:
    phi2c, r_c, c_c = _corrected_phi2(t)
    denom = min(r_c - 1.0, c_c - 1.0)
    if denom <= 0:
        return 0.0
    return min(1.0, math.sqrt(phi2c / denom))


def tschuprow_t(t: ContingencyTable, corrected: bool = True) -> float:
    r, c = t.counts.shape
    if corrected:
        # corrected table dimensions keep T equal to V on square tables
        phi2, r_eff, c_eff = _corrected_phi2(t)
    else:
        stat, _, _ = chi_square(t)
        phi2 = stat / t.n
        r_eff, c_eff = float(r), float(c)
    denom = math.sqrt(max(0.0, (r_eff - 1) * (c_eff - 1)))
    if denom <= 0:
        raise DegenerateTable("degenerate table for Tschuprow's T")
    return min(1.0, math.sqrt(phi2 / denom))


def _entropy(counts: Counter, n: int) -> float:
    h = 0.0
    for cnt in counts.values():
        if cnt > 0:
            p = cnt / n
            h -= p * math.log(p)
    return h


def theil_u(x, y) -> float:
    """Uncertainty coefficient U(x|y): fraction of H(x) removed by knowing y."""
    x, y = [str(v) for v in x], [str(v) for v in y]
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)}")
    n = len(x)
    hx = _entropy(Counter(x), n)
    if hx == 0.0:
        return 0.0
    y_counts = Counter(y)
    hx_given_y = 0.0
    for y_val, ny in y_counts.items():
        sub = Counter(a for a, b in zip(x, y) if b == y_val)
        hx_given_y += (ny / n) * _entropy(sub, ny)
    return max(0.0, min(1.0, (hx - hx_given_y) / hx))


def _ranks(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing the mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks


def spearman_rho(x, y) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise LengthMismatch(f"{len(x)} vs {len(y)}")
    if len(x) < 3:
        raise LengthMismatch("need at least 3 observations")
    if len(set(x.tolist())) < 2 or len(set(y.tolist())) < 2:
        raise ConstantInput("both inputs need at least two distinct values")
    rx, ry = _ranks(x), _ranks(y)
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    return float(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)))


def bh_adjust(p_values, alpha: float = 0.05) -> tuple[list[float], list[bool]]:
    """Benjamini-Hochberg step-up adjustment, original order preserved."""
    p = list(p_values)
    for v in p:
        if not 0.0 <= v <= 1.0:
            raise InvalidP(f"p-value {v} outside [0, 1]")
    m = len(p)
    if m == 0:
        return [], []
    order = sorted(range(m), key=lambda i: p[i])
    adjusted = [0.0] * m
    running = 1.0
    for rank in range(m, 0, -1):
        i = order[rank - 1]
        running = min(running, m * p[i] / rank)
        adjusted[i] = running
    reject = [adj <= alpha for adj in adjusted]
    return adjusted, reject


# --------------------------------------------------------------------------
# full battery over a feature matrix


def _quintile_bins(values: np.ndarray) -> list[str]:
    """Discretize a numeric vector into (up to) five quantile bins."""
    qs = np.percentile(values, [20, 40, 60, 80])
    return [f"q{int(np.searchsorted(qs, v, side='right'))}" for v in values]


@dataclass
class _PairFeature:
    name: str
    kind: str          # 'categorical' or 'ordered'
    labels: list[str]  # categorical view
    numeric: np.ndarray | None  # ordered view, when the feature carries order


def materialize_pair_features(fm: FeatureMatrix) -> list[_PairFeature]:
    """Collapse one-hot blocks back to their source categorical column.

    Ordered features (ordinal codes, numerics, derived counts/affect) keep a
    numeric view for Spearman and get a quintile-binned categorical view.
    """
    feats: list[_PairFeature] = []
    seen_sources: set[str] = set()
    for j, meta in enumerate(fm.feature_meta):
        if meta["encoding"] == "onehot":
            src = meta["source"]
            if src in seen_sources:
                continue
            seen_sources.add(src)
            block = [
                (i, m["category"]) for i, m in enumerate(fm.feature_meta)
                if m["encoding"] == "onehot" and m["source"] == src
            ]
            idxs = [i for i, _ in block]
            cats = [c for _, c in block]
            sub = fm.values[:, idxs]
            labels = []
            for row in sub:
                nz = np.flatnonzero(row > 0.5)
                labels.append(cats[nz[0]] if len(nz) == 1 else "(none)")
            feats.append(_PairFeature(name=src, kind="categorical", labels=labels, numeric=None))
        else:
            col = fm.values[:, j]
            labels = _quintile_bins(col) if len(set(col.tolist())) > 5 else [f"{v:g}" for v in col]
            feats.append(_PairFeature(name=meta["name"], kind="ordered", labels=labels, numeric=col))
    return feats


def association_matrix(fm: FeatureMatrix, config: ScreeningConfig = ScreeningConfig()):
    """All-pairs association battery with BH-adjusted screening verdicts.

    Returns (results, matrices) where matrices maps metric name to a square
    numpy array over the collapsed feature list (unit diagonal; U stored
    row-conditional-on-column).
    """
    feats = materialize_pair_features(fm)
    if len(feats) < 2:
        raise EmptyInput("need at least two features")
    names = [f.name for f in feats]
    k = len(names)
    mats = {
        "cramers_v": np.eye(k),
        "tschuprow_t": np.eye(k),
        "theil_u": np.eye(k),
        "spearman_rho": np.eye(k),
        "neg_log10_p": np.zeros((k, k)),
    }
    results: list[AssociationResult] = []
    for a in range(k):
        for b in range(a + 1, k):
            fa, fb = feats[a], feats[b]
            t = contingency(fa.labels, fb.labels)
            r, c = t.counts.shape
            if r < 2 or c < 2:
                # a constant feature: no association computable
                chi2 = 0.0
                df = 0
                p = 1.0
                v = tt = 0.0
            else:
                chi2, df, p = chi_square(t)
                v = cramers_v_corrected(t)
                tt = tschuprow_t(t)
            u_ab = theil_u(fa.labels, fb.labels)
            u_ba = theil_u(fb.labels, fa.labels)
            rho = None
            if fa.numeric is not None and fb.numeric is not None:
                try:
                    rho = spearman_rho(fa.numeric, fb.numeric)
                except ConstantInput:
                    rho = None
            results.append(AssociationResult(
                feature_a=fa.name, feature_b=fb.name,
                cramers_v_corrected=v, tschuprow_t=tt,
                theil_u_ab=u_ab, theil_u_ba=u_ba,
                spearman_rho=rho, chi2=chi2, df=df, p_raw=p,
            ))
            mats["cramers_v"][a, b] = mats["cramers_v"][b, a] = v
            mats["tschuprow_t"][a, b] = mats["tschuprow_t"][b, a] = tt
            mats["theil_u"][a, b] = u_ab
            mats["theil_u"][b, a] = u_ba
            if rho is not None:
                mats["spearman_rho"][a, b] = mats["spearman_rho"][b, a] = rho

    adjusted, reject = bh_adjust([res.p_raw for res in results], config.alpha)
    for res, adj, rej in zip(results, adjusted, reject):
        res.p_adjusted = adj
        res.neg_log10_p = -math.log10(max(res.p_raw, P_FLOOR))
        res.verdicts = {
            "chi2_bh": rej,
            "cramers_v": res.cramers_v_corrected >= config.v_min,
            "tschuprow_t": res.tschuprow_t >= config.t_min,
            "theil_u": max(res.theil_u_ab, res.theil_u_ba) >= config.u_min,
            "spearman_rho": (res.spearman_rho is not None
                             and abs(res.spearman_rho) >= config.rho_min),
        }
    idx = {n: i for i, n in enumerate(names)}
    for res in results:
        a, b = idx[res.feature_a], idx[res.feature_b]
        mats["neg_log10_p"][a, b] = mats["neg_log10_p"][b, a] = res.neg_log10_p
    return results, {"names": names, **mats}
