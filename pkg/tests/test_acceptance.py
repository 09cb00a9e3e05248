"""End-to-end acceptance checks.

Each test covers one numbered acceptance criterion, enforces the stated
numeric tolerance and runtime budget, and prints a single PASS line on
success (failures surface as ordinary pytest failures).
"""

import itertools
import json
import math
import shutil
import time

import numpy as np
import pytest

from surveyseg import assoc, cli, cluster, evaluate, graph, ingest, reduce
from surveyseg.numerics import chi2_sf, sym_eig

from test_evaluate import ari_pair_reference
from test_graph import betweenness_exhaustive


class Budget:
    def __init__(self, seconds):
        self.limit = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, (
                f"runtime {self.elapsed:.1f}s over budget {self.limit}s")


@pytest.fixture(scope="module")
def synthetic_run():
    """The bundled 4-persona synthetic survey pushed through the grid."""
    with Budget(60) as budget:
        result = ingest.synth_survey(4, 250, seed=42)
        fm = ingest.assemble_features(result.table, ingest.synth_feature_config())
        report, artifacts = evaluate.grid_search(
            fm.values,
            reducers=[{"method": "pca", "d": 2, "name": "pca2"},
                      {"method": "tsne", "d": 2, "name": "tsne2"}],
            clusterers=[{"method": "kmeans"}],
            k_range=range(2, 9), seed=42)
    return {"result": result, "fm": fm, "report": report,
            "artifacts": artifacts, "grid_seconds": budget.elapsed}


def test_criterion_01_association_oracles():
    with Budget(1):
        t = assoc.contingency(
            ["a"] * 12 + ["b"] * 12,
            ["x"] * 10 + ["y"] * 2 + ["x"] * 2 + ["y"] * 10)
        assert np.array_equal(t.counts, [[10, 2], [2, 10]])
        assert assoc.cramers_v_corrected(t) == pytest.approx(0.6475, abs=1e-4)
        assert assoc.tschuprow_t(t) == pytest.approx(0.6475, abs=1e-4)
        _, _, p = assoc.chi_square(t)
        assert p == pytest.approx(1.09e-3, abs=1e-5)
        u = assoc.theil_u(["a", "a", "a", "b"], ["c", "c", "d", "d"])
        assert u == pytest.approx(0.3837, abs=1e-4)
        rho = assoc.spearman_rho([1, 2, 3, 4, 5], [5, 6, 7, 8, 7])
        assert rho == pytest.approx(0.8207, abs=1e-4)
    print("criterion 1 (association oracles): PASS")


def test_criterion_02_screening_threshold_flips():
    with Budget(10):
        config = assoc.ScreeningConfig()
        rng = np.random.default_rng(0)
        n = 4000
        base = rng.integers(0, 4, size=n)
        noise = rng.integers(0, 4, size=n)
        crossings = {"cramers_v": 0, "tschuprow_t": 0, "theil_u": 0,
                     "spearman_rho": 0}
        for mix in np.linspace(0.0, 1.0, 21):
            keep = rng.random(n) < mix
            partner = np.where(keep, base, noise)
            vals = np.column_stack([base, partner]).astype(float)
            meta = [{"name": "f_a", "source": "f_a", "encoding": "ordinal"},
                    {"name": "f_b", "source": "f_b", "encoding": "ordinal"}]
            fm = ingest.FeatureMatrix(values=vals, feature_meta=meta,
                                      row_ids=list(range(n)))
            res = assoc.association_matrix(fm, config)[0][0]
            # each verdict must equal its metric compared at the configured
            # threshold, at every dependence level
            assert res.verdicts["cramers_v"] == (
                res.cramers_v_corrected >= config.v_min)
            assert res.verdicts["tschuprow_t"] == (res.tschuprow_t >= config.t_min)
            assert res.verdicts["theil_u"] == (
                max(res.theil_u_ab, res.theil_u_ba) >= config.u_min)
            assert res.verdicts["spearman_rho"] == (
                res.spearman_rho is not None
                and abs(res.spearman_rho) >= config.rho_min)
            assert res.verdicts["chi2_bh"] == (res.p_adjusted <= config.alpha)
            for key, metric in [
                ("cramers_v", res.cramers_v_corrected),
                ("tschuprow_t", res.tschuprow_t),
                ("theil_u", max(res.theil_u_ab, res.theil_u_ba)),
                ("spearman_rho", abs(res.spearman_rho)),
            ]:
                threshold = {"cramers_v": config.v_min,
                             "tschuprow_t": config.t_min,
                             "theil_u": config.u_min,
                             "spearman_rho": config.rho_min}[key]
                crossings[key] += metric >= threshold
        # the sweep must actually straddle every threshold: some levels
        # below it, some above
        for key, above in crossings.items():
            assert 0 < above < 21, f"{key} never flipped in the sweep"
    print("criterion 2 (screening threshold flips): PASS")


def test_criterion_03_validity_index_exactness():
    with Budget(5):
        x3 = np.array([[0.0], [1.0], [9.0]])
        mean_s, _, _ = evaluate.silhouette(x3, np.array([0, 0, 1]))
        assert mean_s == pytest.approx(0.5880, abs=1e-4)
        line4 = np.array([[0.0], [1.0], [10.0], [11.0]])
        split = np.array([0, 0, 1, 1])
        ch, _ = evaluate.calinski_harabasz(line4, split)
        assert ch == pytest.approx(200.0, abs=1e-9)
        assert evaluate.davies_bouldin(line4, split) == pytest.approx(0.1, abs=1e-9)
        assert evaluate.adjusted_rand([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
        assert evaluate.adjusted_rand([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5
        for n in range(2, 9):
            for a in itertools.product(range(2), repeat=n):
                b = [v % 2 for v in np.random.default_rng(n).integers(0, 3, n)]
                assert evaluate.adjusted_rand(list(a), b) == pytest.approx(
                    ari_pair_reference(list(a), b), abs=1e-12)
    print("criterion 3 (validity-index exactness): PASS")


def test_criterion_04_clustering_oracles():
    with Budget(5):
        line4 = np.array([[0.0], [1.0], [10.0], [11.0]])
        km_assign, km_model = cluster.kmeans(line4, 2, seed=0)
        assert km_model.inertia == pytest.approx(1.0)
        ward_assign, _ = cluster.ward(line4, 2)
        for labels in (km_assign.labels, ward_assign.labels):
            assert labels[0] == labels[1]
            assert labels[2] == labels[3]
            assert labels[0] != labels[2]
        db_x = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0], [100.0]])
        db = cluster.dbscan(db_x, eps=1.5, min_samples=2)
        assert db.labels[:3].tolist() == [db.labels[0]] * 3
        assert db.labels[3:6].tolist() == [db.labels[3]] * 3
        assert db.labels[0] != db.labels[3]
        assert db.labels[6] == -1
        w = np.zeros((8, 8))
        for i, j in itertools.combinations(range(4), 2):
            w[i, j] = w[j, i] = 1.0
            w[i + 4, j + 4] = w[j + 4, i + 4] = 1.0
        sim = cluster.SimilarityConfig(kind="precomputed", matrix=w)
        sp = cluster.spectral(np.zeros((8, 1)), 2, seed=0, similarity=sim)
        planted = [0] * 4 + [1] * 4
        assert evaluate.adjusted_rand(sp.labels.tolist(), planted) == 1.0
    print("criterion 4 (clustering oracles): PASS")


def test_criterion_05_graph_suite():
    with Budget(10):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(2, 9))
            names = [f"v{i}" for i in range(n)]
            edges = sorted(
                (names[i], names[j], 1.0)
                for i, j in itertools.combinations(range(n), 2)
                if rng.random() < 0.5)
            g = graph.FeatureGraph(nodes=names, edges=edges)
            got = graph.centralities(g).betweenness
            want = betweenness_exhaustive(g)
            for v in names:
                assert got[v] == pytest.approx(want[v], abs=1e-9)

        m = np.zeros((4, 4))
        for (i, j), w in {(0, 1): 0.1, (0, 2): 0.2, (0, 3): 0.3,
                          (1, 2): 0.4}.items():
            m[i, j] = m[j, i] = w
        m[1, 3] = m[3, 1] = 0.0
        m[2, 3] = m[3, 2] = 0.0
        # percentile cutoff over the four nonzero weights only
        g = graph.build_graph(
            np.array([[0, 0.1, 0.2, 0.3], [0.1, 0, 0.4, 0],
                      [0.2, 0.4, 0, 0], [0.3, 0, 0, 0]], dtype=float),
            list("abcd"), mode="absolute", tau=0.325)
        assert [w for *_, w in g.edges] == [0.4]
        weights = [0.1, 0.2, 0.3, 0.4]
        from surveyseg.numerics import percentile
        assert percentile(weights, 75) == pytest.approx(0.325)
        assert [w for w in weights if w >= 0.325] == [0.4]

        two_triangles = graph.FeatureGraph(
            nodes=list("abcdef"),
            edges=sorted([("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.0),
                          ("d", "e", 1.0), ("e", "f", 1.0), ("d", "f", 1.0),
                          ("c", "d", 1.0)]))
        part = graph.detect_communities(two_triangles, seed=0)
        found = [part.communities[v] for v in "abcdef"]
        planted = [0, 0, 0, 1, 1, 1]
        assert evaluate.adjusted_rand(found, planted) == 1.0
    print("criterion 5 (graph suite): PASS")


def test_criterion_06_model_selection(synthetic_run):
    assert synthetic_run["grid_seconds"] < 60
    report = synthetic_run["report"]
    chosen = report.chosen
    assert chosen.k == 4, f"selected k={chosen.k}"
    assert chosen.silhouette >= 0.35
    db_by_k = {c.k: c.davies_bouldin for c in report.cells
               if c.reducer == chosen.reducer and c.error is None}
    assert db_by_k[4] < db_by_k[3]
    print(f"criterion 6 (model selection: k=4, silhouette="
          f"{chosen.silhouette:.3f}, {synthetic_run['grid_seconds']:.1f}s): PASS")


def test_criterion_07_stability_and_probe(synthetic_run):
    with Budget(120):
        report = synthetic_run["report"]
        artifacts = synthetic_run["artifacts"]
        chosen = report.chosen
        coords = artifacts["embeddings"][chosen.reducer].coords
        labels = artifacts["labels"][(chosen.reducer, chosen.clusterer, chosen.k)]
        config = evaluate.ClustererConfig(method=chosen.clusterer, k=chosen.k)
        stability = evaluate.bootstrap_stability(
            coords, config, labels, n_replicates=100, seed=42)
        assert stability.ari_mean >= 0.90
        assert all(j >= 0.75 for j in stability.per_cluster_jaccard.values())
        probe = evaluate.logistic_probe(
            synthetic_run["fm"].values, labels, n_folds=5, seed=42)
        assert probe.cv_accuracy >= 0.90
    print(f"criterion 7 (stability ARI={stability.ari_mean:.3f}, "
          f"probe={probe.cv_accuracy:.3f}): PASS")


def test_criterion_08_numerical_kernels():
    with Budget(30):
        rng = np.random.default_rng(0)
        for _ in range(100):
            n = int(rng.integers(2, 51))
            a = rng.normal(size=(n, n))
            a = a + a.T
            res = sym_eig(a)
            scale = np.linalg.norm(a)
            for i in range(n):
                resid = (a @ res.eigenvectors[:, i]
                         - res.eigenvalues[i] * res.eigenvectors[:, i])
                assert np.linalg.norm(resid) <= 1e-8 * scale
            assert abs(res.eigenvalues.sum() - np.trace(a)) <= 1e-8 * scale

        x = rng.normal(size=(40, 10))
        errs = [reduce.svd_reduce(x, d).diagnostics["reconstruction_error"]
                for d in range(1, 11)]
        assert all(a >= b - 1e-10 for a, b in zip(errs, errs[1:]))

        for val in np.linspace(0.0, 50.0, 101):
            assert abs(chi2_sf(float(val), 2) - math.exp(-val / 2)) <= 1e-12

        pts = rng.normal(size=(50, 4))
        p = reduce.tsne_affinities(pts, perplexity=10.0)
        assert np.abs(p - p.T).max() <= 1e-9
        assert abs(p.sum() - 1.0) <= 1e-9
        assert np.all(p >= 0)
        emb = reduce.tsne(pts, reduce.TsneConfig(iterations=300, seed=0))
        assert emb.diagnostics["final_kl"] >= 0.0
    print("criterion 8 (numerical kernels): PASS")


def test_criterion_09_determinism(tmp_path, synthetic_run):
    with Budget(120):
        data = tmp_path / "data"
        assert cli.main(["synth", "--personas", "4", "--rows", "250",
                         "--seed", "42", "--out", str(data)]) == 0
        out = tmp_path / "run"
        argv = ["run", "--config", str(data / "config.json"), "--out", str(out)]
        assert cli.main(argv) == 0
        snapshot = {p.name: p.read_bytes() for p in out.iterdir()}
        shutil.rmtree(out)
        assert cli.main(argv) == 0
        rerun = {p.name: p.read_bytes() for p in out.iterdir()}
        assert snapshot == rerun

        reseeded = tmp_path / "run_reseeded"
        assert cli.main(["run", "--config", str(data / "config.json"),
                         "--out", str(reseeded), "--seed", "7"]) == 0
        with open(out / "report.json") as fh:
            base_manifest = json.load(fh)["manifest"]
        with open(reseeded / "report.json") as fh:
            new_manifest = json.load(fh)["manifest"]
        assert base_manifest["embedding_tsne2.csv"] != new_manifest["embedding_tsne2.csv"]
    print("criterion 9 (determinism): PASS")


def test_criterion_10_derived_feature_contract():
    with Budget(1):
        ind = ingest.multiselect_indicators(
            [("action", "rpg", "puzzle"), ("action",), ()],
            tokens=["action", "rpg", "puzzle"])
        assert ingest.genre_richness(ind).tolist() == [3, 1, 0]
        fam = ingest.GenreFamilyMap(
            matrix=np.array([[1, 0], [0, 1], [0, 1]], dtype=float),
            family_labels=["combat", "thinking"],
            genre_labels=["action", "rpg", "puzzle"])
        assert ingest.family_richness(ind, fam).tolist() == [2, 1, 0]
        expected = {
            "excitement": (1, 1), "happy": (1, 1),
            "calmness": (1, -1), "contented": (1, -1),
            "neutral": (0, 0),
            "anxiety": (-1, 1), "anger": (-1, 1), "guilty": (-1, 1),
            "depressed": (-1, -1),
        }
        assert set(expected) == set(ingest.DEFAULT_MOOD_LEXICON.vocabulary())
        for token, signs in expected.items():
            assert ingest.affect_encode(token) == signs
    print("criterion 10 (derived-feature contract): PASS")
