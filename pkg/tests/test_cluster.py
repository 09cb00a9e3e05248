import itertools

import numpy as np
import pytest

from surveyseg import cluster
from surveyseg.errors import DegenerateSimilarity, KTooLarge

LINE4 = np.array([[0.0], [1.0], [10.0], [11.0]])


def kmeans_bruteforce(x, k):
    """Oracle: minimum inertia over every assignment of points to k groups."""
    n = x.shape[0]
    best = np.inf
    for assignment in itertools.product(range(k), repeat=n):
        if len(set(assignment)) != k:
            continue
        labels = np.array(assignment)
        inertia = 0.0
        for c in range(k):
            pts = x[labels == c]
            inertia += ((pts - pts.mean(axis=0)) ** 2).sum()
        best = min(best, inertia)
    return best


def groups(labels):
    out = {}
    for i, lab in enumerate(labels):
        out.setdefault(int(lab), set()).add(i)
    return set(frozenset(v) for v in out.values())


class TestKMeans:
    def test_line_fixture(self):
        assign, model = cluster.kmeans(LINE4, 2, seed=0)
        assert groups(assign.labels) == {frozenset({0, 1}), frozenset({2, 3})}
        assert model.inertia == pytest.approx(1.0)
        assert sorted(model.centroids[:, 0].tolist()) == [0.5, 10.5]

    def test_labels_contiguous_first_appearance(self):
        assign, _ = cluster.kmeans(LINE4, 2, seed=0)
        assert assign.labels[0] == 0
        assert set(assign.labels.tolist()) == {0, 1}

    @pytest.mark.parametrize("trial", range(10))
    def test_matches_bruteforce_optimum(self, trial):
        rng = np.random.default_rng(trial)
        x = rng.normal(size=(9, 2))
        k = 3
        _, model = cluster.kmeans(x, k, seed=trial, n_init=50)
        optimum = kmeans_bruteforce(x, k)
        # a local optimizer can never beat the exhaustive optimum, and with
        # 50 restarts on 9 points it should reach it
        assert model.inertia >= optimum - 1e-8
        assert model.inertia == pytest.approx(optimum, rel=1e-8)

    def test_inertia_trace_non_increasing(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(50, 3))
        _, model = cluster.kmeans(x, 4, seed=0)
        t = model.inertia_trace
        assert all(a >= b - 1e-9 for a, b in zip(t, t[1:]))

    def test_k_equals_n(self):
        assign, model = cluster.kmeans(LINE4, 4, seed=0)
        assert model.inertia == pytest.approx(0.0)
        assert assign.k_effective == 4

    def test_k_too_large(self):
        with pytest.raises(KTooLarge):
            cluster.kmeans(LINE4, 5)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(30, 2))
        a, _ = cluster.kmeans(x, 3, seed=7)
        b, _ = cluster.kmeans(x, 3, seed=7)
        assert np.array_equal(a.labels, b.labels)


class TestWard:
    def test_line_fixture(self):
        assign, dendro = cluster.ward(LINE4, 2)
        assert groups(assign.labels) == {frozenset({0, 1}), frozenset({2, 3})}

    def test_dendrogram_monotone_costs(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(20, 3))
        _, dendro = cluster.ward(x, 1)
        costs = [step[2] for step in dendro]
        assert all(a <= b + 1e-9 for a, b in zip(costs, costs[1:]))
        assert len(dendro) == 19

    def test_first_merge_is_closest_pair(self):
        x = np.array([[0.0], [0.2], [5.0], [9.0]])
        _, dendro = cluster.ward(x, 1)
        assert {dendro[0][0], dendro[0][1]} == {0, 1}
        # first merge cost is half the squared distance of the closest pair
        assert dendro[0][2] == pytest.approx(0.5 * 0.2 ** 2)

    def test_matches_direct_objective_recomputation(self):
        # Lance-Williams bookkeeping must agree with costs recomputed from
        # scratch at every step for a small input
        rng = np.random.default_rng(3)
        x = rng.normal(size=(8, 2))
        _, dendro = cluster.ward(x, 1)
        members = {i: [i] for i in range(8)}
        for a, b, cost, new_id in dendro:
            pa, pb = x[members[a]], x[members[b]]
            na, nb = len(pa), len(pb)
            direct = (na * nb) / (na + nb) * float(
                ((pa.mean(axis=0) - pb.mean(axis=0)) ** 2).sum())
            assert cost == pytest.approx(direct, rel=1e-9)
            members[new_id] = members.pop(a) + members.pop(b)

    def test_nested_partitions(self):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(15, 2))
        prev = None
        for k in range(15, 0, -1):
            assign, _ = cluster.ward(x, k)
            part = groups(assign.labels)
            if prev is not None:
                # every cluster at level k is a union of clusters at k+1
                for g in part:
                    assert all(h <= g or not (h & g) for h in prev)
            prev = part


class TestSpectral:
    def test_block_structure(self):
        rng = np.random.default_rng(5)
        a = rng.normal(0, 0.1, size=(12, 2))
        b = rng.normal(0, 0.1, size=(12, 2)) + [10, 0]
        x = np.vstack([a, b])
        assign = cluster.spectral(x, 2, seed=0)
        assert groups(assign.labels) == {
            frozenset(range(12)), frozenset(range(12, 24))}

    def test_basis_reuse_matches(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=(30, 3))
        basis = cluster.spectral_basis(x)
        direct = cluster.spectral(x, 3, seed=1)
        reused = cluster.spectral(x, 3, seed=1, basis=basis)
        assert np.array_equal(direct.labels, reused.labels)

    def test_laplacian_eigenvalue_range(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(25, 2))
        eig = cluster.spectral_basis(x)
        assert eig.eigenvalues.min() >= -1e-8
        assert eig.eigenvalues.max() <= 2.0 + 1e-8
        # the smallest eigenvalue of L_sym on a connected graph is ~0
        assert eig.eigenvalues[-1] == pytest.approx(0.0, abs=1e-8)

    def test_two_rings(self):
        # concentric rings: spectral with knn similarity recovers them,
        # plain kmeans cannot
        rng = np.random.default_rng(8)
        t1 = np.linspace(0, 2 * np.pi, 40, endpoint=False)
        t2 = np.linspace(0, 2 * np.pi, 40, endpoint=False)
        inner = np.c_[np.cos(t1), np.sin(t1)] * 1.0
        outer = np.c_[np.cos(t2), np.sin(t2)] * 6.0
        x = np.vstack([inner, outer]) + rng.normal(0, 0.05, (80, 2))
        sim = cluster.SimilarityConfig(kind="knn", n_neighbors=5)
        assign = cluster.spectral(x, 2, seed=0, similarity=sim)
        assert groups(assign.labels) == {
            frozenset(range(40)), frozenset(range(40, 80))}

    def test_precomputed_similarity(self):
        w = np.zeros((6, 6))
        for i, j in [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]:
            w[i, j] = w[j, i] = 1.0
        sim = cluster.SimilarityConfig(kind="precomputed", matrix=w)
        assign = cluster.spectral(np.zeros((6, 1)), 2, seed=0, similarity=sim)
        assert groups(assign.labels) == {frozenset({0, 1, 2}), frozenset({3, 4, 5})}

    def test_all_zero_similarity(self):
        sim = cluster.SimilarityConfig(kind="precomputed", matrix=np.zeros((4, 4)))
        with pytest.raises(DegenerateSimilarity):
            cluster.spectral_basis(np.zeros((4, 1)), sim)


class TestDbscan:
    FIXTURE = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0], [100.0]])

    def test_fixture(self):
        assign = cluster.dbscan(self.FIXTURE, eps=1.5, min_samples=2)
        assert groups(assign.labels) - {frozenset({6})} == {
            frozenset({0, 1, 2}), frozenset({3, 4, 5})}
        assert assign.labels[6] == -1
        assert assign.k_effective == 2

    def test_eps_inclusive(self):
        x = np.array([[0.0], [1.0]])
        assign = cluster.dbscan(x, eps=1.0, min_samples=2)
        assert assign.labels.tolist() == [0, 0]

    def test_all_noise(self):
        x = np.array([[0.0], [10.0], [20.0]])
        assign = cluster.dbscan(x, eps=1.0, min_samples=2)
        assert assign.labels.tolist() == [-1, -1, -1]
        assert assign.k_effective == 0

    def test_min_samples_counts_query_point(self):
        x = np.array([[0.0], [1.0], [2.0]])
        # point 1 has neighborhood {0,1,2}: core at min_samples=3
        assign = cluster.dbscan(x, eps=1.0, min_samples=3)
        assert assign.labels.tolist() == [0, 0, 0]

    def test_deterministic(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(60, 2))
        a = cluster.dbscan(x, eps=0.5, min_samples=4)
        b = cluster.dbscan(x, eps=0.5, min_samples=4)
        assert np.array_equal(a.labels, b.labels)

    def test_invalid_params(self):
        with pytest.raises(KTooLarge):
            cluster.dbscan(LINE4, eps=0.0, min_samples=2)

    def test_default_eps_positive(self):
        rng = np.random.default_rng(10)
        x = rng.normal(size=(30, 2))
        assert cluster.default_eps(x) > 0.0
