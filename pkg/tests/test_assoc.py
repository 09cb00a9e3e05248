import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from surveyseg import assoc, ingest
from surveyseg.errors import ConstantInput, DegenerateTable, EmptyInput, InvalidP, LengthMismatch

TABLE_2X2 = assoc.ContingencyTable(
    counts=np.array([[10, 2], [2, 10]]), row_labels=["a", "b"], col_labels=["x", "y"])
TABLE_DIAG = assoc.ContingencyTable(
    counts=np.array([[5, 0], [0, 5]]), row_labels=["a", "b"], col_labels=["x", "y"])


def bh_stepup_reference(pvals, alpha):
    """Independent step-up implementation by the definition."""
    m = len(pvals)
    order = sorted(range(m), key=lambda i: pvals[i])
    k_max = 0
    for rank, i in enumerate(order, start=1):
        if pvals[i] <= rank * alpha / m:
            k_max = rank
    reject = [False] * m
    for rank, i in enumerate(order, start=1):
        if rank <= k_max:
            reject[i] = True
    return reject


class TestContingency:
    def test_counts(self):
        t = assoc.contingency(["a", "a", "b"], ["x", "y", "x"])
        assert t.row_labels == ["a", "b"]
        assert t.col_labels == ["x", "y"]
        assert np.array_equal(t.counts, [[1, 1], [1, 0]])
        assert t.n == 3

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            assoc.contingency(["a"], ["x", "y"])

    def test_empty(self):
        with pytest.raises(EmptyInput):
            assoc.contingency([], [])


class TestChiSquare:
    def test_oracle_2x2(self):
        stat, df, p = assoc.chi_square(TABLE_2X2)
        assert stat == pytest.approx(10.6667, abs=1e-4)
        assert df == 1
        assert p == pytest.approx(1.0908e-3, abs=1e-6)

    def test_independent_table(self):
        t = assoc.ContingencyTable(
            counts=np.array([[10, 10], [10, 10]]), row_labels=["a", "b"],
            col_labels=["x", "y"])
        stat, df, p = assoc.chi_square(t)
        assert stat == 0.0
        assert p == 1.0

    def test_degenerate(self):
        t = assoc.ContingencyTable(counts=np.array([[3, 4]]),
                                   row_labels=["a"], col_labels=["x", "y"])
        with pytest.raises(DegenerateTable):
            assoc.chi_square(t)


class TestCramersV:
    def test_oracle_2x2(self):
        assert assoc.cramers_v_corrected(TABLE_2X2) == pytest.approx(0.64745, abs=1e-4)

    def test_perfect_association(self):
        assert assoc.cramers_v_corrected(TABLE_DIAG) == pytest.approx(1.0, abs=1e-6)

    def test_bias_correction_floors_at_zero(self):
        t = assoc.ContingencyTable(counts=np.array([[5, 5], [5, 5]]),
                                   row_labels=["a", "b"], col_labels=["x", "y"])
        assert assoc.cramers_v_corrected(t) == 0.0

    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            counts = rng.integers(1, 20, size=(rng.integers(2, 5), rng.integers(2, 5)))
            t = assoc.ContingencyTable(counts=counts, row_labels=[], col_labels=[])
            v = assoc.cramers_v_corrected(t)
            assert 0.0 <= v <= 1.0 + 1e-12


class TestTschuprowT:
    def test_equals_v_on_square_tables(self):
        assert assoc.tschuprow_t(TABLE_2X2) == pytest.approx(0.64745, abs=1e-4)
        rng = np.random.default_rng(1)
        for _ in range(20):
            r = int(rng.integers(2, 5))
            counts = rng.integers(1, 15, size=(r, r))
            t = assoc.ContingencyTable(counts=counts, row_labels=[], col_labels=[])
            assert assoc.tschuprow_t(t) == pytest.approx(
                assoc.cramers_v_corrected(t), abs=1e-10)

    def test_at_most_v_on_rectangular(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            counts = rng.integers(1, 15, size=(2, 4))
            t = assoc.ContingencyTable(counts=counts, row_labels=[], col_labels=[])
            assert assoc.tschuprow_t(t) <= assoc.cramers_v_corrected(t) + 1e-10


class TestTheilU:
    def test_oracle(self):
        # H(X)=entropy([3,1]); H(X|Y): Y=c -> X all a (0), Y=d -> X=[a,b]
        x = ["a", "a", "a", "b"]
        y = ["c", "c", "d", "d"]
        h_x = -(0.75 * math.log(0.75) + 0.25 * math.log(0.25))
        h_x_given_y = 0.5 * math.log(2)
        expected = (h_x - h_x_given_y) / h_x
        assert assoc.theil_u(x, y) == pytest.approx(expected, abs=1e-10)
        assert expected == pytest.approx(0.38369, abs=1e-4)

    def test_perfect_prediction(self):
        assert assoc.theil_u(["a", "b", "a"], ["x", "y", "x"]) == 1.0

    def test_independence(self):
        x = ["a", "a", "b", "b"]
        y = ["x", "y", "x", "y"]
        assert assoc.theil_u(x, y) == pytest.approx(0.0, abs=1e-12)

    def test_asymmetric(self):
        # y determines x but not conversely
        x = ["a", "a", "a", "b"]
        y = ["c", "c", "d", "e"]
        assert assoc.theil_u(x, y) != assoc.theil_u(y, x)

    def test_constant_x_defined_as_zero(self):
        assert assoc.theil_u(["a", "a"], ["x", "y"]) == 0.0


class TestSpearman:
    def test_oracle_with_ties(self):
        # ranks of x (average over the tie): [1, 2.5, 2.5, 4, 5]; ranks of y:
        # [1, 3, 2, 4, 5]; Pearson on the ranks gives 9.5/sqrt(9.5*10).
        x = [1.0, 2.0, 2.0, 3.0, 5.0]
        y = [1.0, 3.0, 2.0, 4.0, 5.0]
        assert assoc.spearman_rho(x, y) == pytest.approx(9.5 / math.sqrt(95), abs=1e-10)
        assert 9.5 / math.sqrt(95) == pytest.approx(0.97468, abs=1e-4)

    def test_perfect_monotone(self):
        assert assoc.spearman_rho([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert assoc.spearman_rho([1, 2, 3], [9, 4, 1]) == pytest.approx(-1.0)

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(7)
        x = rng.normal(size=50)
        y = rng.normal(size=50)
        base = assoc.spearman_rho(x, y)
        assert assoc.spearman_rho(np.exp(x), y) == pytest.approx(base, abs=1e-12)
        assert assoc.spearman_rho(x, y ** 3) == pytest.approx(base, abs=1e-12)

    def test_constant(self):
        with pytest.raises(ConstantInput):
            assoc.spearman_rho([1, 1, 1], [1, 2, 3])


class TestBhAdjust:
    def test_oracle(self):
        p = [0.01, 0.04, 0.03, 0.20]
        adjusted, reject = assoc.bh_adjust(p, alpha=0.05)
        # sorted raw: 0.01, 0.03, 0.04, 0.20 -> p*(m/k) = 0.04, 0.06,
        # 0.0533..., 0.20; running min from the right makes both middle
        # entries 0.0533...; only p=0.01 clears the step-up at alpha=0.05.
        assert adjusted == pytest.approx([0.04, 0.16 / 3, 0.16 / 3, 0.20])
        assert reject == [True, False, False, False]

    def test_no_rejections(self):
        _, reject = assoc.bh_adjust([0.5, 0.9, 0.7], alpha=0.05)
        assert reject == [False, False, False]

    def test_invalid_p(self):
        with pytest.raises(InvalidP):
            assoc.bh_adjust([0.5, 1.5])
        with pytest.raises(InvalidP):
            assoc.bh_adjust([-0.1])

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=1, max_size=30))
    @settings(max_examples=200)
    def test_matches_stepup_definition(self, pvals):
        adjusted, reject = assoc.bh_adjust(pvals, alpha=0.05)
        assert reject == bh_stepup_reference(pvals, 0.05)
        for a, p in zip(adjusted, pvals):
            assert p - 1e-15 <= a <= 1.0

    @given(st.lists(st.floats(min_value=0.0, max_value=1.0), min_size=2, max_size=20))
    @settings(max_examples=100)
    def test_adjustment_preserves_order(self, pvals):
        adjusted, _ = assoc.bh_adjust(pvals)
        order = np.argsort(pvals, kind="stable")
        sorted_adj = [adjusted[i] for i in order]
        assert all(a <= b + 1e-15 for a, b in zip(sorted_adj, sorted_adj[1:]))


def _feature_matrix(rng, n=200, dependent=True):
    a = rng.integers(0, 3, size=n)
    b = a.copy() if dependent else rng.integers(0, 3, size=n)
    vals = np.column_stack([a, b]).astype(float)
    meta = [
        {"name": "f_a", "source": "f_a", "encoding": "ordinal"},
        {"name": "f_b", "source": "f_b", "encoding": "ordinal"},
    ]
    return ingest.FeatureMatrix(values=vals, feature_meta=meta,
                                row_ids=list(range(n)))


class TestAssociationMatrix:
    def test_duplicate_feature_maxes_metrics(self):
        fm = _feature_matrix(np.random.default_rng(0), dependent=True)
        results, mats = assoc.association_matrix(fm)
        res = results[0]
        assert res.cramers_v_corrected == pytest.approx(1.0, abs=1e-6)
        assert res.theil_u_ab == pytest.approx(1.0, abs=1e-10)
        assert abs(res.spearman_rho) == pytest.approx(1.0, abs=1e-10)
        assert res.verdicts["chi2_bh"] and res.verdicts["cramers_v"]

    def test_independent_features_low(self):
        fm = _feature_matrix(np.random.default_rng(1), dependent=False)
        results, _ = assoc.association_matrix(fm)
        res = results[0]
        assert res.cramers_v_corrected < 0.1
        assert not res.verdicts["cramers_v"]

    def test_matrices_shape_and_diagonal(self):
        fm = _feature_matrix(np.random.default_rng(2))
        _, mats = assoc.association_matrix(fm)
        for key in ("cramers_v", "tschuprow_t", "theil_u", "spearman_rho"):
            m = mats[key]
            assert m.shape == (2, 2)
            assert np.all(np.diag(m) == 1.0)
        assert np.array_equal(mats["cramers_v"], mats["cramers_v"].T)

    def test_onehot_block_collapsed(self):
        rng = np.random.default_rng(3)
        cats = rng.integers(0, 3, size=100)
        onehot = np.eye(3)[cats]
        vals = np.column_stack([onehot, cats.astype(float)])
        meta = [
            {"name": f"col_{c}", "source": "col", "encoding": "onehot", "category": c}
            for c in "abc"
        ] + [{"name": "num", "source": "num", "encoding": "numeric"}]
        fm = ingest.FeatureMatrix(values=vals, feature_meta=meta,
                                  row_ids=list(range(100)))
        results, mats = assoc.association_matrix(fm)
        assert mats["names"] == ["col", "num"]
        assert len(results) == 1
        assert results[0].cramers_v_corrected == pytest.approx(1.0, abs=1e-6)
