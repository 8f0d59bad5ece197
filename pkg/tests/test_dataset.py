import gzip

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from newtonpath.dataset import (Dataset, SvmlightParseError, load_svmlight,
                                parse_svmlight, synthesize_logistic,
                                synthesize_onehot_classification,
                                synthesize_sparse_classification,
                                train_test_split, write_svmlight)


class TestParse:
    def test_two_line_example(self):
        ds = parse_svmlight("+1 3:1 11:1\n-1 1:0.5\n")
        assert ds.n_rows == 2
        assert ds.dim == 11
        assert list(ds.labels) == [1.0, -1.0]
        idx, val = ds.row(0)
        assert list(idx) == [2, 10] and list(val) == [1.0, 1.0]

    def test_zero_one_labels_map(self):
        ds = parse_svmlight("1 1:1\n0 2:1\n")
        assert list(ds.labels) == [1.0, -1.0]

    def test_comment_and_blank_lines_skipped(self):
        ds = parse_svmlight("# header\n\n+1 1:2.5  # trailing\n")
        assert ds.n_rows == 1
        assert ds.row(0)[1][0] == 2.5

    def test_index_order_violation_reports_line(self):
        with pytest.raises(SvmlightParseError) as exc:
            parse_svmlight("+1 1:1\n+1 5:1 3:1\n")
        assert exc.value.line_no == 2

    def test_bad_label(self):
        with pytest.raises(SvmlightParseError):
            parse_svmlight("2 1:1\n")

    def test_bad_token(self):
        with pytest.raises(SvmlightParseError):
            parse_svmlight("+1 3x1\n")

    def test_nonpositive_index(self):
        with pytest.raises(SvmlightParseError):
            parse_svmlight("+1 0:1\n")

    def test_empty_input(self):
        with pytest.raises(SvmlightParseError):
            parse_svmlight("# only comments\n\n")

    def test_dim_override_widens(self):
        ds = parse_svmlight("+1 3:1\n", dim=10)
        assert ds.dim == 10

    def test_gzip_roundtrip(self, tmp_path):
        ds = synthesize_logistic(20, 4, seed=1)
        path = tmp_path / "data.svm.gz"
        write_svmlight(ds, path)
        with gzip.open(path, "rb") as fh:
            assert fh.read().startswith(b"+1") or fh.read(2) in (b"-1", b"+1")
        ds2 = load_svmlight(path)
        assert ds2.to_svmlight() == ds.to_svmlight()


@settings(max_examples=25, deadline=None)
@given(st.lists(
    st.tuples(st.sampled_from([-1.0, 1.0]),
              st.lists(st.tuples(st.integers(0, 20),
                                 st.floats(-10, 10, allow_nan=False).filter(lambda v: v != 0)),
                       max_size=5)),
    min_size=1, max_size=8))
def test_roundtrip_serialize_reparse(rows):
    labels = [r[0] for r in rows]
    feats = [sorted({i: v for i, v in r[1]}.items()) for r in rows]
    ds = Dataset.from_rows(feats, labels, dim=21)
    back = parse_svmlight(ds.to_svmlight(), dim=21)
    assert back.n_rows == ds.n_rows
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.indices, ds.indices)
    np.testing.assert_allclose(back.data, ds.data, rtol=0, atol=0)


class TestPrefix:
    def test_full_prefix_is_identity_window(self):
        ds = synthesize_logistic(15, 3, seed=0)
        view = ds.prefix(15)
        assert view.n == 15
        assert (view.matrix != ds.matrix).nnz == 0

    def test_empty_prefix_rejected(self):
        ds = synthesize_logistic(5, 2, seed=0)
        with pytest.raises(ValueError):
            ds.prefix(0)
        with pytest.raises(ValueError):
            ds.prefix(6)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(1, 30), st.integers(1, 30))
    def test_nesting(self, a, b):
        m, n = min(a, b), max(a, b)
        ds = synthesize_logistic(30, 4, seed=7)
        inner = ds.prefix(n).matrix[:m]
        outer = ds.prefix(m).matrix
        assert (inner != outer).nnz == 0


class TestSplit:
    def test_a9a_sized_split(self):
        ds = synthesize_onehot_classification(32561, seed=0, group_sizes=(3, 4))
        train, test = train_test_split(ds, 0.1, seed=7)
        assert (train.n_rows, test.n_rows) == (29305, 3256)

    def test_deterministic(self):
        ds = synthesize_logistic(10, 3, seed=0)
        a1, b1 = train_test_split(ds, 0.5, seed=0)
        a2, b2 = train_test_split(ds, 0.5, seed=0)
        assert a1.to_svmlight() == a2.to_svmlight()
        assert b1.to_svmlight() == b2.to_svmlight()

    def test_different_seeds_differ(self):
        ds = synthesize_logistic(10, 3, seed=0)
        memberships = set()
        for seed in (0, 1):
            a, _ = train_test_split(ds, 0.5, seed=seed)
            memberships.add(a.to_svmlight())
        assert len(memberships) == 2

    def test_multiset_preserved_over_seeds(self):
        ds = synthesize_logistic(10, 3, seed=5)
        want = sorted(ds.to_svmlight().splitlines())
        for seed in range(100):
            a, b = train_test_split(ds, 0.3, seed=seed)
            got = sorted(a.to_svmlight().splitlines() + b.to_svmlight().splitlines())
            assert got == want

    def test_empty_side_rejected(self):
        ds = synthesize_logistic(3, 2, seed=0)
        with pytest.raises(ValueError):
            train_test_split(ds, 0.01, seed=0)


class TestSynthetic:
    def test_deterministic_per_seed(self):
        a = synthesize_logistic(100, 5, seed=1)
        b = synthesize_logistic(100, 5, seed=1)
        assert a.to_svmlight() == b.to_svmlight()

    def test_infinite_margin_is_noiseless(self):
        ds, w = synthesize_logistic(200, 6, seed=9, margin=np.inf, return_planted=True)
        t = ds.matrix @ w
        assert np.all(np.sign(t) * ds.labels > 0)

    def test_sparse_generator_deterministic(self):
        a = synthesize_sparse_classification(50, 20, seed=3)
        b = synthesize_sparse_classification(50, 20, seed=3)
        assert a.to_svmlight() == b.to_svmlight()

    def test_onehot_row_structure(self):
        ds = synthesize_onehot_classification(40, seed=2, group_sizes=(3, 5, 4))
        assert ds.dim == 12
        counts = np.diff(ds.indptr)
        assert np.all(counts == 3)
        # one active feature per group
        for i in range(ds.n_rows):
            idx, _ = ds.row(i)
            assert idx[0] < 3 <= idx[1] < 8 <= idx[2] < 12


def test_planted_weights_recoverable_by_pipeline():
    # the solver itself is the oracle: fit the synthetic data and check
    # held-out accuracy clears 0.8
    from newtonpath.newton import NewtonConfig, minimize
    from newtonpath.objective import LossKind, RegularizedObjective

    ds = synthesize_logistic(1000, 10, seed=3, margin=3.0)
    train, test = train_test_split(ds, 0.2, seed=0)
    obj = RegularizedObjective(LossKind.LOGISTIC, train.prefix(train.n_rows), 1e-3)
    res = minimize(obj, np.zeros(10), NewtonConfig(eps=1e-12))
    assert res.converged
    preds = np.sign(test.matrix @ res.x)
    assert np.mean(preds * test.labels > 0) > 0.8
