import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from shufflelab.data import (Dataset, binarize_labels, load_dataset, map_binary_labels, parse_csv,
                             parse_libsvm, serialize_libsvm, standardize)
from shufflelab.errors import ParseError
from shufflelab.rngcore import SeededGenerator


def test_libsvm_example():
    ds = parse_libsvm("+1 1:0.5 3:2\n-1 2:1\n")
    assert ds.n == 2 and ds.d_in == 3 and ds.is_sparse
    assert ds.labels.tolist() == [1.0, -1.0]
    assert ds.dense_features().tolist() == [[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]]


def test_libsvm_comments_blank_lines_and_bytes():
    ds = parse_libsvm(b"# header\n+1 1:1 # trailing\n\n-1\n")
    assert ds.n == 2 and ds.d_in == 1
    assert ds.dense_features().tolist() == [[1.0], [0.0]]


def test_libsvm_empty():
    with pytest.raises(ParseError, match="empty file"):
        parse_libsvm("")


@pytest.mark.parametrize("text, line", [
    ("+1 1:1\nabc 1:2\n", 2),
    ("+1 1:x\n", 1),
    ("+1 1:1\n-1 2:1 2:3\n", 2),
    ("+1 3:1 1:1\n", 1),
    ("+1 0:1\n", 1),
    ("+1 1\n", 1),
])
def test_libsvm_errors_carry_line(text, line):
    with pytest.raises(ParseError) as exc:
        parse_libsvm(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


@pytest.mark.parametrize("raw, expected", [([0, 1, 1], [-1, 1, 1]), ([2, 1], [1, -1]), ([-1, 1], [-1, 1])])
def test_label_mapping(raw, expected):
    assert map_binary_labels(np.array(raw, dtype=float)).tolist() == expected


def test_label_mapping_rejects_multiclass():
    with pytest.raises(ParseError):
        map_binary_labels(np.array([0.0, 1.0, 2.0]))


def test_binary_labels_subset_of_pm1():
    ds = parse_libsvm("1 1:1\n2 1:2\n1 1:3\n")
    assert set(ds.labels.tolist()) <= {-1.0, 1.0}


def _random_sparse(seed, n, d):
    gen = SeededGenerator(seed)
    mask = gen.uniforms(n * d).reshape(n, d) < 0.3
    vals = gen.gaussians(n * d).reshape(n, d) * 10 ** (gen.uniforms(n * d).reshape(n, d) * 6 - 3)
    X = sp.csr_matrix(np.where(mask, vals, 0.0))
    y = np.where(gen.uniforms(n) < 0.5, 1.0, -1.0)
    return Dataset(X, y)


def _same(a, b):
    assert a.n == b.n and a.d_in == b.d_in
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.features.indptr, b.features.indptr)
    assert np.array_equal(a.features.indices, b.features.indices)
    assert np.array_equal(a.features.data, b.features.data)


def test_round_trip_hundred_rows():
    ds = _random_sparse(1, 100, 12)
    _same(parse_libsvm(serialize_libsvm(ds), n_features=12), ds)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 40), d=st.integers(1, 15))
def test_round_trip_property(seed, n, d):
    ds = _random_sparse(seed, n, d)
    _same(parse_libsvm(serialize_libsvm(ds), label_mode="raw", n_features=d), ds)


def test_round_trip_regression_labels():
    ds = Dataset(sp.csr_matrix(np.array([[0.0, 1.5], [2.0, 0.0]])), np.array([0.1, -3.25]))
    back = parse_libsvm(serialize_libsvm(ds), label_mode="raw")
    assert back.labels.tolist() == [0.1, -3.25]


def test_csv_example():
    ds = parse_csv("x,y,t\n1,2,3\n4,5,6\n", label_column="t")
    assert ds.dense_features().tolist() == [[1, 2], [4, 5]]
    assert ds.labels.tolist() == [3, 6]
    assert ds.feature_stats["columns"] == ["x", "y"]


def test_csv_single_row_and_no_header():
    assert parse_csv("a,b\n1,2\n").n == 1
    ds = parse_csv("1,2,3\n", label_column=0, has_header=False)
    assert ds.labels.tolist() == [1.0] and ds.dense_features().tolist() == [[2.0, 3.0]]


@pytest.mark.parametrize("text, line, column", [
    ("a,b\n1,2\n3\n", 3, None),
    ("a,b\n1,x\n", 2, 2),
    ("a,b\n1,\n", 2, 2),
])
def test_csv_errors_name_row_and_column(text, line, column):
    with pytest.raises(ParseError) as exc:
        parse_csv(text)
    assert exc.value.line == line and exc.value.column == column


def test_csv_unknown_label_column():
    with pytest.raises(ParseError):
        parse_csv("a,b\n1,2\n", label_column="z")
    with pytest.raises(ParseError):
        parse_csv("a,b\n1,2\n", label_column=5)


def test_standardize_two_points():
    ds = standardize(Dataset(np.array([[1.0], [3.0]]), np.zeros(2)))
    assert ds.features.tolist() == [[-1.0], [1.0]]


def test_standardize_drops_constant_columns():
    ds = standardize(Dataset(np.array([[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]]), np.zeros(3)))
    assert ds.d_in == 1
    assert ds.feature_stats["dropped"].tolist() == [0]
    assert ds.feature_stats["kept"].tolist() == [1]


def test_standardize_needs_two_rows():
    with pytest.raises(ValueError):
        standardize(Dataset(np.array([[1.0]]), np.zeros(1)))


def _moments_ok(Z):
    assert np.abs(Z.mean(axis=0)).max() <= 1e-9
    assert np.abs(Z.var(axis=0) - 1).max() <= 1e-6


def test_standardize_random_matrix():
    gen = SeededGenerator(4)
    X = gen.gaussians(200).reshape(50, 4) * np.array([1.0, 10.0, 0.01, 1e4]) + np.array([0.0, -5.0, 3.0, 1e6])
    _moments_ok(standardize(Dataset(X, np.zeros(50))).features)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(2, 60), d=st.integers(1, 6))
def test_standardize_invariant_and_idempotent(seed, n, d):
    gen = SeededGenerator(seed)
    X = gen.gaussians(n * d).reshape(n, d) * 3 + 1
    once = standardize(Dataset(X, np.zeros(n)))
    _moments_ok(once.features)
    twice = standardize(once)
    assert np.abs(twice.features - once.features).max() <= 1e-9


def test_standardize_sparse_input():
    ds = standardize(parse_libsvm("+1 1:1 2:4\n-1 1:3\n+1 2:2\n"))
    _moments_ok(ds.features)


def test_binarize_digits_rule():
    ds = binarize_labels(Dataset(np.zeros((4, 1)), np.array([0.0, 5.0, 6.0, 9.0])), 5)
    assert ds.labels.tolist() == [-1, -1, 1, 1]


def test_load_dataset(tmp_path):
    p = tmp_path / "toy.csv"
    p.write_text("a,label\n1,0\n2,1\n")
    ds = load_dataset(p, label_column="label")
    assert ds.name == "toy" and ds.n == 2
    q = tmp_path / "toy.svm"
    q.write_text("+1 1:1\n-1 1:2\n")
    assert load_dataset(q).is_sparse
