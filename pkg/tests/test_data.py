import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from n3lars.data import Dataset, ParseError, generate_synthetic, load_dataset, standardize


def test_load_csv_regression(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2,3,0.5\n4,5,6,1.5\n7,8,9,2.5\n0,1,0,3.5\n")
    ds = load_dataset(f, "csv", "regression")
    assert (ds.d, ds.n) == (3, 4)
    np.testing.assert_array_equal(ds.X[0], [1, 4, 7, 0])
    np.testing.assert_array_equal(ds.y, [0.5, 1.5, 2.5, 3.5])


def test_load_csv_header(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("a,b,y\n1,2,0\n3,4,1\n")
    ds = load_dataset(f, task="classification", header=True)
    assert ds.feature_names == ["a", "b"]
    assert ds.n_classes == 2


def test_load_libsvm_relabels(tmp_path):
    f = tmp_path / "a.svm"
    f.write_text("+1 1:0.5 3:2\n-1 2:1.0\n+1 1:1 2:1 3:1\n-1 3:4\n")
    ds = load_dataset(f, "libsvm", "classification")
    np.testing.assert_array_equal(ds.y, [1, 0, 1, 0])
    assert ds.n_classes == 2
    np.testing.assert_array_equal(ds.classes, [-1, 1])
    np.testing.assert_array_equal(ds.X[:, 1], [0, 1, 0])
    assert ds.d == 3


def test_csv_non_numeric_location(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2,3,4\n5,6,x,8\n")
    with pytest.raises(ParseError) as err:
        load_dataset(f)
    assert (err.value.row, err.value.col) == (2, 3)
    assert "(row 2, col 3)" in str(err.value)


def test_csv_ragged(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,2,3\n4,5\n")
    with pytest.raises(ParseError, match="ragged"):
        load_dataset(f)


def test_libsvm_malformed(tmp_path):
    f = tmp_path / "a.svm"
    f.write_text("1 1:2\n0 2-3\n")
    with pytest.raises(ParseError) as err:
        load_dataset(f, "libsvm", "classification")
    assert err.value.row == 2


def test_empty_class_rejected():
    with pytest.raises(ValueError, match="empty class 1"):
        Dataset(np.ones((1, 3)), np.array([0, 2, 2]), "classification")


def test_string_labels(tmp_path):
    f = tmp_path / "a.csv"
    f.write_text("1,cat\n2,dog\n3,cat\n")
    ds = load_dataset(f, task="classification")
    np.testing.assert_array_equal(ds.y, [0, 1, 0])
    assert list(ds.classes) == ["cat", "dog"]


def test_standardize_unit_std():
    ds = standardize(Dataset(np.array([[1.0, 2, 3, 4]]), np.array([0.0, 1, 0, 1])))
    assert abs(ds.X[0].std(ddof=1) - 1) < 1e-12


def test_standardize_already_unit():
    row = np.array([-1.0, 0.0, 1.0])  # mean 0, sample std 1
    ds = standardize(Dataset(row[None, :], np.array([1.0, 2, 3])))
    np.testing.assert_allclose(ds.X[0], row, atol=1e-12)


def test_standardize_constant_row():
    X = np.array([[5.0, 5, 5], [1, 2, 4]])
    ds = standardize(Dataset(X, np.array([1.0, 2, 3])))
    np.testing.assert_array_equal(ds.X[0], [5, 5, 5])
    assert ds.constant.tolist() == [True, False]


def test_standardize_scales_regression_output_only():
    X = np.array([[1.0, 2, 3, 5]])
    reg = standardize(Dataset(X, np.array([1.0, 3, 5, 9])))
    assert abs(reg.y.std(ddof=1) - 1) < 1e-12
    cls = standardize(Dataset(X, np.array([0, 1, 1, 0]), "classification"))
    np.testing.assert_array_equal(cls.y, [0, 1, 1, 0])


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (3, 8), elements=st.floats(-1e3, 1e3)))
def test_standardize_idempotent(X):
    ds = standardize(Dataset(X, np.arange(8.0)))
    again = standardize(ds)
    np.testing.assert_allclose(again.X, ds.X, atol=1e-12)
    live = ~ds.constant
    np.testing.assert_allclose(ds.X[live].std(axis=1, ddof=1), 1.0, atol=1e-9)


def test_synthetic_shape_full_size():
    ds = generate_synthetic(100, 1000, 1000, 0.1, seed=7)
    assert (ds.d, ds.n) == (2000, 100)


def test_synthetic_deterministic():
    a = generate_synthetic(50, 10, 5, 0.1, seed=3)
    b = generate_synthetic(50, 10, 5, 0.1, seed=3)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()


def test_synthetic_copy_correlation():
    ds = generate_synthetic(10_000, 3, 3, 0.1, seed=1)
    for k in range(3):
        assert np.corrcoef(ds.X[k], ds.X[3 + k])[0, 1] > 0.99


def test_synthetic_target_formula():
    ds = generate_synthetic(20, 4, 0, 0.0, seed=2)
    X = ds.X
    np.testing.assert_allclose(ds.y, X[0] * np.exp(X[1]) + X[2])


def test_synthetic_needs_three_features():
    with pytest.raises(ValueError):
        generate_synthetic(10, 2, 0)
    with pytest.raises(ValueError):
        generate_synthetic(10, 3, 4)
