import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from n3lars.data import Dataset, standardize
from n3lars.kernels import (
    KernelConfig,
    center_normalize,
    class_factor,
    class_indicator,
    default_basis,
    delta_gram,
    gaussian_gram,
    load_factor,
    make_basis,
    nystrom_factor,
    output_factor,
    save_factor,
)
from n3lars.nhsic import nhsic_approx, nhsic_exact
from oracles import gram_loops, normalized_gram


def _std(v):
    return (v - v.mean()) / v.std(ddof=1)


def test_gaussian_gram_zero_distance():
    np.testing.assert_array_equal(gaussian_gram([0, 0, 0]), np.ones((3, 3)))


def test_gaussian_gram_value():
    K = gaussian_gram([0, np.sqrt(2)], 1.0)
    assert K[0, 1] == pytest.approx(np.exp(-1), abs=1e-15)
    assert K[0, 1] == pytest.approx(0.36788, abs=1e-5)


def test_gaussian_gram_matches_loops_and_psd():
    u = np.random.default_rng(0).standard_normal(50)
    K = gaussian_gram(u)
    np.testing.assert_allclose(K, gram_loops(u), atol=1e-15)
    assert np.linalg.eigvalsh(K).min() >= -1e-10
    np.testing.assert_array_equal(np.diag(K), 1.0)


def test_gaussian_gram_rejects_nonfinite():
    with pytest.raises(ValueError):
        gaussian_gram([0.0, np.nan])


def test_delta_gram_examples():
    np.testing.assert_allclose(delta_gram(["a", "a", "b"]),
                               [[.5, .5, 0], [.5, .5, 0], [0, 0, 1]])
    np.testing.assert_allclose(delta_gram([3, 3, 3, 3]), np.full((4, 4), 0.25))
    labels = np.random.default_rng(1).integers(0, 5, size=40)
    assert np.trace(delta_gram(labels)) == pytest.approx(len(np.unique(labels)), abs=1e-12)


def test_center_normalize_constant_is_degenerate():
    g = center_normalize(np.ones((4, 4)))
    assert g.degenerate
    np.testing.assert_array_equal(g.M, 0.0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 12, elements=st.floats(-4, 4)))
def test_center_normalize_invariants(u):
    g = center_normalize(gaussian_gram(u))
    n = u.size
    assert abs(g.M.sum()) <= 1e-8 * n
    if not g.degenerate:
        assert np.linalg.norm(g.M) == pytest.approx(1.0, abs=1e-10)
        np.testing.assert_allclose(g.M, g.M.T, atol=1e-12)


def test_center_normalize_direction_idempotent():
    u = np.random.default_rng(2).standard_normal(15)
    once = center_normalize(gaussian_gram(u)).M
    twice = center_normalize(7.5 * once).M
    cos = np.vdot(once, twice) / (np.linalg.norm(once) * np.linalg.norm(twice))
    assert cos == pytest.approx(1.0, abs=1e-10)


def test_center_normalize_matches_explicit_gamma():
    u = np.random.default_rng(3).standard_normal(20)
    np.testing.assert_allclose(center_normalize(gaussian_gram(u)).M,
                               normalized_gram(gram_loops(u)), atol=1e-13)


def test_default_basis():
    b = default_basis()
    assert b.size == 20
    assert b[0] == -5 and b[19] == 5
    assert b[1] == pytest.approx(-5 + 10 / 19, abs=1e-12)
    assert round(b[1], 2) == -4.47
    np.testing.assert_allclose(np.diff(b), 10 / 19, atol=1e-12)
    assert np.all(np.diff(b) > 0)


def test_nystrom_factor_contract():
    rng = np.random.default_rng(4)
    for n in (30, 200):
        f = nystrom_factor(_std(rng.standard_normal(n)))
        assert np.abs(f.F.sum(axis=0)).max() <= 1e-8 * n
        assert np.linalg.norm(f.F.T @ f.F) == pytest.approx(1.0, abs=1e-10)
        assert np.linalg.norm(f.induced_gram()) == pytest.approx(1.0, abs=1e-10)


def test_nystrom_exact_recovery():
    u = _std(np.random.default_rng(5).standard_normal(25))
    f = nystrom_factor(u, basis=u, eps=1e-12)
    np.testing.assert_allclose(f.induced_gram(), center_normalize(gaussian_gram(u)).M,
                               atol=1e-6)


def test_nystrom_default_grid_error():
    # oracle: exact normalized Gram; measured max error 4.5e-8 over 100 draws (n=200)
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(20):
        u = _std(rng.standard_normal(200))
        err = np.linalg.norm(nystrom_factor(u).induced_gram()
                             - center_normalize(gaussian_gram(u)).M)
        worst = max(worst, err)
    assert worst < 0.05
    assert worst < 1e-6


def test_nystrom_induced_gram_psd():
    u = _std(np.random.default_rng(7).standard_normal(80))
    G = nystrom_factor(u).induced_gram()
    np.testing.assert_allclose(G, G.T, atol=1e-14)
    assert np.linalg.eigvalsh(G).min() >= -1e-12


def test_nystrom_constant_degenerate():
    f = nystrom_factor(np.full(10, 3.0))
    assert f.degenerate
    np.testing.assert_array_equal(f.F, 0.0)


def test_class_indicator_rows():
    G = class_indicator(["a", "a", "b", "b"])
    np.testing.assert_allclose(G.sum(axis=1), np.sqrt(2))
    np.testing.assert_allclose(G.T @ G, delta_gram(["a", "a", "b", "b"]))


def test_classification_output_factor_matches_exact():
    y = np.array([0, 1] * 10)
    ds = Dataset(np.random.default_rng(8).standard_normal((2, 20)), y, "classification")
    g = output_factor(ds)
    assert g.F.shape == (2, 20)
    assert np.linalg.norm(g.induced_gram()) == pytest.approx(1.0, abs=1e-10)
    assert nhsic_approx(g, g) == pytest.approx(1.0, abs=1e-10)
    exact = center_normalize(delta_gram(y))
    np.testing.assert_allclose(g.induced_gram(), exact.M, atol=1e-12)
    assert nhsic_exact(exact, exact) == pytest.approx(1.0, abs=1e-10)


def test_unbalanced_class_factor_normalized():
    g = class_factor([0, 0, 0, 1, 2, 2])
    assert np.linalg.norm(g.induced_gram()) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(g.induced_gram(), center_normalize(delta_gram([0, 0, 0, 1, 2, 2])).M,
                               atol=1e-12)


def test_regression_output_factor_is_input_construction():
    rng = np.random.default_rng(9)
    ds = standardize(Dataset(rng.standard_normal((2, 40)), rng.standard_normal(40)))
    g = output_factor(ds)
    np.testing.assert_array_equal(g.F, nystrom_factor(ds.y).F)
    assert g.kind == "output-regression"


def test_factor_roundtrip(tmp_path):
    f = nystrom_factor(_std(np.random.default_rng(10).standard_normal(30)))
    save_factor(f, tmp_path / "f.bin")
    raw = (tmp_path / "f.bin").read_bytes()
    assert len(raw) == 4 + 4 + 8 + 8 + 30 * 20 * 8
    g = load_factor(tmp_path / "f.bin")
    assert g.kind == "input" and g.F.tobytes() == f.F.tobytes()
    c = class_factor([0, 1, 1, 2])
    save_factor(c, tmp_path / "c.bin")
    c2 = load_factor(tmp_path / "c.bin")
    assert c2.kind == "output-classification" and np.array_equal(c2.F, c.F)


def test_config_validation():
    with pytest.raises(ValueError):
        KernelConfig(sigma2_x=0)
    with pytest.raises(ValueError):
        KernelConfig(measure="mi")
    np.testing.assert_array_equal(KernelConfig().basis(), make_basis())


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, 15, elements=st.floats(-6, 6)))
def test_nystrom_factor_invariants(u):
    f = nystrom_factor(u)
    if f.degenerate:
        np.testing.assert_array_equal(f.F, 0.0)
        return
    assert np.abs(f.F.sum(axis=0)).max() <= 1e-8 * u.size
    assert np.linalg.norm(f.F.T @ f.F) == pytest.approx(1.0, abs=1e-10)
