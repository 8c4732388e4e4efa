import numpy as np
import pytest

from stablefield import (
    CovModel,
    GridField,
    GridSpec,
    GridTooLarge,
    MAX_SITES,
    NotPSD,
    cholesky_jitter,
    gaussian_sim,
    make_kernel,
    shot_noise_sim,
    subgaussian_sim,
)


def test_grid_spec_layout():
    g = GridSpec((0.0, 1.0), (0.5, 0.25), (3, 2))
    s = g.sites()
    assert s.shape == (6, 2)
    np.testing.assert_array_equal(s[:3], [[0.0, 1.0], [0.0, 1.25], [0.5, 1.0]])
    with pytest.raises(ValueError):
        GridSpec((0.0,), (0.0,), (3,))


def test_white_noise_has_no_lag_correlation():
    m = CovModel("white-noise", {"b": 1.0}, dim=1)
    f = gaussian_sim(m, GridSpec((0.0,), (1.0,), (4000,)), seed=1)
    x = f.values
    assert abs(np.corrcoef(x[:-1], x[1:])[0, 1]) < 0.05
    assert x.var() == pytest.approx(1.0, abs=0.07)


def test_matern_marginal_variance():
    m = CovModel("whittle-matern", {"a": 2.0, "b": 1.0, "nu": 1.0}, dim=2)
    f = gaussian_sim(m, GridSpec((0.0, 0.0), (0.2, 0.2), (4, 4)), seed=2, size=4000)
    assert f.values.shape == (4000, 16)
    np.testing.assert_allclose(f.values.var(axis=0), 1.0, atol=0.07)
    assert f.as_array().shape == (4000, 4, 4)


def test_fbf_vanishes_at_origin():
    m = CovModel("fbf", {"H": 0.4}, dim=2)
    f = gaussian_sim(m, GridSpec((0.0, 0.0), (0.1, 0.1), (5, 5)), seed=3, size=20)
    assert np.all(f.values[:, 0] == 0.0)
    assert np.all(f.values[:, 1:].std(axis=0) > 0)


def test_subgaussian_char_fn():
    alpha = 1.3
    m = CovModel("exponential", {"a": 1.0, "b": 2.0}, dim=1)
    f = subgaussian_sim(m, alpha, [[0.0], [0.5]], seed=4, size=100_000)
    x = f.values[:, 0]
    for th in (0.3, 1.0, 2.0):
        assert abs(np.exp(1j * th * x).mean() - np.exp(-(th**alpha))) < 0.01


def test_unit_mixing_reproduces_gaussian_stream():
    m = CovModel("gaussian", {"a": 3.0, "b": 1.0}, dim=2)
    g = GridSpec((0.0, 0.0), (0.1, 0.1), (6, 6))
    a = gaussian_sim(m, g, seed=5).values
    b = subgaussian_sim(m, 1.5, g, seed=5, mixing=1.0).values
    np.testing.assert_array_equal(a, b)


def test_simulation_is_seeded():
    m = CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2)
    g = GridSpec((0.0, 0.0), (0.1, 0.1), (5, 5))
    np.testing.assert_array_equal(subgaussian_sim(m, 0.9, g, 6).values, subgaussian_sim(m, 0.9, g, 6).values)
    assert not np.array_equal(gaussian_sim(m, g, 6).values, gaussian_sim(m, g, 7).values)


def test_shot_noise_mean():
    lam, r = 50.0, 0.1
    k = make_kernel("cylinder", r=r)
    g = GridSpec((0.0, 0.0), (0.25, 0.25), (5, 5))
    f = shot_noise_sim(lam, k, ([0.0, 0.0], [1.0, 1.0]), g, seed=8, size=4000)
    assert f.values.mean() == pytest.approx(lam * np.pi * r**2, rel=0.03)
    assert np.all(f.values >= 0)
    empty = shot_noise_sim(0.0, k, ([0.0, 0.0], [1.0, 1.0]), g, seed=8, size=3)
    assert np.all(empty.values == 0.0)


def test_shot_noise_accepts_plain_profile():
    prof = make_kernel("bisquare", r=0.2).profile
    g = GridSpec((0.0,), (0.1,), (11,))
    a = shot_noise_sim(20.0, prof, ([0.0], [1.0]), g, seed=9).values
    b = shot_noise_sim(20.0, make_kernel("bisquare", r=0.2), ([0.0], [1.0]), g, seed=9).values
    np.testing.assert_array_equal(a, b)


def test_grid_too_large():
    m = CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2)
    with pytest.raises(GridTooLarge):
        gaussian_sim(m, GridSpec((0.0, 0.0), (0.01, 0.01), (65, 64)), seed=1)
    assert MAX_SITES == 4096


def test_cholesky_jitter():
    K = np.ones((3, 3))
    L, jit = cholesky_jitter(K)
    assert jit > 0
    np.testing.assert_allclose(L @ L.T, K, atol=1e-5)
    with pytest.raises(NotPSD):
        cholesky_jitter(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_csv_round_trip(tmp_path):
    m = CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2)
    f = gaussian_sim(m, GridSpec((0.0, 0.0), (0.1, 0.3), (3, 4)), seed=10)
    p = tmp_path / "f.csv"
    f.to_csv(p)
    back = GridField.from_csv(p)
    np.testing.assert_array_equal(back.sites, f.sites)
    np.testing.assert_array_equal(back.values, f.values)


def test_binary_round_trip(tmp_path):
    m = CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2)
    f = gaussian_sim(m, GridSpec((-1.0, 0.5), (0.1, 0.3), (3, 4)), seed=11)
    p = tmp_path / "f.bin"
    f.to_binary(p)
    back = GridField.from_binary(p)
    assert back.grid == f.grid and back.seed == 11
    np.testing.assert_array_equal(back.values, f.values)
    np.testing.assert_array_equal(back.sites, f.sites)
