import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablefield import (
    BivariateSpectralMeasure,
    DegenerateSample,
    InvalidMomentOrder,
    StableParams,
    char_fn,
    char_fn_vector,
    codifference,
    covariation_from_spectral,
    make_rng,
    moment_constant,
    sample,
    scalar_spectral_measure,
    signed_power,
    tail_index_estimate,
)

R2 = np.sqrt(2.0) / 2.0


def test_char_fn_gaussian_branch():
    assert char_fn(StableParams(2.0), 1.0) == pytest.approx(np.exp(-1.0), abs=1e-15)


def test_char_fn_at_zero():
    for prm in (StableParams(0.4, 2.0, 0.3, 1.0), StableParams(1.0, 1.0, -1.0, 5.0)):
        assert char_fn(prm, 0.0) == 1.0


def test_char_fn_cauchy_branch():
    got = char_fn(StableParams(1.0, 2.0, 0.0, 3.0), -2.0)
    assert got == pytest.approx(np.exp(-4.0) * np.exp(-6.0j), abs=1e-15)


def test_char_fn_vector_gaussian_measures_agree():
    g1 = BivariateSpectralMeasure([[R2, R2], [-R2, -R2]], [1.0, 1.0])
    g2 = BivariateSpectralMeasure([[R2, R2]], [2.0])
    theta = np.array([1.0, 0.0])
    for g in (g1, g2):
        assert char_fn_vector(2.0, g, theta) == pytest.approx(np.exp(-1.0), abs=1e-14)
        assert char_fn_vector(1.3, g, np.zeros(2)) == 1.0


def test_spectral_measure_rejects_non_unit_directions():
    with pytest.raises(ValueError):
        BivariateSpectralMeasure([[1.0, 1.0]], [1.0])


def test_gaussian_sample_variance():
    x = sample(StableParams(2.0), 1_000_000, seed=1).values
    assert abs(x.var() / 2.0 - 1.0) < 0.01


def test_totally_skewed_sample_is_nonnegative():
    assert sample(StableParams(0.7, 1.0, 1.0, 0.0), 100_000, seed=2).values.min() >= 0.0


def test_empirical_char_fn():
    prm = StableParams(1.5)
    x = sample(prm, 1_000_000, seed=3).values
    for th in (0.5, 1.0, 2.0):
        assert abs(np.exp(1j * th * x).mean() - char_fn(prm, th)) < 0.01


def test_sampling_is_deterministic_per_seed():
    prm = StableParams(1.1, 1.0, 0.4, 0.0)
    assert np.array_equal(sample(prm, 1000, seed=9).values, sample(prm, 1000, seed=9).values)
    assert not np.array_equal(sample(prm, 1000, seed=9).values, sample(prm, 1000, seed=10).values)


def test_streams_are_distinct():
    a = make_rng(5, stream=0).random(5)
    b = make_rng(5, stream=1).random(5)
    assert not np.array_equal(a, b)
    assert np.array_equal(make_rng(5, stream=1).random(5), b)


def test_tail_index():
    assert 1.1 <= tail_index_estimate(sample(StableParams(1.2), 1_000_000, seed=4)) <= 1.3
    assert 0.5 <= tail_index_estimate(sample(StableParams(0.6, 1.0, 1.0), 1_000_000, seed=5)) <= 0.7


def test_tail_index_constant_sample():
    with pytest.raises(DegenerateSample):
        tail_index_estimate(np.ones(100))


def test_moment_constant_gaussian():
    assert moment_constant(2.0, 0.0, 1.0).value == pytest.approx(2.0 / np.sqrt(np.pi), rel=0.01)


def test_moment_constant_scales_with_sigma():
    c = moment_constant(1.5, 0.0, 1.0, n=1_000_000).value
    for sigma in (1.0, 3.0):
        x = sample(StableParams(1.5, sigma), 1_000_000, seed=11).values
        assert np.abs(x).mean() == pytest.approx(c * sigma, rel=0.02)


def test_moment_constant_needs_p_below_alpha():
    with pytest.raises(InvalidMomentOrder):
        moment_constant(1.5, 0.0, 1.5)


def test_covariation_special_cases():
    indep = BivariateSpectralMeasure([[1.0, 0.0], [0.0, -1.0]], [1.0, 2.0])
    assert covariation_from_spectral(indep, 1.5) == 0.0
    single = BivariateSpectralMeasure([[1.0, 0.0]], [0.7])
    assert covariation_from_spectral(single, 1.5) == 0.0


def test_scalar_spectral_measure():
    m = scalar_spectral_measure(StableParams(1.5, 1.0, 1.0))
    assert (m.plus, m.minus) == (1.0, 0.0)
    m = scalar_spectral_measure(StableParams(0.5, 2.0, 0.0))
    assert m.plus == pytest.approx(np.sqrt(2.0) / 2.0) and m.minus == pytest.approx(np.sqrt(2.0) / 2.0)
    back = m.to_params()
    assert back.sigma == pytest.approx(2.0) and back.beta == 0.0


@given(
    st.floats(0.1, 1.99),
    st.floats(0.01, 10.0),
    st.floats(-1.0, 1.0),
)
@settings(max_examples=50, deadline=None)
def test_scalar_spectral_round_trip(alpha, sigma, beta):
    back = scalar_spectral_measure(StableParams(alpha, sigma, beta)).to_params()
    assert back.sigma == pytest.approx(sigma, rel=1e-12)
    assert back.beta == pytest.approx(beta, abs=1e-12)


def test_codifference_cases():
    s1, s2 = 1.3, 0.7
    assert codifference(s1, s2, (s1**0.7 + s2**0.7) ** (1 / 0.7), 0.7) == pytest.approx(0.0, abs=1e-14)
    assert codifference(1.0, 1.0, 0.0, 2.0) == 2.0
    assert codifference(1.5, 1.5, 0.0, 1.2) == pytest.approx(2 * 1.5**1.2)


@given(st.floats(-1e3, 1e3), st.floats(0.0, 3.0))
def test_signed_power_is_odd(x, p):
    assert signed_power(-x, p) == -signed_power(x, p)


def test_invalid_params():
    with pytest.raises(ValueError):
        StableParams(2.5)
    with pytest.raises(ValueError):
        StableParams(1.5, beta=1.5)
    with pytest.raises(ValueError):
        StableParams(1.5, sigma=-1.0)
