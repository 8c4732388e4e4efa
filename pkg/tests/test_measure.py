import numpy as np
import pytest

from stablefield import (
    IntegralField,
    InvalidAlpha,
    MeasureSpace,
    StableParams,
    ZeroScale,
    combo_scale,
    combo_skewness,
    covariation_integral,
    gram_rank,
    lalpha_norm,
    make_kernel,
    sample,
    sample_field,
    tail_index_estimate,
)


def test_lalpha_norm_constant():
    space = MeasureSpace.grid([0, 0], [2, 2], (10, 10))
    assert lalpha_norm(np.ones(space.size), space, 2.0) == pytest.approx(2.0, abs=1e-14)


def test_lalpha_norm_indicator():
    space = MeasureSpace.grid([0.0], [1.0], 10_000)
    f = (space.points[:, 0] <= 0.81).astype(float)
    assert lalpha_norm(f, space, 1.5) == pytest.approx(0.81 ** (2 / 3), abs=1e-3)


def test_lalpha_norm_homogeneous():
    space = MeasureSpace.grid([0.0], [1.0], 100)
    f = np.sin(5 * space.points[:, 0])
    assert lalpha_norm(-3 * f, space, 1.3) == pytest.approx(3 * lalpha_norm(f, space, 1.3), rel=1e-14)


def test_combo_scale_two_indicators():
    space = MeasureSpace.grid([0.0], [1.0], 400)
    fld = IntegralField(make_kernel("box"), space, 1.5)
    h = combo_scale(fld, [0.0], [[0.25]], [0.5]) ** 1.5
    assert h == pytest.approx(0.25 * (1 + 2 * 0.5**1.5), rel=1e-12)
    for a in (0.5, 1.0, 1.7):
        fld = IntegralField(make_kernel("box"), space, a)
        assert combo_scale(fld, [0.0], [[0.25]], [0.0]) == pytest.approx(0.5 ** (1 / a), rel=1e-12)


def test_combo_scale_vanishes_at_knot():
    space = MeasureSpace.grid([-1, -1], [2, 2], (40, 40))
    fld = IntegralField(make_kernel("bisquare", r=0.6), space, 1.2)
    sites = np.array([[0.2, 0.3], [0.5, 0.5]])
    assert combo_scale(fld, sites[1], sites, [0.0, 1.0]) == 0.0


def test_combo_skewness():
    space = MeasureSpace.grid([0.0], [1.0], 50)
    g = np.linspace(0.1, 1.0, 50)
    assert combo_skewness(IntegralField(make_kernel("box"), space, 1.5, 0.0), g) == 0.0
    fld = IntegralField(make_kernel("box"), space, 1.5, 1.0)
    assert combo_skewness(fld, g) == pytest.approx(1.0)
    assert combo_skewness(fld, -g) == pytest.approx(-1.0)
    with pytest.raises(ZeroScale):
        combo_skewness(fld, np.zeros(50))


def test_covariation_integral_ou():
    space = MeasureSpace.grid([-30.0], [5.0], 100_000)
    fld = IntegralField(make_kernel("exponential-ou", lam=0.5), space, 1.5)
    expect = np.exp(-0.5) / (1.5 * 0.5)
    assert covariation_integral(fld, [1.0], [0.0]) == pytest.approx(expect, abs=1e-3)


def test_covariation_integral_disjoint_and_range():
    space = MeasureSpace.grid([0.0], [1.0], 400)
    fld = IntegralField(make_kernel("box", lo=0.0, hi=0.2), space, 1.5)
    assert covariation_integral(fld, [0.0], [0.5]) == 0.0
    with pytest.raises(InvalidAlpha):
        covariation_integral(IntegralField(make_kernel("box"), space, 0.9), [0.0], [0.1])


def test_gram_rank_detects_dependence():
    space = MeasureSpace.grid([0.0], [1.0], 400)
    fld = IntegralField(make_kernel("box", lo=0.0, hi=2.0), space, 1.5)
    # both kernels cover the whole space, so they coincide
    assert gram_rank(fld, [[-0.5], [-0.2]]) == 1
    assert gram_rank(fld, [[0.1], [0.6]]) == 2


def test_zero_kernel_field_is_zero():
    space = MeasureSpace.grid([0.0], [1.0], 50)
    fld = IntegralField(make_kernel("box", lo=5.0, hi=6.0), space, 1.2)
    assert np.all(sample_field(fld, [[0.0], [0.3]], seed=1, size=10) == 0.0)


def test_bisquare_marginal_scale():
    space = MeasureSpace.grid([-1, -1], [1, 1], (40, 40))
    fld = IntegralField(make_kernel("bisquare"), space, 0.8)
    x = sample_field(fld, [[0.0, 0.0]], seed=3, size=10_000)[:, 0]
    sigma = combo_scale(fld, [0.0, 0.0])
    # |X| / sigma has the law of |S_alpha(1, 0, 0)|; compare medians
    unit = np.abs(sample(StableParams(0.8), 200_000, seed=4).values)
    assert np.median(np.abs(x)) / sigma == pytest.approx(np.median(unit), rel=0.02)


def test_levy_motion_increments():
    space = MeasureSpace.grid([0.0], [1.0], 200)
    fld = IntegralField(make_kernel("levy"), space, 1.4)
    x = sample_field(fld, [[0.5], [1.0]], seed=7, size=100_000)
    inc = x[:, 1] - x[:, 0]
    assert abs(np.corrcoef(np.sign(x[:, 0]), np.sign(inc))[0, 1]) < 0.02
    assert abs(tail_index_estimate(x[:, 1]) - 1.4) <= 0.1


def test_measure_space_validation():
    with pytest.raises(ValueError):
        MeasureSpace.grid([1.0], [0.0], 10)
    with pytest.raises(ValueError):
        MeasureSpace(np.zeros((3, 1)), [1.0, -1.0, 1.0])
