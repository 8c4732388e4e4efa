import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stablefield import (
    Anisotropy,
    CovModel,
    DimensionMismatch,
    EmptyComposite,
    NotIsotropic,
    VarioModel,
    apply_anisotropy,
    bessel_j,
    bessel_k,
    cnsd_check,
    compose_sum,
    cov_eval,
    exp_transform_check,
    model_from_text,
    model_to_text,
    psd_check,
    vario_eval,
    zonal,
)


def test_white_noise():
    m = CovModel("white-noise", {"b": 3.0}, dim=2)
    assert cov_eval(m, [0.1, 0.2], [0.1, 0.2]) == 3.0
    assert cov_eval(m, [0.1, 0.2], [0.1, 0.2 + 1e-9]) == 0.0


def test_matern_half_is_exponential():
    r = np.linspace(0.0, 5.0, 101)
    wm = CovModel("whittle-matern", {"a": 1.7, "b": 2.0, "nu": 0.5}, dim=2)
    ex = CovModel("exponential", {"a": 1.7, "b": 2.0}, dim=2)
    np.testing.assert_allclose(wm.radial_value(r), ex.radial_value(r), rtol=1e-12)


def test_spherical_support():
    m = CovModel("spherical", {"a": 2.0, "b": 1.5}, dim=3)
    assert m.radial_value(0.0) == 1.5
    assert m.radial_value(2.0) == pytest.approx(0.0, abs=1e-15)
    assert m.radial_value(2.5) == 0.0
    assert 0.0 < m.radial_value(1.0) < 1.5
    with pytest.raises(DimensionMismatch):
        CovModel("spherical", {"a": 2.0, "b": 1.0}, dim=4)


def test_fbf_origin_and_variogram():
    H = 0.3
    m = CovModel("fbf", {"H": H}, dim=2)
    x = np.array([0.4, -1.1])
    assert cov_eval(m, np.zeros(2), x) == 0.0
    assert cov_eval(m, np.zeros(2), np.zeros(2)) == 0.0
    g = VarioModel(base=m)
    s = np.array([0.2, 0.5])
    h = np.array([1.3, 0.7])
    assert vario_eval(g, s, s + h) == pytest.approx(0.5 * np.linalg.norm(h) ** (2 * H), rel=1e-12)


@given(st.floats(0.1, 10.0))
@settings(max_examples=30, deadline=None)
def test_fbf_self_similar(c):
    H = 0.7
    m = CovModel("fbf", {"H": H}, dim=2)
    s, t = np.array([0.3, 1.0]), np.array([-0.5, 0.2])
    assert cov_eval(m, c * s, c * t) == pytest.approx(c ** (2 * H) * cov_eval(m, s, t), rel=1e-10)


def test_variogram_reaches_sill():
    g = VarioModel(base=CovModel("exponential", {"a": 1.0, "b": 2.0}, dim=2))
    assert g.radial_value(40.0) == pytest.approx(2.0, abs=1e-12)
    assert g.radial_value(0.0) == 0.0


def test_nugget_vanishes_on_diagonal():
    g = VarioModel(base=CovModel("gaussian", {"a": 1.0, "b": 1.0}, dim=2), nugget=0.4)
    s = np.array([0.3, 0.3])
    assert vario_eval(g, s, s) == 0.0
    assert vario_eval(g, s, s + 1e-8) == pytest.approx(0.4, abs=1e-12)


def test_compose_sum():
    a = VarioModel(base=CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2))
    b = VarioModel(family="power", params={"c": 0.5, "p": 1.5}, dim=2)
    g = compose_sum([a, b])
    h = np.array([[0.3, 0.4], [2.0, -1.0]])
    np.testing.assert_allclose(g.lag_function(h), a.lag_function(h) + b.lag_function(h), rtol=1e-14)
    with pytest.raises(EmptyComposite):
        compose_sum([])


def test_zonal_depends_only_on_selected_axes():
    one = VarioModel(base=CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=1))
    g = zonal(one, [0], 2)
    assert g.lag_function(np.array([0.7, 0.0])) == pytest.approx(1 - np.exp(-0.7), rel=1e-14)
    assert g.lag_function(np.array([0.7, 5.0])) == g.lag_function(np.array([0.7, 0.0]))
    assert g.lag_function(np.array([0.0, 5.0])) == 0.0


def test_zonal_sill_depends_on_direction():
    iso = VarioModel(base=CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2))
    aniso = VarioModel(
        base=apply_anisotropy(
            CovModel("exponential", {"a": 0.2, "b": 1.0}, dim=2),
            Anisotropy.from_rotation(2.0, [5.0, 1.0]),
        )
    )
    ax = VarioModel(base=CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=1))
    g = compose_sum([iso, aniso, zonal(ax, [1], 2)])
    far = 500.0
    assert g.lag_function(np.array([far, 0.0])) == pytest.approx(2.0, abs=1e-9)
    assert g.lag_function(np.array([0.0, far])) == pytest.approx(3.0, abs=1e-9)
    sites = np.random.default_rng(0).uniform(-1, 1, size=(30, 2))
    assert cnsd_check(g, sites).ok


def test_anisotropy_identity_and_scaling():
    base = CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2)
    same = apply_anisotropy(base, np.eye(2))
    s, t = np.array([0.1, 0.2]), np.array([0.9, -0.4])
    assert cov_eval(same, s, t) == pytest.approx(cov_eval(base, s, t), rel=1e-15)
    stretched = apply_anisotropy(base, np.diag([4.0, 1.0]))
    assert cov_eval(stretched, np.zeros(2), [1.0, 0.0]) == pytest.approx(base.radial_value(2.0), rel=1e-15)
    with pytest.raises(ValueError):
        apply_anisotropy(base, [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(NotIsotropic):
        apply_anisotropy(stretched, np.eye(2))


def test_rotation_matrix_form():
    an = Anisotropy.from_rotation(0.4, [3.0, 1.0])
    c, s = np.cos(0.4), np.sin(0.4)
    R = np.array([[c, -s], [s, c]])
    h = np.array([0.3, -1.2])
    assert an.distance(h) == pytest.approx(np.linalg.norm(np.diag(np.sqrt([3.0, 1.0])) @ R @ h), rel=1e-14)


def test_bessel_half_order():
    r = np.linspace(0.1, 20.0, 50)
    np.testing.assert_allclose(bessel_j(0.5, r), np.sqrt(2 / (np.pi * r)) * np.sin(r), rtol=1e-12, atol=1e-14)
    m = CovModel("bessel", {"a": 1.3, "b": 1.0, "nu": 0.5}, dim=3)
    x = 1.3 * r
    np.testing.assert_allclose(m.radial_value(r), np.sin(x) / x, rtol=1e-10, atol=1e-14)
    hole = CovModel("hole-effect", {"a": 1.3, "b": 1.0}, dim=3)
    np.testing.assert_allclose(hole.radial_value(r), m.radial_value(r), rtol=1e-10, atol=1e-14)


def test_bessel_k_blows_up_at_origin():
    assert bessel_k(0.5, 1e-8) > 1e3
    assert bessel_k(1.0, 1.0) == pytest.approx(0.6019072301972346, rel=1e-12)


def test_bessel_nu_lower_bound():
    with pytest.raises(ValueError):
        CovModel("bessel", {"a": 1.0, "b": 1.0, "nu": 0.0}, dim=3)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0, 2 * np.pi))
@settings(max_examples=40, deadline=None)
def test_stationary_isotropic_invariance(dx, dy, angle):
    m = CovModel("whittle-matern", {"a": 2.0, "b": 1.0, "nu": 1.5}, dim=2)
    s, t = np.array([0.2, -0.4]), np.array([1.0, 0.3])
    shift = np.array([dx, dy])
    c, si = np.cos(angle), np.sin(angle)
    R = np.array([[c, -si], [si, c]])
    base = cov_eval(m, s, t)
    assert cov_eval(m, s + shift, t + shift) == pytest.approx(base, rel=1e-10, abs=1e-14)
    assert cov_eval(m, R @ s, R @ t) == pytest.approx(base, rel=1e-10, abs=1e-14)


def test_cyclone_rotation_invariant_but_not_stationary():
    m = CovModel("cyclone", {"a": 1.0, "b": 1.0, "nu": 0.5}, dim=3)
    assert not m.stationary
    x, y = np.array([0.3, -0.2, 0.5]), np.array([-0.1, 0.4, 0.2])
    Q, _ = np.linalg.qr(np.random.default_rng(2).normal(size=(3, 3)))
    assert cov_eval(m, Q @ x, Q @ y) == pytest.approx(cov_eval(m, x, y), rel=1e-12)
    shift = np.array([2.0, 0.0, 0.0])
    assert abs(cov_eval(m, x + shift, y + shift) - cov_eval(m, x, y)) > 1e-3
    assert cov_eval(m, x, x) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(NotIsotropic):
        m.radial_value(1.0)
    with pytest.raises(DimensionMismatch):
        CovModel("cyclone", dim=2)


def test_psd_and_cnsd():
    sites = np.random.default_rng(1).uniform(0, 3, size=(40, 2))
    for fam, p in [
        ("gaussian", {"a": 1.0, "b": 1.0}),
        ("cauchy", {"a": 1.0, "b": 1.0, "nu": 2.0}),
        ("stable", {"a": 1.0, "b": 1.0, "nu": 1.5}),
    ]:
        assert psd_check(CovModel(fam, p, dim=2), sites).ok
    assert not psd_check(np.array([[1.0, 2.0], [2.0, 1.0]]), None).ok
    assert cnsd_check(VarioModel(family="power", params={"p": 1.9}, dim=2), sites).ok
    assert not cnsd_check(VarioModel(family="custom", dim=2, func=lambda h: np.sum(h * h, -1) ** 1.5), sites).ok


def test_invalid_models():
    with pytest.raises(KeyError):
        CovModel("nope", {}, dim=2)
    with pytest.raises(ValueError):
        CovModel("exponential", {"a": 1.0}, dim=2)
    with pytest.raises(ValueError):
        VarioModel(family="power", params={"p": 2.5}, dim=2)
    with pytest.raises(DimensionMismatch):
        cov_eval(CovModel("gaussian", {"a": 1.0, "b": 1.0}, dim=2), [0.0, 0.0, 0.0], [0.0, 0.0, 0.0])


def test_text_round_trip():
    cov = apply_anisotropy(
        CovModel("whittle-matern", {"a": 0.3, "b": 1.7, "nu": 1.25}, dim=2),
        Anisotropy.from_rotation(0.7, [2.0, 0.5]),
    )
    g = compose_sum([VarioModel(base=cov, nugget=0.1), VarioModel(family="power", params={"c": 2.0, "p": 0.5}, dim=2)])
    for m in (cov, g):
        back = model_from_text(model_to_text(m))
        assert model_to_text(back) == model_to_text(m)
    h = np.array([[0.3, 0.1], [1.0, 2.0]])
    np.testing.assert_allclose(model_from_text(model_to_text(g)).lag_function(h), g.lag_function(h), rtol=1e-15)


def test_exp_transform_check():
    sites = np.random.default_rng(3).uniform(0, 2, size=(30, 2))
    good = VarioModel(base=CovModel("exponential", {"a": 1.0, "b": 1.0}, dim=2))
    assert exp_transform_check(good, sites).ok
    cubic = VarioModel(family="custom", dim=2, func=lambda h: np.sum(h * h, -1) ** 1.5)
    assert not exp_transform_check(cubic, sites).ok
