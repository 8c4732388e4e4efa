"""Covariance and variogram models with positive-definiteness checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import special

from .exceptions import DimensionMismatch, EmptyComposite, NotIsotropic

__all__ = [
    "CovModel",
    "VarioModel",
    "Anisotropy",
    "PSDResult",
    "FAMILIES",
    "bessel_j",
    "bessel_k",
    "cov_eval",
    "vario_eval",
    "psd_check",
    "cnsd_check",
    "exp_transform_check",
    "apply_anisotropy",
    "compose_sum",
    "zonal",
    "model_to_text",
    "model_from_text",
]


def bessel_j(nu, r):
    """Bessel function of the first kind, J_nu(r)."""
    return special.jv(nu, np.asarray(r, dtype=float))


def bessel_k(nu, r):
    """Modified Bessel function of the second kind, K_nu(r), for r > 0."""
    return special.kv(nu, np.asarray(r, dtype=float))


def _whittle_matern(r, a, b, nu):
    x = a * np.asarray(r, dtype=float)
    out = np.full(x.shape, float(b))
    pos = x > 0
    xp = x[pos]
    out[pos] = b * 2.0 ** (1.0 - nu) / special.gamma(nu) * xp**nu * special.kv(nu, xp)
    return out


def _bessel_family(r, a, b, nu):
    # Normalized so that C(0) = b.
    x = a * np.asarray(r, dtype=float)
    out = np.full(x.shape, float(b))
    pos = x > 0
    xp = x[pos]
    out[pos] = b * 2.0**nu * special.gamma(nu + 1.0) * xp ** (-nu) * special.jv(nu, xp)
    return out


def _hole(r, a, b):
    return b * np.sinc(a * np.asarray(r, dtype=float) / np.pi)


def _spherical(r, a, b):
    u = np.asarray(r, dtype=float) / a
    return np.where(u <= 1.0, b * (1.0 - 1.5 * u + 0.5 * u**3), 0.0)


# name -> (radial function, parameter names, defaults, max dimension)
_RADIAL = {
    "white-noise": (lambda r, b: np.where(np.asarray(r) == 0, float(b), 0.0), ("b",), {}, None),
    "bessel": (_bessel_family, ("a", "b", "nu"), {}, None),
    "hole-effect": (_hole, ("a", "b"), {}, 3),
    "cauchy": (lambda r, a, b, nu: b / (1.0 + (a * np.asarray(r)) ** 2) ** nu, ("a", "b", "nu"), {}, None),
    "stable": (lambda r, a, b, nu: b * np.exp(-a * np.asarray(r, dtype=float) ** nu), ("a", "b", "nu"), {}, None),
    "gaussian": (lambda r, a, b: b * np.exp(-a * np.asarray(r, dtype=float) ** 2), ("a", "b"), {}, None),
    "whittle-matern": (_whittle_matern, ("a", "b", "nu"), {}, None),
    "exponential": (lambda r, a, b: b * np.exp(-a * np.asarray(r, dtype=float)), ("a", "b"), {}, None),
    "spherical": (_spherical, ("a", "b"), {}, 3),
}
_NONSTATIONARY = ("fbf", "cyclone")
FAMILIES = tuple(_RADIAL) + _NONSTATIONARY


@dataclass(frozen=True)
class Anisotropy:
    """Geometric anisotropy ``h -> sqrt(h^T Q h)`` with Q symmetric positive definite."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
            raise ValueError("Q must be symmetric")
        if np.linalg.eigvalsh(Q).min() <= 0:
            raise ValueError("Q must be positive definite")
        object.__setattr__(self, "Q", Q)

    @classmethod
    def from_rotation(cls, angle, scales):
        """``Q = R^T diag(scales) R`` for the planar rotation by ``angle``.

        Then ``sqrt(h^T Q h) = |diag(sqrt(scales)) R h|``.
        """
        c, s = np.cos(angle), np.sin(angle)
        R = np.array([[c, -s], [s, c]])
        Q = R.T @ np.diag(np.asarray(scales, dtype=float)) @ R
        return cls(0.5 * (Q + Q.T))

    def distance(self, h):
        h = np.asarray(h, dtype=float)
        q = np.einsum("...i,ij,...j->...", h, self.Q, h)
        return np.sqrt(np.maximum(q, 0.0))


def _cyclone(x, y, a, b, nu):
    """Nonstationary covariance built from S_x = I + x x^T (three-dimensional)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x, y = np.broadcast_arrays(x, y)
    eye = np.eye(3)
    Sx = eye + x[..., :, None] * x[..., None, :]
    Sy = eye + y[..., :, None] * y[..., None, :]
    S = Sx + Sy
    d = x - y
    # Sx (Sx + Sy)^-1 Sy applied to d
    u = np.linalg.solve(S, (Sy @ d[..., None]))[..., 0]
    q = np.einsum("...i,...ij,...j->...", d, Sx, u)
    dist = np.sqrt(np.maximum(q, 0.0))
    pref = (
        2.0**1.5
        * np.linalg.det(Sx) ** 0.25
        * np.linalg.det(Sy) ** 0.25
        / np.sqrt(np.linalg.det(S))
    )
    return pref * _whittle_matern(dist, a, b, nu)


@dataclass(frozen=True)
class CovModel:
    """Parametric covariance ``C(s, t)`` on R^dim.

    Parameters
    ----------
    family : str
        One of ``FAMILIES`` or ``"custom"``.
    params : dict
        Family parameters. Most families use ``a`` (inverse range), ``b``
        (variance ``C(0)``) and ``nu`` (shape). ``bessel`` defaults ``nu`` to
        ``(dim - 2) / 2``; ``fbf`` takes the Hurst index ``H``.
    dim : int
    anisotropy : Anisotropy, optional
    radial : callable, optional
        Radial profile ``r -> C`` for the ``custom`` family.
    """

    family: str
    params: dict = field(default_factory=dict)
    dim: int = 2
    anisotropy: Anisotropy | None = None
    radial: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        p = dict(self.params)
        fam = self.family
        if fam == "custom":
            if self.radial is None:
                raise ValueError("custom family needs a radial profile")
        elif fam == "fbf":
            H = p.setdefault("H", 0.5)
            p.setdefault("b", 1.0)
            if not (0.0 < H <= 1.0):
                raise ValueError("Hurst index must lie in (0, 1]")
        elif fam == "cyclone":
            p.setdefault("a", 1.0)
            p.setdefault("b", 1.0)
            p.setdefault("nu", 0.5)
            if self.dim != 3:
                raise DimensionMismatch("cyclone covariance is three-dimensional")
        elif fam in _RADIAL:
            if fam == "bessel":
                p.setdefault("nu", (self.dim - 2) / 2.0)
                if p["nu"] < (self.dim - 2) / 2.0:
                    raise ValueError("bessel family needs nu >= (dim - 2) / 2")
            _, names, _, dmax = _RADIAL[fam]
            missing = [k for k in names if k not in p]
            if missing:
                raise ValueError(f"{fam} needs parameters {missing}")
            if dmax is not None and self.dim > dmax:
                raise DimensionMismatch(f"{fam} is only valid up to dimension {dmax}")
            if fam == "stable" and not (0.0 < p["nu"] <= 2.0):
                raise ValueError("stable family needs nu in (0, 2]")
            if "a" in p and p["a"] <= 0:
                raise ValueError("a must be positive")
        else:
            raise KeyError(f"unknown covariance family {fam!r}")
        if self.anisotropy is not None and self.anisotropy.Q.shape[0] != self.dim:
            raise DimensionMismatch("anisotropy matrix does not match dim")
        object.__setattr__(self, "params", p)

    @property
    def stationary(self):
        return self.family not in _NONSTATIONARY

    @property
    def isotropic(self):
        return self.stationary and self.anisotropy is None

    def radial_value(self, r):
        """Covariance as a function of the (transformed) lag length."""
        if not self.stationary:
            raise NotIsotropic(f"{self.family} is not stationary")
        if self.family == "custom":
            return np.asarray(self.radial(np.asarray(r, dtype=float)), dtype=float)
        fn, names, _, _ = _RADIAL[self.family]
        return fn(np.asarray(r, dtype=float), *(self.params[k] for k in names))

    def lag_length(self, h):
        h = np.asarray(h, dtype=float)
        if self.anisotropy is not None:
            return self.anisotropy.distance(h)
        return np.sqrt(np.sum(h * h, axis=-1))

    def __call__(self, s, t):
        return cov_eval(self, s, t)

    def variance(self, t=None):
        if self.stationary:
            return float(self.radial_value(0.0))
        t = np.asarray(t, dtype=float)
        return cov_eval(self, t, t)

    def gram(self, sites, others=None):
        """Matrix ``C(sites_i, others_j)``."""
        a = _as_sites(sites, self.dim)
        b = a if others is None else _as_sites(others, self.dim)
        return cov_eval(self, a[:, None, :], b[None, :, :])


def _as_sites(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :] if dim > 1 or x.size == 1 else x[:, None]
    if x.shape[-1] != dim:
        raise DimensionMismatch(f"expected {dim}-dimensional sites, got {x.shape[-1]}")
    return x


def cov_eval(model: CovModel, s, t):
    """Evaluate ``C(s, t)`` with broadcasting over leading axes."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.shape[-1] != model.dim or t.shape[-1] != model.dim:
        raise DimensionMismatch(f"model is {model.dim}-dimensional")
    p = model.params
    if model.family == "fbf":
        H2 = 2.0 * p["H"]
        ns = np.sqrt(np.sum(s * s, axis=-1))
        nt = np.sqrt(np.sum(t * t, axis=-1))
        nd = np.sqrt(np.sum((s - t) ** 2, axis=-1))
        return p["b"] * 0.5 * (ns**H2 + nt**H2 - nd**H2)
    if model.family == "cyclone":
        return _cyclone(s, t, p["a"], p["b"], p["nu"])
    return model.radial_value(model.lag_length(s - t))


def apply_anisotropy(model: CovModel, Q) -> CovModel:
    """Return ``model`` evaluated at the transformed lag ``sqrt(h^T Q h)``."""
    if not model.isotropic:
        raise NotIsotropic("anisotropy can only be applied to an isotropic model")
    aniso = Q if isinstance(Q, Anisotropy) else Anisotropy(Q)
    return CovModel(model.family, dict(model.params), model.dim, aniso, model.radial)


# -- variograms ----------------------------------------------------------------


@dataclass(frozen=True)
class VarioModel:
    """Variogram ``gamma(s, t)``.

    Built from a covariance (``gamma = (C(s,s) + C(t,t)) / 2 - C(s,t)``),
    a direct family (``power``: ``c |h|^p``, ``custom``: callable of the lag
    vector), or a sum of components. ``nugget`` adds ``nugget * 1(s != t)``.
    """

    base: CovModel | None = None
    nugget: float = 0.0
    family: str | None = None
    params: dict = field(default_factory=dict)
    dim: int | None = None
    components: tuple = ()
    func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.nugget < 0:
            raise ValueError("nugget must be >= 0")
        dim = self.dim
        if self.base is not None:
            dim = dim or self.base.dim
        elif self.components:
            dims = {c.dim for c in self.components}
            if len(dims) != 1:
                raise DimensionMismatch("components disagree in dimension")
            dim = dims.pop()
        elif self.family == "power":
            p = self.params
            if not (0.0 < p.get("p", 0.0) <= 2.0) or p.get("c", 1.0) <= 0:
                raise ValueError("power variogram needs 0 < p <= 2 and c > 0")
        elif self.family == "custom":
            if self.func is None:
                raise ValueError("custom variogram needs func")
        else:
            raise ValueError("variogram needs base, family or components")
        if dim is None:
            raise ValueError("dim is required for direct variogram families")
        object.__setattr__(self, "dim", int(dim))

    def __call__(self, s, t):
        return vario_eval(self, s, t)

    def lag_function(self, h):
        """``gamma`` at lag vectors ``h`` for stationary variograms."""
        h = np.asarray(h, dtype=float)
        return vario_eval(self, np.zeros_like(h), h)

    def radial_value(self, r):
        """Variogram of an isotropic model as a function of lag length."""
        r = np.asarray(r, dtype=float)
        h = np.zeros(r.shape + (self.dim,))
        h[..., 0] = r
        return self.lag_function(h)

    def gram(self, sites, others=None):
        a = _as_sites(sites, self.dim)
        b = a if others is None else _as_sites(others, self.dim)
        return vario_eval(self, a[:, None, :], b[None, :, :])


def vario_eval(model: VarioModel, s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if s.shape[-1] != model.dim or t.shape[-1] != model.dim:
        raise DimensionMismatch(f"variogram is {model.dim}-dimensional")
    s, t = np.broadcast_arrays(s, t)
    h = t - s
    same = np.all(h == 0, axis=-1)
    if model.components:
        out = sum(vario_eval(c, s, t) for c in model.components)
    elif model.base is not None:
        C = model.base
        out = 0.5 * (cov_eval(C, s, s) + cov_eval(C, t, t)) - cov_eval(C, s, t)
    elif model.family == "power":
        out = model.params.get("c", 1.0) * np.sqrt(np.sum(h * h, axis=-1)) ** model.params["p"]
    else:
        out = np.asarray(model.func(h), dtype=float)
    return out + model.nugget * (~same)


def compose_sum(models) -> VarioModel:
    models = tuple(models)
    if not models:
        raise EmptyComposite("need at least one component")
    return VarioModel(components=models)


def zonal(model: VarioModel, axes, dim) -> VarioModel:
    """Lift a stationary variogram on a coordinate subset to ``dim`` dimensions.

    The result depends on the lag only through the coordinates in ``axes``.
    """
    axes = [int(a) for a in axes]
    if len(axes) != model.dim or max(axes) >= dim:
        raise DimensionMismatch("axes must match the component dimension")
    return VarioModel(family="custom", dim=dim, func=lambda h: model.lag_function(h[..., axes]))


# -- definiteness --------------------------------------------------------------


class PSDResult(NamedTuple):
    ok: bool
    min_eigenvalue: float


def _as_matrix(model, sites):
    if isinstance(model, (CovModel, VarioModel)):
        return model.gram(sites)
    return np.asarray(model, dtype=float)


def psd_check(model, sites, tol=1e-8) -> PSDResult:
    """Is the Gram matrix at ``sites`` positive semidefinite?

    ``model`` may be a CovModel or an explicit square matrix. The smallest
    eigenvalue must be at least ``-tol`` times the spectral norm.
    """
    K = _as_matrix(model, sites)
    K = 0.5 * (K + K.T)
    ev = np.linalg.eigvalsh(K)
    scale = max(np.abs(ev).max(), np.finfo(float).tiny)
    lo = float(ev.min())
    return PSDResult(bool(lo >= -tol * scale), lo)


def cnsd_check(model, sites, tol=1e-8) -> PSDResult:
    """Conditional negative semidefiniteness of a variogram matrix.

    Checks ``c^T Gamma c <= 0`` on the subspace ``sum c = 0``. The
    returned eigenvalue is the largest one on that subspace.
    """
    G = _as_matrix(model, sites)
    G = 0.5 * (G + G.T)
    n = G.shape[0]
    # Orthonormal basis of the zero-sum subspace.
    basis = np.linalg.qr(np.eye(n) - 1.0 / n)[0][:, : n - 1]
    ev = np.linalg.eigvalsh(basis.T @ G @ basis)
    scale = max(np.abs(np.linalg.eigvalsh(G)).max(), np.finfo(float).tiny)
    hi = float(ev.max())
    return PSDResult(bool(hi <= tol * scale), hi)


def exp_transform_check(model, sites, lams=(0.5, 1.0, 2.0), tol=1e-8) -> PSDResult:
    """Necessary condition for a variogram: ``exp(-lam * Gamma)`` is PSD.

    Only finitely many ``lam`` and sites are tried, so passing does not
    prove that ``model`` is a variogram. The reported eigenvalue is the
    smallest over all ``lam``.
    """
    G = _as_matrix(model, sites)
    results = [psd_check(np.exp(-lam * G), None, tol) for lam in lams]
    return PSDResult(all(r.ok for r in results), min(r.min_eigenvalue for r in results))


# -- text serialization -------------------------------------------------------


def _fmt(v):
    return repr(float(v))


def model_to_text(model) -> str:
    """Key-value text for a CovModel or VarioModel (custom callables excluded)."""
    return "\n".join(_lines(model, "")) + "\n"


def _lines(model, prefix):
    if isinstance(model, CovModel):
        if model.family == "custom":
            raise ValueError("custom models cannot be serialized")
        out = [f"{prefix}kind = cov", f"{prefix}family = {model.family}", f"{prefix}dim = {model.dim}"]
        out += [f"{prefix}{k} = {_fmt(v)}" for k, v in sorted(model.params.items())]
        if model.anisotropy is not None:
            q = model.anisotropy.Q.ravel()
            out.append(f"{prefix}anisotropy = " + ", ".join(_fmt(x) for x in q))
        return out
    if model.func is not None:
        raise ValueError("custom variograms cannot be serialized")
    out = [f"{prefix}kind = vario", f"{prefix}dim = {model.dim}", f"{prefix}nugget = {_fmt(model.nugget)}"]
    if model.base is not None:
        out += _lines(model.base, prefix + "base.")
    elif model.components:
        out.append(f"{prefix}components = {len(model.components)}")
        for i, c in enumerate(model.components):
            out += _lines(c, f"{prefix}component.{i}.")
    else:
        out.append(f"{prefix}family = {model.family}")
        out += [f"{prefix}{k} = {_fmt(v)}" for k, v in sorted(model.params.items())]
    return out


def model_from_text(text: str):
    kv = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.partition("=")
        kv[key.strip()] = value.strip()
    return _build(kv, "")


def _build(kv, prefix):
    kind = kv[prefix + "kind"]
    dim = int(kv[prefix + "dim"])
    if kind == "cov":
        fam = kv[prefix + "family"]
        params = {}
        aniso = None
        for k, v in kv.items():
            if not k.startswith(prefix):
                continue
            name = k[len(prefix):]
            if "." in name or name in ("kind", "family", "dim"):
                continue
            if name == "anisotropy":
                q = np.array([float(x) for x in v.split(",")])
                aniso = Anisotropy(q.reshape(dim, dim))
            else:
                params[name] = float(v)
        return CovModel(fam, params, dim, aniso)
    nugget = float(kv.get(prefix + "nugget", 0.0))
    if prefix + "base.kind" in kv:
        return VarioModel(base=_build(kv, prefix + "base."), nugget=nugget)
    if prefix + "components" in kv:
        n = int(kv[prefix + "components"])
        comps = tuple(_build(kv, f"{prefix}component.{i}.") for i in range(n))
        return VarioModel(components=comps, nugget=nugget)
    params = {
        k[len(prefix):]: float(v)
        for k, v in kv.items()
        if k.startswith(prefix) and "." not in k[len(prefix):]
        and k[len(prefix):] not in ("kind", "family", "dim", "nugget")
    }
    return VarioModel(family=kv[prefix + "family"], params=params, dim=dim, nugget=nugget)
