"""Stable integral fields over a finite quadrature of the control measure.

A field is ``X(t) = int f_t(x) M(dx)`` where ``M`` is an independently
scattered stable random measure with control measure ``m`` and skewness
intensity ``beta(x)``. The control measure is replaced by a finite set of
cells with weights, so every integral becomes a weighted sum.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import LinearNDInterpolator

from .exceptions import DimensionMismatch, InvalidAlpha, ZeroScale
from .stable import make_rng, signed_power, stable_draws

__all__ = [
    "MeasureSpace",
    "KernelFamily",
    "IntegralField",
    "make_kernel",
    "KERNELS",
    "lalpha_norm",
    "combo_scale",
    "combo_skewness",
    "covariation_integral",
    "gram_rank",
    "sample_field",
    "quadrature_norm_error",
]

DEFAULT_CELLS = 10_000


@dataclass(frozen=True)
class MeasureSpace:
    """Quadrature nodes ``points`` (N, k) with nonnegative ``weights`` (N,)."""

    points: np.ndarray
    weights: np.ndarray
    descriptor: str = "custom"

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if p.shape[0] != w.shape[0]:
            raise DimensionMismatch("points and weights disagree in length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("quadrature weights must be finite and >= 0")
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    @classmethod
    def grid(cls, lower, upper, cells=None, density=1.0):
        """Midpoint rule on the box ``[lower, upper]``.

        ``cells`` is either an int per axis, a tuple of ints, or None, in
        which case about 10^4 cells are split evenly across the axes.
        ``density`` multiplies Lebesgue measure.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if lower.shape != upper.shape or np.any(upper <= lower):
            raise ValueError("need lower < upper componentwise")
        k = lower.size
        if cells is None:
            cells = int(round(DEFAULT_CELLS ** (1.0 / k)))
        cells = np.broadcast_to(np.atleast_1d(np.asarray(cells, dtype=int)), (k,))
        axes = []
        for lo, hi, n in zip(lower, upper, cells):
            h = (hi - lo) / n
            axes.append(lo + h * (np.arange(n) + 0.5))
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=1)
        vol = np.prod((upper - lower) / cells) * density
        desc = f"grid lower={lower.tolist()} upper={upper.tolist()} cells={cells.tolist()}"
        return cls(pts, np.full(pts.shape[0], vol), desc)


# -- kernels -----------------------------------------------------------------


def _sq_norm(h):
    return np.sum(h * h, axis=-1)


@dataclass(frozen=True)
class _Profile:
    """Moving-average profile ``f(h)`` with optional support radius."""

    name: str
    params: tuple
    radius: float = np.inf

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        p = dict(self.params)
        if self.name == "bisquare":
            u = _sq_norm(h) / p["r"] ** 2
            return p["c"] * np.where(u <= 1.0, (1.0 - u) ** 2, 0.0)
        if self.name == "parabolic":
            r2 = p["r"] ** 2
            q = _sq_norm(h)
            return p["c"] * np.where(q <= r2, r2 - q, 0.0)
        if self.name == "cylinder":
            return np.where(_sq_norm(h) <= p["r"] ** 2, 1.0, 0.0)
        if self.name == "exponential-ou":
            u = h[..., 0]
            with np.errstate(over="ignore"):
                return np.where(u >= 0, np.exp(-p["lam"] * np.maximum(u, 0.0)), 0.0)
        if self.name == "box":
            # f(h) = 1 when -hi < h <= -lo, i.e. x - t in [lo, hi)
            inside = (-h >= p["lo"]) & (-h < p["hi"])
            return np.all(inside, axis=-1).astype(float)
        raise KeyError(self.name)


class _Tabulated:
    """Moving-average profile interpolated from a table of offsets."""

    name = "tabulated"

    def __init__(self, offsets, values):
        offsets = np.asarray(offsets, dtype=float)
        if offsets.ndim == 1:
            offsets = offsets[:, None]
        self.offsets = offsets
        self.values = np.asarray(values, dtype=float)
        self.params = ()
        self.radius = float(np.max(np.linalg.norm(offsets, axis=1)))
        if offsets.shape[1] == 1:
            order = np.argsort(offsets[:, 0])
            self._x, self._y = offsets[order, 0], self.values[order]
            self._interp = None
        else:
            self._interp = LinearNDInterpolator(offsets, self.values, fill_value=0.0)

    def __call__(self, h):
        h = np.asarray(h, dtype=float)
        if self._interp is None:
            return np.interp(h[..., 0], self._x, self._y, left=0.0, right=0.0)
        return self._interp(h)

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :-1], data[:, -1])


@dataclass(frozen=True)
class _Levy:
    """Brownian-sheet type kernel ``1(0 <= x <= t)`` componentwise."""

    name: str = "levy"
    params: tuple = ()

    def evaluate(self, site, points):
        return np.all((points >= 0.0) & (points <= site), axis=1).astype(float)


@dataclass(frozen=True)
class _Interval:
    """Kernel ``1(min(t) < x < max(t))`` for two-dimensional index ``t``."""

    name: str = "interval"
    params: tuple = ()

    def evaluate(self, site, points):
        lo, hi = np.min(site), np.max(site)
        x = points[:, 0]
        return ((x > lo) & (x < hi)).astype(float)


class KernelFamily:
    """Maps a site ``t`` to the kernel vector ``f_t`` on quadrature nodes.

    Either wrap a moving-average ``profile`` (``f_t(x) = profile(t - x)``)
    or pass ``evaluate(site, points)`` directly. Vectors are memoized per
    site and measure space; the cache is safe to share between threads.
    """

    def __init__(self, profile=None, evaluate=None, name=None, params=(), site_dim=None):
        if (profile is None) == (evaluate is None):
            raise ValueError("pass exactly one of profile or evaluate")
        self.profile = profile
        self._evaluate = evaluate
        self.name = name or getattr(profile, "name", None) or getattr(evaluate, "__name__", "kernel")
        self.params = dict(params)
        self.site_dim = site_dim
        self._cache = {}
        self._lock = threading.Lock()

    def evaluate(self, site, points):
        site = np.atleast_1d(np.asarray(site, dtype=float))
        if self.profile is not None:
            if site.shape[0] != points.shape[1]:
                raise DimensionMismatch(
                    f"site has dimension {site.shape[0]}, measure space {points.shape[1]}"
                )
            return np.asarray(self.profile(site[None, :] - points), dtype=float)
        if self.site_dim is not None and site.shape[0] != self.site_dim:
            raise DimensionMismatch(f"kernel expects {self.site_dim}-dimensional sites")
        return np.asarray(self._evaluate(site, points), dtype=float)

    def vector(self, site, space: MeasureSpace):
        site = np.atleast_1d(np.asarray(site, dtype=float))
        key = (id(space), tuple(np.round(site, 12)))
        with self._lock:
            hit = self._cache.get(key)
        if hit is not None:
            return hit
        vec = self.evaluate(site, space.points)
        vec.setflags(write=False)
        with self._lock:
            self._cache[key] = vec
        return vec


def make_kernel(name, **params) -> KernelFamily:
    """Build a named kernel family.

    ========================  ==============================================
    name                      kernel
    ========================  ==============================================
    ``bisquare``              ``c (1 - |h/r|^2)^2`` on ``|h| <= r``
                              (defaults c=15/16, r=1)
    ``parabolic``             ``c (r^2 - |h|^2)`` on ``|h| <= r``
    ``cylinder``              indicator of the ball of radius r
    ``exponential-ou``        ``exp(-lam (t - x)) 1(x <= t)``
    ``box``                   ``1(lo <= x - t < hi)`` componentwise
    ``levy``                  ``1(0 <= x <= t)`` componentwise
    ``interval``              ``1(min t < x < max t)``, two-dim sites
    ``tabulated``             profile read from ``path`` (CSV x1..xk,value)
    ========================  ==============================================
    """
    if name == "bisquare":
        p = {"c": 15.0 / 16.0, "r": 1.0, **params}
        return KernelFamily(_Profile(name, tuple(sorted(p.items())), p["r"]), params=p)
    if name == "parabolic":
        p = {"c": 1.0, "r": 1.0, **params}
        return KernelFamily(_Profile(name, tuple(sorted(p.items())), p["r"]), params=p)
    if name == "cylinder":
        p = {"r": 1.0, **params}
        return KernelFamily(_Profile(name, tuple(sorted(p.items())), p["r"]), params=p)
    if name == "exponential-ou":
        p = {"lam": 1.0, **params}
        if p["lam"] <= 0:
            raise ValueError("lam must be positive")
        return KernelFamily(_Profile(name, tuple(sorted(p.items()))), params=p)
    if name == "box":
        p = {"lo": 0.25, "hi": 0.75, **params}
        return KernelFamily(_Profile(name, tuple(sorted(p.items()))), params=p)
    if name == "levy":
        return KernelFamily(evaluate=_Levy().evaluate, name=name)
    if name == "interval":
        return KernelFamily(evaluate=_Interval().evaluate, name=name, site_dim=2)
    if name == "tabulated":
        prof = _Tabulated.from_csv(params["path"])
        return KernelFamily(prof, name=name, params=params)
    raise KeyError(f"unknown kernel {name!r}")


KERNELS = (
    "bisquare",
    "parabolic",
    "cylinder",
    "exponential-ou",
    "box",
    "levy",
    "interval",
    "tabulated",
)


# -- fields ------------------------------------------------------------------


@dataclass
class IntegralField:
    """Stable integral field over a discretized control measure.

    Parameters
    ----------
    kernels : KernelFamily
    space : MeasureSpace
    alpha : float
        Stability index in (0, 2].
    skewness : float or callable
        Skewness intensity ``beta(x)`` with values in [-1, 1], either a
        constant or a function of the (N, k) node array.
    """

    kernels: KernelFamily
    space: MeasureSpace
    alpha: float
    skewness: float | Callable = 0.0
    beta: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise InvalidAlpha(f"alpha must lie in (0, 2], got {self.alpha}")
        if callable(self.skewness):
            b = np.asarray(self.skewness(self.space.points), dtype=float).ravel()
        else:
            b = np.full(self.space.size, float(self.skewness))
        if b.shape[0] != self.space.size or np.any(np.abs(b) > 1.0):
            raise ValueError("skewness intensity must take values in [-1, 1]")
        self.beta = b

    def kernel(self, site):
        return self.kernels.vector(site, self.space)

    def kernel_matrix(self, sites):
        sites = np.atleast_2d(np.asarray(sites, dtype=float))
        return np.stack([self.kernel(s) for s in sites])

    @property
    def symmetric(self):
        return not np.any(self.beta)


def lalpha_norm(f, space: MeasureSpace, alpha) -> float:
    """``(sum m |f|^alpha)^(1/alpha)``; a quasi-norm when alpha < 1."""
    f = np.asarray(f, dtype=float)
    return float(np.sum(space.weights * np.abs(f) ** alpha) ** (1.0 / alpha))


def _residual_kernel(field, target, sites, weights):
    g = field.kernel(target).astype(float)
    if sites is not None and len(sites):
        g = g - np.asarray(weights, dtype=float) @ field.kernel_matrix(sites)
    return g


def combo_scale(field: IntegralField, target, sites=None, weights=None) -> float:
    """Scale of ``X(t) - sum_i w_i X(t_i)``."""
    return lalpha_norm(_residual_kernel(field, target, sites, weights), field.space, field.alpha)


def combo_skewness(field: IntegralField, g) -> float:
    """Skewness of ``int g dM`` for a kernel vector ``g`` on the nodes."""
    m = field.space.weights
    denom = np.sum(np.abs(g) ** field.alpha * m)
    if denom == 0:
        raise ZeroScale("integral has zero scale")
    return float(np.sum(signed_power(g, field.alpha) * field.beta * m) / denom)


def covariation_integral(field: IntegralField, s, t) -> float:
    """Covariation ``[X(s), X(t)]_alpha``; requires alpha in (1, 2]."""
    if not (1.0 < field.alpha <= 2.0):
        raise InvalidAlpha("covariation is defined for alpha in (1, 2]")
    fs, ft = field.kernel(s), field.kernel(t)
    return float(np.sum(fs * signed_power(ft, field.alpha - 1.0) * field.space.weights))


def gram_rank(field: IntegralField, sites, tol=1e-10) -> int:
    """Numerical rank of the weighted kernel Gram matrix at ``sites``.

    Eigenvalues below ``tol`` times the largest count as zero. Full rank
    means no nontrivial combination of the site kernels vanishes.
    """
    F = field.kernel_matrix(sites)
    G = (F * field.space.weights) @ F.T
    ev = np.linalg.eigvalsh(G)
    top = ev.max()
    if top <= 0:
        return 0
    return int(np.sum(ev > tol * top))


def sample_field(field: IntegralField, sites, seed, size=None, chunk=1000):
    """Joint draw of the field at ``sites``.

    The measure of each cell is ``S_alpha(m_j^(1/alpha), beta_j, 0)`` and
    cells are independent. Returns an array of shape (n_sites,) or
    (size, n_sites).
    """
    F = field.kernel_matrix(sites)
    rng = make_rng(seed)
    sig = field.space.weights ** (1.0 / field.alpha)
    reps = 1 if size is None else int(size)
    out = np.empty((reps, F.shape[0]))
    done = 0
    while done < reps:
        k = min(chunk, reps - done)
        M = stable_draws(field.alpha, sig, field.beta, 0.0, rng, (k, sig.size))
        out[done : done + k] = M @ F.T
        done += k
    return out[0] if size is None else out


def quadrature_norm_error(field: IntegralField, site, exact_norm) -> float:
    """Absolute gap between the discretized and an analytic kernel norm."""
    return abs(lalpha_norm(field.kernel(site), field.space, field.alpha) - exact_norm)
