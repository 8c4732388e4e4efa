"""Univariate and bivariate alpha-stable laws.

The parameterization is the classical S_alpha(sigma, beta, mu) one whose
characteristic function for alpha != 1 reads

    exp(-sigma^alpha |theta|^alpha (1 - i beta sign(theta) tan(pi alpha / 2))
        + i mu theta)

and for alpha == 1 replaces the tangent term with (2 / pi) log|theta|.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .exceptions import (
    DegenerateSample,
    InvalidAlpha,
    InvalidMomentOrder,
    UnsupportedSkew,
)

__all__ = [
    "StableParams",
    "SampleBatch",
    "BivariateSpectralMeasure",
    "ScalarSpectralMeasure",
    "MomentConstant",
    "char_fn",
    "char_fn_vector",
    "sample",
    "stable_draws",
    "make_rng",
    "tail_index_estimate",
    "moment_constant",
    "covariation_from_spectral",
    "scale_from_spectral",
    "codifference",
    "codifference_from_spectral",
    "scalar_spectral_measure",
    "signed_power",
]


def signed_power(x, p):
    """Signed power ``|x|**p * sign(x)``, written x^<p>."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.abs(x) ** p


def _check_alpha(alpha):
    if not (0.0 < alpha <= 2.0) or not np.isfinite(alpha):
        raise InvalidAlpha(f"alpha must lie in (0, 2], got {alpha!r}")


@dataclass(frozen=True)
class StableParams:
    """Parameters of a univariate stable law S_alpha(sigma, beta, mu).

    At ``alpha == 2`` the skewness is irrelevant and is normalized to 0.
    """

    alpha: float
    sigma: float = 1.0
    beta: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if not (self.sigma >= 0.0) or not np.isfinite(self.sigma):
            raise ValueError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        if not (-1.0 <= self.beta <= 1.0):
            raise ValueError(f"beta must lie in [-1, 1], got {self.beta!r}")
        if not np.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if self.alpha == 2.0:
            object.__setattr__(self, "beta", 0.0)

    @property
    def symmetric(self):
        return self.beta == 0.0 and self.mu == 0.0


@dataclass(frozen=True)
class SampleBatch:
    values: np.ndarray
    seed: int
    params: StableParams

    @property
    def n(self):
        return self.values.shape[0]


def char_fn(params: StableParams, theta):
    """Characteristic function of ``params`` evaluated at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    a, s, b, m = params.alpha, params.sigma, params.beta, params.mu
    at = np.abs(theta)
    sg = np.sign(theta)
    if a == 2.0:
        expo = -(s * s) * theta**2
    elif a == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            log_term = np.where(at > 0, np.log(np.where(at > 0, at, 1.0)), 0.0)
        expo = -s * at * (1.0 + 1j * b * (2.0 / np.pi) * sg * log_term)
    else:
        expo = -(s**a) * at**a * (1.0 - 1j * b * sg * np.tan(np.pi * a / 2.0))
    return np.exp(expo + 1j * m * theta)


@dataclass(frozen=True)
class BivariateSpectralMeasure:
    """Finite discrete spectral measure on the unit circle plus a shift.

    Parameters
    ----------
    directions : array of shape (k, 2)
        Atom locations, each of unit Euclidean norm.
    masses : array of shape (k,)
        Nonnegative atom masses.
    shift : array of shape (2,)
    """

    directions: np.ndarray
    masses: np.ndarray
    shift: np.ndarray = None

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        w = np.atleast_1d(np.asarray(self.masses, dtype=float))
        if d.ndim != 2 or d.shape[1] != 2 or d.shape[0] != w.shape[0]:
            raise ValueError("directions must be (k, 2) and match masses (k,)")
        if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
            raise ValueError("spectral atoms must lie on the unit circle")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("spectral masses must be finite and >= 0")
        shift = np.zeros(2) if self.shift is None else np.asarray(self.shift, float)
        if shift.shape != (2,):
            raise ValueError("shift must have shape (2,)")
        object.__setattr__(self, "directions", d)
        object.__setattr__(self, "masses", w)
        object.__setattr__(self, "shift", shift)

    def __add__(self, other):
        # Spectral measures and shifts of independent vectors add.
        return BivariateSpectralMeasure(
            np.vstack([self.directions, other.directions]),
            np.concatenate([self.masses, other.masses]),
            self.shift + other.shift,
        )

    @property
    def total_mass(self):
        return float(self.masses.sum())


def _projections(gamma, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-1] != 2:
        raise ValueError("theta must have trailing dimension 2")
    return theta @ gamma.directions.T, theta @ gamma.shift


def char_fn_vector(alpha, gamma: BivariateSpectralMeasure, theta):
    """Characteristic function of a stable vector with spectral measure ``gamma``.

    ``theta`` may be a single point of shape (2,) or a stack (..., 2).
    """
    _check_alpha(alpha)
    proj, lin = _projections(gamma, theta)
    w = gamma.masses
    if alpha == 2.0:
        expo = -(proj**2) @ w
    else:
        ap = np.abs(proj)
        if alpha == 1.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                lg = np.where(ap > 0, np.log(np.where(ap > 0, ap, 1.0)), 0.0)
            inner = ap * (1.0 + 1j * (2.0 / np.pi) * np.sign(proj) * lg)
        else:
            inner = ap**alpha * (1.0 - 1j * np.sign(proj) * np.tan(np.pi * alpha / 2.0))
        expo = -(inner @ w)
    return np.exp(expo + 1j * lin)


def make_rng(seed, stream=None):
    """PCG64 generator for ``seed``; ``stream`` selects an independent substream."""
    if stream is None:
        return np.random.Generator(np.random.PCG64(seed))
    ss = np.random.SeedSequence(seed, spawn_key=(int(stream),))
    return np.random.Generator(np.random.PCG64(ss))


def _standard_draws(alpha, beta, rng, size):
    """Chambers-Mallows-Stuck draws from S_alpha(1, beta, 0).

    ``beta`` may be an array broadcastable to ``size``.
    """
    half = np.pi / 2.0
    # Keep V strictly inside (-pi/2, pi/2) so cos(V) never vanishes.
    v = np.clip(rng.uniform(-half, half, size), -half + 1e-12, half - 1e-12)
    w = rng.standard_exponential(size)
    beta = np.broadcast_to(np.asarray(beta, dtype=float), v.shape)
    if alpha == 1.0:
        hb = half + beta * v
        return (hb * np.tan(v) - beta * np.log(half * w * np.cos(v) / hb)) / half
    t = np.tan(np.pi * alpha / 2.0)
    if alpha < 1.0:
        # arctan(tan(x)) == x exactly in exact arithmetic; keep the totally
        # skewed case exact so that positivity is not lost to rounding.
        shift = np.where(np.abs(beta) == 1.0, beta * half, np.arctan(beta * t) / alpha)
    else:
        shift = np.arctan(beta * t) / alpha
    scale = (1.0 + (beta * t) ** 2) ** (1.0 / (2.0 * alpha))
    av = alpha * (v + shift)
    return (
        scale
        * np.sin(av)
        / np.cos(v) ** (1.0 / alpha)
        * (np.cos(v - av) / w) ** ((1.0 - alpha) / alpha)
    )


def stable_draws(alpha, sigma, beta, mu, rng, size):
    """Draws from S_alpha(sigma, beta, mu) with array-valued sigma and beta."""
    _check_alpha(alpha)
    sigma = np.asarray(sigma, dtype=float)
    if alpha == 2.0:
        return mu + np.sqrt(2.0) * sigma * rng.standard_normal(size)
    z = _standard_draws(alpha, beta, rng, size)
    out = sigma * z + mu
    if alpha == 1.0:
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = np.where(sigma > 0, sigma * np.log(np.where(sigma > 0, sigma, 1.0)), 0.0)
        out = out + (2.0 / np.pi) * np.asarray(beta) * corr
    return out


def sample(params: StableParams, n: int, seed: int) -> SampleBatch:
    """Draw ``n`` independent variates from ``params`` with a seeded PCG64 stream."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    values = stable_draws(params.alpha, params.sigma, params.beta, params.mu, rng, n)
    return SampleBatch(np.asarray(values, dtype=float), int(seed), params)


def tail_index_estimate(batch, lower_q=0.99, upper_q=0.9999) -> float:
    """Log-log regression estimate of the tail index of ``|X|``.

    The empirical survival function of ``|X|`` is regressed on the order
    statistics lying between the ``lower_q`` and ``upper_q`` quantiles and
    minus the slope is returned. Light-tailed samples produce values well
    above 2.
    """
    x = batch.values if isinstance(batch, SampleBatch) else np.asarray(batch, float)
    a = np.sort(np.abs(x))[::-1]
    n = a.size
    if n < 2 or a[0] == a[-1]:
        raise DegenerateSample("all magnitudes are equal")
    k_lo = max(int(np.floor(n * (1.0 - upper_q))), 1)
    k_hi = int(np.ceil(n * (1.0 - lower_q)))
    k = np.arange(k_lo, k_hi + 1)
    xs = a[k - 1]
    keep = xs > 0
    if keep.sum() < 2 or np.ptp(xs[keep]) == 0:
        raise DegenerateSample("tail band contains fewer than two distinct values")
    slope = np.polyfit(np.log(xs[keep]), np.log(k[keep] / n), 1)[0]
    return float(-slope)


class MomentConstant(NamedTuple):
    value: float
    stderr: float


@lru_cache(maxsize=256)
def _moment_constant_cached(alpha, beta, p, n, seed, chunk):
    rng = make_rng(seed)
    s1 = s2 = 0.0
    done = 0
    while done < n:
        m = min(chunk, n - done)
        y = np.abs(stable_draws(alpha, 1.0, beta, 0.0, rng, m)) ** p
        s1 += y.sum()
        s2 += (y * y).sum()
        done += m
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0)
    se_mean = np.sqrt(var / n)
    value = mean ** (1.0 / p)
    return MomentConstant(float(value), float(value / (p * mean) * se_mean))


def moment_constant(alpha, beta, p, n=10_000_000, seed=20240601) -> MomentConstant:
    """Monte-Carlo estimate of ``(E|xi|^p)^(1/p)`` for xi ~ S_alpha(1, beta, 0).

    ``beta`` is rounded to 6 decimals to share cached estimates. The
    standard error is obtained by the delta method and is only meaningful
    when ``p < alpha / 2``.
    """
    _check_alpha(alpha)
    if not (0.0 < p < alpha) and not (alpha == 2.0 and p > 0):
        raise InvalidMomentOrder(f"moment order p={p} must lie in (0, alpha={alpha})")
    if alpha == 2.0:
        beta = 0.0
    elif alpha == 1.0 and beta != 0.0:
        raise UnsupportedSkew("alpha == 1 requires beta == 0 for moment constants")
    return _moment_constant_cached(
        float(alpha), round(float(beta), 6), float(p), int(n), int(seed), 1_000_000
    )


def covariation_from_spectral(gamma: BivariateSpectralMeasure, alpha) -> float:
    """Covariation [X1, X2]_alpha of a bivariate stable vector, alpha in (1, 2]."""
    if not (1.0 < alpha <= 2.0):
        raise InvalidAlpha("covariation is defined for alpha in (1, 2]")
    s = gamma.directions
    return float(np.sum(s[:, 0] * signed_power(s[:, 1], alpha - 1.0) * gamma.masses))


def scale_from_spectral(gamma: BivariateSpectralMeasure, alpha, a, b) -> float:
    """Scale of ``a X1 + b X2``."""
    _check_alpha(alpha)
    proj = np.abs(a * gamma.directions[:, 0] + b * gamma.directions[:, 1])
    return float(np.sum(proj**alpha * gamma.masses) ** (1.0 / alpha))


def codifference(scale1, scale2, scale_diff, alpha) -> float:
    """Codifference from the scales of X1, X2 and X1 - X2.

    Returns ``sigma1^a + sigma2^a - sigma_diff^a``, which equals the
    covariance at ``alpha == 2`` when scales are sqrt(Var / 2).
    """
    _check_alpha(alpha)
    return float(scale1**alpha + scale2**alpha - scale_diff**alpha)


def codifference_from_spectral(gamma: BivariateSpectralMeasure, alpha) -> float:
    s1 = scale_from_spectral(gamma, alpha, 1.0, 0.0)
    s2 = scale_from_spectral(gamma, alpha, 0.0, 1.0)
    sd = scale_from_spectral(gamma, alpha, 1.0, -1.0)
    return codifference(s1, s2, sd, alpha)


@dataclass(frozen=True)
class ScalarSpectralMeasure:
    """Spectral masses of a real stable variable at +1 and -1."""

    alpha: float
    plus: float
    minus: float

    def to_params(self, mu=0.0) -> StableParams:
        total = self.plus + self.minus
        beta = 0.0 if total == 0 else (self.plus - self.minus) / total
        return StableParams(self.alpha, total ** (1.0 / self.alpha), beta, mu)


def scalar_spectral_measure(params: StableParams) -> ScalarSpectralMeasure:
    sa = params.sigma**params.alpha
    return ScalarSpectralMeasure(
        params.alpha, sa * (1.0 + params.beta) / 2.0, sa * (1.0 - params.beta) / 2.0
    )
