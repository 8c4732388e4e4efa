"""Simulation of Gaussian, sub-Gaussian and shot-noise fields on grids."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .covariance import CovModel
from .exceptions import DimensionMismatch, GridTooLarge, NotPSD
from .stable import make_rng, stable_draws

__all__ = [
    "GridSpec",
    "GridField",
    "MAX_SITES",
    "cholesky_jitter",
    "gaussian_sim",
    "subgaussian_sim",
    "shot_noise_sim",
    "subgaussian_mixing_law",
]

MAX_SITES = 4096
JITTER_LADDER = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6)
_MAGIC = b"SFGF"
_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Regular grid with ``counts[i]`` nodes spaced ``spacing[i]`` from ``origin[i]``.

    Sites are enumerated in row-major order (last axis fastest).
    """

    origin: tuple
    spacing: tuple
    counts: tuple

    def __post_init__(self):
        o = tuple(float(x) for x in np.atleast_1d(self.origin))
        h = tuple(float(x) for x in np.atleast_1d(self.spacing))
        c = tuple(int(x) for x in np.atleast_1d(self.counts))
        if not (len(o) == len(h) == len(c)):
            raise DimensionMismatch("origin, spacing and counts must have equal length")
        if any(x <= 0 for x in h) or any(x < 1 for x in c):
            raise ValueError("spacing must be positive and counts >= 1")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "spacing", h)
        object.__setattr__(self, "counts", c)

    @property
    def dim(self):
        return len(self.counts)

    @property
    def size(self):
        return int(np.prod(self.counts))

    def axes(self):
        return [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.counts)]

    def sites(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class GridField:
    """Field values at a list of sites, optionally laid out on a grid.

    ``values`` has shape (n,) for one realization or (r, n) for ``r``
    independent realizations.
    """

    sites: np.ndarray
    values: np.ndarray
    seed: int | None = None
    grid: GridSpec | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sites = np.atleast_2d(np.asarray(self.sites, dtype=float))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[-1] != self.sites.shape[0]:
            raise DimensionMismatch("values do not match the number of sites")
        if self.grid is not None and self.grid.size != self.sites.shape[0]:
            raise DimensionMismatch("grid size does not match the number of sites")

    def as_array(self):
        """Values reshaped to the grid shape (leading realization axis kept)."""
        if self.grid is None:
            raise ValueError("field has no grid layout")
        return self.values.reshape(self.values.shape[:-1] + self.grid.counts)

    # -- CSV ---------------------------------------------------------------

    def to_csv(self, path):
        if self.values.ndim != 1:
            raise ValueError("only single realizations can be written")
        d = self.sites.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"x{i + 1}" for i in range(d)] + ["value"])
            for s, v in zip(self.sites, self.values):
                w.writerow([repr(float(x)) for x in s] + [repr(float(v))])

    @classmethod
    def from_csv(cls, path):
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, :-1], data[:, -1])

    # -- binary ------------------------------------------------------------

    def to_binary(self, path):
        """Little-endian header (magic, version, d, counts, origin, spacing, seed)
        followed by float64 values in row-major order."""
        if self.grid is None or self.values.ndim != 1:
            raise ValueError("binary layout needs a gridded single realization")
        g = self.grid
        d = g.dim
        head = struct.pack("<4sII", _MAGIC, _VERSION, d)
        head += struct.pack(f"<{d}Q", *g.counts)
        head += struct.pack(f"<{d}d", *g.origin)
        head += struct.pack(f"<{d}d", *g.spacing)
        head += struct.pack("<q", -1 if self.seed is None else int(self.seed))
        with open(path, "wb") as fh:
            fh.write(head)
            fh.write(self.values.astype("<f8").tobytes())

    @classmethod
    def from_binary(cls, path):
        with open(path, "rb") as fh:
            buf = fh.read()
        magic, version, d = struct.unpack_from("<4sII", buf, 0)
        if magic != _MAGIC or version != _VERSION:
            raise ValueError("not a grid field file")
        off = 12
        counts = struct.unpack_from(f"<{d}Q", buf, off)
        off += 8 * d
        origin = struct.unpack_from(f"<{d}d", buf, off)
        off += 8 * d
        spacing = struct.unpack_from(f"<{d}d", buf, off)
        off += 8 * d
        (seed,) = struct.unpack_from("<q", buf, off)
        off += 8
        grid = GridSpec(origin, spacing, counts)
        values = np.frombuffer(buf, dtype="<f8", offset=off).astype(float)
        return cls(grid.sites(), values, None if seed < 0 else seed, grid)


def _sites_of(grid):
    if isinstance(grid, GridSpec):
        return grid.sites(), grid
    return np.atleast_2d(np.asarray(grid, dtype=float)), None


def cholesky_jitter(K):
    """Lower Cholesky factor of ``K``, adding diagonal jitter if needed.

    Jitter runs through ``1e-12 ... 1e-6`` times ``trace(K) / n``.
    Returns ``(L, jitter)``.
    """
    K = np.asarray(K, dtype=float)
    try:
        return np.linalg.cholesky(K), 0.0
    except np.linalg.LinAlgError:
        pass
    base = np.trace(K) / K.shape[0]
    for eps in JITTER_LADDER:
        jit = eps * base
        try:
            return np.linalg.cholesky(K + jit * np.eye(K.shape[0])), jit
        except np.linalg.LinAlgError:
            continue
    raise NotPSD("Gram matrix is not positive semidefinite even after jitter")


def _gaussian_draw(model, sites, rng, reps):
    K = model.gram(sites)
    diag = np.diag(K)
    if np.any(diag < 0):
        raise NotPSD("negative variance on the diagonal")
    # Sites with exactly zero variance are almost surely zero.
    live = diag > 0
    out = np.zeros((reps, sites.shape[0]))
    if live.any():
        L, jit = cholesky_jitter(K[np.ix_(live, live)])
        z = rng.standard_normal((reps, int(live.sum())))
        out[:, live] = z @ L.T
    else:
        jit = 0.0
    return out, jit


def gaussian_sim(model: CovModel, grid, seed, size=None) -> GridField:
    """Centered Gaussian field with covariance ``model`` by Cholesky factorization.

    ``grid`` is a GridSpec or an (n, d) site array of at most 4096 sites.
    """
    sites, spec = _sites_of(grid)
    if sites.shape[0] > MAX_SITES:
        raise GridTooLarge(f"{sites.shape[0]} sites exceed the limit of {MAX_SITES}")
    rng = make_rng(seed)
    reps = 1 if size is None else int(size)
    vals, jit = _gaussian_draw(model, sites, rng, reps)
    return GridField(
        sites, vals[0] if size is None else vals, int(seed), spec, {"kind": "gaussian", "jitter": jit}
    )


def subgaussian_mixing_law(alpha):
    """Parameters of the positive stable mixing variable ``A``."""
    from .stable import StableParams

    return StableParams(alpha / 2.0, np.cos(np.pi * alpha / 4.0) ** (2.0 / alpha), 1.0, 0.0)


def subgaussian_sim(model: CovModel, alpha, grid, seed, size=None, mixing=None) -> GridField:
    """Sub-Gaussian field ``A^(1/2) G`` with ``G`` Gaussian with covariance ``model``.

    ``A`` is totally skewed ``(alpha/2)``-stable. The Gaussian part uses the
    same random stream as :func:`gaussian_sim`; pass ``mixing`` to fix ``A``.
    """
    if not (0.0 < alpha < 2.0):
        raise ValueError("sub-Gaussian fields need alpha in (0, 2)")
    sites, spec = _sites_of(grid)
    if sites.shape[0] > MAX_SITES:
        raise GridTooLarge(f"{sites.shape[0]} sites exceed the limit of {MAX_SITES}")
    rng = make_rng(seed)
    reps = 1 if size is None else int(size)
    g, jit = _gaussian_draw(model, sites, rng, reps)
    if mixing is None:
        law = subgaussian_mixing_law(alpha)
        A = stable_draws(law.alpha, law.sigma, 1.0, 0.0, rng, reps)
    else:
        A = np.broadcast_to(np.asarray(mixing, dtype=float), (reps,))
    vals = np.sqrt(A)[:, None] * g
    return GridField(
        sites,
        vals[0] if size is None else vals,
        int(seed),
        spec,
        {"kind": "sub-gaussian", "alpha": alpha, "jitter": jit},
    )


def _support_radius(kernel, dim, rel=1e-8):
    r = getattr(kernel, "radius", np.inf)
    if np.isfinite(r):
        return float(r)
    e = np.zeros((1, dim))
    f0 = abs(float(kernel(e)[0]))
    r = 1.0
    while r < 1e6:
        e[0, 0] = r
        if abs(float(kernel(e)[0])) <= rel * f0:
            return r
        r *= 2.0
    raise ValueError("could not bound the kernel support")


def shot_noise_sim(intensity, kernel, window, grid, seed, size=None) -> GridField:
    """Poisson shot noise ``sum_i f(t - x_i)`` observed at the grid sites.

    Germs ``x_i`` form a homogeneous Poisson process of rate ``intensity`` on
    ``window`` padded by the kernel support radius. ``kernel`` is a profile
    callable ``h -> f(h)`` or a moving-average KernelFamily. Kernels without a finite
    ``radius`` attribute are truncated where they fall below 1e-8 of f(0).
    """
    profile = getattr(kernel, "profile", kernel)
    if profile is None:
        raise ValueError("shot noise needs a moving-average kernel profile")
    kernel = profile
    sites, spec = _sites_of(grid)
    lo, hi = (np.atleast_1d(np.asarray(w, dtype=float)) for w in window)
    d = sites.shape[1]
    if lo.size != d:
        raise DimensionMismatch("window dimension does not match the grid")
    R = _support_radius(kernel, d)
    lo, hi = lo - R, hi + R
    vol = float(np.prod(hi - lo))
    rng = make_rng(seed)
    reps = 1 if size is None else int(size)
    out = np.zeros((reps, sites.shape[0]))
    for k in range(reps):
        n = rng.poisson(intensity * vol)
        if n == 0:
            continue
        germs = lo + (hi - lo) * rng.random((n, d))
        out[k] = kernel(sites[:, None, :] - germs[None, :, :]).sum(axis=1)
    return GridField(
        sites, out[0] if size is None else out, int(seed), spec, {"kind": "shot-noise", "radius": R}
    )
