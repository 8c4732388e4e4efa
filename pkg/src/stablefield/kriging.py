"""Simple and ordinary kriging, empirical variograms and variogram fitting."""
from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize
from scipy.spatial import cKDTree
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .covariance import CovModel, VarioModel
from .exceptions import DimensionMismatch, SingularSystem
from .simulate import JITTER_LADDER, GridField, GridSpec

__all__ = [
    "Observations",
    "WeightSolution",
    "VariogramTable",
    "FitResult",
    "simple_krige",
    "ordinary_krige",
    "krige_grid",
    "matheron_estimate",
    "fit_variogram",
    "SimpleKriging",
    "OrdinaryKriging",
]

COND_LIMIT = 1e12


@dataclass
class Observations:
    """Observed values at distinct sites with an optional mean function."""

    sites: np.ndarray
    values: np.ndarray | None = None
    mean: float | object = 0.0

    def __post_init__(self):
        s = np.asarray(self.sites, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        self.sites = s
        if self.values is not None:
            self.values = np.asarray(self.values, dtype=float).ravel()
            if self.values.shape[0] != s.shape[0]:
                raise DimensionMismatch("values do not match the number of sites")
        if s.shape[0] > 1 and cKDTree(s).query_pairs(1e-12):
            raise SingularSystem("observation sites are not distinct")

    def mean_at(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if callable(self.mean):
            return np.asarray(self.mean(x), dtype=float).reshape(x.shape[0])
        return np.full(x.shape[0], float(self.mean))


@dataclass
class WeightSolution:
    """Weights ``lambda`` of a linear predictor at one target.

    ``error_variance`` is the mean squared prediction error and
    ``predictor_variance`` the variance of the predictor itself.
    """

    weights: np.ndarray
    lambda0: float = 0.0
    lagrange: float | None = None
    error_variance: float | None = None
    predictor_variance: float | None = None
    prediction: float | None = None
    info: dict = field(default_factory=dict)


def _check_cond(A):
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] == 0 or sv[0] / sv[-1] > COND_LIMIT:
        raise SingularSystem(
            "prediction system is singular or ill-conditioned "
            f"(condition number {np.inf if sv[-1] == 0 else sv[0] / sv[-1]:.3g})"
        )


def _cho(K):
    _check_cond(K)
    base = np.trace(K) / K.shape[0]
    for eps in (0.0,) + JITTER_LADDER:
        try:
            return linalg.cho_factor(K + eps * base * np.eye(K.shape[0]), lower=True)
        except linalg.LinAlgError:
            continue
    raise SingularSystem("covariance matrix could not be factorized")


def _as_targets(t, dim):
    t = np.asarray(t, dtype=float)
    if t.ndim == 1:
        t = t[None, :] if t.size == dim else t[:, None]
    if t.shape[-1] != dim:
        raise DimensionMismatch(f"expected {dim}-dimensional targets")
    return t


def _simple_batch(model, obs, targets, factor=None):
    factor = factor if factor is not None else _cho(model.gram(obs.sites))
    sig = model.gram(obs.sites, targets)
    lam = linalg.cho_solve(factor, sig)
    var_t = np.array([model(t, t) for t in targets], dtype=float)
    pv = np.sum(lam * sig, axis=0)
    return lam.T, var_t - pv, pv


def simple_krige(model: CovModel, obs: Observations, target) -> WeightSolution:
    """Best linear predictor with known mean and covariance ``model``."""
    t = _as_targets(target, obs.sites.shape[1])
    lam, err, pv = _simple_batch(model, obs, t)
    lam = lam[0]
    lam0 = float(obs.mean_at(t)[0] - lam @ obs.mean_at(obs.sites))
    pred = None
    if obs.values is not None:
        pred = float(lam0 + lam @ obs.values)
    return WeightSolution(lam, lam0, None, float(err[0]), float(pv[0]), pred)


def _ordinary_matrix(vario, sites):
    n = sites.shape[0]
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = vario.gram(sites)
    A[:n, n] = A[n, :n] = 1.0
    return A


def _ordinary_batch(vario, obs, targets, lu=None):
    n = obs.sites.shape[0]
    if lu is None:
        A = _ordinary_matrix(vario, obs.sites)
        _check_cond(A)
        lu = linalg.lu_factor(A)
    rhs = np.ones((n + 1, targets.shape[0]))
    rhs[:n] = vario.gram(obs.sites, targets)
    sol = linalg.lu_solve(lu, rhs)
    lam, mu = sol[:n], sol[n]
    err = np.sum(lam * rhs[:n], axis=0) + mu
    return lam.T, mu, err


def ordinary_krige(vario: VarioModel, obs: Observations, target) -> WeightSolution:
    """Unbiased predictor with unknown constant mean, from a variogram.

    Solves ``sum_i lambda_i gamma(t_i, t_j) + mu = gamma(t_j, t)`` with
    ``sum_i lambda_i = 1``; the error variance is
    ``sum_i lambda_i gamma(t_i, t) + mu``.
    """
    t = _as_targets(target, obs.sites.shape[1])
    lam, mu, err = _ordinary_batch(vario, obs, t)
    pred = None if obs.values is None else float(lam[0] @ obs.values)
    return WeightSolution(lam[0], 0.0, float(mu[0]), float(err[0]), None, pred)


def krige_grid(model, obs: Observations, grid, method="simple", jobs=1, chunk=512):
    """Predictions and error variances over all grid sites.

    ``model`` is a CovModel for ``method="simple"`` and a VarioModel for
    ``method="ordinary"``. Returns a pair of GridField objects.
    """
    if obs.values is None:
        raise ValueError("observations need values")
    spec = grid if isinstance(grid, GridSpec) else None
    targets = grid.sites() if spec is not None else np.atleast_2d(np.asarray(grid, float))
    if method == "simple":
        factor = _cho(model.gram(obs.sites))
        m_obs = obs.mean_at(obs.sites)

        def work(T):
            lam, err, _ = _simple_batch(model, obs, T, factor)
            return obs.mean_at(T) + lam @ (obs.values - m_obs), err

    elif method == "ordinary":
        A = _ordinary_matrix(model, obs.sites)
        _check_cond(A)
        lu = linalg.lu_factor(A)

        def work(T):
            lam, _, err = _ordinary_batch(model, obs, T, lu)
            return lam @ obs.values, err

    else:
        raise ValueError(f"unknown kriging method {method!r}")
    blocks = [targets[i : i + chunk] for i in range(0, targets.shape[0], chunk)]
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            parts = list(ex.map(work, blocks))
    else:
        parts = [work(b) for b in blocks]
    pred = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    err = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    return GridField(targets, pred, None, spec, {"kind": f"{method}-kriging"}), GridField(
        targets, err, None, spec, {"kind": "error-variance"}
    )


# -- empirical variogram -------------------------------------------------------


@dataclass
class VariogramTable:
    """Binned semivariogram estimate.

    ``h_center`` is the mean lag of the pairs falling into each bin (the bin
    midpoint for empty bins) and ``gamma_hat`` is NaN where ``pair_count``
    is zero.
    """

    h_center: np.ndarray
    gamma_hat: np.ndarray
    pair_count: np.ndarray
    direction_label: str = "all"

    @property
    def empty_bins(self):
        return np.flatnonzero(self.pair_count == 0)

    def to_csv(self, path, append=False):
        with open(path, "a" if append else "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if not append:
                w.writerow(["h_center", "gamma_hat", "pair_count", "direction_label"])
            for h, g, c in zip(self.h_center, self.gamma_hat, self.pair_count):
                w.writerow([repr(float(h)), repr(float(g)), int(c), self.direction_label])

    @classmethod
    def from_csv(cls, path, direction_label=None):
        """Read one table; with several directions in the file pick ``direction_label``."""
        rows = []
        with open(path, newline="") as fh:
            for r in csv.DictReader(fh):
                rows.append(r)
        labels = sorted({r["direction_label"] for r in rows})
        if direction_label is None:
            if len(labels) != 1:
                raise ValueError(f"file holds directions {labels}; choose one")
            direction_label = labels[0]
        rows = [r for r in rows if r["direction_label"] == direction_label]
        return cls(
            np.array([float(r["h_center"]) for r in rows]),
            np.array([float(r["gamma_hat"]) for r in rows]),
            np.array([int(r["pair_count"]) for r in rows]),
            direction_label,
        )


def _direction(direction, d):
    if direction is None or (isinstance(direction, str) and direction == "all"):
        return None, "all"
    if isinstance(direction, str):
        axis = "xyz".index(direction)
        v = np.zeros(d)
        v[axis] = 1.0
        return v, direction
    v = np.asarray(direction, dtype=float)
    if v.shape != (d,):
        raise DimensionMismatch("direction does not match the site dimension")
    return v / np.linalg.norm(v), ",".join(repr(float(x)) for x in v)


def _bin_index(lengths, edges):
    # Lags within rounding of an edge belong to the lower bin.
    tol = 1e-9 * edges[-1]
    idx = np.searchsorted(edges, np.asarray(lengths) - tol, side="left") - 1
    return np.clip(idx, 0, len(edges) - 2)


def _accumulate(lengths, sq, cos_ok, edges, sums, sumh, counts):
    keep = (lengths > 0) & (lengths <= edges[-1] * (1 + 1e-9)) & cos_ok
    if not np.any(keep):
        return
    idx = _bin_index(lengths[keep], edges)
    sums += np.bincount(idx, weights=sq[keep], minlength=len(edges) - 1)
    sumh += np.bincount(idx, weights=lengths[keep], minlength=len(edges) - 1)
    counts += np.bincount(idx, minlength=len(edges) - 1)


def matheron_estimate(
    data, values=None, max_lag=None, n_bins=15, direction=None, angle_tol=22.5
) -> VariogramTable:
    """Matheron estimator ``gamma(h) = sum (X(s) - X(t))^2 / (2 N(h))``.

    Parameters
    ----------
    data : GridField or array of sites
        A gridded field uses lag shifts; ``values`` may then carry several
        independent realizations (r, n) whose pairs are pooled.
    direction : None, "all", "x", "y", "z" or vector
        Keep only pairs whose lag lies within ``angle_tol`` degrees of the
        direction (either orientation).
    """
    if isinstance(data, GridField):
        sites, vals, grid = data.sites, data.values if values is None else values, data.grid
    else:
        sites, vals, grid = np.atleast_2d(np.asarray(data, float)), values, None
    vals = np.atleast_2d(np.asarray(vals, dtype=float))
    d = sites.shape[1]
    u, label = _direction(direction, d)
    cos_tol = np.cos(np.deg2rad(angle_tol))
    if max_lag is None:
        max_lag = 0.5 * float(np.linalg.norm(sites.max(0) - sites.min(0)))
    edges = np.linspace(0.0, float(max_lag), int(n_bins) + 1)
    sums = np.zeros(n_bins)
    sumh = np.zeros(n_bins)
    counts = np.zeros(n_bins, dtype=np.int64)

    if grid is not None:
        X = vals.reshape((vals.shape[0],) + grid.counts)
        h = np.asarray(grid.spacing)
        reach = [min(int(np.floor(max_lag / hh + 1e-9)), n - 1) for hh, n in zip(h, grid.counts)]
        for k in itertools.product(*(range(-r, r + 1) for r in reach)):
            k = np.array(k)
            nz = np.flatnonzero(k)
            if nz.size == 0 or k[nz[0]] < 0:
                continue
            lag = k * h
            L = float(np.linalg.norm(lag))
            if L > max_lag * (1 + 1e-9):
                continue
            ok = u is None or abs(lag @ u) >= cos_tol * L * (1 - 1e-12)
            a = (slice(None),) + tuple(
                slice(0, n - kk) if kk >= 0 else slice(-kk, n) for kk, n in zip(k, grid.counts)
            )
            b = (slice(None),) + tuple(
                slice(kk, n) if kk >= 0 else slice(0, n + kk) for kk, n in zip(k, grid.counts)
            )
            if not ok:
                continue
            diff = X[b] - X[a]
            k_bin = int(_bin_index(L, edges))
            sums[k_bin] += float(np.sum(diff * diff))
            counts[k_bin] += diff.size
            sumh[k_bin] += L * diff.size
    else:
        i, j = np.triu_indices(sites.shape[0], 1)
        lag = sites[j] - sites[i]
        L = pdist(sites)
        if u is None:
            ok = np.ones_like(L, dtype=bool)
        else:
            ok = np.abs(lag @ u) >= cos_tol * L * (1 - 1e-12)
        for row in vals:
            sq = (row[j] - row[i]) ** 2
            _accumulate(L, sq, ok, edges, sums, sumh, counts)

    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / (2.0 * np.maximum(counts, 1)), np.nan)
        centers = np.where(counts > 0, sumh / np.maximum(counts, 1), 0.5 * (edges[1:] + edges[:-1]))
    return VariogramTable(centers, gamma, counts, label)


# -- fitting -------------------------------------------------------------------


@dataclass
class FitResult:
    model: VarioModel
    params: dict
    residual: float
    n_iter: int
    converged: bool


def _build_vario(family, params, dim):
    cov = {k: v for k, v in params.items() if k != "nugget"}
    return VarioModel(base=CovModel(family, cov, dim), nugget=params.get("nugget", 0.0))


def fit_variogram(
    table: VariogramTable,
    family="whittle-matern",
    init=None,
    fixed=None,
    dim=2,
    restarts=5,
    seed=0,
    maxiter=20000,
) -> FitResult:
    """Least-squares fit of a nugget plus covariance-family variogram.

    ``init`` holds starting values of the free positive parameters (any of
    ``nugget``, ``a``, ``b``, ``nu``) and ``fixed`` the held ones. The search
    runs Nelder-Mead on log-parameters from ``init`` and from ``restarts - 1``
    seeded perturbations of it. ``converged`` is False when no run met the
    tolerance; the best point found is still returned.
    """
    init = dict(init or {"nugget": 0.1, "a": 1.0, "b": 1.0})
    fixed = dict(fixed or {})
    if family == "whittle-matern" and "nu" not in init and "nu" not in fixed:
        fixed["nu"] = 1.0
    names = sorted(init)
    if any(init[k] <= 0 for k in names):
        raise ValueError("initial parameters must be positive")
    ok = table.pair_count > 0
    h, g = table.h_center[ok], table.gamma_hat[ok]
    scale = float(np.sum(g * g)) or 1.0

    def params_of(x):
        p = dict(fixed)
        p.update((k, float(v)) for k, v in zip(names, np.exp(x)))
        return p

    def loss(x):
        try:
            model = _build_vario(family, params_of(x), dim)
            r = g - model.radial_value(h)
        except (ValueError, FloatingPointError):
            return np.inf
        val = float(r @ r)
        return val if np.isfinite(val) else np.inf

    x0 = np.log([init[k] for k in names])
    f0 = loss(x0)
    if f0 <= 1e-20 * scale:
        p = params_of(x0)
        return FitResult(_build_vario(family, p, dim), p, f0, 0, True)

    rng = np.random.default_rng(seed)
    starts = [x0] + [x0 + rng.normal(0.0, 0.5, x0.size) for _ in range(max(restarts, 1) - 1)]
    best, n_iter, converged = None, 0, False
    for x in starts:
        res = optimize.minimize(
            loss,
            x,
            method="Nelder-Mead",
            options={"xatol": 1e-10, "fatol": 1e-14 * scale, "maxiter": maxiter, "maxfev": 2 * maxiter},
        )
        n_iter += int(res.nit)
        converged |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    p = params_of(best.x)
    return FitResult(_build_vario(family, p, dim), p, float(best.fun), n_iter, converged)


# -- estimators ----------------------------------------------------------------


class SimpleKriging(RegressorMixin, BaseEstimator):
    """Simple kriging regressor with a known covariance model and mean.

    Parameters
    ----------
    model : CovModel
    mean : float or callable, default=0.0
    """

    def __init__(self, model=None, mean=0.0):
        self.model = model
        self.mean = mean

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.model is None:
            raise ValueError("a covariance model is required")
        if X.shape[1] != self.model.dim:
            raise DimensionMismatch("X does not match the model dimension")
        self.obs_ = Observations(X, y, self.mean)
        self.factor_ = _cho(self.model.gram(X))
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "factor_")
        X = check_array(X)
        lam, err, _ = _simple_batch(self.model, self.obs_, X, self.factor_)
        pred = self.obs_.mean_at(X) + lam @ (self.obs_.values - self.obs_.mean_at(self.obs_.sites))
        if return_std:
            return pred, np.sqrt(np.maximum(err, 0.0))
        return pred


class OrdinaryKriging(RegressorMixin, BaseEstimator):
    """Ordinary kriging regressor driven by a variogram model."""

    def __init__(self, variogram=None):
        self.variogram = variogram

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.variogram is None:
            raise ValueError("a variogram model is required")
        self.obs_ = Observations(X, y)
        A = _ordinary_matrix(self.variogram, X)
        _check_cond(A)
        self.lu_ = linalg.lu_factor(A)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "lu_")
        X = check_array(X)
        lam, _, err = _ordinary_batch(self.variogram, self.obs_, X, self.lu_)
        pred = lam @ self.obs_.values
        if return_std:
            return pred, np.sqrt(np.maximum(err, 0.0))
        return pred
