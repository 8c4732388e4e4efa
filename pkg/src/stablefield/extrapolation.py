"""Linear extrapolation of stable random fields.

Predictors have the form ``X_hat(t) = sum_i lambda_i X(t_i)``:

* ``lsl``   minimizes the scale of the error ``X(t) - X_hat(t)`` (alpha > 1),
* ``col``   makes the error covariation-orthogonal to the observations,
* ``mcl``   maximizes covariation with ``X(t)`` at equal scale,
* ``best-lsl`` selects one of possibly many scale minimizers (alpha <= 1),
* ``iclsl`` is the limit of scale minimizers as the index decreases to 1.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, sparse
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .covariance import CovModel
from .exceptions import (
    DimensionMismatch,
    InvalidAlpha,
    InvalidMomentOrder,
    NonConvergence,
    SingularProblem,
    SingularSystem,
    ZeroCovariationVector,
)
from .measure import IntegralField, combo_skewness, gram_rank, lalpha_norm
from .stable import make_rng, moment_constant, signed_power

__all__ = [
    "SubGaussianField",
    "CovariationFunction",
    "ExtrapProblem",
    "ExtrapSolution",
    "AnnealingConfig",
    "lsl_solve",
    "col_solve",
    "mcl_solve",
    "best_lsl_solve",
    "iclsl_solve",
    "solve",
    "covariation_mixed_moment_estimate",
    "MixedMomentEstimate",
    "ErrorReport",
    "error_report",
    "StablePredictor",
    "METHODS",
]

METHODS = ("lsl", "col", "mcl", "best-lsl", "iclsl")
COND_LIMIT = 1e12


@dataclass(frozen=True)
class SubGaussianField:
    """Sub-Gaussian field ``A^(1/2) G`` with Gaussian covariance ``model``."""

    model: CovModel
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise InvalidAlpha("alpha must lie in (0, 2]")

    def gram(self, a, b=None):
        return self.model.gram(a, b)

    def covariation(self, s, t):
        """``[X(s), X(t)]_alpha = 2^(-alpha/2) C(s,t) C(t,t)^((alpha-2)/2)``."""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        ctt = self.model(t, t)
        return 2.0 ** (-self.alpha / 2.0) * self.model(s, t) * ctt ** ((self.alpha - 2.0) / 2.0)

    def combination_scale(self, points, c):
        C = self.model.gram(points)
        return float(np.sqrt(max(0.5 * c @ C @ c, 0.0)))


@dataclass(frozen=True)
class CovariationFunction:
    """A covariation function ``kappa(s, t)`` given directly."""

    kappa: object
    alpha: float

    def covariation(self, s, t):
        return float(self.kappa(np.asarray(s, float), np.asarray(t, float)))


@dataclass
class ExtrapProblem:
    field: object
    sites: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sites, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        t = np.atleast_1d(np.asarray(self.target, dtype=float))
        if t.shape[0] != s.shape[1]:
            raise DimensionMismatch("target and sites differ in dimension")
        if s.shape[0] > 1:
            d = np.linalg.norm(s[:, None, :] - s[None, :, :], axis=-1)
            d[np.diag_indices_from(d)] = np.inf
            if d.min() <= 1e-12:
                raise SingularSystem("observation sites are not distinct")
        self.sites = s
        self.target = t

    @property
    def alpha(self):
        return self.field.alpha

    @property
    def n(self):
        return self.sites.shape[0]


@dataclass
class ExtrapSolution:
    """Weights with the objective value and solver diagnostics."""

    weights: np.ndarray
    method: str
    objective: float
    diagnostics: dict = field(default_factory=dict)


# -- helpers -----------------------------------------------------------------


def _integral_parts(problem):
    """Kernel matrix, target kernel and weights restricted to active cells."""
    fld = problem.field
    F = fld.kernel_matrix(problem.sites)
    g = fld.kernel(problem.target).astype(float)
    m = fld.space.weights
    active = (np.abs(F).sum(axis=0) > 0) | (g != 0)
    active &= m > 0
    return F[:, active], g[active], m[active], fld.beta[active]


def _require_integral(problem, name):
    if not isinstance(problem.field, IntegralField):
        raise TypeError(f"{name} needs a stable integral field")


def _check_independent(problem):
    if gram_rank(problem.field, problem.sites) < problem.n:
        raise SingularProblem("kernels at the observation sites are linearly dependent")


def _weighted_ls(B, g, m):
    """argmin_z sum m (g - B^T z)^2."""
    Bm = B * m
    A = Bm @ B.T
    return linalg.lstsq(A, Bm @ g)[0]


def _line_min(a, b, m, p, t_max=1e300):
    """Minimize ``sum m |a - t b|^p`` over ``t >= 0`` by bisection on the derivative.

    Returns ``(t, cell)`` where ``cell`` is the index of a residual that the
    minimizer sends to zero (a kink of the objective) or -1.
    """

    def dphi(t):
        return -float((m * b) @ signed_power(a - t * b, p - 1.0))

    if dphi(0.0) >= 0.0:
        return 0.0, -1
    lo, hi = 0.0, 1.0
    while dphi(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        if hi > t_max:
            return lo, -1
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if dphi(mid) < 0.0:
            lo = mid
        else:
            hi = mid
    # a kink inside the final bracket is where the minimum sits
    nz = b != 0
    tk = np.full(a.shape, np.nan)
    tk[nz] = a[nz] / b[nz]
    width = max(hi - lo, 4.0 * np.finfo(float).eps * hi)
    near = np.flatnonzero(np.abs(tk - 0.5 * (lo + hi)) <= width)
    if near.size:
        c = near[np.argmin(np.abs(tk[near] - 0.5 * (lo + hi)))]
        return float(tk[c]), int(c)
    return 0.5 * (lo + hi), -1


def _lp_fit(B, g, m, p, z0, tol=1e-8, maxiter=500):
    """Minimize ``sum m |g - B^T z|^p`` for ``p`` in (1, 2].

    Newton directions with an exact line search and an active set of
    zero residuals. As ``p`` approaches 1 the optimal residuals on a few
    cells become far smaller than rounding allows, and the objective has
    near-kinks there. When a line minimum falls on such a kink the cell's
    residual is set to exactly zero and the cell is pinned; later
    directions keep pinned residuals at zero. At reduced stationarity the
    pin multipliers give the residual each pinned cell would need,
    ``(|mu| / (p m))^(1/(p-1))``, and pins where that is not negligible are
    released.

    The first-order residual is the Hoelder-normalized reduced gradient
    ``max |d . grad| / (p |d B|_p |r|_p^(p-1))`` over basis directions
    ``d`` of the free subspace. Iteration ends when it is below ``tol``, or
    when exact line searches along both the Newton and the steepest descent
    directions no longer lower the objective above rounding (reported as
    ``stalled``). It is converged if no pin then needs release.
    Returns ``(z, info)``.
    """
    z = np.array(z0, dtype=float)
    k, ncell = B.shape
    if k == 0:
        return z, {"iterations": 0, "converged": True, "residual": 0.0}
    gscale = max(np.abs(g).max(), 1e-300)
    tau = 1e-10 * gscale
    gnorm = float(np.abs(g) ** p @ m) ** (1.0 / p)
    colnorm = np.linalg.norm(B, axis=0)
    active = np.zeros(ncell, dtype=bool)
    floor = np.full(ncell, 1e-30 * gscale)

    def phi(zz):
        return float(np.abs(g - zz @ B) ** p @ m)

    def basis():
        if not active.any():
            return np.eye(k)
        return linalg.null_space(B[:, active].T)

    def pin(c):
        # direction within the free subspace that moves cell c, if any
        N = basis()
        if N.shape[1] == 0:
            return None
        v = N @ (N.T @ B[:, c])
        if np.linalg.norm(v) <= 1e-6 * colnorm[c]:
            return None
        active[c] = True
        return v

    it = 0
    res = np.inf
    converged = False
    releases = flats = 0
    f = phi(z)
    while it < maxiter:
        r = g - z @ B
        rn = float(np.abs(r) ** p @ m) ** (1.0 / p)
        if rn <= 1e-12 * gnorm:
            converged, res = True, 0.0
            break
        N = basis()
        free = ~active
        grad = -p * (B[:, free] @ (m[free] * signed_power(r[free], p - 1.0)))
        moved = False
        if N.shape[1]:
            Br = N.T @ B
            gr = N.T @ grad
            bn = (np.abs(Br) ** p @ m) ** (1.0 / p)
            denom = p * bn * rn ** (p - 1.0)
            res = float(np.max(np.abs(gr) / np.where(denom > 0, denom, 1.0)))
        else:
            res = 0.0
        if res > tol:
            it += 1
            w = m[free] * np.maximum(np.abs(r[free]), floor[free]) ** (p - 2.0)
            H = p * (p - 1.0) * (Br[:, free] * w) @ Br[:, free].T
            H += 1e-14 * max(np.trace(H), 1e-300) / H.shape[0] * np.eye(H.shape[0])
            try:
                sy = linalg.solve(H, -gr, assume_a="pos")
            except (linalg.LinAlgError, ValueError):
                sy = -gr
            if not np.all(np.isfinite(sy)) or gr @ sy >= 0:
                sy = -gr
            # Newton first; steepest descent when Newton is stuck at a kink
            for dy in (sy, -gr):
                d = N @ dy
                t, c = _line_min(r, d @ B, m, p)
                z_new = z + t * d
                v = pin(c) if c >= 0 else None
                if v is not None:
                    # land exactly on the kink without disturbing earlier pins
                    z_new = z_new + v * ((g[c] - z_new @ B[:, c]) / (v @ B[:, c]))
                f_new = phi(z_new)
                flat = f - f_new <= 1e-15 * f
                if f_new <= f * (1.0 + 1e-14) and (v is not None or not flat or flats < 3):
                    flats = flats + 1 if flat and v is None else 0
                    z, f = z_new, f_new
                    moved = True
                    break
                if v is not None:
                    active[c] = False
        if moved:
            continue
        # stationary, or no progress possible above rounding
        if not active.any():
            converged = True
            break
        # Zero residuals may outnumber the pins at a degenerate point. The
        # point is optimal if the free gradient is balanced by multipliers
        # on all zero cells whose implied residuals stay below 10 tau.
        zero = np.flatnonzero((np.abs(r) <= tau) & (colnorm > 0))
        cap = p * m[zero] * (10.0 * tau) ** (p - 1.0)
        fit = optimize.lsq_linear(B[:, zero], -grad, bounds=(-cap, cap), method="bvls")
        scale = p * (np.abs(B) ** p @ m) ** (1.0 / p) * rn ** (p - 1.0)
        if np.max(np.abs(fit.fun) / np.where(scale > 0, scale, 1.0)) <= max(tol, 1e-9):
            converged = True
            break
        # multipliers of the pins: grad + B_A mu = 0 with mu_c = p m_c r_c^<p-1>
        idx = np.flatnonzero(active)
        mu = linalg.lstsq(B[:, idx], -grad)[0]
        with np.errstate(divide="ignore"):
            lneed = (np.log(np.abs(mu)) - np.log(p * m[idx])) / (p - 1.0)
        bad = lneed > np.log(10.0 * tau)
        if not bad.any() or releases >= 4 * k:
            converged = not bad.any()
            break
        # release the most violated pin and let it settle at its need
        j = int(np.argmax(np.where(bad, lneed, -np.inf)))
        active[idx[j]] = False
        floor[idx[j]] = float(np.exp(min(lneed[j], 700.0)))
        releases += 1
    return z, {"iterations": it, "converged": bool(converged), "residual": res,
               "stalled": bool(converged and res > tol), "pinned": int(active.sum())}


def _affine(n, unbiased):
    """Parametrization ``lambda = lp + N z``; N spans the admissible directions."""
    if unbiased:
        e = np.ones((1, n))
        return np.full(n, 1.0 / n), linalg.null_space(e)
    return np.zeros(n), np.eye(n)


# -- LSL ---------------------------------------------------------------------


def _lsl_subgaussian(problem):
    C = problem.field.gram(problem.sites)
    c = problem.field.gram(problem.sites, problem.target[None, :])[:, 0]
    _check_cond(C)
    lam = linalg.solve(C, c, assume_a="pos")
    pts = np.vstack([problem.target, problem.sites])
    obj = problem.field.combination_scale(pts, np.concatenate([[1.0], -lam]))
    return ExtrapSolution(lam, "lsl", obj, {"iterations": 0, "converged": True})


def _lp_weights(problem, p, z0=None, unbiased=False, tol=1e-8):
    F, g, m, _ = _integral_parts(problem)
    lp, N = _affine(problem.n, unbiased)
    B = N.T @ F
    gp = g - lp @ F
    if z0 is None:
        z0 = _weighted_ls(B, gp, m)
    z, info = _lp_fit(B, gp, m, p, z0, tol=tol)
    lam = lp + N @ z
    return lam, z, info, (F, g, m)


def lsl_solve(problem: ExtrapProblem, tol=1e-8, start=None) -> ExtrapSolution:
    """Least scale linear predictor.

    For integral fields this minimizes ``|f_t - sum lambda_i f_{t_i}|_alpha``
    by Newton steps with exact line search, started from ``start`` or from
    the alpha = 2 solution, and needs alpha in (1, 2]. For sub-Gaussian
    fields any alpha is accepted and the weights are those of simple
    kriging of the Gaussian part.
    """
    if isinstance(problem.field, SubGaussianField):
        return _lsl_subgaussian(problem)
    _require_integral(problem, "lsl")
    a = problem.alpha
    if not (1.0 < a <= 2.0):
        raise InvalidAlpha("lsl needs alpha in (1, 2]; use best-lsl or iclsl otherwise")
    _check_independent(problem)
    z0 = None if start is None else np.asarray(start, dtype=float)
    lam, _, info, (F, g, m) = _lp_weights(problem, a, z0=z0, tol=tol)
    if not info["converged"]:
        raise NonConvergence(f"lsl stopped with first-order residual {info['residual']:.3g}", lam)
    obj = float((np.abs(g - lam @ F) ** a @ m) ** (1.0 / a))
    return ExtrapSolution(lam, "lsl", obj, info)


# -- COL ---------------------------------------------------------------------


def _check_cond(K):
    sv = np.linalg.svd(K, compute_uv=False)
    if sv[-1] == 0 or sv[0] / sv[-1] > COND_LIMIT:
        raise SingularSystem("system matrix is singular or ill-conditioned")


def _covariation_matrix(problem):
    """``K[i, j] = kappa(t_i, t_j)`` and ``zeta_i = kappa(t_i, t)``, ``rhs_j = kappa(t, t_j)``."""
    fld = problem.field
    a = problem.alpha
    S, t = problem.sites, problem.target
    if isinstance(fld, IntegralField):
        F, g, m, _ = _integral_parts(problem)
        G = signed_power(F, a - 1.0)
        K = (F * m) @ G.T
        zeta = (F * m) @ signed_power(g, a - 1.0)
        rhs = G @ (m * g)
        return K, zeta, rhs
    if isinstance(fld, SubGaussianField):
        C = fld.model.gram(S)
        diag = np.diag(C)
        ct = fld.model.gram(S, t[None, :])[:, 0]
        ctt = float(fld.model(t, t))
        c = 2.0 ** (-a / 2.0)
        K = c * C * diag[None, :] ** ((a - 2.0) / 2.0)
        zeta = c * ct * ctt ** ((a - 2.0) / 2.0)
        rhs = c * ct * diag ** ((a - 2.0) / 2.0)
        return K, zeta, rhs
    n = S.shape[0]
    K = np.array([[fld.covariation(S[i], S[j]) for j in range(n)] for i in range(n)])
    zeta = np.array([fld.covariation(S[i], t) for i in range(n)])
    rhs = np.array([fld.covariation(t, S[j]) for j in range(n)])
    return K, zeta, rhs


def col_solve(problem: ExtrapProblem) -> ExtrapSolution:
    """Covariation orthogonal predictor: ``[X(t_j), X(t) - X_hat(t)]`` vanish.

    Solves ``sum_i lambda_i kappa(t_i, t_j) = kappa(t, t_j)``.
    """
    if not (1.0 < problem.alpha <= 2.0):
        raise InvalidAlpha("col needs alpha in (1, 2]")
    K, _, rhs = _covariation_matrix(problem)
    M = K.T  # row j: kappa(t_i, t_j) over i
    _check_cond(M)
    lam = linalg.solve(M, rhs)
    resid = float(np.abs(M @ lam - rhs).max())
    return ExtrapSolution(lam, "col", _error_scale(problem, lam), {"residual": resid})


def _error_scale(problem, lam):
    fld = problem.field
    if isinstance(fld, IntegralField):
        F, g, m, _ = _integral_parts(problem)
        return float((np.abs(g - lam @ F) ** fld.alpha @ m) ** (1.0 / fld.alpha))
    if isinstance(fld, SubGaussianField):
        pts = np.vstack([problem.target, problem.sites])
        return fld.combination_scale(pts, np.concatenate([[1.0], -lam]))
    return float("nan")


# -- MCL ---------------------------------------------------------------------


def mcl_solve(problem: ExtrapProblem, tol=1e-10) -> ExtrapSolution:
    """Maximal covariation linear predictor.

    Maximizes ``sum lambda_i kappa(t_i, t)`` among predictors with the same
    scale as ``X(t)``. Because scale balls are homothetic, it first minimizes
    the predictor scale on ``<lambda, zeta> = 1`` and then rescales.
    """
    a = problem.alpha
    if not (1.0 < a <= 2.0):
        raise InvalidAlpha("mcl needs alpha in (1, 2]")
    fld = problem.field
    n = problem.n
    if isinstance(fld, IntegralField):
        _check_independent(problem)
        F, g, m, _ = _integral_parts(problem)
        zeta = (F * m) @ signed_power(g, a - 1.0)
        sig_t = float((np.abs(g) ** a @ m) ** (1.0 / a))
        sig_i = (np.abs(F) ** a @ m) ** (1.0 / a)
    elif isinstance(fld, SubGaussianField):
        C = fld.model.gram(problem.sites)
        _check_cond(C)
        _, zeta, _ = _covariation_matrix(problem)
        sig_t = float(np.sqrt(0.5 * fld.model(problem.target, problem.target)))
        sig_i = np.sqrt(0.5 * np.diag(C))
    else:
        raise TypeError("mcl needs an integral or sub-Gaussian field")
    if np.all(np.abs(zeta) <= 1e-12 * sig_i * sig_t ** (a - 1.0)):
        raise ZeroCovariationVector("all covariations with the target vanish")

    lp = zeta / (zeta @ zeta)
    N = linalg.null_space(zeta[None, :]) if n > 1 else np.zeros((1, 0))
    info = {"iterations": 0, "converged": True}
    if isinstance(fld, IntegralField):
        # residual g - B^T z equals -(y @ F) for y = lp + N z
        B = N.T @ F
        gp = -(lp @ F)
        z0 = _weighted_ls(B, gp, m) if N.shape[1] else np.zeros(0)
        z, info = _lp_fit(B, gp, m, a, z0, tol=tol)
        y = lp + N @ z
        psi = float((np.abs(y @ F) ** a @ m) ** (1.0 / a))
        lam = sig_t * y / psi
        s = lam @ F
        cov = (F * m) @ signed_power(s, a - 1.0)
        scale_hat = float((np.abs(s) ** a @ m) ** (1.0 / a))
    else:
        if N.shape[1]:
            A = N.T @ C @ N
            z = -linalg.solve(A, N.T @ C @ lp, assume_a="pos")
        else:
            z = np.zeros(0)
        y = lp + N @ z
        psi = float(np.sqrt(0.5 * y @ C @ y))
        lam = sig_t * y / psi
        q = lam @ C @ lam
        cov = 2.0 ** (-a / 2.0) * (C @ lam) * q ** ((a - 2.0) / 2.0)
        scale_hat = float(np.sqrt(0.5 * q))
    gamma = -float(zeta @ cov) / (a * float(cov @ cov))
    kkt = float(np.linalg.norm(zeta + gamma * a * cov) / np.linalg.norm(zeta))
    info = dict(info, kkt_residual=kkt, multiplier=gamma, scale_ratio=scale_hat / sig_t)
    return ExtrapSolution(lam, "mcl", float(lam @ zeta), info)


# -- best LSL ----------------------------------------------------------------


@dataclass
class AnnealingConfig:
    """Settings of the multi-start search for the global minima set.

    ``proposals`` Metropolis proposals per start are spread over 100
    temperature levels with geometric ``cooling``. Each start is then
    polished by majorize-minimize steps solved as weighted L1 programs.
    """

    starts: int = 32
    proposals: int = 20_000
    cooling: float = 0.95
    seed: int = 0
    tol_obj: float = 1e-6
    tol_weight: float = 1e-3
    polish_iter: int = 30
    min_hits: int = 1
    jobs: int = 1


def _site_order(sites, target):
    d = np.linalg.norm(sites - target, axis=1)
    d = np.round(d, 12)
    keys = [sites[:, k] for k in range(sites.shape[1] - 1, -1, -1)] + [d]
    return np.lexsort(keys)


def _l1_program(B, g, w, cz=None, bound=None, ge=None):
    """Linear program over ``(z, u)`` with ``|g - B^T z| <= u``.

    Without ``cz`` it minimizes ``w . u``. With ``cz`` it minimizes
    ``cz . z`` subject to ``w . u <= bound``. ``ge`` is an optional pair
    ``(A, b)`` of constraints ``A z >= b``.
    """
    k, N = B.shape
    I = sparse.identity(N, format="csr")
    Bt = sparse.csr_matrix(B.T)
    A_ub = sparse.vstack([sparse.hstack([Bt, -I]), sparse.hstack([-Bt, -I])]).tocsr()
    b_ub = np.concatenate([g, -g])
    if cz is None:
        c = np.concatenate([np.zeros(k), w])
    else:
        c = np.concatenate([cz, np.zeros(N)])
        A_ub = sparse.vstack([A_ub, sparse.csr_matrix(np.concatenate([np.zeros(k), w])[None, :])])
        b_ub = np.concatenate([b_ub, [bound]])
    if ge is not None and ge[0].shape[0]:
        A_ge = sparse.hstack([sparse.csr_matrix(-ge[0]), sparse.csr_matrix((ge[0].shape[0], N))])
        A_ub = sparse.vstack([A_ub, A_ge]).tocsr()
        b_ub = np.concatenate([b_ub, -np.asarray(ge[1], dtype=float)])
    bounds = [(None, None)] * k + [(0, None)] * N
    opts = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
    res = optimize.linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs", options=opts)
    if res.status != 0:
        raise NonConvergence(f"linear program failed: {res.message}")
    return res.x[:k]


def _polish(B, g, m, alpha, z, iters):
    """Majorize-minimize descent for ``sum m |r|^alpha`` with alpha < 1."""
    eps = 1e-9 * max(np.abs(g).max(), 1e-300)

    def phi(zz):
        return float(np.abs(g - zz @ B) ** alpha @ m)

    f = phi(z)
    for _ in range(iters):
        w = m * (np.abs(g - z @ B) + eps) ** (alpha - 1.0)
        zn = _l1_program(B, g, w)
        fn = phi(zn)
        if fn >= f - 1e-14 * (1.0 + f):
            if fn < f:
                z, f = zn, fn
            break
        z, f = zn, fn
    return z, f


def _anneal(B, g, m, alpha, z_starts, cfg, rng):
    phi = lambda Z: (np.abs(g - Z @ B) ** alpha) @ m
    Z = np.array(z_starts, dtype=float)
    S, k = Z.shape
    f = phi(Z)
    best_Z, best_f = Z.copy(), f.copy()
    if k == 0 or cfg.proposals <= 0:
        return best_Z, best_f
    levels = 100
    per_level = max(cfg.proposals // levels, 1)
    T0 = 0.1 * max(float(np.median(f)), 1e-300)
    step0 = 0.5 * (1.0 + float(np.abs(Z).max()))
    T = T0
    for _ in range(levels):
        step = step0 * np.sqrt(T / T0)
        for _ in range(per_level):
            cand = Z + rng.normal(0.0, step / np.sqrt(k), (S, k))
            fc = phi(cand)
            accept = (fc <= f) | (rng.random(S) < np.exp(-(fc - f) / T))
            Z[accept], f[accept] = cand[accept], fc[accept]
            better = f < best_f
            best_Z[better], best_f[better] = Z[better], f[better]
        T *= cfg.cooling
    return best_Z, best_f


def _cluster(cands, objs, cfg):
    """Representatives of the near-optimal candidates, lowest objective first."""
    order = np.argsort(objs, kind="stable")
    best = objs[order[0]]
    cut = best + cfg.tol_obj * (1.0 + abs(best))
    reps, hits = [], 0
    for i in order:
        if objs[i] > cut:
            break
        hits += 1
        if all(np.abs(cands[i] - cands[j]).max() > cfg.tol_weight for j in reps):
            reps.append(i)
    return reps, hits


def best_lsl_solve(problem: ExtrapProblem, config: AnnealingConfig | None = None, unbiased=False) -> ExtrapSolution:
    """Best least scale linear predictor for alpha in (0, 1].

    Sites are ordered by distance to the target (ties broken
    lexicographically). Among global minimizers of the error scale it keeps
    those maximizing the weight of the nearest site, then of the next one,
    and so on. At alpha = 1 the minimizer set is a polytope handled exactly
    by linear programming; below 1 it is approximated by annealing.
    ``unbiased`` adds the constraint ``sum lambda = 1``.
    """
    _require_integral(problem, "best-lsl")
    a = problem.alpha
    if not (0.0 < a <= 1.0):
        raise InvalidAlpha("best-lsl needs alpha in (0, 1]")
    cfg = config or AnnealingConfig()
    _check_independent(problem)
    F, g, m, _ = _integral_parts(problem)
    n = problem.n
    order = _site_order(problem.sites, problem.target)
    lp, N = _affine(n, unbiased)
    B = N.T @ F
    gp = g - lp @ F
    diag = {}

    if a == 1.0:
        z = _l1_program(B, gp, m)
        v = float(np.abs(gp - z @ B) @ m)
        bound = v + 1e-9 * (1.0 + v)
        fixed_rows, fixed_vals = [], []
        for j in order:
            # maximize lambda_j = lp_j + N_j . z, keeping earlier maxima up
            # to a slack that absorbs the solver's feasibility tolerance
            A = np.array(fixed_rows).reshape(-1, N.shape[1])
            z = _l1_program(B, gp, m, cz=-N[j], bound=bound, ge=(A, np.array(fixed_vals)))
            top = float(N[j] @ z)
            fixed_rows.append(N[j])
            fixed_vals.append(top - 1e-9 * (1.0 + abs(top)))
        lam = lp + N @ z
        diag.update(minimum=v)
    else:
        rng = make_rng(cfg.seed)
        k = N.shape[1]
        z_ls = _weighted_ls(B, gp, m)
        det = [z_ls, np.zeros(k)]
        pinvN = np.linalg.pinv(N)
        for i in range(n):
            det.append(pinvN @ (np.eye(n)[i] - lp))
        rand = z_ls + rng.normal(0.0, 1.0, (cfg.starts, k))
        starts = np.vstack([np.array(det), rand])
        Z, _ = _anneal(B, gp, m, a, starts, cfg, rng)
        if cfg.jobs > 1:
            with ThreadPoolExecutor(cfg.jobs) as ex:
                pol = list(ex.map(lambda zz: _polish(B, gp, m, a, zz, cfg.polish_iter), Z))
        else:
            pol = [_polish(B, gp, m, a, zz, cfg.polish_iter) for zz in Z]
        cand = np.array([lp + N @ p[0] for p in pol])
        objs = np.array([p[1] for p in pol])
        if not np.all(np.isfinite(objs)):
            raise NonConvergence("annealing produced non-finite objectives")
        reps, hits = _cluster(cand, objs, cfg)
        if hits < cfg.min_hits:
            raise NonConvergence("minimum set reached by too few starts", cand[reps[0]])
        pool = cand[reps]
        for j in order:
            top = pool[:, j].max()
            pool = pool[pool[:, j] >= top - 1e-7 * (1.0 + abs(top))]
            if pool.shape[0] == 1:
                break
        lam = pool[0]
        diag.update(minimum=float(objs.min()), minima=cand[reps], hits=hits)
    obj = float((np.abs(g - lam @ F) ** a @ m) ** (1.0 / a))
    diag["order"] = order
    return ExtrapSolution(lam, "best-lsl", obj, diag)


# -- ICLSL -------------------------------------------------------------------


def iclsl_solve(problem: ExtrapProblem, max_k=40, tol=1e-6, settle=3) -> ExtrapSolution:
    """Limit of least scale weights with index ``1 + 2^-k`` as ``k`` grows (alpha = 1).

    Each index is warm-started from the previous one. The sequence stops
    once ``settle`` consecutive weight changes fall below ``tol`` (sup norm);
    the changes are reported in ``diagnostics["steps"]``. Minimizers of the
    discretized problems can sit on one vertex for several indices and then
    jump, so ``diagnostics["monotone_tail"]`` records whether the last five
    changes were non-increasing, and a warning is issued when they were not.
    """
    _require_integral(problem, "iclsl")
    if problem.alpha != 1.0:
        raise InvalidAlpha("iclsl needs alpha = 1")
    _check_independent(problem)
    F, g, m, _ = _integral_parts(problem)
    z = _weighted_ls(F, g, m)
    prev = None
    steps = []
    for k in range(1, max_k + 1):
        z, _ = _lp_fit(F, g, m, 1.0 + 2.0**-k, z, tol=1e-10)
        if prev is not None:
            steps.append(float(np.abs(z - prev).max()))
            if len(steps) >= settle and max(steps[-settle:]) < tol:
                tail = np.diff(steps[-5:])
                monotone = bool(np.all(tail <= 1e-12))
                if not monotone:
                    warnings.warn("iclsl weight changes were not monotone near the limit",
                                  RuntimeWarning, stacklevel=2)
                obj = float(np.abs(g - z @ F) @ m)
                diag = {"iterations": k, "converged": True, "steps": steps, "monotone_tail": monotone}
                return ExtrapSolution(z, "iclsl", obj, diag)
        prev = z.copy()
    raise NonConvergence("index-continuous weights did not settle", z)


# -- dispatch ----------------------------------------------------------------


def solve(problem: ExtrapProblem, method: str, config: AnnealingConfig | None = None, unbiased=False):
    if method == "lsl":
        return lsl_solve(problem)
    if method == "col":
        return col_solve(problem)
    if method == "mcl":
        return mcl_solve(problem)
    if method == "best-lsl":
        return best_lsl_solve(problem, config, unbiased)
    if method == "iclsl":
        return iclsl_solve(problem)
    raise ValueError(f"unknown method {method!r}")


# -- covariation estimation ----------------------------------------------------


@dataclass
class MixedMomentEstimate:
    value: float
    stderr: float

    def __float__(self):
        return self.value


def covariation_mixed_moment_estimate(x1, x2, alpha, p, sigma2) -> MixedMomentEstimate:
    """Estimate ``[X1, X2]_alpha`` from paired samples via mixed moments.

    Uses ``sigma2^alpha * mean(X1 X2^<p-1>) / mean(|X2|^p)`` where ``sigma2``
    is the scale of the symmetric variable ``X2``. The standard error comes
    from the delta method for a ratio of means.
    """
    if not (1.0 <= p < alpha):
        raise InvalidMomentOrder(f"p={p} must satisfy 1 <= p < alpha={alpha}")
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x1.shape != x2.shape:
        raise DimensionMismatch("samples must be paired")
    a = x1 * signed_power(x2, p - 1.0)
    b = np.abs(x2) ** p
    ma, mb = a.mean(), b.mean()
    R = ma / mb
    n = a.size
    cv = np.cov(a, b)
    var_r = (cv[0, 0] - 2.0 * R * cv[0, 1] + R * R * cv[1, 1]) / (mb * mb * n)
    k = sigma2**alpha
    return MixedMomentEstimate(float(k * R), float(k * np.sqrt(max(var_r, 0.0))))


# -- error report ------------------------------------------------------------


@dataclass
class ErrorReport:
    probes: np.ndarray
    values: np.ndarray

    @property
    def sup_scale(self):
        return float(self.values.max()) if self.values.size else 0.0


def error_report(field, sites, probes, method="lsl", p=1.0, config=None, n_mc=10_000_000) -> ErrorReport:
    """Moment-scale prediction error over ``probes``.

    The value at a probe ``t`` is ``c_alpha(p) * |f_t - sum lambda_i(t) f_{t_i}|_alpha``
    where ``c_alpha(p) = (E|xi|^p)^(1/p)`` for a standard stable ``xi`` with
    the error's skewness, so that it equals ``(E|X_hat(t) - X(t)|^p)^(1/p)``.
    """
    a = field.alpha
    if not (0.0 < p < a):
        raise InvalidMomentOrder(f"p must lie in (0, alpha={a})")
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    vals = np.empty(probes.shape[0])
    for k, t in enumerate(probes):
        prob = ExtrapProblem(field, sites, t)
        lam = solve(prob, method, config).weights
        gvec = field.kernel(t) - lam @ field.kernel_matrix(prob.sites)
        scale = lalpha_norm(gvec, field.space, a)
        if scale == 0.0:
            vals[k] = 0.0
            continue
        beta = combo_skewness(field, gvec)
        vals[k] = moment_constant(a, beta, p, n=n_mc).value * scale
    return ErrorReport(probes, vals)


# -- estimator ---------------------------------------------------------------


class StablePredictor(RegressorMixin, BaseEstimator):
    """Linear predictor for stable fields with a scikit-learn interface.

    Parameters
    ----------
    field : IntegralField, SubGaussianField or CovariationFunction
    method : {"lsl", "col", "mcl", "best-lsl", "iclsl"}
    config : AnnealingConfig, optional
        Used by ``best-lsl``.
    unbiased : bool, default=False
        Restrict ``best-lsl`` weights to sum to one.
    n_jobs : int, default=1
        Targets are solved independently; results keep input order.
    """

    def __init__(self, field=None, method="lsl", config=None, unbiased=False, n_jobs=1):
        self.field = field
        self.method = method
        self.config = config
        self.unbiased = unbiased
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.field is None:
            raise ValueError("a field is required")
        ExtrapProblem(self.field, X, X[0])
        self.sites_ = X
        self.values_ = y
        self.n_features_in_ = X.shape[1]
        return self

    def _weights_one(self, t):
        prob = ExtrapProblem(self.field, self.sites_, t)
        return solve(prob, self.method, self.config, self.unbiased).weights

    def weights(self, X):
        check_is_fitted(self, "sites_")
        X = check_array(X)
        if self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as ex:
                rows = list(ex.map(self._weights_one, X))
        else:
            rows = [self._weights_one(t) for t in X]
        return np.array(rows).reshape(X.shape[0], self.sites_.shape[0])

    def predict(self, X):
        return self.weights(X) @ self.values_
