"""Config-driven experiment runner.

A run simulates a field on a grid, observes it at a list of sites,
optionally estimates and fits a variogram, and predicts the grid with one
or more linear predictors. Every numeric CSV is reproducible bit for bit
from the config and seed; timings only go to ``summary.json``.

Example config::

    [experiment]
    seed = 7
    methods = lsl, col, mcl

    [field]
    type = sub-gaussian
    alpha = 1.2

    [model]
    family = whittle-matern
    a = 2
    b = 1
    nu = 1

    [grid]
    lower = 0, 0
    upper = 1, 1
    counts = 50, 50

    [sites]
    axes = 0, 0.3, 0.6, 0.9
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .covariance import CovModel, VarioModel, model_to_text
from .exceptions import ConfigError, StableFieldError
from .extrapolation import (
    AnnealingConfig,
    ExtrapProblem,
    SubGaussianField,
    solve,
)
from .kriging import Observations, fit_variogram, matheron_estimate, ordinary_krige, simple_krige
from .measure import IntegralField, MeasureSpace, make_kernel, sample_field
from .simulate import MAX_SITES, GridField, GridSpec, gaussian_sim, shot_noise_sim, subgaussian_sim

__all__ = ["ExperimentConfig", "run", "main", "EXIT_OK", "EXIT_CONFIG", "EXIT_SOLVER"]

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
FIELD_TYPES = ("gaussian", "sub-gaussian", "integral", "shot-noise")
KRIGING = ("simple-krige", "ordinary-krige")
STABLE = ("lsl", "col", "mcl", "best-lsl", "iclsl")
ALL_METHODS = KRIGING + STABLE


# -- config ------------------------------------------------------------------


class _Source:
    """Parsed INI file that remembers where each key was written."""

    def __init__(self, text, name):
        self.name = name
        self.parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        try:
            self.parser.read_string(text, source=name)
        except configparser.Error as exc:
            raise ConfigError(f"{name}: {exc}") from None
        self.lines = {}
        section = None
        for no, raw in enumerate(text.splitlines(), 1):
            s = raw.strip()
            if s.startswith("[") and s.endswith("]"):
                section = s[1:-1].strip()
            elif section and s and s[0] not in "#;" and ("=" in s or ":" in s):
                key = s.replace(":", "=", 1).split("=", 1)[0].strip().lower()
                self.lines[(section, key)] = no

    def where(self, section, key=None):
        if key is None:
            return f"{self.name}: [{section}]"
        line = self.lines.get((section, key))
        at = f" line {line}" if line else ""
        return f"{self.name}:{at} [{section}] {key}"

    def error(self, section, key, msg):
        return ConfigError(f"{self.where(section, key)}: {msg}")

    def has(self, section, key=None):
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def raw(self, section, key, default=None, required=False):
        if self.has(section, key):
            return self.parser.get(section, key)
        if required:
            where = f"{self.name}: [{section}]"
            raise ConfigError(f"{where} {key}: missing required key")
        return default

    def float(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            raise self.error(section, key, f"expected a number, got {v!r}") from None

    def int(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            raise self.error(section, key, f"expected an integer, got {v!r}") from None

    def bool(self, section, key, default=False):
        if not self.has(section, key):
            return default
        try:
            return self.parser.getboolean(section, key)
        except ValueError:
            raise self.error(section, key, "expected true or false") from None

    def floats(self, section, key, default=None, required=False):
        v = self.raw(section, key, None, required)
        if v is None:
            return default
        try:
            return [float(x) for x in v.replace(",", " ").split()]
        except ValueError:
            raise self.error(section, key, f"expected a list of numbers, got {v!r}") from None

    def words(self, section, key, default=()):
        v = self.raw(section, key, None)
        if v is None:
            return list(default)
        return [w.strip().lower() for w in v.split(",") if w.strip()]

    def params(self, section, skip=()):
        out = {}
        if not self.has(section):
            return out
        for key in self.parser.options(section):
            if key not in skip:
                out[key] = self.float(section, key)
        return out


@dataclass
class ExperimentConfig:
    """Validated experiment settings.

    Build one with :meth:`from_file` or :meth:`from_text`; the ``field`` and
    model objects are constructed eagerly so that configuration mistakes
    surface before any work starts.
    """

    seed: int
    field_type: str
    alpha: float
    grid: GridSpec
    sites: np.ndarray
    methods: list
    out: Path
    model: CovModel | None = None
    stable_field: IntegralField | None = None
    shot: dict | None = None
    annealing: AnnealingConfig = field(default_factory=AnnealingConfig)
    unbiased: bool = False
    variogram: dict | None = None
    source: str = "<config>"

    @classmethod
    def from_file(cls, path, seed=None, methods=None, out=None):
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
        return cls.from_text(text, str(path), seed=seed, methods=methods, out=out)

    @classmethod
    def from_text(cls, text, name="<config>", seed=None, methods=None, out=None):
        src = _Source(text, name)
        for sec in ("experiment", "field", "grid", "sites"):
            if not src.has(sec):
                raise ConfigError(f"{name}: missing section [{sec}]")
        if seed is None:
            seed = src.int("experiment", "seed", required=True)
        if seed < 0:
            raise src.error("experiment", "seed", "seed must be nonnegative")
        grid = _grid(src)
        d = grid.dim
        sites = _sites(src, d)
        ftype = (src.raw("field", "type", required=True) or "").strip().lower()
        if ftype not in FIELD_TYPES:
            raise src.error("field", "type", f"unknown field type {ftype!r}; choose from {', '.join(FIELD_TYPES)}")
        alpha = 2.0 if ftype == "gaussian" else src.float("field", "alpha", None)
        if ftype in ("sub-gaussian", "integral"):
            if alpha is None:
                raise src.error("field", "alpha", "missing required key")
            hi_ok = alpha < 2.0 if ftype == "sub-gaussian" else alpha <= 2.0
            if not (0.0 < alpha and hi_ok):
                raise src.error("field", "alpha", f"alpha={alpha!r} is out of range")
        cfg = cls(
            seed=int(seed),
            field_type=ftype,
            alpha=alpha if alpha is not None else float("nan"),
            grid=grid,
            sites=sites,
            methods=[],
            out=Path(out if out is not None else src.raw("experiment", "out", "out")),
            source=name,
        )
        if src.has("model"):
            cfg.model = _model(src, d)
        if ftype in ("gaussian", "sub-gaussian") and cfg.model is None:
            raise ConfigError(f"{name}: [{ftype}] fields need a [model] section")
        if ftype == "integral":
            cfg.stable_field = _integral_field(src, d, alpha)
        if ftype == "shot-noise":
            cfg.shot = _shot(src, grid)
        cfg.annealing, cfg.unbiased = _annealing(src, cfg.seed)
        cfg.variogram = _variogram(src)
        if methods is None:
            methods = src.words("experiment", "methods")
        cfg.methods = list(methods)
        for m in cfg.methods:
            problem = cfg.method_problem(m)
            if problem:
                key = "methods" if src.has("experiment", "methods") else None
                if key:
                    raise src.error("experiment", key, f"{m}: {problem}")
                raise ConfigError(f"{name}: {m}: {problem}")
        return cfg

    def method_problem(self, m):
        """Reason why ``m`` cannot run on this field, or None."""
        if m not in ALL_METHODS:
            return f"unknown method; choose from {', '.join(ALL_METHODS)}"
        fitted = bool(self.variogram and self.variogram.get("fit"))
        if m in KRIGING:
            if self.model is None and not fitted:
                return "method requires a covariance model or a variogram fit"
            return None
        if self.field_type == "shot-noise":
            return "method requires a stable field"
        a = self.alpha
        if m == "lsl":
            if self.field_type == "integral" and not a > 1.0:
                return "method requires alpha>1"
        elif m in ("col", "mcl"):
            if not a > 1.0:
                return "method requires alpha>1"
        elif m in ("best-lsl", "iclsl"):
            if self.field_type != "integral":
                return "method requires an integral field"
            if m == "best-lsl" and not a <= 1.0:
                return "method requires alpha<=1"
            if m == "iclsl" and a != 1.0:
                return "method requires alpha=1"
        return None


def _grid(src):
    counts = src.floats("grid", "counts", required=True)
    if any(c != int(c) or c < 1 for c in counts):
        raise src.error("grid", "counts", "counts must be positive integers")
    counts = [int(c) for c in counts]
    d = len(counts)
    lower = src.floats("grid", "lower", None) or src.floats("grid", "origin", None)
    if lower is None:
        raise ConfigError(f"{src.where('grid')} lower: missing required key")
    if len(lower) != d:
        raise src.error("grid", "lower" if src.has("grid", "lower") else "origin", f"expected {d} values")
    if src.has("grid", "upper"):
        upper = src.floats("grid", "upper")
        if len(upper) != d or any(u <= lo for u, lo in zip(upper, lower)):
            raise src.error("grid", "upper", f"expected {d} values above lower")
        spacing = [(u - lo) / max(n - 1, 1) for u, lo, n in zip(upper, lower, counts)]
    else:
        spacing = src.floats("grid", "spacing", required=True)
        if len(spacing) != d or any(h <= 0 for h in spacing):
            raise src.error("grid", "spacing", f"expected {d} positive values")
    return GridSpec(tuple(lower), tuple(spacing), tuple(counts))


def _sites(src, d):
    if src.has("sites", "points"):
        rows = [r for r in src.raw("sites", "points").replace("\n", ";").split(";") if r.strip()]
        try:
            pts = np.array([[float(x) for x in r.replace(",", " ").split()] for r in rows])
        except ValueError:
            raise src.error("sites", "points", "expected rows of numbers separated by ';'") from None
        key = "points"
    elif src.has("sites", "axes"):
        ax = src.floats("sites", "axes")
        mesh = np.meshgrid(*([np.array(ax)] * d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        key = "axes"
    else:
        raise ConfigError(f"{src.where('sites')}: give points or axes")
    if pts.ndim != 2 or pts.shape[1] != d or pts.shape[0] == 0:
        raise src.error("sites", key, f"sites must be {d}-dimensional")
    if pts.shape[0] > 1 and cKDTree(pts).query_pairs(1e-12):
        raise src.error("sites", key, "observation sites are not distinct")
    return pts


def _model(src, d):
    fam = src.raw("model", "family", required=True).strip().lower()
    params = src.params("model", skip=("family",))
    try:
        return CovModel(fam, params, d)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{src.where('model')}: {exc}") from None


def _kernel(src, section):
    name = src.raw(section, "name", required=True).strip().lower()
    if name == "tabulated":
        return make_kernel(name, path=src.raw(section, "path", required=True))
    try:
        return make_kernel(name, **src.params(section, skip=("name",)))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{src.where(section)}: {exc}") from None


def _integral_field(src, d, alpha):
    if not src.has("kernel") or not src.has("measure"):
        raise ConfigError(f"{src.name}: integral fields need [kernel] and [measure] sections")
    kern = _kernel(src, "kernel")
    lower = src.floats("measure", "lower", required=True)
    upper = src.floats("measure", "upper", required=True)
    cells = src.floats("measure", "cells", None)
    density = src.float("measure", "density", 1.0)
    try:
        space = MeasureSpace.grid(lower, upper, None if cells is None else [int(c) for c in cells], density)
    except ValueError as exc:
        raise ConfigError(f"{src.where('measure')}: {exc}") from None
    skew = src.float("field", "skewness", 0.0)
    if abs(skew) > 1.0:
        raise src.error("field", "skewness", "skewness must lie in [-1, 1]")
    return IntegralField(kern, space, alpha, skew)


def _shot(src, grid):
    if not src.has("kernel"):
        raise ConfigError(f"{src.name}: shot-noise fields need a [kernel] section")
    rate = src.float("field", "intensity", required=True)
    if rate <= 0:
        raise src.error("field", "intensity", "intensity must be positive")
    lo = np.array(grid.origin)
    hi = lo + np.array(grid.spacing) * (np.array(grid.counts) - 1)
    lo = src.floats("field", "window_lower", lo.tolist())
    hi = src.floats("field", "window_upper", hi.tolist())
    return {"intensity": rate, "kernel": _kernel(src, "kernel"), "window": (lo, hi)}


def _annealing(src, seed):
    s = "solver"
    cfg = AnnealingConfig(
        starts=src.int(s, "starts", 32),
        proposals=src.int(s, "proposals", 20_000),
        cooling=src.float(s, "cooling", 0.95),
        seed=src.int(s, "seed", seed),
        tol_obj=src.float(s, "tol_obj", 1e-6),
        tol_weight=src.float(s, "tol_weight", 1e-3),
        polish_iter=src.int(s, "polish_iter", 30),
    )
    if cfg.starts < 1:
        raise src.error(s, "starts", "need at least one start")
    if not 0.0 < cfg.cooling < 1.0:
        raise src.error(s, "cooling", "cooling must lie in (0, 1)")
    return cfg, src.bool(s, "unbiased", False)


def _variogram(src):
    s = "variogram"
    if not src.has(s):
        return None
    dirs = src.words(s, "directions", ["all"])
    for dname in dirs:
        if dname not in ("all", "x", "y", "z"):
            raise src.error(s, "directions", f"unknown direction {dname!r}")
    out = {
        "max_lag": src.float(s, "max_lag", None),
        "n_bins": src.int(s, "n_bins", 15),
        "directions": dirs,
        "angle_tol": src.float(s, "angle_tol", 22.5),
        "fit": src.bool(s, "fit", False),
        "family": (src.raw(s, "family", "whittle-matern") or "").strip().lower(),
        "init": {k[5:]: src.float(s, k) for k in src.parser.options(s) if k.startswith("init.")},
        "fixed": {k[6:]: src.float(s, k) for k in src.parser.options(s) if k.startswith("fixed.")},
    }
    if out["n_bins"] < 1:
        raise src.error(s, "n_bins", "need at least one bin")
    return out


# -- pipeline ------------------------------------------------------------------


def _merge_sites(grid_sites, obs_sites):
    """Simulation points: grid nodes followed by off-grid observation sites."""
    dist, idx = cKDTree(grid_sites).query(obs_sites)
    on = dist <= 1e-9 * max(1.0, float(np.abs(grid_sites).max()))
    extra = obs_sites[~on]
    pts = np.vstack([grid_sites, extra])
    where = np.where(on, idx, 0)
    where[~on] = grid_sites.shape[0] + np.arange(extra.shape[0])
    return pts, where


def simulate_stage(cfg: ExperimentConfig):
    """Realization on the grid and the observed values at the sites."""
    gsites = cfg.grid.sites()
    pts, where = _merge_sites(gsites, cfg.sites)
    if cfg.field_type in ("gaussian", "sub-gaussian") and pts.shape[0] > MAX_SITES:
        raise ConfigError(f"{cfg.source}: [grid] {pts.shape[0]} simulation sites exceed the limit of {MAX_SITES}")
    if cfg.field_type == "gaussian":
        vals = gaussian_sim(cfg.model, pts, cfg.seed).values
    elif cfg.field_type == "sub-gaussian":
        vals = subgaussian_sim(cfg.model, cfg.alpha, pts, cfg.seed).values
    elif cfg.field_type == "integral":
        vals = sample_field(cfg.stable_field, pts, cfg.seed)
    else:
        sh = cfg.shot
        vals = shot_noise_sim(sh["intensity"], sh["kernel"], sh["window"], pts, cfg.seed).values
    n = gsites.shape[0]
    real = GridField(gsites, vals[:n], cfg.seed, cfg.grid, {"kind": cfg.field_type})
    return real, Observations(cfg.sites, vals[where])


def variogram_stage(cfg, real: GridField):
    vc = cfg.variogram or {"max_lag": None, "n_bins": 15, "directions": ["all"], "angle_tol": 22.5}
    return [
        matheron_estimate(real, max_lag=vc["max_lag"], n_bins=vc["n_bins"], direction=dn, angle_tol=vc["angle_tol"])
        for dn in vc["directions"]
    ]


def fit_stage(cfg, tables):
    vc = cfg.variogram or {}
    table = next((t for t in tables if t.direction_label == "all"), tables[0])
    kw = {"family": vc.get("family", "whittle-matern"), "dim": cfg.grid.dim, "seed": cfg.seed}
    if vc.get("init"):
        kw["init"] = vc["init"]
    if vc.get("fixed"):
        kw["fixed"] = vc["fixed"]
    try:
        return fit_variogram(table, **kw)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{cfg.source}: [variogram] {exc}") from None


def _target_solver(cfg, method, obs, vario):
    """Function mapping a target to ``(weights, objective)``."""
    if method == "simple-krige":
        model = vario.base if vario is not None else cfg.model

        def one(t):
            sol = simple_krige(model, obs, t)
            return sol.weights, sol.error_variance

        return one
    if method == "ordinary-krige":
        vm = vario if vario is not None else VarioModel(base=cfg.model)

        def one(t):
            sol = ordinary_krige(vm, obs, t)
            return sol.weights, sol.error_variance

        return one
    fld = cfg.stable_field if cfg.field_type == "integral" else SubGaussianField(cfg.model, cfg.alpha)

    def one(t):
        sol = solve(ExtrapProblem(fld, obs.sites, t), method, cfg.annealing, cfg.unbiased)
        return sol.weights, sol.objective

    return one


def predict_stage(cfg, obs, method, vario=None, jobs=1):
    """Weights, predictions and objectives at every grid node."""
    targets = cfg.grid.sites()
    one = _target_solver(cfg, method, obs, vario)
    try:
        if jobs > 1:
            with ThreadPoolExecutor(jobs) as ex:
                rows = list(ex.map(one, targets))
        else:
            rows = [one(t) for t in targets]
    except StableFieldError as exc:
        raise SolverFailure(method, exc) from exc
    W = np.array([r[0] for r in rows]).reshape(targets.shape[0], obs.sites.shape[0])
    obj = np.array([r[1] for r in rows], dtype=float)
    return W, W @ obs.values, obj


class SolverFailure(Exception):
    def __init__(self, method, exc):
        super().__init__(f"{method}: {type(exc).__name__}: {exc}")
        self.method = method


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


def _coord_header(d):
    return [f"x{i + 1}" for i in range(d)]


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run(cfg: ExperimentConfig, jobs=1, stages=("simulate", "variogram", "fit", "predict"), realization=None):
    """Run the pipeline and write the bundle into ``cfg.out``.

    Parameters
    ----------
    cfg : ExperimentConfig
    jobs : int
        Worker threads for per-target prediction. Output does not depend on it.
    stages : sequence of str
        Stages to run; ``variogram`` and ``fit`` only run when the config
        has a ``[variogram]`` section or the stage is requested alone.
    realization : str or Path, optional
        Existing realization CSV to use instead of simulating.

    Returns
    -------
    dict
        The summary also written to ``summary.json``.
    """
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    d = cfg.grid.dim
    timings, files = {}, []
    summary = {"seed": cfg.seed, "field": cfg.field_type, "alpha": cfg.alpha, "n_sites": int(cfg.sites.shape[0]),
               "grid": {"origin": cfg.grid.origin, "spacing": cfg.grid.spacing, "counts": cfg.grid.counts}}

    t0 = time.perf_counter()
    if realization is not None:
        real = GridField.from_csv(realization)
        real = GridField(real.sites, real.values, cfg.seed, cfg.grid if real.sites.shape[0] == cfg.grid.size else None)
        if real.grid is None or not np.allclose(real.sites, cfg.grid.sites(), rtol=0, atol=1e-9):
            raise ConfigError(f"{realization}: realization does not match the configured grid")
        _, where = _merge_sites(real.sites, cfg.sites)
        if np.any(where >= real.sites.shape[0]):
            raise ConfigError(f"{realization}: observation sites must be grid nodes when reading a realization")
        obs = Observations(cfg.sites, real.values[where])
    else:
        real, obs = simulate_stage(cfg)
    real.to_csv(out / "realization.csv")
    _write_rows(out / "observations.csv", _coord_header(d) + ["value"],
                np.column_stack([obs.sites, obs.values]))
    files += ["realization.csv", "observations.csv"]
    timings["simulate"] = time.perf_counter() - t0

    fitted = None
    want_vario = "variogram" in stages and (cfg.variogram is not None or stages == ("simulate", "variogram"))
    want_fit = "fit" in stages and (bool(cfg.variogram and cfg.variogram["fit"]) or stages[-1] == "fit")
    if want_vario or want_fit:
        t0 = time.perf_counter()
        tables = variogram_stage(cfg, real)
        path = out / "variogram.csv"
        for i, tab in enumerate(tables):
            tab.to_csv(path, append=i > 0)
        files.append("variogram.csv")
        timings["variogram"] = time.perf_counter() - t0
        if want_fit:
            t0 = time.perf_counter()
            res = fit_stage(cfg, tables)
            fitted = res.model
            (out / "model.txt").write_text(model_to_text(fitted))
            files.append("model.txt")
            summary["fit"] = {"params": res.params, "residual": res.residual, "converged": res.converged}
            timings["fit"] = time.perf_counter() - t0
    if fitted is None and cfg.model is not None:
        (out / "model.txt").write_text(model_to_text(cfg.model))
        files.append("model.txt")

    if "predict" in stages:
        summary["methods"] = {}
        coords = cfg.grid.sites()
        for m in cfg.methods:
            t0 = time.perf_counter()
            W, pred, obj = predict_stage(cfg, obs, m, fitted, jobs)
            label = "error_variance" if m in KRIGING else "error_scale"
            _write_rows(out / f"prediction_{m}.csv", _coord_header(d) + ["value", label],
                        np.column_stack([coords, pred, obj]))
            _write_rows(out / f"weights_{m}.csv", _coord_header(d) + [f"w{i + 1}" for i in range(W.shape[1])],
                        np.column_stack([coords, W]))
            files += [f"prediction_{m}.csv", f"weights_{m}.csv"]
            summary["methods"][m] = {"objective": label, "mean": float(obj.mean()), "max": float(obj.max())}
            timings[f"predict:{m}"] = time.perf_counter() - t0

    summary["files"] = {f: _sha(out / f) for f in files}
    summary["timings"] = timings
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


# -- entry point ---------------------------------------------------------------

_STAGES = {
    "run": ("simulate", "variogram", "fit", "predict"),
    "bench": ("simulate", "variogram", "fit", "predict"),
    "simulate": ("simulate",),
    "variogram": ("simulate", "variogram"),
    "fit": ("simulate", "variogram", "fit"),
    "predict": ("simulate", "predict"),
}


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="experiment config (INI)")
    common.add_argument("--seed", type=int, metavar="N", help="override [experiment] seed")
    common.add_argument("--jobs", type=int, default=1, metavar="N", help="worker threads for prediction")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--method", metavar="NAME", help="override the method list (comma separated)")
    p = argparse.ArgumentParser(prog="stablefield", description="Simulate and extrapolate stable random fields.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "full pipeline: simulate, variogram, fit, predict",
        "simulate": "write the realization and observations",
        "variogram": "empirical variogram of a realization",
        "fit": "fit a variogram model",
        "predict": "predict the grid with the configured methods",
        "bench": "run the pipeline and report wall time per stage",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, parents=[common], help=h)
        if name in ("variogram", "fit", "predict"):
            sp.add_argument("--input", metavar="CSV", help="realization CSV to use instead of simulating")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.jobs < 1:
        print("config error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    methods = None
    if args.method:
        methods = [m.strip().lower() for m in args.method.split(",") if m.strip()]
    try:
        cfg = ExperimentConfig.from_file(args.config, seed=args.seed, methods=methods, out=args.out)
        summary = run(cfg, args.jobs, _STAGES[args.command], getattr(args, "input", None))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except StableFieldError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    if args.command == "bench":
        for stage, sec in summary["timings"].items():
            print(f"{stage:<24s} {sec:10.3f} s")
    else:
        print(f"wrote {len(summary['files'])} files to {cfg.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
