"""Command-line entry point: Q-curves, risk values, sweeps, simulation and checks.

Every command is a pure function of its configuration and seed, and writes
plot-ready CSV or JSON.  Exit status is 0 on success, 2 for configuration
errors and 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .correlation import FAMILIES, CorrelationFunction
from .geometry import SHAPES, Region
from .models import (
    OVERLAPS,
    TEG,
    DependenceModel,
    ExtremalGaussian,
    InvertedMaxStable,
    MaxMixture,
    MaxStable,
    Smith,
)
from .quadrature import QuadratureConfig, QuadratureError
from .risk import axiom_suite, q_cov, q_teg_closed, risk_scaled, supports_closed_form
from .simulation import (
    CONVENTIONS,
    SimulationConfig,
    SimulationError,
    jackknife_variance,
    mixture_losses,
    realized_model,
    simulate,
    summarize,
    write_binary,
    write_csv,
)

SCHEMA_VERSION = 1
COMMANDS = ("q-curve", "risk", "sweep-lambda", "sweep-a", "simulate", "validate", "axioms")
AXES = ("h", "theta", "r", "nu", "a")
DETERMINISTIC_ROUTES = ("auto", "closed_form_1d", "hoeffding_3d")
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


# ------------------------------------------------------------ model specs

def _exp_teg(theta=0.2, r=0.25):
    return {"family": "teg", "corr": "exponential", "theta": theta, "r": r}


PRESETS: dict[str, dict] = {
    "teg": {"kind": "max-stable", **_exp_teg()},
    "inv-teg": {"kind": "inverted", **_exp_teg()},
    "smith": {"kind": "max-stable", "family": "smith", "sigma2": 0.6},
    "inv-smith": {"kind": "inverted", "family": "smith", "sigma2": 0.6},
    "mm1": {"kind": "mixture", "a": 0.5, "x": _exp_teg(), "y": _exp_teg(0.4, 0.45)},
    "mm2": {"kind": "mixture", "a": 0.5, "x": _exp_teg(), "y": {"family": "smith", "sigma2": 0.8}},
    "mix-q": {"kind": "mixture", "a": 0.5, "x": _exp_teg(0.1, 0.15), "y": _exp_teg(0.3, 0.35)},
    "fig4": {"kind": "mixture", "a": 0.5, "x": _exp_teg(), "y": {"family": "smith", "sigma2": 1.0}},
}

_COMPONENT_KEYS = {
    "smith": {"family", "sigma2"},
    "eg": {"family", "corr", "theta", "kappa"},
    "teg": {"family", "corr", "theta", "kappa", "r", "overlap"},
}


def _require(spec: dict, key: str, where: str):
    if key not in spec:
        raise ConfigError(f"{where}: missing key {key!r}")
    return spec[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def build_component(spec: dict, where: str = "model"):
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected an object, got {spec!r}")
    fam = _require(spec, "family", where)
    if fam not in _COMPONENT_KEYS:
        raise ConfigError(f"{where}.family: unknown family {fam!r}; expected one of {sorted(_COMPONENT_KEYS)}")
    extra = set(spec) - _COMPONENT_KEYS[fam]
    if extra:
        raise ConfigError(f"{where}: unknown key(s) {sorted(extra)} for family {fam!r}")
    try:
        if fam == "smith":
            return Smith(_number(_require(spec, "sigma2", where), f"{where}.sigma2"))
        corr_name = _require(spec, "corr", where)
        if corr_name not in FAMILIES:
            raise ConfigError(f"{where}.corr: unknown correlation {corr_name!r}; expected one of {FAMILIES}")
        corr = CorrelationFunction(corr_name, _number(_require(spec, "theta", where), f"{where}.theta"),
                                   _number(spec.get("kappa", 1.0), f"{where}.kappa"))
        if fam == "eg":
            return ExtremalGaussian(corr)
        overlap = spec.get("overlap", "tent")
        if overlap not in OVERLAPS:
            raise ConfigError(f"{where}.overlap: expected one of {OVERLAPS}, got {overlap!r}")
        return TEG(corr, _number(_require(spec, "r", where), f"{where}.r"), overlap)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_model(spec: dict) -> DependenceModel:
    """Dependence model from a JSON-style spec (see :data:`PRESETS` for examples)."""
    if not isinstance(spec, dict):
        raise ConfigError(f"model: expected an object, got {spec!r}")
    kind = _require(spec, "kind", "model")
    rest = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "max-stable":
        return MaxStable(build_component(rest))
    if kind == "inverted":
        return InvertedMaxStable(build_component(rest))
    if kind == "mixture":
        extra = set(rest) - {"a", "x", "y"}
        if extra:
            raise ConfigError(f"model: unknown key(s) {sorted(extra)} for a mixture")
        a = _number(_require(rest, "a", "model"), "model.a")
        if not 0.0 <= a <= 1.0:
            raise ConfigError("model.a: mixing weight must lie in [0, 1]")
        return MaxMixture(a, build_component(_require(rest, "x", "model"), "model.x"),
                          build_component(_require(rest, "y", "model"), "model.y"))
    raise ConfigError(f"model.kind: expected max-stable, inverted or mixture, got {kind!r}")


def component_spec(m) -> dict:
    if isinstance(m, Smith):
        return {"family": "smith", "sigma2": m.sigma2}
    out = {"family": "eg" if isinstance(m, ExtremalGaussian) else "teg", "corr": m.corr.family,
           "theta": m.corr.theta}
    if m.corr.family == "matern":
        out["kappa"] = m.corr.kappa
    if isinstance(m, TEG):
        out["r"] = m.r
        if m.overlap != "tent":
            out["overlap"] = m.overlap
    return out


def model_spec(model: DependenceModel) -> dict:
    """Inverse of :func:`build_model`."""
    if isinstance(model, MaxMixture):
        return {"kind": "mixture", "a": model.a, "x": component_spec(model.x_part),
                "y": component_spec(model.y_part)}
    kind = "max-stable" if isinstance(model, MaxStable) else "inverted"
    return {"kind": kind, **component_spec(model.m)}


def _with_family(m, family: str):
    if isinstance(m, (ExtremalGaussian, TEG)):
        return replace(m, corr=replace(m.corr, family=family))
    return m


def with_family(model: DependenceModel, family: str) -> DependenceModel:
    """Replace the correlation family of every Gaussian-based component."""
    if isinstance(model, MaxMixture):
        return replace(model, x_part=_with_family(model.x_part, family), y_part=_with_family(model.y_part, family))
    return replace(model, m=_with_family(model.m, family))


def _set_param(model: DependenceModel, axis: str, value: float, component: str) -> DependenceModel:
    if axis == "a":
        if not isinstance(model, MaxMixture):
            raise ConfigError("axis: sweeping 'a' needs a mixture model")
        return replace(model, a=value)

    def change(m):
        if axis == "theta":
            if isinstance(m, Smith):
                raise ConfigError("axis: a Smith component has no correlation length")
            return replace(m, corr=replace(m.corr, theta=value))
        if not isinstance(m, TEG):
            raise ConfigError("axis: only TEG components have a truncation radius")
        return replace(m, r=value)

    if isinstance(model, MaxMixture):
        part = "x_part" if component == "x" else "y_part"
        return replace(model, **{part: change(getattr(model, part))})
    return replace(model, m=change(model.m))


# ------------------------------------------------------------ run config

@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one CLI invocation."""

    command: str
    model: DependenceModel
    region: Region = field(default_factory=lambda: Region("square", 1.0))
    nu: tuple[float, ...] = (0.2,)
    h: float = 0.25
    axis: str = "h"
    grid: tuple[float, ...] = ()
    component: str = "x"
    families: tuple[str, ...] = ()
    lambdas: tuple[float, ...] = (0.25, 0.5, 1.0, 2.0, 4.0, 10.0, 50.0)
    a_grid: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0)
    tol_abs: float = 1e-9
    tol_rel: float = 1e-7
    route: str = "auto"
    n: int = 50
    m: int = 1000
    reps: int = 100
    seed: int = 0
    convention: str = "midpoint"
    workers: int = 1
    fields: str | None = None
    raw: str | None = None
    out: str | None = None
    format: str = "csv"

    @property
    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(abs_tol=self.tol_abs, rel_tol=self.tol_rel)

    def to_dict(self) -> dict:
        """Plain-data form accepted back by ``--config``."""
        out = {
            "command": self.command,
            "model": model_spec(self.model),
            "region": f"{self.region.shape}:{self.region.size!r}",
            "nu": list(self.nu),
            "h": self.h,
            "axis": self.axis,
            "grid": list(self.grid),
            "component": self.component,
            "families": list(self.families),
            "lambda_grid": list(self.lambdas),
            "a_grid": list(self.a_grid),
            "tol_abs": self.tol_abs,
            "tol_rel": self.tol_rel,
            "route": self.route,
            "n": self.n,
            "m": self.m,
            "reps": self.reps,
            "seed": self.seed,
            "convention": self.convention,
            "format": self.format,
        }
        keep = _COMMON_KEYS | _COMMAND_KEYS[self.command]
        return {k: v for k, v in out.items() if k in keep}


_COMMON_KEYS = {"command", "model", "region", "nu", "tol_abs", "tol_rel", "route", "format"}
_COMMAND_KEYS = {
    "q-curve": {"h", "axis", "grid", "component", "families"},
    "risk": set(),
    "sweep-lambda": {"lambda_grid"},
    "sweep-a": {"a_grid"},
    "simulate": {"n", "m", "seed", "convention"},
    "validate": {"a_grid", "n", "m", "reps", "seed", "convention"},
    "axioms": set(),
}


def parse_floats(text, key: str) -> tuple[float, ...]:
    """Comma list ``0.1,0.2`` or linspace ``start:stop:num``."""
    if isinstance(text, (list, tuple)):
        return tuple(_number(v, key) for v in text)
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return (float(text),)
    if not isinstance(text, str) or not text.strip():
        raise ConfigError(f"{key}: expected numbers, got {text!r}")
    try:
        if ":" in text:
            start, stop, num = text.split(":")
            num_i = int(num)
            if num_i < 1:
                raise ValueError
            return tuple(float(v) for v in np.linspace(float(start), float(stop), num_i))
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as 'a,b,c' or 'start:stop:num'") from None


def parse_region(text: str) -> Region:
    if isinstance(text, Region):
        return text
    try:
        shape, size = str(text).split(":")
        return Region(shape, float(size))
    except ValueError as exc:
        raise ConfigError(f"region: expected 'square:R' or 'disk:R' with shape in {SHAPES}, got {text!r}"
                          f" ({exc})") from None


_DEFAULT_GRIDS = {
    "h": "0:1:51",
    "theta": "0.05:0.5:46",
    "r": "0.05:0.5:46",
    "nu": "0.05:0.45:41",
    "a": "0:1:21",
}

_CONFIG_KEYS = {
    "command", "model", "preset", "region", "nu", "h", "axis", "grid", "component", "families", "lambda_grid",
    "a_grid", "tol_abs", "tol_rel", "route", "n", "m", "reps", "seed", "convention", "workers", "fields", "raw",
    "out", "format",
}


def _load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config: {path} must hold a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"config: unknown key(s) {unknown} in {path}")
    return data


def _model_from(value) -> DependenceModel:
    if isinstance(value, dict):
        return build_model(value)
    text = str(value)
    if text.startswith("@"):
        return build_model(_load_json(text[1:], "model"))
    try:
        return build_model(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"model: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_json(path: str, key: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"{key}: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{key}: {path} line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _int(value, key: str, lo: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        raise ConfigError(f"{key}: expected an integer, got {value!r}")
    try:
        out = int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None
    if out < lo:
        raise ConfigError(f"{key}: must be at least {lo}")
    return out


def _choice(value, key: str, options) -> str:
    if value not in options:
        raise ConfigError(f"{key}: expected one of {tuple(options)}, got {value!r}")
    return value


def make_run_config(values: dict) -> RunConfig:
    """Validate merged file and command-line values into a :class:`RunConfig`."""
    unknown = sorted(set(values) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown}")
    command = _choice(values.get("command"), "command", COMMANDS)
    if values.get("model") is not None and values.get("preset") is not None:
        raise ConfigError("model: give either --model or --preset, not both")
    if values.get("model") is not None:
        model = _model_from(values["model"])
    else:
        default = "fig4" if command == "validate" else "teg"
        model = build_model(PRESETS[_choice(values.get("preset") or default, "preset", PRESETS)])

    kw: dict = {"command": command, "model": model}
    if values.get("region") is not None:
        kw["region"] = parse_region(values["region"])
    if values.get("nu") is not None:
        nus = parse_floats(values["nu"], "nu")
        if any(not 0.0 < v < 0.5 for v in nus):
            raise ConfigError("nu: every value must lie in (0, 1/2)")
        kw["nu"] = nus
    elif command == "validate":
        kw["nu"] = (0.05, 0.15, 0.25, 0.35, 0.40)
    if values.get("h") is not None:
        h = _number(values["h"], "h") if not isinstance(values["h"], str) else parse_floats(values["h"], "h")[0]
        if h < 0:
            raise ConfigError("h: distance must be nonnegative")
        kw["h"] = h
    axis = _choice(values.get("axis") or "h", "axis", AXES)
    kw["axis"] = axis
    grid = parse_floats(values.get("grid") or _DEFAULT_GRIDS[axis], "grid")
    kw["grid"] = grid
    kw["component"] = _choice(values.get("component") or "x", "component", ("x", "y"))
    if values.get("families"):
        fams = values["families"]
        fams = tuple(fams.split(",")) if isinstance(fams, str) else tuple(fams)
        for f in fams:
            _choice(f, "families", FAMILIES)
        kw["families"] = fams
    if values.get("lambda_grid") is not None:
        lams = parse_floats(values["lambda_grid"], "lambda_grid")
        if any(not v > 0 for v in lams):
            raise ConfigError("lambda_grid: scale factors must be positive")
        kw["lambdas"] = lams
    if values.get("a_grid") is not None:
        a_grid = parse_floats(values["a_grid"], "a_grid")
        if any(not 0.0 <= v <= 1.0 for v in a_grid):
            raise ConfigError("a_grid: mixing weights must lie in [0, 1]")
        kw["a_grid"] = a_grid
    for key in ("tol_abs", "tol_rel"):
        if values.get(key) is not None:
            v = _number(values[key], key) if not isinstance(values[key], str) else parse_floats(values[key], key)[0]
            if not v > 0:
                raise ConfigError(f"{key}: tolerance must be positive")
            kw[key] = v
    kw["route"] = _choice(values.get("route") or "auto", "route", DETERMINISTIC_ROUTES)
    if values.get("n") is not None:
        kw["n"] = _int(values["n"], "n", 2)
    if values.get("m") is not None:
        kw["m"] = _int(values["m"], "m", 2)
    if values.get("reps") is not None:
        kw["reps"] = _int(values["reps"], "reps", 1)
    if values.get("seed") is not None:
        seed = _int(values["seed"], "seed", 0)
        if seed >= 2**64:
            raise ConfigError("seed: must fit in 64 bits")
        kw["seed"] = seed
    kw["convention"] = _choice(values.get("convention") or "midpoint", "convention", CONVENTIONS)
    if values.get("workers") is not None:
        kw["workers"] = _int(values["workers"], "workers", 1)
    for key in ("fields", "raw", "out"):
        if values.get(key) is not None:
            kw[key] = str(values[key])
    fmt = _choice(values.get("format") or "csv", "format", ("csv", "json"))
    kw["format"] = fmt

    if command == "q-curve" and axis == "a" and not isinstance(model, MaxMixture):
        raise ConfigError("axis: sweeping 'a' needs a mixture model")
    if command == "q-curve" and axis in ("theta", "r"):
        _set_param(model, axis, grid[0], kw["component"])
    if command == "sweep-a" and not isinstance(model, MaxMixture):
        raise ConfigError("model: sweep-a needs a mixture model")
    if command == "validate" and not isinstance(model, MaxMixture):
        if values.get("a_grid") is not None:
            raise ConfigError("a_grid: only a mixture model has a mixing weight")
        kw["a_grid"] = (1.0,) if isinstance(model, MaxStable) else (0.0,)
    if kw["route"] == "closed_form_1d" and not supports_closed_form(model):
        raise ConfigError("route: the closed-form route needs a max-stable TEG model")
    return RunConfig(**kw)


# --------------------------------------------------------------- output

@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    failed: int = 0
    extra: dict = field(default_factory=dict)


def _cell(v):
    if isinstance(v, float):
        return repr(float(v))
    return "" if v is None else str(v)


def render(cfg: RunConfig, table: Table) -> str:
    if cfg.format == "json":
        doc = {
            "schema": f"spatialrisk/{cfg.command}/{SCHEMA_VERSION}",
            "config": cfg.to_dict(),
            "columns": table.columns,
            "rows": [dict(zip(table.columns, r)) for r in table.rows],
            **table.extra,
        }
        return json.dumps(doc, indent=2, allow_nan=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# schema: spatialrisk/{cfg.command}/{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for r in table.rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def _pmap(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(fn, jobs))


def _safe(fn, job):
    """Run one parameter point; numeric failures become a flagged result."""
    try:
        return fn(job), None
    except (QuadratureError, ArithmeticError, SimulationError, FloatingPointError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


# ------------------------------------------------------------- commands

def _q_point(job):
    model, h, nu, qcfg, route = job
    if route == "closed_form_1d" or (route == "auto" and supports_closed_form(model)):
        res = q_teg_closed(model.m.corr, model.m.r, h, nu, qcfg, model.m.overlap)
    else:
        res = q_cov(model, h, nu, qcfg)
    return float(res.value), float(res.error)


def _q_job(job):
    return _safe(_q_point, job)


def cmd_q_curve(cfg: RunConfig) -> Table:
    t = Table(["series", "axis", "value", "h", "nu", "Q", "error", "status"])
    series = cfg.families or (None,)
    jobs, labels = [], []
    for fam in series:
        base = with_family(cfg.model, fam) if fam else cfg.model
        name = fam or "model"
        for v in cfg.grid:
            h, nu, model = cfg.h, cfg.nu[0], base
            if cfg.axis == "h":
                if v < 0:
                    raise ConfigError("grid: distances must be nonnegative")
                h = v
            elif cfg.axis == "nu":
                if not 0.0 < v < 0.5:
                    raise ConfigError("grid: nu values must lie in (0, 1/2)")
                nu = v
            else:
                try:
                    model = _set_param(base, cfg.axis, v, cfg.component)
                except ValueError as exc:
                    raise ConfigError(f"grid: {exc}") from None
            jobs.append((model, h, nu, cfg.quadrature, cfg.route))
            labels.append((name, v, h, nu))
    for (name, v, h, nu), (res, err) in zip(labels, _pmap(_q_job, jobs, cfg.workers)):
        if err is None:
            t.rows.append([name, cfg.axis, v, h, nu, res[0], res[1], "ok"])
        else:
            t.failed += 1
            t.rows.append([name, cfg.axis, v, h, nu, None, None, f"failed: {err}"])
    return t


def _risk_point(job):
    model, region, lam, nu, qcfg, route = job
    res = risk_scaled(model, region, lam, nu, qcfg, route)
    return res.value, res.error_bound, res.route


def _risk_job(job):
    return _safe(_risk_point, job)


def _risk_rows(t: Table, jobs, keys, workers):
    for key, (res, err) in zip(keys, _pmap(_risk_job, jobs, workers)):
        if err is None:
            t.rows.append([*key, res[0], res[1], res[2], "ok"])
        else:
            t.failed += 1
            t.rows.append([*key, None, None, None, f"failed: {err}"])


def cmd_risk(cfg: RunConfig) -> Table:
    t = Table(["nu", "value", "error_bound", "route", "status"])
    routes = [cfg.route]
    if cfg.route == "auto" and supports_closed_form(cfg.model):
        routes = ["closed_form_1d", "hoeffding_3d"]
    jobs, keys = [], []
    for nu in cfg.nu:
        for route in routes:
            jobs.append((cfg.model, cfg.region, 1.0, nu, cfg.quadrature, route))
            keys.append((nu,))
    _risk_rows(t, jobs, keys, cfg.workers)
    return t


def cmd_sweep_lambda(cfg: RunConfig) -> Table:
    t = Table(["lambda", "nu", "value", "error_bound", "route", "status"])
    jobs = [(cfg.model, cfg.region, lam, cfg.nu[0], cfg.quadrature, cfg.route) for lam in cfg.lambdas]
    _risk_rows(t, jobs, [(lam, cfg.nu[0]) for lam in cfg.lambdas], cfg.workers)
    return t


def cmd_sweep_a(cfg: RunConfig) -> Table:
    t = Table(["a", "nu", "value", "error_bound", "route", "status"])
    jobs = [(replace(cfg.model, a=a), cfg.region, 1.0, cfg.nu[0], cfg.quadrature, cfg.route) for a in cfg.a_grid]
    _risk_rows(t, jobs, [(a, cfg.nu[0]) for a in cfg.a_grid], cfg.workers)
    return t


def _sim_config(cfg: RunConfig, model, replicates=None) -> SimulationConfig:
    return SimulationConfig(model, cfg.region, cfg.n, replicates or cfg.m, cfg.seed, cfg.convention, cfg.workers)


def cmd_simulate(cfg: RunConfig) -> Table:
    from .simulation import losses

    scfg = _sim_config(cfg, cfg.model)
    if cfg.fields:
        reals = list(simulate(cfg.model, replace(scfg, workers=1)))
        if cfg.fields.endswith(".bin"):
            write_binary(cfg.fields, reals, cfg.region.size)
        else:
            write_csv(cfg.fields, reals)
    t = Table(["nu", "mean_L", "mean_se", "var_L", "var_se", "replicates", "grid_n", "seed"])
    sample = losses(cfg.model, scfg, cfg.nu)
    for j, nu in enumerate(cfg.nu):
        s = summarize(sample[:, j])
        t.rows.append([nu, s.mean, s.mean_se, s.variance, s.variance_se, s.replicates, cfg.n, cfg.seed])
    return t


def _reference_job(job):
    return _safe(_risk_point, job)


def cmd_validate(cfg: RunConfig) -> Table:
    """Relative errors of repeated M1 estimates against the deterministic value.

    Repetition ``k`` uses replicates ``k m .. (k+1) m - 1`` of one seeded
    stream, and every (a, nu) cell is computed from the same fields.  The
    reference is the model the simulation realizes; the nominal model's value
    is reported alongside.  A pure model runs as the matching endpoint of a
    mixture (a = 1 max-stable, a = 0 inverted), which simulates the same fields.
    """
    model = cfg.model
    if not isinstance(model, MaxMixture):
        model = MaxMixture(cfg.a_grid[0], model.m, model.m)
    scfg = _sim_config(cfg, model, cfg.reps * cfg.m)
    sample = mixture_losses(model.x_part, model.y_part, cfg.a_grid, scfg, cfg.nu)
    sample = sample.reshape(cfg.reps, cfg.m, len(cfg.a_grid), len(cfg.nu))
    est, _ = jackknife_variance(sample, axis=1)

    cells = [(a, nu) for a in cfg.a_grid for nu in cfg.nu]
    realized = realized_model(model)
    jobs = [(replace(realized, a=a), cfg.region, 1.0, nu, cfg.quadrature, "hoeffding_3d") for a, nu in cells]
    jobs += [(replace(model, a=a), cfg.region, 1.0, nu, cfg.quadrature, "hoeffding_3d") for a, nu in cells]
    refs = _pmap(_reference_job, jobs, cfg.workers)
    t = Table(["a", "nu", "reference", "median_rel_err", "q25_rel_err", "q75_rel_err", "median_abs_rel_err",
               "mean_estimate", "reference_nominal", "median_rel_err_nominal", "status"])
    raw_rows = []
    for idx, (a, nu) in enumerate(cells):
        ia, jn = cfg.a_grid.index(a), cfg.nu.index(nu)
        values = est[:, ia, jn]
        (ref, err), (nom, nerr) = refs[idx], refs[len(cells) + idx]
        if err or nerr:
            t.failed += 1
            t.rows.append([a, nu, None, None, None, None, None, float(values.mean()), None, None,
                           f"failed: {err or nerr}"])
            continue
        rel = values / ref[0] - 1.0
        rel_nom = values / nom[0] - 1.0
        q25, q50, q75 = np.quantile(rel, [0.25, 0.5, 0.75])
        t.rows.append([a, nu, ref[0], float(q50), float(q25), float(q75), float(np.median(np.abs(rel))),
                       float(values.mean()), nom[0], float(np.median(rel_nom)), "ok"])
        raw_rows += [[a, nu, k, float(v)] for k, v in enumerate(values)]
    if cfg.raw:
        with open(cfg.raw, "w", newline="") as fh:
            fh.write(f"# schema: spatialrisk/validate-raw/{SCHEMA_VERSION}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["a", "nu", "repetition", "var_L"])
            for r in raw_rows:
                w.writerow([_cell(v) for v in r])
    return t


def cmd_axioms(cfg: RunConfig) -> Table:
    route = None if cfg.route == "auto" else cfg.route
    rep = axiom_suite(cfg.model, cfg.region, cfg.nu[0], cfg.quadrature, route=route)
    t = Table(["check", "field", "value"], extra={"report": rep})
    for check, body in rep.items():
        if isinstance(body, dict):
            for k, v in body.items():
                t.rows.append([check, k, json.dumps(v)])
        else:
            t.rows.append([check, "", json.dumps(body)])
    return t


HANDLERS = {
    "q-curve": cmd_q_curve,
    "risk": cmd_risk,
    "sweep-lambda": cmd_sweep_lambda,
    "sweep-a": cmd_sweep_a,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "axioms": cmd_axioms,
}


# ----------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spatialrisk", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "q-curve": "covariance Q of the damage along h, theta, r, nu or a",
        "risk": "risk measure of a region",
        "sweep-lambda": "risk measure of scaled regions",
        "sweep-a": "risk measure against the mixing weight",
        "simulate": "simulate fields and report Monte-Carlo estimates",
        "validate": "repeated Monte-Carlo estimates against the deterministic value",
        "axioms": "numerical checks of the risk-measure axioms",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", help="JSON file with any of the options below; flags override it")
        s.add_argument("--model", help="model as JSON text or @file.json")
        s.add_argument("--preset", choices=sorted(PRESETS))
        s.add_argument("--region", help="square:R or disk:R (default square:1)")
        s.add_argument("--nu", help="damage exponent(s), comma list or start:stop:num")
        s.add_argument("--tol-abs", dest="tol_abs", type=float)
        s.add_argument("--tol-rel", dest="tol_rel", type=float)
        s.add_argument("--route", choices=DETERMINISTIC_ROUTES)
        s.add_argument("--workers", type=int)
        s.add_argument("--out", help="output file (default stdout)")
        s.add_argument("--format", choices=("csv", "json"))
        if name == "q-curve":
            s.add_argument("--axis", choices=AXES)
            s.add_argument("--grid", help="values along the axis")
            s.add_argument("--h", type=float, help="distance when it is not the axis")
            s.add_argument("--component", choices=("x", "y"), help="mixture part whose theta or r varies")
            s.add_argument("--families", help="comma list of correlation families, one series each")
        if name == "sweep-lambda":
            s.add_argument("--lambda-grid", dest="lambda_grid")
        if name in ("sweep-a", "validate"):
            s.add_argument("--a-grid", dest="a_grid")
        if name in ("simulate", "validate"):
            s.add_argument("--n", type=int, help="grid points per side")
            s.add_argument("--m", type=int, help="fields per estimate")
            s.add_argument("--seed", type=int)
            s.add_argument("--convention", choices=CONVENTIONS)
        if name == "simulate":
            s.add_argument("--fields", help="export fields to .bin (binary) or .csv")
        if name == "validate":
            s.add_argument("--reps", type=int, help="repetitions of the estimate")
            s.add_argument("--raw", help="CSV file for per-repetition estimates")
    return p


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    args = build_parser().parse_args(argv)
    values = {}
    try:
        if args.config:
            values.update(_load_config_file(args.config))
            if values.get("command", args.command) != args.command:
                raise ConfigError(f"config: file is for command {values['command']!r}, not {args.command!r}")
        for k, v in vars(args).items():
            if k != "config" and v is not None:
                values[k] = v
        values["command"] = args.command
        cfg = make_run_config(values)
        table = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"spatialrisk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ArithmeticError, SimulationError, FloatingPointError) as exc:
        print(f"spatialrisk: numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = render(cfg, table)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stdout.write(text)
    if table.failed:
        print(f"spatialrisk: {table.failed} row(s) failed numerically", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
