"""Run configuration: one JSON document plus dotted command-line overrides."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass

import numpy as np

from .drives import SQRT6, KerrParams
from .errors import ConfigError
from .hilbert import Cutoff
from .policy import POLICY
from .propagate import METHODS, IntegratorPolicy, LossChannel

OUT_ENV = "KERRBIN_OUT"
_HALF = 1 / math.sqrt(2)


def _range(start, stop, step):
    return {"start": start, "stop": stop, "step": step}


@dataclass
class IntegratorConfig:
    rel_tol: float = POLICY.rel_tol
    abs_tol: float = POLICY.abs_tol
    method: str = "RK45"
    max_step: float | None = None


@dataclass
class RabiConfig:
    p2_values: list = field(default_factory=lambda: [0.005, 0.01, 0.02, 0.05, 0.1])
    p1_scales: list = field(default_factory=lambda: [1.0, 0.8, 1.2])
    samples: int = 2000
    periods: float = 1.0
    duration: float | None = None


@dataclass
class CalibrateConfig:
    # s204 is swept in p2 units; p1 = sqrt(6) p2 is what gets reported
    lambda_32: object = field(default_factory=lambda: _range(0.05, 0.8, 0.0125))
    p2: object = field(default_factory=lambda: _range(0.02, 0.33, 0.005))
    lambda_12: object = field(default_factory=lambda: _range(0.05, 0.8, 0.0125))
    t_error: float | None = None
    sensitivity_t_errors: list = field(default_factory=lambda: [10.0, 50.0, 100.0])


@dataclass
class QecConfig:
    t_errors: list | None = None
    grid_points: int = 20
    grid_min: float = 5.0
    grid_max: float = 400.0
    calibration: str | None = None
    lossy_recovery: bool = True


@dataclass
class ZrotConfig:
    phases: list = field(default_factory=lambda: [0.0, math.pi / 2, math.pi, 3 * math.pi / 2, 2 * math.pi])


@dataclass
class RunConfig:
    chi: float = 6.0
    gamma: float = 0.001
    detuning: float | None = None
    cutoff: int = 16
    convergence_cutoff: int | None = 24
    alpha: float = _HALF
    beta: float = _HALF
    threads: int = 1
    out_dir: str = field(default_factory=lambda: os.environ.get(OUT_ENV, "results"))
    figures: bool = False
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    rabi: RabiConfig = field(default_factory=RabiConfig)
    calibrate: CalibrateConfig = field(default_factory=CalibrateConfig)
    qec: QecConfig = field(default_factory=QecConfig)
    zrot: ZrotConfig = field(default_factory=ZrotConfig)

    # ---- derived objects

    @property
    def kerr(self):
        return KerrParams(self.chi, self.detuning)

    @property
    def loss(self):
        return LossChannel(self.gamma)

    @property
    def n_cutoff(self):
        return Cutoff(self.cutoff)

    @property
    def policy(self):
        i = self.integrator
        return IntegratorPolicy(rel_tol=i.rel_tol, abs_tol=i.abs_tol, method=i.method, max_step=i.max_step)

    def grid(self, step):
        """Amplitude grid for a recovery step; s204 is returned in p1 units."""
        if step == "s32":
            return resolve_grid(self.calibrate.lambda_32, "calibrate.lambda_32")
        if step == "s204":
            return SQRT6 * resolve_grid(self.calibrate.p2, "calibrate.p2")
        if step == "s12":
            return resolve_grid(self.calibrate.lambda_12, "calibrate.lambda_12")
        raise KeyError(step)

    def qec_grid(self):
        q = self.qec
        if q.t_errors is not None:
            return np.asarray(q.t_errors, dtype=float)
        return np.geomspace(q.grid_min, q.grid_max, q.grid_points)

    def to_dict(self):
        return asdict(self)

    def validate(self):
        _check(self.chi > 0, "chi", "must be positive")
        _check(self.gamma >= 0, "gamma", "must be non-negative")
        _check(isinstance(self.cutoff, int) and self.cutoff >= 6, "cutoff", "must be an integer >= 6")
        if self.convergence_cutoff is not None:
            _check(isinstance(self.convergence_cutoff, int) and self.convergence_cutoff > self.cutoff,
                   "convergence_cutoff", "must be an integer larger than cutoff (or null)")
        _check(abs(self.alpha**2 + self.beta**2 - 1) < 1e-10, "alpha", "alpha^2 + beta^2 must equal 1")
        _check(isinstance(self.threads, int) and self.threads >= 1, "threads", "must be a positive integer")
        i = self.integrator
        _check(i.method in METHODS, "integrator.method", f"must be one of {METHODS}")
        _check(i.rel_tol > 0, "integrator.rel_tol", "must be positive")
        _check(i.abs_tol > 0, "integrator.abs_tol", "must be positive")
        r = self.rabi
        _check(isinstance(r.p2_values, list) and r.p2_values, "rabi.p2_values", "must be a nonempty list")
        _check(all(_num(p) and p > 0 for p in r.p2_values), "rabi.p2_values", "entries must be positive numbers")
        _check(isinstance(r.p1_scales, list) and r.p1_scales and all(_num(s) and s > 0 for s in r.p1_scales),
               "rabi.p1_scales", "must be a nonempty list of positive numbers")
        _check(isinstance(r.samples, int) and r.samples >= 2, "rabi.samples", "must be an integer >= 2")
        for step in ("s32", "s204", "s12"):
            self.grid(step)
        c = self.calibrate
        _check(c.t_error is None or (_num(c.t_error) and c.t_error > 0), "calibrate.t_error", "must be positive or null")
        _check(isinstance(c.sensitivity_t_errors, list) and all(_num(t) and t > 0 for t in c.sensitivity_t_errors),
               "calibrate.sensitivity_t_errors", "must be a list of positive numbers")
        q = self.qec
        if q.t_errors is not None:
            _check(isinstance(q.t_errors, list) and q.t_errors and all(_num(t) and t >= 0 for t in q.t_errors),
                   "qec.t_errors", "must be a nonempty list of non-negative numbers")
        _check(isinstance(q.grid_points, int) and q.grid_points >= 2, "qec.grid_points", "must be an integer >= 2")
        _check(0 < q.grid_min < q.grid_max, "qec.grid_min", "need 0 < grid_min < grid_max")
        _check(isinstance(self.zrot.phases, list) and self.zrot.phases and all(_num(p) for p in self.zrot.phases),
               "zrot.phases", "must be a nonempty list of numbers")
        return self


def _num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _check(ok, name, message):
    if not ok:
        raise ConfigError(name, message)


def resolve_grid(spec, name):
    """A grid is either an explicit list or {start, stop, step} (stop inclusive)."""
    if isinstance(spec, list):
        if not spec or not all(_num(x) for x in spec):
            raise ConfigError(name, "grid list must be nonempty and numeric")
        g = np.asarray(spec, dtype=float)
    elif isinstance(spec, dict):
        try:
            start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError(name, "range grid needs numeric start, stop and step") from None
        if not stop > start:
            raise ConfigError(name, "range grid has zero or negative width")
        if not step > 0:
            raise ConfigError(name, "grid step must be positive")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        g = np.round(start + step * np.arange(count), 12)
    else:
        raise ConfigError(name, "grid must be a list or a {start, stop, step} object")
    if np.any(g <= 0):
        raise ConfigError(name, "grid amplitudes must be positive")
    if np.any(np.diff(g) <= 0):
        raise ConfigError(name, "grid must be strictly increasing")
    return g


def _build(cls, data, prefix=""):
    if not isinstance(data, dict):
        raise ConfigError(prefix.rstrip(".") or "config", "expected a JSON object")
    known = {f.name for f in fields(cls)}
    defaults = cls()
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(prefix + key, "unknown field")
        default = getattr(defaults, key)
        if is_dataclass(default):
            kwargs[key] = _build(type(default), value, prefix + key + ".")
        else:
            kwargs[key] = value
    return cls(**kwargs)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides):
    """Apply ``a.b.c=value`` strings to a nested dict; values are parsed as JSON when possible."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key.path=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        node = data
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(path, "cannot descend into a non-object field")
        node[keys[-1]] = _parse_value(raw)
    return data


def load_config(path=None, overrides=(), **direct) -> RunConfig:
    data = {}
    if path is not None:
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("--config", f"file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("--config", f"invalid JSON: {exc}") from None
    apply_overrides(data, overrides)
    for key, value in direct.items():
        if value is not None:
            data[key] = value
    cfg = _build(RunConfig, data)
    return cfg.validate()
