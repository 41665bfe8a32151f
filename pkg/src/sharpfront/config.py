"""YAML run configuration with a closed key schema.

Every section is optional; missing keys take defaults. Unknown keys and
out-of-range values raise :class:`ConfigError` before any computation.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import dataclass
from pathlib import Path

import yaml

from . import _backend
from .frontspeed import SpeedError, SpeedMeasurementConfig, SpeedTable, build_speed_table, read_speed_table
from .geometry import ConvexCurve, GeometryError, read_polygon_csv
from .harness import ConvergenceConfig, HarnessError
from .nonlinearity import Amplitude, Nonlinearity, NonlinearityError, PeriodicCell, Profile
from .rdsim import ScaledRunConfig, SolverError


class ConfigError(ValueError):
    pass


SCHEMA = {
    "workers": 1,
    "output": {"dir": "out"},
    "nonlinearity": {
        "profile": "fisher_kpp",
        "r": 2.0,
        "kpp": True,
        "rho": 0.1,
        "cell": [1.0, 1.0],
        "amplitude": {"base": 1.0, "modes": []},
    },
    "geometry": {
        "shape": "circle",
        "center": [0.0, 0.0],
        "radius": 1.0,
        "a": 1.0,
        "b": 1.0,
        "n_vertices": 256,
        "file": None,
        "corner_fan": 0,
    },
    "speed": {
        "method": "hybrid",
        "n_theta": 16,
        "value": 2.0,
        "table": None,
        "measure": {"h": 0.25, "sigma": 0.5, "fit_window": [45.0, 150.0], "width_periods": 1},
        "oracle": {"cell_grid": [32, 32], "lam_bounds": [0.2, 4.0], "tol": 1e-4},
    },
    "hopf": {"delta": None, "times": [0.0, 0.5, 1.0], "grid_h": None, "margin": 0.5},
    "hj": {
        "mode": "lf",
        "h": 0.02,
        "margin": 0.6,
        "T": 1.0,
        "times": [0.0, 0.25, 0.5, 0.75, 1.0],
        "alpha": 0.045,
        "alphas": [0.045, 0.035, 0.025],
        "sigma": None,
    },
    "simulate": {
        "epsilon": 0.08,
        "T": 1.0,
        "times": [0.0, 0.5, 1.0],
        "m": 0.9,
        "w": 0.1,
        "h": 0.25,
        "pad": 20.0,
        "node_cap": 40_000_000,
    },
    "converge": {
        "epsilons": [0.08, 0.04, 0.02],
        "beta": 0.2,
        "tau": 0.2,
        "T": 1.0,
        "times": [0.2, 0.6, 1.0],
        "eta": 0.1,
        "m": 0.9,
        "w": 0.1,
        "h": 0.25,
        "pad": 20.0,
        "node_cap": 40_000_000,
        "generation": {"epsilons": [0.08, 0.04, 0.02], "eta": 0.05, "m": 0.5, "w": 0.1,
                       "beta_gen": 0.3, "horizon": 40.0},
    },
}


def _merge(schema, data, where):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    unknown = sorted(set(data) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    out = {}
    for key, default in schema.items():
        path = f"{where}.{key}" if where else key
        if isinstance(default, dict):
            out[key] = _merge(default, data.get(key), path)
        else:
            out[key] = copy.deepcopy(data[key]) if key in data else copy.deepcopy(default)
    return out


def _num(cfg, path, lo=None, hi=None, integer=False, allow_none=False):
    node = cfg
    for k in path.split("."):
        node = node[k]
    if node is None and allow_none:
        return None
    if isinstance(node, bool) or not isinstance(node, (int, float)):
        raise ConfigError(f"{path} must be a number")
    if integer and int(node) != node:
        raise ConfigError(f"{path} must be an integer")
    if lo is not None and node < lo:
        raise ConfigError(f"{path}={node} is below {lo}")
    if hi is not None and node > hi:
        raise ConfigError(f"{path}={node} exceeds {hi}")
    return int(node) if integer else float(node)


def _list(cfg, path, length=None):
    node = cfg
    for k in path.split("."):
        node = node[k]
    if not isinstance(node, list) or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in node):
        raise ConfigError(f"{path} must be a list of numbers")
    if length is not None and len(node) != length:
        raise ConfigError(f"{path} must have {length} entries")
    return [float(v) for v in node]


@dataclass
class RunConfig:
    data: dict
    base_dir: Path
    digest: str

    @property
    def workers(self):
        return _backend.workers(self.data["workers"])

    @property
    def output_dir(self):
        p = Path(self.data["output"]["dir"])
        return p if p.is_absolute() else self.base_dir / p

    def section(self, name):
        return self.data[name]

    # -- builders ---------------------------------------------------------------

    def nonlinearity(self):
        s = self.data["nonlinearity"]
        modes = s["amplitude"]["modes"]
        if not isinstance(modes, list) or any(not isinstance(m, list) or len(m) != 4 for m in modes):
            raise ConfigError("nonlinearity.amplitude.modes must be a list of [k1, k2, a, phi]")
        cell = _list(self.data, "nonlinearity.cell", 2)
        try:
            return Nonlinearity(PeriodicCell(*cell),
                                Amplitude(_num(self.data, "nonlinearity.amplitude.base"), modes),
                                Profile(str(s["profile"]), _num(self.data, "nonlinearity.r")),
                                kpp=bool(s["kpp"]), rho=_num(self.data, "nonlinearity.rho"))
        except NonlinearityError as exc:
            raise ConfigError(f"nonlinearity: {exc}") from exc

    def curve(self):
        s = self.data["geometry"]
        n = _num(self.data, "geometry.n_vertices", 8, integer=True)
        center = _list(self.data, "geometry.center", 2)
        try:
            if s["shape"] == "circle":
                return ConvexCurve.circle(_num(self.data, "geometry.radius", 1e-9), n, center)
            if s["shape"] == "ellipse":
                return ConvexCurve.ellipse(_num(self.data, "geometry.a", 1e-9), _num(self.data, "geometry.b", 1e-9),
                                           n, center)
            if s["shape"] == "polygon":
                if not s["file"]:
                    raise ConfigError("geometry.file is required for shape 'polygon'")
                path = self._resolve(s["file"])
                if not path.exists():
                    raise ConfigError(f"geometry.file not found: {path}")
                curve = read_polygon_csv(path)
                fan = _num(self.data, "geometry.corner_fan", 0, integer=True)
                return ConvexCurve.from_polygon(curve.vertices, fan) if fan else curve
        except GeometryError as exc:
            raise ConfigError(f"geometry: {exc}") from exc
        raise ConfigError(f"geometry.shape must be circle, ellipse or polygon, not {s['shape']!r}")

    def measure_config(self):
        try:
            return SpeedMeasurementConfig(sigma=_num(self.data, "speed.measure.sigma"),
                                          fit_window=tuple(_list(self.data, "speed.measure.fit_window", 2)),
                                          h=_num(self.data, "speed.measure.h", 1e-3, 1.0),
                                          width_periods=_num(self.data, "speed.measure.width_periods", 1,
                                                             integer=True),
                                          workers=self.workers)
        except SpeedError as exc:
            raise ConfigError(f"speed.measure: {exc}") from exc

    def oracle_kwargs(self):
        cg = _list(self.data, "speed.oracle.cell_grid", 2)
        lb = _list(self.data, "speed.oracle.lam_bounds", 2)
        if not 0 < lb[0] < lb[1]:
            raise ConfigError("speed.oracle.lam_bounds must be increasing and positive")
        return {"cell_grid": (int(cg[0]), int(cg[1])), "lam_bounds": tuple(lb),
                "tol": _num(self.data, "speed.oracle.tol", 1e-12, 1e-1)}

    def speed_table(self, nl=None):
        s = self.data["speed"]
        if s["table"]:
            path = self._resolve(s["table"])
            if not path.exists():
                raise ConfigError(f"speed.table not found: {path}")
            return read_speed_table(path)
        n_theta = _num(self.data, "speed.n_theta", 8, integer=True)
        if s["method"] == "constant":
            return SpeedTable.constant(_num(self.data, "speed.value", 1e-12), n_theta)
        nl = self.nonlinearity() if nl is None else nl
        return build_speed_table(nl, n_theta, s["method"], self.measure_config(), self.oracle_kwargs())

    def scaled_run(self, curve):
        try:
            return ScaledRunConfig(_num(self.data, "simulate.epsilon", 0, 1), _num(self.data, "simulate.T", 0),
                                   curve, m=_num(self.data, "simulate.m"), w=_num(self.data, "simulate.w"),
                                   h=_num(self.data, "simulate.h", 1e-3, 1.0),
                                   snapshot_times=tuple(_list(self.data, "simulate.times")),
                                   pad=_num(self.data, "simulate.pad", 0),
                                   node_cap=_num(self.data, "simulate.node_cap", 1, integer=True),
                                   workers=self.workers)
        except SolverError as exc:
            raise ConfigError(f"simulate: {exc}") from exc

    def convergence(self, nl, curve, table):
        try:
            return ConvergenceConfig(tuple(_list(self.data, "converge.epsilons")), _num(self.data, "converge.beta"),
                                     _num(self.data, "converge.tau"), _num(self.data, "converge.T"),
                                     tuple(_list(self.data, "converge.times")), nl, curve, table,
                                     eta=_num(self.data, "converge.eta"), m=_num(self.data, "converge.m"),
                                     w=_num(self.data, "converge.w"), h=_num(self.data, "converge.h", 1e-3, 1.0),
                                     pad=_num(self.data, "converge.pad", 0),
                                     node_cap=_num(self.data, "converge.node_cap", 1, integer=True),
                                     workers=self.workers)
        except HarnessError as exc:
            raise ConfigError(f"converge: {exc}") from exc

    def _resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    # -- eager validation -------------------------------------------------------

    def validate(self):
        """Build every cheap object once so that bad values fail up front."""
        _num(self.data, "workers", 1, integer=True)
        nl = self.nonlinearity()
        curve = self.curve()
        s = self.data["speed"]
        if s["method"] not in ("hybrid", "measured", "kpp_oracle", "constant"):
            raise ConfigError(f"speed.method {s['method']!r} is not one of hybrid, measured, kpp_oracle, constant")
        _num(self.data, "speed.n_theta", 8, integer=True)
        if s["method"] == "constant":
            _num(self.data, "speed.value", 1e-12)
        if s["table"] and not self._resolve(s["table"]).exists():
            raise ConfigError(f"speed.table not found: {self._resolve(s['table'])}")
        self.measure_config()
        self.oracle_kwargs()
        _num(self.data, "hopf.delta", 0, allow_none=True)
        if any(t < 0 for t in _list(self.data, "hopf.times")):
            raise ConfigError("hopf.times must be nonnegative")
        _num(self.data, "hopf.grid_h", 1e-6, allow_none=True)
        _num(self.data, "hopf.margin", 0)
        j = self.data["hj"]
        if j["mode"] not in ("lf", "viscous"):
            raise ConfigError("hj.mode must be 'lf' or 'viscous'")
        _num(self.data, "hj.h", 1e-6)
        _num(self.data, "hj.margin", 0)
        T = _num(self.data, "hj.T", 0)
        if any(t < 0 or t > T for t in _list(self.data, "hj.times")):
            raise ConfigError("hj.times must lie in [0, hj.T]")
        _num(self.data, "hj.alpha", 1e-12)
        alphas = _list(self.data, "hj.alphas")
        if not alphas or any(a <= 0 for a in alphas) or any(b >= a for a, b in zip(alphas, alphas[1:])):
            raise ConfigError("hj.alphas must be positive and strictly decreasing")
        _num(self.data, "hj.sigma", 1e-12, 0.1, allow_none=True)
        run = self.scaled_run(curve)
        if any(t < 0 or t > run.T for t in run.snapshot_times):
            raise ConfigError("simulate.times must lie in [0, simulate.T]")
        self.convergence(nl, curve, SpeedTable.constant(1.0))
        g = "converge.generation"
        eps = _list(self.data, g + ".epsilons")
        if not eps or any(e <= 0 or e > 1 for e in eps):
            raise ConfigError(f"{g}.epsilons must lie in (0, 1]")
        _num(self.data, g + ".eta", 0, 1)
        _num(self.data, g + ".m", 0, 1)
        _num(self.data, g + ".w", 1e-12)
        _num(self.data, g + ".beta_gen", 1e-12)
        _num(self.data, g + ".horizon", 1e-12)
        return self


def load_config(path):
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    raw = path.read_bytes()
    try:
        data = yaml.safe_load(raw) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    merged = _merge(SCHEMA, data, "")
    return RunConfig(merged, path.parent.resolve(), hashlib.sha256(raw).hexdigest()).validate()


def from_dict(data, base_dir="."):
    merged = _merge(SCHEMA, data, "")
    raw = yaml.safe_dump(data, sort_keys=True).encode()
    return RunConfig(merged, Path(base_dir).resolve(), hashlib.sha256(raw).hexdigest()).validate()
