"""Experiment configuration: a single JSON document with scalar overrides.

Example::

    {
      "f": {"type": "rational", "num": [2], "den": [1, 1]},
      "g": {"type": "rational", "num": [1], "den": [4, 1]},
      "pattern": {"gaps": [[-3, -2]]},
      "weight": {"type": "exp_window", "rate": 1.0, "t_max": 5.0},
      "grid": {"cutoff": 64, "n_freq": 8192, "dt": 0.05, "T_h": 8, "T_obs": 12},
      "classes": {"f": {...}, "g": {...}},
      "seed": 20240601
    }
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigParse
from .filtering import TOL_DUAL, TOL_LEAK, TOL_MSE, TOL_ORTH, FilterOptions
from .minimax import DAMPING, MAX_ITER, TOL_BUDGET, TOL_FP, TOL_SADDLE, LFDOptions, class_from_spec
from .operators import COND_MAX, KERNELS
from .problem import FilterProblem, build_problem, pattern_from_spec, weight_from_spec
from .spectra import FrequencyGrid, density_from_spec


@dataclass
class GridConfig:
    cutoff: float | None = None
    n_freq: int = 8192
    dt: float | None = None
    T_h: float | None = None
    T_obs: float | None = None


@dataclass
class SolverConfig:
    r_gap_kernel: str = "mirrored"
    horizon: float | None = None
    method: str = "direct"
    cond_max: float = COND_MAX
    max_iter: int = MAX_ITER
    tol_fp: float = TOL_FP
    damping: float = DAMPING


@dataclass
class Tolerances:
    tol_orth: float = TOL_ORTH
    tol_leak: float = TOL_LEAK
    tol_mse: float = TOL_MSE
    tol_dual: float = TOL_DUAL
    tol_oracle: float = 0.02
    tol_z: float = 3.0
    tol_budget: float = TOL_BUDGET
    tol_saddle: float = TOL_SADDLE


@dataclass
class Config:
    f: dict
    g: dict
    weight: dict
    pattern: dict = field(default_factory=lambda: {"gaps": []})
    grid: GridConfig = field(default_factory=GridConfig)
    classes: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    tolerances: Tolerances = field(default_factory=Tolerances)
    trials: int = 10000
    n_density_samples: int = 100
    n_perturbations: int = 20
    output: str = "out"
    seed: int = 0

    # ------------------------------------------------------------------
    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of the settings that affect results; the output location is excluded."""
        data = self.to_dict()
        data.pop("output", None)
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()[:16]

    def filter_options(self) -> FilterOptions:
        s, t = self.solver, self.tolerances
        return FilterOptions(
            horizon=s.horizon, r_gap_kernel=s.r_gap_kernel, method=s.method, cond_max=s.cond_max,
            tol_orth=t.tol_orth, tol_leak=t.tol_leak, tol_mse=t.tol_mse,
        )

    def lfd_options(self) -> LFDOptions:
        s = self.solver
        return LFDOptions(max_iter=s.max_iter, tol_fp=s.tol_fp, tol_budget=self.tolerances.tol_budget,
                          damping=s.damping, r_gap_kernel=s.r_gap_kernel)

    def densities(self):
        return density_from_spec(self.f), density_from_spec(self.g)

    def frequency_grid(self) -> FrequencyGrid:
        gc = self.grid
        if gc.dt is None and gc.cutoff is None:
            raise ConfigParse("grid needs 'dt' or 'cutoff'")
        try:
            return FrequencyGrid.matched(gc.dt if gc.dt is not None else math.pi / gc.cutoff, gc.n_freq)
        except (TypeError, ValueError, ZeroDivisionError) as exc:
            raise ConfigParse(f"bad grid section: {exc}") from exc

    def problem(self) -> FilterProblem:
        gc = self.grid
        return build_problem(
            pattern_from_spec(self.pattern), weight_from_spec(self.weight),
            dt=gc.dt, horizon=gc.T_h, obs_horizon=gc.T_obs, n_freq=gc.n_freq, cutoff=gc.cutoff,
        )

    def density_classes(self, grid):
        if "f" not in self.classes or "g" not in self.classes:
            raise ConfigParse("config needs 'classes' with entries 'f' and 'g'")
        return class_from_spec(self.classes["f"], grid), class_from_spec(self.classes["g"], grid)


_SECTIONS = {"grid": GridConfig, "solver": SolverConfig, "tolerances": Tolerances}
_REQUIRED = ("f", "g", "weight")


def _section(cls, data, name):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigParse(f"'{name}' must be an object")
    known = {f.name for f in fields(cls)}
    extra = set(data) - known
    if extra:
        raise ConfigParse(f"unknown keys in '{name}': {sorted(extra)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigParse(f"bad '{name}' section: {exc}") from exc


def parse_config(data: dict) -> Config:
    """Validate a config document and build a :class:`Config`."""
    if not isinstance(data, dict):
        raise ConfigParse("config must be a JSON object")
    known = {f.name for f in fields(Config)}
    extra = set(data) - known
    if extra:
        raise ConfigParse(f"unknown config keys: {sorted(extra)}")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise ConfigParse(f"config is missing {missing}")
    kw = {k: v for k, v in data.items() if k not in _SECTIONS}
    for name, cls in _SECTIONS.items():
        kw[name] = _section(cls, data.get(name), name)
    if kw.get("pattern") is None:
        kw["pattern"] = {"gaps": []}
    cfg = Config(**kw)
    _check(cfg)
    return cfg


def _check(cfg: Config) -> None:
    """Parse every referenced spec so that malformed input fails early."""
    for spec in (cfg.f, cfg.g):
        density_from_spec(spec)
    weight_from_spec(cfg.weight)
    pattern_from_spec(cfg.pattern)
    if not isinstance(cfg.classes, dict):
        raise ConfigParse("'classes' must be an object")
    grid = cfg.frequency_grid()
    for key, spec in cfg.classes.items():
        if key not in ("f", "g"):
            raise ConfigParse(f"unknown class entry {key!r}")
        class_from_spec(spec, grid)
    if cfg.solver.r_gap_kernel not in KERNELS:
        raise ConfigParse(f"r_gap_kernel must be one of {KERNELS}")
    if cfg.solver.method not in ("direct", "cg"):
        raise ConfigParse("solver.method must be 'direct' or 'cg'")
    for name in ("trials", "n_density_samples", "n_perturbations", "seed"):
        value = getattr(cfg, name)
        if not isinstance(value, int) or isinstance(value, bool) or value < 0:
            raise ConfigParse(f"'{name}' must be a nonnegative integer")


def emit_config(cfg: Config) -> str:
    return json.dumps(cfg.to_dict(), sort_keys=True, indent=2)


def normalize(data: dict) -> dict:
    """Canonical form: defaults filled in, keys sorted."""
    return json.loads(emit_config(parse_config(copy.deepcopy(data))))


def load_config(path) -> Config:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigParse(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"config {path} is not valid JSON: {exc}") from exc
    return parse_config(data)


def _coerce(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: Config, assignments) -> Config:
    """Apply ``dotted.key=value`` assignments to scalar fields."""
    data = cfg.to_dict()
    for item in assignments or ():
        if "=" not in item:
            raise ConfigParse(f"override {item!r} is not of the form key=value")
        key, value = item.split("=", 1)
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigParse(f"override key {key!r} does not name a config field")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigParse(f"override key {key!r} does not name a config field")
        node[parts[-1]] = _coerce(value)
    return parse_config(data)
