"""Observation geometry and the functional weight.

Time grids live on the global lattice ``k * dt``. The target grid holds the
unobserved lattice nodes (the gaps ``S`` and the half-line ``[0, T_h]``); the
observation grid holds the observed nodes in ``[-T_obs, 0]`` outside ``S``.
The origin belongs to both: it is observed, so the solution function ``c``
is pinned to zero there (``TargetGrid.active`` excludes it).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import trapezoid

from .errors import ConfigParse, GapTouchesOrigin, GapUnderResolved, OverlappingGaps, ValidationError
from .spectra import FrequencyGrid

log = logging.getLogger(__name__)

_EDGE = 1e-9


@dataclass(frozen=True)
class MissingPattern:
    """Closed gaps ``[l, r]`` on the negative half-line, nearest to the origin first."""

    gaps: tuple = ()

    def __post_init__(self):
        gaps = tuple((float(l), float(r)) for l, r in self.gaps)
        for l, r in gaps:
            if not l < r:
                raise ValidationError(f"gap [{l}, {r}] is empty")
            if r >= 0:
                raise GapTouchesOrigin(f"gap [{l}, {r}] reaches the origin")
        gaps = tuple(sorted(gaps, key=lambda g: -g[1]))
        for (l0, _), (_, r1) in zip(gaps, gaps[1:]):
            if r1 >= l0:
                raise OverlappingGaps(f"gaps overlap or touch near {l0}")
        object.__setattr__(self, "gaps", gaps)

    @classmethod
    def from_segments(cls, segments) -> "MissingPattern":
        """Gaps from ``(K_l, N_l)`` pairs: ``M_l = sum_{k<=l} (N_k + K_k)``,
        gap ``l`` is ``[-M_l - N_l, -M_l]``."""
        gaps = []
        m = 0.0
        for k, n in segments:
            if not (k > 0 and n > 0):
                raise ValidationError(f"segment (K={k}, N={n}) must have positive lengths")
            m += n + k
            gaps.append((-m - n, -m))
        return cls(tuple(gaps))

    @property
    def mirror(self) -> tuple:
        return tuple((-r, -l) for l, r in self.gaps)

    @property
    def depth(self) -> float:
        """Distance from the origin to the far end of the deepest gap."""
        return max((-l for l, _ in self.gaps), default=0.0)

    def in_gaps(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=bool)
        for l, r in self.gaps:
            out |= (t >= l) & (t <= r)
        return out

    def in_mirror(self, t) -> np.ndarray:
        return self.in_gaps(-np.asarray(t, dtype=float))

    def in_support(self, t) -> np.ndarray:
        """Membership in ``R^s = [0, inf) \\ S+``."""
        t = np.asarray(t, dtype=float)
        return (t >= 0) & ~self.in_mirror(t)

    def to_spec(self) -> dict:
        return {"gaps": [list(g) for g in self.gaps]}


def build_pattern(segments=None, gaps=None) -> MissingPattern:
    """Pattern from explicit intervals or from ``(K, N)`` segments."""
    if gaps is not None:
        return MissingPattern(tuple(tuple(g) for g in gaps))
    return MissingPattern.from_segments(segments or [])


def pattern_from_spec(spec: dict) -> MissingPattern:
    if spec is None:
        return MissingPattern()
    if not isinstance(spec, dict):
        raise ConfigParse(f"pattern spec must be an object: {spec!r}")
    try:
        if "gaps" in spec:
            return build_pattern(gaps=spec["gaps"])
        if "segments" in spec:
            return build_pattern(segments=[(s["K"], s["N"]) for s in spec["segments"]])
    except (KeyError, TypeError) as exc:
        raise ConfigParse(f"bad pattern spec: {exc}") from exc
    raise ConfigParse("pattern spec needs 'gaps' or 'segments'")


# --------------------------------------------------------------------------
# weights


class WeightFunction:
    """A weight ``a(t)`` supported on ``[start, end]`` within ``[0, inf)``.

    ``raw`` evaluates the formula without the support cut; it is only used
    for one-sided limits at the support edges.
    """

    start = 0.0
    end = 0.0

    def raw(self, t):
        raise NotImplementedError

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= self.start) & (t <= self.end) & (self.end > self.start)
        return np.where(inside, self.raw(t), 0.0)

    def to_spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExpWindow(WeightFunction):
    rate: float
    t_max: float

    def __post_init__(self):
        if self.t_max < 0:
            raise ValidationError("t_max must be nonnegative")

    @property
    def end(self):
        return self.t_max

    def raw(self, t):
        return np.exp(-self.rate * np.asarray(t, dtype=float))

    def to_spec(self):
        return {"type": "exp_window", "rate": self.rate, "t_max": self.t_max}


@dataclass(frozen=True)
class TabulatedWeight(WeightFunction):
    """Piecewise-linear weight through ``(t, values)``; zero outside."""

    t: tuple
    values: tuple

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or t.size < 2:
            raise ValidationError("tabulated weight needs matching 1-d arrays of length >= 2")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValidationError("tabulated weight times must be nonnegative and increasing")
        object.__setattr__(self, "t", tuple(t.tolist()))
        object.__setattr__(self, "values", tuple(v.tolist()))

    @property
    def start(self):
        return self.t[0]

    @property
    def end(self):
        return self.t[-1]

    def raw(self, t):
        return np.interp(np.asarray(t, dtype=float), self.t, self.values)

    def to_spec(self):
        return {"type": "tabulated", "t": list(self.t), "values": list(self.values)}


def weight_from_spec(spec: dict) -> WeightFunction:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigParse(f"weight spec must be an object with a 'type': {spec!r}")
    try:
        if spec["type"] == "exp_window":
            return ExpWindow(float(spec["rate"]), float(spec["t_max"]))
        if spec["type"] == "tabulated":
            return TabulatedWeight(tuple(spec["t"]), tuple(spec["values"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParse(f"bad weight spec: {exc}") from exc
    raise ConfigParse(f"unknown weight type {spec['type']!r}")


def check_weight(a: WeightFunction, horizon: float, dt: float) -> tuple[float, float]:
    """Trapezoid values of ``int |a|`` and ``int t |a|^2`` on ``[0, horizon]``."""
    t = np.linspace(0.0, horizon, max(2, int(round(horizon / dt)) + 1))
    v = np.abs(a(t))
    l1 = float(trapezoid(v, t))
    l2 = float(trapezoid(t * v**2, t))
    if not (math.isfinite(l1) and math.isfinite(l2)):
        raise ValidationError("weight function violates the integrability conditions")
    return l1, l2


def truncate_weight(a: WeightFunction, horizon: float) -> WeightFunction:
    """``a`` on ``[0, horizon]``, zero beyond."""
    if isinstance(a, ExpWindow):
        if horizon >= a.t_max:
            return a
        return ExpWindow(a.rate, max(0.0, horizon))
    if isinstance(a, TabulatedWeight):
        t = np.asarray(a.t)
        if horizon >= t[-1]:
            return a
        if horizon <= t[0]:
            return TabulatedWeight((0.0, 1.0), (0.0, 0.0))
        keep = t < horizon
        nt = np.append(t[keep], horizon)
        nv = np.append(np.asarray(a.values)[keep], a.raw(horizon))
        return TabulatedWeight(tuple(nt), tuple(nv))
    raise TypeError(f"cannot truncate {type(a).__name__}")


# --------------------------------------------------------------------------
# grids


def _lattice(lo: float, hi: float, dt: float) -> np.ndarray:
    k0 = math.ceil(lo / dt - _EDGE)
    k1 = math.floor(hi / dt + _EDGE)
    return np.arange(k0, k1 + 1) * dt


@dataclass(frozen=True, eq=False)
class TargetGrid:
    """Lattice nodes of ``S`` followed by those of ``[0, T_h]``."""

    times: np.ndarray
    dt: float
    horizon: float
    gap_index: tuple
    half_index: np.ndarray

    @property
    def size(self) -> int:
        return self.times.size

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self.size, self.dt)

    @cached_property
    def active(self) -> np.ndarray:
        """Nodes where the solution function is unknown (all but the origin)."""
        return np.abs(self.times) > _EDGE * self.dt

    @cached_property
    def in_gaps(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for idx in self.gap_index:
            mask[idx] = True
        return mask


def build_target_grid(pattern: MissingPattern, horizon: float, dt: float) -> TargetGrid:
    if not dt > 0 or not horizon > 0:
        raise ValidationError("time step and horizon must be positive")
    pieces = []
    gap_index = []
    start = 0
    for l, r in reversed(pattern.gaps):
        nodes = _lattice(l, r, dt)
        if nodes.size < 2:
            raise GapUnderResolved(f"gap [{l}, {r}] holds {nodes.size} lattice node(s) at dt={dt}")
        pieces.append(nodes)
        gap_index.append(np.arange(start, start + nodes.size))
        start += nodes.size
    half = _lattice(0.0, horizon, dt)
    pieces.append(half)
    times = np.concatenate(pieces)
    # snap to exact lattice multiples
    times = np.round(times / dt) * dt
    return TargetGrid(
        times=times,
        dt=dt,
        horizon=horizon,
        gap_index=tuple(gap_index),
        half_index=np.arange(start, start + half.size),
    )


def observation_grid(pattern: MissingPattern, obs_horizon: float, dt: float) -> np.ndarray:
    """Observed lattice nodes in ``[-obs_horizon, 0]`` outside the gaps."""
    t = np.round(_lattice(-obs_horizon, 0.0, dt) / dt) * dt
    return t[~pattern.in_gaps(t)]


def extend_weight(a: WeightFunction, pattern: MissingPattern, times) -> np.ndarray:
    """Extended weight on grid nodes: ``a`` on ``R^s``, zero on ``S`` and ``S+``.

    At a jump of the extension the node takes the mean of the one-sided
    limits, so that plain lattice sums integrate the pieces by the trapezoid
    rule.
    """
    t = np.asarray(times, dtype=float)
    eps = _EDGE * max(1.0, float(np.max(np.abs(t), initial=1.0)))

    def member(s):
        return pattern.in_support(s) & (s >= a.start) & (s <= a.end) & (a.end > a.start)

    left = member(t - eps)
    right = member(t + eps)
    return 0.5 * (left.astype(float) + right.astype(float)) * a.raw(t)


def weight_transform(
    a: WeightFunction,
    pattern: MissingPattern,
    grid: FrequencyGrid,
    dt: float | None = None,
    target: TargetGrid | None = None,
) -> np.ndarray:
    """``A(lambda) = int_{R^s} a(t) exp(-i t lambda) dt`` by lattice quadrature.

    Uses the target grid nodes when given, otherwise a lattice with step
    ``dt`` (default ``pi / cutoff``) covering the support of ``a``.
    """
    if target is None:
        dt = math.pi / grid.cutoff if dt is None else dt
        times = _lattice(0.0, max(a.end, dt), dt)
        weights = np.full(times.size, dt)
    else:
        times, weights = target.times, target.weights
    ahat = extend_weight(a, pattern, times)
    nz = ahat != 0
    phase = np.exp(-1j * np.outer(grid.points, times[nz]))
    return phase @ (weights[nz] * ahat[nz])


# --------------------------------------------------------------------------
# the assembled problem


@dataclass(frozen=True, eq=False)
class FilterProblem:
    pattern: MissingPattern
    weight: WeightFunction
    target: TargetGrid
    obs_times: np.ndarray
    freq: FrequencyGrid
    obs_horizon: float
    cutoff_requested: float | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return self.target.dt

    @cached_property
    def ahat(self) -> np.ndarray:
        return extend_weight(self.weight, self.pattern, self.target.times)

    @cached_property
    def fourier(self) -> np.ndarray:
        """``E[m, k] = exp(i lambda_m t_k)`` on the target grid."""
        from .operators import fourier_matrix

        return fourier_matrix(self.target.times, self.freq)

    @cached_property
    def transform(self) -> np.ndarray:
        """``A(lambda)`` on the frequency grid, by the same quadrature as the operators."""
        return np.conj(self.fourier) @ (self.target.weights * self.ahat)

    def with_weight(self, weight: WeightFunction) -> "FilterProblem":
        return FilterProblem(
            self.pattern, weight, self.target, self.obs_times, self.freq,
            self.obs_horizon, self.cutoff_requested, dict(self.meta),
        )

    def with_pattern(self, pattern: MissingPattern) -> "FilterProblem":
        return build_problem(
            pattern, self.weight, dt=self.dt, horizon=self.target.horizon,
            obs_horizon=self.obs_horizon, n_freq=self.freq.n, cutoff=self.cutoff_requested,
        )

    def describe(self) -> dict:
        return {
            "dt": self.dt,
            "horizon": self.target.horizon,
            "obs_horizon": self.obs_horizon,
            "n_freq": self.freq.n,
            "cutoff_used": self.freq.cutoff,
            "cutoff_requested": self.cutoff_requested,
            "n_target": int(self.target.size),
            "n_obs": int(self.obs_times.size),
        }


def correlation_length(d_values: np.ndarray, grid: FrequencyGrid) -> float:
    """Lag at which the covariance first falls below ``1/e`` of its peak."""
    from .spectra import weighted_covariance

    lags = np.linspace(0.0, min(grid.max_lag, 200.0), 2001)
    r = weighted_covariance(d_values, grid, lags).real
    below = np.nonzero(r < r[0] / math.e)[0]
    return float(lags[below[0]]) if below.size else float(lags[-1])


def build_problem(
    pattern: MissingPattern,
    weight: WeightFunction,
    dt: float | None = None,
    horizon: float | None = None,
    obs_horizon: float | None = None,
    n_freq: int = 8192,
    cutoff: float | None = None,
    corr_length: float = 1.0,
) -> FilterProblem:
    """Assemble a problem on matched grids.

    The frequency cutoff is set to the Nyquist frequency ``pi / dt``; a
    requested ``cutoff`` is recorded and, when no ``dt`` is given, used to
    choose ``dt = pi / cutoff``. Default horizons add five correlation
    lengths to the gap depth and to the support of the weight.
    """
    if dt is None:
        if cutoff is None:
            raise ValidationError("need a time step or a frequency cutoff")
        dt = math.pi / cutoff
    if horizon is None:
        horizon = max(weight.end, pattern.depth) + 5.0 * corr_length
    if obs_horizon is None:
        obs_horizon = pattern.depth + 5.0 * corr_length
    freq = FrequencyGrid.matched(dt, n_freq)
    if freq.period < 2.0 * (horizon + obs_horizon):
        raise ValidationError(
            f"frequency grid period {freq.period:.4g} is too short for horizons "
            f"{horizon} + {obs_horizon}; increase n_freq"
        )
    if weight.end > horizon + _EDGE:
        log.warning("weight support ends at %s beyond the horizon %s; it is truncated", weight.end, horizon)
    if cutoff is not None and abs(cutoff - freq.cutoff) > 1e-9 * cutoff:
        log.info("frequency cutoff %.6g replaced by the lattice Nyquist frequency %.6g", cutoff, freq.cutoff)
    target = build_target_grid(pattern, horizon, dt)
    obs = observation_grid(pattern, obs_horizon, dt)
    return FilterProblem(pattern, weight, target, obs, freq, obs_horizon, cutoff)
