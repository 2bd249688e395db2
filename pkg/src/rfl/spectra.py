"""Spectral densities, frequency grids and spectral quadrature.

Densities are even, nonnegative functions of angular frequency. All
integrals over the real line are truncated to a uniform grid on
``[-cutoff, cutoff)`` and evaluated with the periodic trapezoid rule, the
node at ``-cutoff`` standing in for both ends of the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import (
    ConfigParse,
    MinimalityViolated,
    NegativeDensity,
    PoleOnGrid,
    UnresolvableLag,
    ZeroDenominator,
)

TWO_PI = 2.0 * math.pi

TOL_NEG = 1e-12
DIV_FACTOR = 1.5
ISO_MAX = 2


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform grid ``lambda_m = -cutoff + m * spacing``, ``m = 0..n-1``."""

    cutoff: float
    n: int

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if self.n <= 0 or self.n % 2:
            raise ValueError(f"point count must be a positive even integer, got {self.n}")

    @classmethod
    def matched(cls, dt: float, n: int) -> "FrequencyGrid":
        """Grid whose cutoff is the Nyquist frequency ``pi / dt`` of a time lattice.

        On such a grid the exponentials ``exp(i lambda t_k)`` for lattice times
        within one period ``n * dt`` are exactly orthogonal.
        """
        return cls(math.pi / dt, n)

    @property
    def spacing(self) -> float:
        return 2.0 * self.cutoff / self.n

    @cached_property
    def points(self) -> np.ndarray:
        pts = -self.cutoff + self.spacing * np.arange(self.n)
        pts.setflags(write=False)
        return pts

    @property
    def max_lag(self) -> float:
        return math.pi / self.spacing

    @property
    def period(self) -> float:
        """Time period of the kernels produced on this grid."""
        return TWO_PI / self.spacing

    def doubled(self) -> "FrequencyGrid":
        return FrequencyGrid(2.0 * self.cutoff, 2 * self.n)

    def integrate(self, values: np.ndarray) -> float | complex:
        """``(1/2pi) * integral`` of ``values`` over the grid."""
        return self.spacing / TWO_PI * np.sum(values)


# --------------------------------------------------------------------------
# densities


class SpectralDensity:
    """Base class; subclasses implement ``__call__`` on arrays of frequencies."""

    extrapolates = True

    def __call__(self, lam):
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    def __add__(self, other):
        if not isinstance(other, SpectralDensity):
            return NotImplemented
        return Sum((self, other))

    def __mul__(self, factor):
        return Scaled(self, float(factor))

    __rmul__ = __mul__


@dataclass(frozen=True)
class Rational(SpectralDensity):
    """``p(lambda^2) / q(lambda^2)`` with coefficients listed by increasing power."""

    num: tuple
    den: tuple

    def __post_init__(self):
        object.__setattr__(self, "num", tuple(float(c) for c in self.num))
        object.__setattr__(self, "den", tuple(float(c) for c in self.den))
        if not self.den or not any(self.den):
            raise ValueError("denominator polynomial is identically zero")
        deg_num = _degree(self.num)
        deg_den = _degree(self.den)
        if deg_num >= deg_den:
            raise ValueError("rational density is not integrable: deg(num) >= deg(den)")

    def denominator(self, lam):
        return _poly_even(self.den, lam)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        return _poly_even(self.num, lam) / _poly_even(self.den, lam)

    def to_spec(self):
        return {"type": "rational", "num": list(self.num), "den": list(self.den)}


@dataclass(frozen=True)
class Tabulated(SpectralDensity):
    """Table on ``lambda >= 0``, mirrored to negative frequencies.

    Linear interpolation between nodes; zero outside the table.
    """

    lam: tuple
    values: tuple

    extrapolates = False

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if lam.ndim != 1 or lam.shape != vals.shape or lam.size < 1:
            raise ValueError("tabulated density needs matching 1-d lambda and values")
        if np.any(lam < 0) or np.any(np.diff(lam) <= 0):
            raise ValueError("tabulated frequencies must be nonnegative and strictly increasing")
        object.__setattr__(self, "lam", tuple(lam.tolist()))
        object.__setattr__(self, "values", tuple(vals.tolist()))

    @classmethod
    def from_grid(cls, values: np.ndarray, grid: FrequencyGrid) -> "Tabulated":
        """Fold grid values onto ``|lambda|``, averaging the two halves."""
        values = np.asarray(values, dtype=float)
        lam = grid.points
        half = grid.n // 2
        # index half is lambda = 0; index 0 is -cutoff, the mirror of +cutoff
        pos = values[half:]
        neg = values[half:0:-1]
        folded = np.empty(half + 1)
        folded[0] = values[half]
        folded[1:half] = 0.5 * (pos[1:] + neg[1:half])
        folded[half] = values[0]
        nodes = np.append(lam[half:], grid.cutoff)
        return cls(tuple(nodes), tuple(folded))

    @cached_property
    def _arrays(self):
        return np.asarray(self.lam), np.asarray(self.values)

    def __call__(self, lam):
        nodes, vals = self._arrays
        return np.interp(np.abs(np.asarray(lam, dtype=float)), nodes, vals, left=0.0, right=0.0)

    def to_spec(self):
        return {"type": "tabulated", "lambda": list(self.lam), "values": list(self.values)}


@dataclass(frozen=True)
class Scaled(SpectralDensity):
    base: SpectralDensity
    factor: float

    def __post_init__(self):
        if self.factor < 0:
            raise ValueError("scale factor must be nonnegative")

    @property
    def extrapolates(self):
        return self.base.extrapolates

    def __call__(self, lam):
        return self.factor * self.base(lam)

    def to_spec(self):
        return {"type": "scaled", "base": self.base.to_spec(), "factor": self.factor}


@dataclass(frozen=True)
class Sum(SpectralDensity):
    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    @property
    def extrapolates(self):
        return all(t.extrapolates for t in self.terms)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=float)
        out = np.zeros_like(lam)
        for t in self.terms:
            out = out + t(lam)
        return out

    def to_spec(self):
        return {"type": "sum", "terms": [t.to_spec() for t in self.terms]}


def ou_density(variance: float, rate: float) -> Rational:
    """Density of the covariance ``variance * exp(-rate |tau|)``."""
    return Rational((2.0 * rate * variance,), (rate * rate, 1.0))


def _degree(coefs) -> int:
    nz = [k for k, c in enumerate(coefs) if c != 0.0]
    return nz[-1] if nz else -1


def _poly_even(coefs, lam):
    lam2 = np.asarray(lam, dtype=float) ** 2
    out = np.zeros_like(lam2)
    for c in reversed(coefs):
        out = out * lam2 + c
    return out


def density_from_spec(spec: dict) -> SpectralDensity:
    """Build a density from its config fragment."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigParse(f"density spec must be an object with a 'type': {spec!r}")
    kind = spec["type"]
    try:
        if kind == "rational":
            return Rational(tuple(spec["num"]), tuple(spec["den"]))
        if kind == "tabulated":
            return Tabulated(tuple(spec["lambda"]), tuple(spec["values"]))
        if kind == "scaled":
            return Scaled(density_from_spec(spec["base"]), float(spec["factor"]))
        if kind == "sum":
            return Sum(tuple(density_from_spec(t) for t in spec["terms"]))
        if kind == "ou":
            return ou_density(float(spec["variance"]), float(spec["rate"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigParse(f"bad {kind} density spec: {exc}") from exc
    raise ConfigParse(f"unknown density type {kind!r}")


# --------------------------------------------------------------------------
# operations


def eval_density(d: SpectralDensity, grid: FrequencyGrid | np.ndarray, tol_neg: float = TOL_NEG) -> np.ndarray:
    """Evaluate ``d`` on a grid (or an array of frequencies)."""
    lam = grid.points if isinstance(grid, FrequencyGrid) else np.asarray(grid, dtype=float)
    for term in _rational_terms(d):
        den = term.denominator(lam)
        scale = max(1.0, max(abs(c) for c in term.den))
        if np.any(np.abs(den) < np.finfo(float).eps * scale):
            raise PoleOnGrid(f"denominator of {term} vanishes on the grid")
    values = np.asarray(d(lam), dtype=float)
    if not np.all(np.isfinite(values)):
        raise PoleOnGrid("density is not finite on the grid")
    if np.any(values < -tol_neg):
        raise NegativeDensity(f"density takes negative value {values.min():.3e}")
    return values


def _rational_terms(d):
    if isinstance(d, Rational):
        yield d
    elif isinstance(d, Scaled):
        yield from _rational_terms(d.base)
    elif isinstance(d, Sum):
        for t in d.terms:
            yield from _rational_terms(t)


def power(d: SpectralDensity | np.ndarray, grid: FrequencyGrid) -> float:
    """Total power ``(1/2pi) integral d`` on the truncated grid."""
    values = d if isinstance(d, np.ndarray) else eval_density(d, grid)
    return float(grid.integrate(values))


def weighted_covariance(weights: np.ndarray, grid: FrequencyGrid, tau, chunk: int = 256):
    """Kernel ``(1/2pi) integral w(lambda) exp(i lambda tau) d lambda``.

    ``weights`` are values on ``grid`` and are assumed even, so the node at
    ``-cutoff`` contributes ``w_0 cos(cutoff * tau)`` (both interval ends).
    Accepts scalar or array ``tau``; returns a complex array of the same shape.
    """
    w = np.asarray(weights)
    if w.shape != (grid.n,):
        raise ValueError(f"weights must have shape ({grid.n},), got {w.shape}")
    tau = np.asarray(tau, dtype=float)
    if np.any(np.abs(tau) > grid.max_lag * (1 + 1e-12)):
        raise UnresolvableLag(
            f"lag {np.abs(tau).max():.4g} exceeds the resolvable lag {grid.max_lag:.4g}"
        )
    flat = tau.ravel()
    lam = grid.points[1:]
    out = np.empty(flat.size, dtype=complex)
    scale = grid.spacing / TWO_PI
    for start in range(0, flat.size, chunk):
        t = flat[start:start + chunk]
        phase = np.exp(1j * np.outer(t, lam))
        out[start:start + chunk] = scale * (phase @ w[1:] + w[0] * np.cos(grid.cutoff * t))
    return out.reshape(tau.shape)


def triangle_probe(lam) -> np.ndarray:
    """Transform of the unit triangle on ``[0, 2]``: ``exp(i lambda) sinc^2(lambda / 2)``."""
    lam = np.asarray(lam, dtype=float)
    return np.exp(1j * lam) * np.sinc(lam / TWO_PI) ** 2


def _minimality_sum(f, g, grid, transform, iso_max):
    lam = grid.points
    fv = f if isinstance(f, np.ndarray) else eval_density(f, grid)
    gv = g if isinstance(g, np.ndarray) else eval_density(g, grid)
    total = fv + gv
    gamma2 = np.abs(np.asarray(transform(lam))) ** 2
    zero = total <= 0
    if np.count_nonzero(zero) > iso_max:
        raise ZeroDenominator(f"f + g vanishes at {np.count_nonzero(zero)} grid points")
    integrand = np.where(zero, 0.0, gamma2 / np.where(zero, 1.0, total))
    return float(grid.integrate(integrand))


def minimality_integral(
    f: SpectralDensity,
    g: SpectralDensity,
    grid: FrequencyGrid,
    transform: Callable | None = None,
    div_factor: float = DIV_FACTOR,
    iso_max: int = ISO_MAX,
) -> float:
    """Truncated ``(1/2pi) integral |gamma|^2 / (f + g)``.

    ``gamma`` defaults to :func:`triangle_probe`. When both densities can be
    evaluated off the table, the integral is recomputed with the cutoff
    doubled and :class:`MinimalityViolated` is raised if it grows by more
    than ``div_factor``.
    """
    transform = triangle_probe if transform is None else transform
    value = _minimality_sum(f, g, grid, transform, iso_max)
    extrapolates = all(
        isinstance(d, SpectralDensity) and d.extrapolates for d in (f, g)
    )
    if extrapolates and value > 0:
        doubled = _minimality_sum(f, g, grid.doubled(), transform, iso_max)
        if doubled > div_factor * value:
            raise MinimalityViolated(
                f"minimality integral grows from {value:.4g} to {doubled:.4g} when the cutoff doubles"
            )
    if not math.isfinite(value):
        raise MinimalityViolated("minimality integral is not finite")
    return value
