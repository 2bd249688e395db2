"""Least favorable densities and minimax-robust filters.

The optimal error ``D(f, g) = min_h Delta(h; f, g)`` is concave in the pair
of densities and its gradient at ``(f0, g0)`` is the pair of sensitivities

    h_f = |A g0 + C0|^2 / (f0 + g0)^2,    h_g = |A f0 - C0|^2 / (f0 + g0)^2.

A least favorable pair is therefore a fixed point of the best response to
these sensitivities within each class:

* L1 ball and contamination: ``f = max(low, beta |A g + C0| - g)``, which
  makes ``h_f`` equal to ``1 / beta^2`` wherever ``f`` rises above ``low``;
* L2 ball: ``f = center + kappa h_f``;
* known density: unchanged.

``beta`` and ``kappa`` are chosen so that the class budget holds with
equality. The iteration is damped and stops once successive iterates agree.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigParse, InfeasibleClass, MinimalityLost, NoConvergence, ValidationError
from .filtering import FilterOptions, FilterSolution, density_values, mse_direct, solve_filter, transform_C
from .operators import assemble_B, assemble_R, solve_c
from .problem import FilterProblem
from .spectra import FrequencyGrid, SpectralDensity, Tabulated, density_from_spec, minimality_integral

log = logging.getLogger(__name__)

TOL_FP = 1e-10
TOL_BUDGET = 1e-4
TOL_SADDLE = 1e-6
DAMPING = 0.5
MAX_ITER = 200


# --------------------------------------------------------------------------
# classes


@dataclass(frozen=True)
class DensityClass:
    """Admissible set around ``center``; subclasses define budget and best response."""

    center: SpectralDensity

    kind = "base"

    def center_values(self, grid: FrequencyGrid) -> np.ndarray:
        return density_values(self.center, grid)

    def validate(self, grid: FrequencyGrid) -> None:
        pass

    def budget(self, values, grid: FrequencyGrid) -> float:
        return 0.0

    @property
    def target(self) -> float:
        return 0.0

    def best_response(self, mag, other, sens, grid) -> tuple[np.ndarray, float]:
        return self.center_values(grid), 0.0

    def project(self, candidate, grid: FrequencyGrid) -> np.ndarray:
        return self.center_values(grid)

    def slackness(self, values, sens, multiplier, grid) -> float:
        return 0.0

    def to_spec(self) -> dict:
        return {"type": self.kind, "center": self.center.to_spec()}


@dataclass(frozen=True)
class Known(DensityClass):
    kind = "known"


@dataclass(frozen=True)
class _Ball(DensityClass):
    eps: float = 0.0

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValidationError(f"class radius must be nonnegative, got {self.eps}")

    @property
    def target(self) -> float:
        return self.eps

    def to_spec(self) -> dict:
        return {**super().to_spec(), "eps": self.eps}


def _solve_level(fun, target: float) -> float:
    """Root of the nondecreasing ``fun(x) = target`` for ``x > 0``, bracketed by doubling."""
    hi = 1.0
    while fun(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            raise ValidationError("budget cannot be reached")
    lo = hi / 2.0
    while lo > 1e-300 and fun(lo) >= target:
        lo /= 2.0
    if fun(lo) >= target:
        lo = 0.0
    return brentq(lambda x: fun(x) - target, lo, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps, maxiter=500)


def _envelope(low, mag, other, budget_fn, target, grid) -> tuple[np.ndarray, float]:
    """``max(low, beta mag - other)`` with ``budget_fn`` equal to ``target``; returns values and ``1/beta^2``."""
    if target <= 0 or not np.any(mag > 0) or budget_fn(low) >= target:
        return low.copy(), 0.0
    beta = _solve_level(lambda b: budget_fn(np.maximum(low, b * mag - other)), target)
    return np.maximum(low, beta * mag - other), 1.0 / beta**2


def _envelope_slackness(values, low, sens, level) -> float:
    """Relative spread of ``sens`` on the raised set plus its excess over the level elsewhere."""
    if level <= 0:
        return 0.0
    raised = values > low * (1 + 1e-9) + 1e-300
    spread = np.max(np.abs(sens[raised] - level), initial=0.0)
    excess = np.max(sens[~raised] - level, initial=0.0)
    return float(max(spread, excess) / level)


@dataclass(frozen=True)
class L1Ball(_Ball):
    """``(1/2pi) integral |f - center| <= eps``."""

    kind = "l1_ball"

    def budget(self, values, grid):
        return float(grid.integrate(np.abs(values - self.center_values(grid))))

    def best_response(self, mag, other, sens, grid):
        c = self.center_values(grid)
        return _envelope(c, mag, other, lambda v: self.budget(v, grid), self.eps, grid)

    def project(self, candidate, grid):
        c = self.center_values(grid)
        dev = np.asarray(candidate) - c
        b = float(grid.integrate(np.abs(dev)))
        return c + min(1.0, self.eps / b) * dev if b > 0 else c

    def slackness(self, values, sens, multiplier, grid):
        return _envelope_slackness(values, self.center_values(grid), sens, multiplier)


@dataclass(frozen=True)
class L2Ball(_Ball):
    """``(1/2pi) integral |f - center|^2 <= eps``."""

    kind = "l2_ball"

    def budget(self, values, grid):
        return float(grid.integrate((values - self.center_values(grid)) ** 2))

    def best_response(self, mag, other, sens, grid):
        c = self.center_values(grid)
        norm = float(grid.integrate(sens**2))
        if self.eps <= 0 or norm <= 0:
            return c, 0.0
        kappa = math.sqrt(self.eps / norm)
        return c + kappa * sens, 1.0 / kappa

    def project(self, candidate, grid):
        c = self.center_values(grid)
        dev = np.asarray(candidate) - c
        b = float(grid.integrate(dev**2))
        return c + min(1.0, math.sqrt(self.eps / b)) * dev if b > 0 else c

    def slackness(self, values, sens, multiplier, grid):
        if multiplier <= 0:
            return 0.0
        resid = sens - multiplier * (values - self.center_values(grid))
        return float(np.max(np.abs(resid)) / max(np.max(sens), np.finfo(float).tiny))


@dataclass(frozen=True)
class Contamination(_Ball):
    """``f >= (1 - eps) center`` with ``(1/2pi) integral f <= power``."""

    power: float = 0.0
    kind = "contamination"

    def __post_init__(self):
        super().__post_init__()
        if self.eps > 1:
            raise ValidationError("contamination level must lie in [0, 1]")

    @property
    def target(self) -> float:
        return self.power

    def lower(self, grid):
        return (1.0 - self.eps) * self.center_values(grid)

    def validate(self, grid):
        floor = float(grid.integrate(self.lower(grid)))
        if self.power < floor * (1 - 1e-12):
            raise InfeasibleClass(f"power bound {self.power:.6g} is below (1 - eps) * power(center) = {floor:.6g}")

    def budget(self, values, grid):
        return float(grid.integrate(values))

    def best_response(self, mag, other, sens, grid):
        if self.eps <= 0:
            return self.center_values(grid), 0.0
        return _envelope(self.lower(grid), mag, other, lambda v: self.budget(v, grid), self.power, grid)

    def project(self, candidate, grid):
        if self.eps <= 0:
            return self.center_values(grid)
        low = self.lower(grid)
        f = np.maximum(np.asarray(candidate, dtype=float), low)
        excess = f - low
        room = self.power - float(grid.integrate(low))
        mass = float(grid.integrate(excess))
        if mass > room:
            f = low + (room / mass) * excess if mass > 0 else low
        return f

    def slackness(self, values, sens, multiplier, grid):
        return _envelope_slackness(values, self.lower(grid), sens, multiplier)

    def to_spec(self) -> dict:
        return {**super().to_spec(), "power": self.power}


CLASS_TYPES = {"known": Known, "l1_ball": L1Ball, "l2_ball": L2Ball, "contamination": Contamination}


def class_from_spec(spec: dict, grid: FrequencyGrid | None = None) -> DensityClass:
    """Class from its config fragment.

    Contamination accepts an absolute ``power`` or a ``power_factor``
    relative to the power of the center on ``grid``.
    """
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigParse(f"class spec must be an object with a 'type': {spec!r}")
    kind = spec["type"]
    if kind not in CLASS_TYPES:
        raise ConfigParse(f"unknown class type {kind!r}; expected one of {sorted(CLASS_TYPES)}")
    if "center" not in spec:
        raise ConfigParse(f"{kind} class needs a 'center' density")
    center = density_from_spec(spec["center"])
    try:
        if kind == "known":
            return Known(center)
        eps = float(spec.get("eps", 0.0))
        if kind == "contamination":
            if "power" in spec:
                p = float(spec["power"])
            elif "power_factor" in spec and grid is not None:
                p = float(spec["power_factor"]) * float(grid.integrate(density_values(center, grid)))
            else:
                raise ConfigParse("contamination class needs 'power' (or 'power_factor' with a grid)")
            return Contamination(center, eps, p)
        return CLASS_TYPES[kind](center, eps)
    except (TypeError, ValueError) as exc:
        raise ConfigParse(f"bad {kind} class spec: {exc}") from exc


def class_project(candidate, cls: DensityClass, grid: FrequencyGrid) -> np.ndarray:
    """Pull a nonnegative candidate back into the class along the ray from the center."""
    candidate = np.asarray(candidate, dtype=float)
    if np.any(candidate < 0):
        raise ValidationError("candidate density takes negative values")
    return cls.project(candidate, grid)


# --------------------------------------------------------------------------
# sensitivities


def sensitivity_hf(A, C0, f0, g0) -> np.ndarray:
    return np.abs(A * g0 + C0) ** 2 / (f0 + g0) ** 2


def sensitivity_hg(A, C0, f0, g0) -> np.ndarray:
    return np.abs(A * f0 - C0) ** 2 / (f0 + g0) ** 2


def mse_cross(hf, hg, f, g, grid: FrequencyGrid) -> float:
    """``Delta(h0; f, g) = (1/2pi) integral (h_f f + h_g g)``, linear in ``(f, g)``."""
    return float(grid.integrate(hf * f) + grid.integrate(hg * g))


# --------------------------------------------------------------------------
# the solver


@dataclass(frozen=True)
class LFDOptions:
    max_iter: int = MAX_ITER
    tol_fp: float = TOL_FP
    tol_budget: float = TOL_BUDGET
    damping: float = DAMPING
    r_gap_kernel: str = "mirrored"

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(eq=False)
class SaddlePoint:
    f0: np.ndarray
    g0: np.ndarray
    grid: FrequencyGrid
    solution: FilterSolution
    alpha_f: float
    alpha_g: float
    iterations: int
    converged: bool
    residuals: dict
    hf: np.ndarray
    hg: np.ndarray
    history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    @property
    def delta(self) -> float:
        return self.solution.delta

    def density_f(self) -> Tabulated:
        return Tabulated.from_grid(self.f0, self.grid)

    def density_g(self) -> Tabulated:
        return Tabulated.from_grid(self.g0, self.grid)

    def summary(self) -> dict:
        return {
            "delta": self.delta,
            "delta_spectral": self.solution.delta_spectral,
            "alpha_f": self.alpha_f,
            "alpha_g": self.alpha_g,
            "iterations": self.iterations,
            "converged": self.converged,
            "residuals": dict(self.residuals),
            "meta": dict(self.meta),
        }


class _Core:
    """Solution function and ``C`` for a problem, reusing the Fourier matrix."""

    def __init__(self, problem: FilterProblem, kernel: str):
        self.problem = problem
        self.kernel = kernel
        self.E = problem.fourier
        self.A = problem.transform

    def C(self, f, g) -> np.ndarray:
        p = self.problem
        t = p.target
        B = assemble_B(f, g, self.E, p.freq, t.weights)
        R = assemble_R(f, g, self.E, p.freq, t.weights, self.kernel, t.in_gaps)
        c = solve_c(B, R, p.ahat, t.active).c
        return transform_C(c, t.times, p.freq, t.weights, self.E)


def _responses(core, cls_f, cls_g, fk, gk, grid):
    C = core.C(fk, gk)
    A = core.A
    hf = sensitivity_hf(A, C, fk, gk)
    hg = sensitivity_hg(A, C, fk, gk)
    fn, af = cls_f.best_response(np.abs(A * gk + C), gk, hf, grid)
    gn, ag = cls_g.best_response(np.abs(A * fk - C), fk, hg, grid)
    return fn, gn, af, ag


def lfd_solve(
    problem: FilterProblem,
    class_f: DensityClass,
    class_g: DensityClass,
    options: LFDOptions | None = None,
    strict: bool = False,
) -> SaddlePoint:
    """Least favorable pair by damped best-response iteration.

    Returns the last iterate flagged ``converged=False`` when ``max_iter`` is
    exhausted, or raises :class:`NoConvergence` carrying it if ``strict``.
    """
    options = options or LFDOptions()
    grid = problem.freq
    for cls in (class_f, class_g):
        cls.validate(grid)
    f1 = class_f.center_values(grid)
    g1 = class_g.center_values(grid)
    minimality_integral(class_f.center, class_g.center, grid)

    core = _Core(problem, options.r_gap_kernel)
    fk, gk = f1.copy(), g1.copy()
    norm = float(grid.integrate(f1) + grid.integrate(g1))
    converged = False
    change = math.inf
    history = []
    it = 0
    for it in range(1, options.max_iter + 1):
        fn, gn, _, _ = _responses(core, class_f, class_g, fk, gk, grid)
        change = float(grid.integrate(np.abs(fn - fk)) + grid.integrate(np.abs(gn - gk))) / norm
        history.append(change)
        if change <= options.tol_fp:
            fk, gk = fn, gn
            converged = True
            break
        d = options.damping
        fk = (1 - d) * fk + d * fn
        gk = (1 - d) * gk + d * gn
        _check_minimal(fk, gk, grid)
    if converged and change == 0.0:
        it -= 1

    # the multipliers belong to the responses at the returned pair
    _, _, af, ag = _responses(core, class_f, class_g, fk, gk, grid)
    sol = solve_filter(problem, fk, gk, FilterOptions(r_gap_kernel=options.r_gap_kernel, check_minimality=False))
    hf = sensitivity_hf(sol.A, sol.C, fk, gk)
    hg = sensitivity_hg(sol.A, sol.C, fk, gk)
    residuals = {
        "fixed_point": change,
        "budget_f": _budget_residual(class_f, fk, grid),
        "budget_g": _budget_residual(class_g, gk, grid),
        "slackness_f": class_f.slackness(fk, hf, af, grid),
        "slackness_g": class_g.slackness(gk, hg, ag, grid),
    }
    saddle = SaddlePoint(
        f0=fk, g0=gk, grid=grid, solution=sol, alpha_f=af, alpha_g=ag,
        iterations=it, converged=converged, residuals=residuals, hf=hf, hg=hg,
        history=history,
        meta={
            "class_f": class_f.to_spec(),
            "class_g": class_g.to_spec(),
            "stationarity": "subgradient best response",
            "envelope_magnitudes": {"f": "|A g + C0|", "g": "|A f - C0|"},
            "r_gap_kernel": options.r_gap_kernel,
        },
    )
    if not converged:
        msg = f"fixed-point iteration did not converge in {options.max_iter} iterations (change {change:.3e})"
        log.warning(msg)
        if strict:
            raise NoConvergence(msg, saddle=saddle)
    return saddle


def _budget_residual(cls: DensityClass, values, grid) -> float:
    if isinstance(cls, Known):
        return 0.0
    if isinstance(cls, Contamination) and cls.eps <= 0:
        return 0.0
    return abs(cls.budget(values, grid) - cls.target)


def _check_minimal(f, g, grid):
    total = f + g
    if np.any(total <= 0) or not np.all(np.isfinite(total)):
        raise MinimalityLost("iterate f + g is not positive on the grid")
    if not math.isfinite(minimality_integral(f, g, grid)):
        raise MinimalityLost("iterate violates the minimality condition")


# --------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class SaddleReport:
    n_density_samples: int
    n_perturbations: int
    delta0: float
    left_violation: float
    right_violation: float
    tol: float
    left_pass: bool
    right_pass: bool

    @property
    def passed(self) -> bool:
        return self.left_pass and self.right_pass

    def to_dict(self) -> dict:
        return {
            "n_density_samples": self.n_density_samples,
            "n_perturbations": self.n_perturbations,
            "delta0": self.delta0,
            "left_violation": self.left_violation,
            "right_violation": self.right_violation,
            "tol": self.tol,
            "left_pass": self.left_pass,
            "right_pass": self.right_pass,
            "passed": self.passed,
        }


def _random_candidate(center, grid: FrequencyGrid, rng: np.random.Generator) -> np.ndarray:
    """Smooth even positive perturbation of ``center`` with a random bump."""
    lam = np.abs(grid.points)
    k = np.arange(1, 6)
    coef = rng.standard_normal(k.size) / k
    scale = rng.uniform(2.0, 30.0)
    field_ = np.cos(np.outer(lam / scale, k) + rng.uniform(0, 2 * np.pi, k.size)) @ coef
    out = center * np.exp(rng.uniform(0.05, 2.0) * field_)
    mu, width = rng.uniform(0, 10), rng.uniform(0.1, 3.0)
    bump = rng.uniform(0, 2) * np.max(center) * np.exp(-0.5 * ((lam - mu) / width) ** 2)
    return out + bump


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RFL_THREADS", "1")))
    except ValueError:
        return 1


def saddle_verify(
    saddle: SaddlePoint,
    problem: FilterProblem,
    class_f: DensityClass,
    class_g: DensityClass,
    n_density_samples: int = 100,
    n_perturbations: int = 20,
    seed: int = 0,
    tol: float = TOL_SADDLE,
) -> SaddleReport:
    """Sample both saddle-point inequalities.

    Left: random admissible pairs never raise the error of ``h0`` above its
    value at ``(f0, g0)``. Right: perturbing the filter weights on the
    observation grid never lowers the error at ``(f0, g0)``.
    """
    grid = saddle.grid
    f1 = class_f.center_values(grid)
    g1 = class_g.center_values(grid)
    delta0 = mse_cross(saddle.hf, saddle.hg, saddle.f0, saddle.g0, grid)

    def left(i):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0, i])))
        f = class_project(_random_candidate(f1, grid, rng), class_f, grid)
        g = class_project(_random_candidate(g1, grid, rng), class_g, grid)
        return mse_cross(saddle.hf, saddle.hg, f, g, grid) - delta0

    sol = saddle.solution
    obs = problem.obs_times
    E_obs = np.exp(1j * np.outer(grid.points, obs))
    base = mse_direct(sol.h, sol.A, saddle.f0, saddle.g0, grid)
    vmax = float(np.max(np.abs(sol.v), initial=1.0)) or 1.0

    def right(i):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 1, i])))
        dv = rng.standard_normal(obs.size) * vmax * 10.0 ** rng.uniform(-4, -1)
        dh = E_obs @ (problem.dt * dv)
        return base - mse_direct(sol.h + dh, sol.A, saddle.f0, saddle.g0, grid)

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        lv = list(pool.map(left, range(n_density_samples)))
        rv = list(pool.map(right, range(n_perturbations)))
    left_v = max(lv, default=0.0)
    right_v = max(rv, default=0.0)
    scale = tol * max(abs(delta0), np.finfo(float).tiny)
    return SaddleReport(
        n_density_samples, n_perturbations, delta0, left_v, right_v, tol,
        left_v <= scale, right_v <= scale,
    )
