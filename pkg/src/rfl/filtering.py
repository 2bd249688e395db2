"""Optimal linear filter for a functional of a process observed with noise.

The pipeline extends the weight over the target grid, assembles the
operators, solves for the solution function ``c``, and forms

    C(lambda) = sum_k w_k c(t_k) exp(i lambda t_k),
    h(lambda) = (A f - C) / (f + g),

with the mean-square error evaluated both as a spectral integral and as the
quadratic form ``<Ra, c> + <Qa, a>``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import SingularDensitySum
from .operators import COND_MAX, KERNELS, assemble, solve_c
from .problem import FilterProblem, truncate_weight
from .spectra import TWO_PI, FrequencyGrid, SpectralDensity, eval_density, minimality_integral

log = logging.getLogger(__name__)

TOL_ORTH = 1e-4
TOL_LEAK = 1e-3
TOL_MSE = 1e-10
TOL_DUAL = 1e-6


@dataclass(frozen=True)
class FilterOptions:
    horizon: float | None = None
    r_gap_kernel: str = "mirrored"
    method: str = "direct"
    cond_max: float = COND_MAX
    tol_orth: float = TOL_ORTH
    tol_leak: float = TOL_LEAK
    tol_mse: float = TOL_MSE
    n_probes: int = 50
    check_minimality: bool = True

    def __post_init__(self):
        if self.r_gap_kernel not in KERNELS:
            raise ValueError(f"r_gap_kernel must be one of {KERNELS}")

    def tolerances(self) -> dict:
        return {
            "tol_orth": self.tol_orth,
            "tol_leak": self.tol_leak,
            "tol_mse": self.tol_mse,
            "tol_dual": TOL_DUAL,
            "cond_max": self.cond_max,
        }


@dataclass(frozen=True)
class FilterWeights:
    times: np.ndarray
    v: np.ndarray
    leak_gap: float
    leak_future: float

    @property
    def leakage(self) -> float:
        """Largest ``|v|`` off the observed set relative to ``max |v|`` on it."""
        scale = float(np.max(np.abs(self.v), initial=0.0))
        worst = max(self.leak_gap, self.leak_future)
        return worst / scale if scale > 0 else worst


@dataclass(eq=False)
class FilterSolution:
    c: np.ndarray
    C: np.ndarray
    h: np.ndarray
    A: np.ndarray
    f: np.ndarray
    g: np.ndarray
    weights: FilterWeights
    delta: float
    delta_spectral: float
    var_a: float
    kernel: str
    diagnostics: dict = field(default_factory=dict)
    horizon: float | None = None

    @property
    def v(self) -> np.ndarray:
        return self.weights.v

    def summary(self) -> dict:
        out = {
            "delta": self.delta,
            "delta_spectral": self.delta_spectral,
            "var_a_xi": self.var_a,
            "r_gap_kernel": self.kernel,
            "diagnostics": dict(self.diagnostics),
        }
        if self.horizon is not None:
            out["horizon"] = self.horizon
        return out


def density_values(d, grid: FrequencyGrid) -> np.ndarray:
    """Grid values of a density or of an array already on the grid."""
    if isinstance(d, SpectralDensity):
        return eval_density(d, grid)
    values = np.asarray(d, dtype=float)
    if values.shape != (grid.n,):
        raise ValueError(f"density values must have shape ({grid.n},)")
    return values


def transform_C(c, times, grid: FrequencyGrid, weights=None, E=None) -> np.ndarray:
    """``C(lambda) = sum_k w_k c_k exp(i lambda t_k)``."""
    c = np.asarray(c, dtype=complex)
    weights = np.ones(c.size) if weights is None else np.asarray(weights)
    if E is None:
        E = np.exp(1j * np.outer(grid.points, np.asarray(times, dtype=float)))
    return E @ (weights * c)


def spectral_characteristic(A, C, f, g) -> np.ndarray:
    total = np.asarray(f) + np.asarray(g)
    if np.any(total <= 0):
        raise SingularDensitySum("f + g is not positive on the frequency grid")
    return (A * f - C) / total


def mse_spectral(A, C, f, g, grid: FrequencyGrid) -> float:
    """``(1/2pi) integral [|A g + C|^2 f + |A f - C|^2 g] / (f + g)^2``."""
    total = np.asarray(f) + np.asarray(g)
    if np.any(total <= 0):
        raise SingularDensitySum("f + g is not positive on the frequency grid")
    integrand = (np.abs(A * g + C) ** 2 * f + np.abs(A * f - C) ** 2 * g) / total**2
    return float(grid.integrate(integrand))


def mse_direct(h, A, f, g, grid: FrequencyGrid) -> float:
    """Error of an arbitrary characteristic: ``(1/2pi) integral |A - h|^2 f + |h|^2 g``."""
    return float(grid.integrate(np.abs(A - h) ** 2 * f + np.abs(h) ** 2 * g))


def mse_quadratic(ahat, system, c=None) -> float:
    """``<Ra, c> + <Qa, a>`` with ``c`` from :func:`solve_c` unless supplied."""
    ahat = np.asarray(ahat, dtype=complex)
    if c is None:
        c = solve_c(system.B, system.R, ahat, system.active).c
    ra = system.R @ ahat
    qa = system.Q @ ahat
    return float(np.real(system.inner(ra, c) + system.inner(qa, ahat)))


def filter_weights(h, obs_times, grid: FrequencyGrid, probes_gap=(), probes_future=()) -> FilterWeights:
    """``v(t) = (1/2pi) integral h exp(-i t lambda)`` on the observation grid.

    ``probes_gap`` and ``probes_future`` are times inside the gaps and in
    ``(0, T_h]``; the largest ``|v|`` there is reported as leakage.
    """
    h = np.asarray(h, dtype=complex)

    def at(times):
        times = np.asarray(times, dtype=float)
        if times.size == 0:
            return np.zeros(0)
        out = np.empty(times.size)
        for s in range(0, times.size, 512):
            t = times[s:s + 512]
            out[s:s + 512] = np.real(np.exp(-1j * np.outer(t, grid.points)) @ h)
        return grid.spacing / TWO_PI * out

    v = at(obs_times)
    leak_gap = float(np.max(np.abs(at(probes_gap)), initial=0.0))
    leak_future = float(np.max(np.abs(at(probes_future)), initial=0.0))
    return FilterWeights(np.asarray(obs_times, dtype=float), v, leak_gap, leak_future)


def parseval_gap(h, grid: FrequencyGrid, dt: float) -> float:
    """Relative mismatch between the energy of ``h`` and of ``v`` over one lattice period."""
    h = np.asarray(h, dtype=complex)
    e_freq = float(grid.integrate(np.abs(h) ** 2))
    # v on the lattice k*dt, k = -n/2..n/2-1; the index shift is a unit-modulus phase
    v = grid.spacing / TWO_PI * grid.n * np.fft.ifft(h)
    e_time = dt * float(np.sum(np.abs(v) ** 2))
    return abs(e_time - e_freq) / max(e_freq, np.finfo(float).tiny)


def orthogonality_residual(A, h, f, g, grid: FrequencyGrid, probes) -> float:
    """Largest ``|(1/2pi) integral [A f - h (f+g)] exp(-i t lambda)|`` over probe times."""
    r = A * f - h * (f + g)
    probes = np.asarray(probes, dtype=float)
    vals = np.exp(-1j * np.outer(probes, grid.points)) @ r
    return float(np.max(np.abs(vals), initial=0.0) * grid.spacing / TWO_PI)


def variance_of_functional(A, f, grid: FrequencyGrid) -> float:
    return float(grid.integrate(np.abs(A) ** 2 * f))


def _probe_times(obs_times: np.ndarray, n: int) -> np.ndarray:
    if obs_times.size <= n:
        return obs_times
    idx = np.unique(np.linspace(0, obs_times.size - 1, n).round().astype(int))
    return obs_times[idx]


def solve_filter(problem: FilterProblem, f, g, options: FilterOptions | None = None) -> FilterSolution:
    """Optimal filter for densities ``f`` (signal) and ``g`` (noise).

    ``f`` and ``g`` are densities or value arrays on ``problem.freq``. With
    ``options.horizon`` set, the weight is truncated to ``[0, horizon]``
    first.
    """
    options = options or FilterOptions()
    if options.horizon is not None:
        problem = problem.with_weight(truncate_weight(problem.weight, options.horizon))
    grid = problem.freq
    fv = density_values(f, grid)
    gv = density_values(g, grid)
    total = fv + gv
    if np.any(total <= 0):
        raise SingularDensitySum("f + g is not positive on the frequency grid")
    if options.check_minimality:
        minimality_integral(f if isinstance(f, SpectralDensity) else fv,
                            g if isinstance(g, SpectralDensity) else gv, grid)

    target = problem.target
    E = problem.fourier
    system = assemble(fv, gv, E, grid, target.weights, target.active, options.r_gap_kernel, target.in_gaps)
    ahat = problem.ahat
    sol = solve_c(system.B, system.R, ahat, target.active, cond_max=options.cond_max, method=options.method)
    c = sol.c
    A = problem.transform
    C = transform_C(c, target.times, grid, target.weights, E)
    h = spectral_characteristic(A, C, fv, gv)
    delta = mse_quadratic(ahat, system, c)
    delta_s = mse_spectral(A, C, fv, gv, grid)
    var_a = variance_of_functional(A, fv, grid)

    future = target.times[target.half_index]
    weights = filter_weights(h, problem.obs_times, grid, target.times[target.in_gaps], future[future > 0])
    probes = _probe_times(problem.obs_times, options.n_probes)
    orth = orthogonality_residual(A, h, fv, gv, grid, probes)
    orth_scale = float(np.max(np.abs(A) * total))
    diagnostics = {
        "orthogonality_residual": orth,
        "orthogonality_scale": orth_scale,
        "subspace_leakage": weights.leakage,
        "dual_form_discrepancy": abs(delta - delta_s),
        "solve_residual": sol.residual,
        "condition_estimate": sol.cond,
        "regularized": sol.regularized,
        "ridge": sol.ridge,
        "parseval_gap": parseval_gap(h, grid, problem.dt),
    }
    if delta < -options.tol_mse:
        log.warning("quadratic-form error %.3e is negative", delta)
    return FilterSolution(
        c=c, C=C, h=h, A=A, f=fv, g=gv, weights=weights,
        delta=delta, delta_spectral=delta_s, var_a=var_a,
        kernel=options.r_gap_kernel, diagnostics=diagnostics, horizon=options.horizon,
    )


def check_solution(sol: FilterSolution, options: FilterOptions | None = None) -> dict:
    """Pass/fail flags for the built-in diagnostics at the option tolerances."""
    options = options or FilterOptions()
    d = sol.diagnostics
    return {
        "dual_form": d["dual_form_discrepancy"] <= TOL_DUAL * (1 + abs(sol.delta)),
        "orthogonality": d["orthogonality_residual"] <= options.tol_orth * d["orthogonality_scale"],
        "subspace_leakage": d["subspace_leakage"] <= options.tol_leak,
        "nonnegative_mse": sol.delta >= -options.tol_mse,
    }
