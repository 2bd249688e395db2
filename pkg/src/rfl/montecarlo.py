"""Gaussian sample paths by spectral synthesis and empirical filter errors.

A path on the frequency grid is

    x(t) = sum_m sqrt(s_m d(lambda_m) d_lambda / 2pi) (z_m cos(lambda_m t) + z'_m sin(lambda_m t))

over ``0 <= lambda_m <= cutoff`` with ``s_m = 2`` inside and ``s_m = 1`` at
both ends, which reproduces the trapezoid covariance of
:func:`rfl.spectra.weighted_covariance` exactly.

Random streams are counter based: trials are grouped in fixed-size blocks
and block ``b`` of stream ``s`` draws from ``SeedSequence([seed, s, b])``,
so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .oracle import functional_quadrature
from .problem import FilterProblem
from .spectra import TWO_PI, FrequencyGrid, SpectralDensity, eval_density

BLOCK = 256
STREAM_XI = 0
STREAM_ETA = 1


def _values(d, grid: FrequencyGrid) -> np.ndarray:
    if isinstance(d, SpectralDensity):
        return eval_density(d, grid)
    return np.asarray(d, dtype=float)


def synthesis_amplitudes(d, grid: FrequencyGrid) -> tuple[np.ndarray, np.ndarray]:
    """Frequencies ``0..cutoff`` and their amplitudes."""
    values = _values(d, grid)
    half = grid.n // 2
    freqs = np.append(grid.points[half:], grid.cutoff)
    vals = np.append(values[half:], values[0])
    mult = np.full(freqs.size, 2.0)
    mult[[0, -1]] = 1.0
    return freqs, np.sqrt(mult * vals * grid.spacing / TWO_PI)


def _blocks(n: int):
    for b in range(math.ceil(n / BLOCK)):
        yield b, min(BLOCK, n - b * BLOCK)


def _normals(seed: int, stream: int, block: int, shape) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, stream, block])))
    return rng.standard_normal(shape)


def project_paths(coefs, n: int, seed: int, stream: int = STREAM_XI) -> np.ndarray:
    """``L`` linear statistics of ``n`` paths, drawn without forming the paths.

    ``coefs`` is the pair ``(cos, sin)`` of loadings from :func:`_loadings`,
    each of shape ``(n_freq_half, L)``.
    """
    cos_load, sin_load = coefs
    out = []
    for b, size in _blocks(n):
        z = _normals(seed, stream, b, (2, size, cos_load.shape[0]))
        out.append(z[0] @ cos_load + z[1] @ sin_load)
    return np.concatenate(out, axis=0) if out else np.zeros((0, cos_load.shape[1]))


def _loadings(freqs, amps, times, mix):
    """Loadings for the statistics ``x(times) @ mix``."""
    phase = np.outer(freqs, np.asarray(times, dtype=float))
    return (amps[:, None] * np.cos(phase)) @ mix, (amps[:, None] * np.sin(phase)) @ mix


def sample_paths(d, times, n: int, seed: int, grid: FrequencyGrid, stream: int = STREAM_XI) -> np.ndarray:
    """``n`` real zero-mean Gaussian paths at ``times``; shape ``(n, len(times))``."""
    times = np.asarray(times, dtype=float)
    freqs, amps = synthesis_amplitudes(d, grid)
    coefs = _loadings(freqs, amps, times, np.eye(times.size))
    return project_paths(coefs, n, seed, stream)


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    mse: float
    std_error: float
    reference: float | None
    z_score: float | None
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def empirical_mse(weights, problem: FilterProblem, f, g, n: int, seed: int, reference: float | None = None) -> SimulationReport:
    """Monte Carlo error of ``sum_k w_k dt (xi + eta)(t_k)`` as an estimate of ``A xi``.

    ``A xi`` uses the same piecewise trapezoid rule as the oracle. Signal and
    noise draw from disjoint streams.
    """
    if n < 1:
        raise ValueError("need at least one trial")
    grid = problem.freq
    obs = np.asarray(problem.obs_times, dtype=float)
    w = np.asarray(weights, dtype=float) * problem.dt
    if w.shape != obs.shape:
        raise ValueError("weights must match the observation grid")
    u, q = functional_quadrature(problem.weight, problem.pattern, problem.dt)

    # error = sum_j q_j xi(-u_j) - sum_k w_k (xi + eta)(t_k)
    times_xi = np.concatenate([-u, obs])
    mix_xi = np.concatenate([q, -w])[:, None]
    freqs, amps_f = synthesis_amplitudes(f, grid)
    _, amps_g = synthesis_amplitudes(g, grid)
    err = project_paths(_loadings(freqs, amps_f, times_xi, mix_xi), n, seed, STREAM_XI)[:, 0]
    err = err + project_paths(_loadings(freqs, amps_g, obs, -w[:, None]), n, seed, STREAM_ETA)[:, 0]

    sq = err**2
    mse = float(np.sum(sq) / n)
    se = float(np.std(sq, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    z = None
    if reference is not None and se > 0:
        z = (mse - reference) / se
    return SimulationReport(n, mse, se, reference, z, int(seed))
