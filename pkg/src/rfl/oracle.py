"""Brute-force covariance projection of the functional onto the observations.

Shares only :func:`rfl.spectra.weighted_covariance` with the filtering
pipeline. The functional is discretized by the trapezoid rule on each
interval of the weight support separately, and the estimate is
``sum_k w_k dt y(t_k)`` over the observation grid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyObservationGrid, IllConditioned
from .operators import COND_MAX, RIDGE
from .problem import FilterProblem, MissingPattern, WeightFunction
from .spectra import FrequencyGrid, SpectralDensity, eval_density, weighted_covariance

log = logging.getLogger(__name__)

_ROUND = 10


def _values(d, grid: FrequencyGrid) -> np.ndarray:
    if isinstance(d, SpectralDensity):
        return eval_density(d, grid)
    return np.asarray(d, dtype=float)


def covariance_lags(d, grid: FrequencyGrid, lags) -> np.ndarray:
    """Real covariance at arbitrary lags, evaluating each distinct lag once."""
    lags = np.asarray(lags, dtype=float)
    uniq, inverse = np.unique(np.round(np.abs(lags.ravel()), _ROUND), return_inverse=True)
    vals = weighted_covariance(_values(d, grid), grid, uniq).real
    return vals[inverse].reshape(lags.shape)


def covariance_from_density(d, times, grid: FrequencyGrid) -> np.ndarray:
    """Matrix ``r(t_j - t_k)``; ``d`` is a density or its grid values."""
    t = np.asarray(times, dtype=float)
    return covariance_lags(d, grid, t[:, None] - t[None, :])


def weight_pieces(a: WeightFunction, pattern: MissingPattern) -> list[tuple[float, float]]:
    """Intervals of ``[a.start, a.end]`` left after removing the mirrored gaps."""
    pieces = [(a.start, a.end)] if a.end > a.start else []
    for lo, hi in pattern.mirror:
        nxt = []
        for p0, p1 in pieces:
            if hi <= p0 or lo >= p1:
                nxt.append((p0, p1))
                continue
            if lo > p0:
                nxt.append((p0, lo))
            if hi < p1:
                nxt.append((hi, p1))
        pieces = nxt
    return [(p0, p1) for p0, p1 in pieces if p1 > p0]


def functional_quadrature(a: WeightFunction, pattern: MissingPattern, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``u`` and weights ``q`` with ``A xi ~ sum q_j xi(-u_j)``.

    Each piece gets its own trapezoid rule with step close to ``dt``.
    """
    nodes, weights = [], []
    for p0, p1 in weight_pieces(a, pattern):
        m = max(1, math.ceil((p1 - p0) / dt - 1e-9))
        u = np.linspace(p0, p1, m + 1)
        q = np.full(m + 1, (p1 - p0) / m)
        q[[0, -1]] *= 0.5
        nodes.append(u)
        weights.append(q * a.raw(u))
    if not nodes:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(eq=False)
class OracleSolution:
    times: np.ndarray
    weights: np.ndarray
    mse: float
    var_a: float
    cond: float
    ridge: float = 0.0

    def summary(self) -> dict:
        return {"mse": self.mse, "var_a_xi": self.var_a, "n_obs": int(self.times.size), "cond": self.cond}


def oracle_solve(problem: FilterProblem, f, g, cond_max: float = COND_MAX) -> OracleSolution:
    """Best linear estimate of the functional from the observation grid."""
    obs = np.asarray(problem.obs_times, dtype=float)
    if obs.size == 0:
        raise EmptyObservationGrid("no observation points in [-T_obs, 0] outside the gaps")
    grid = problem.freq
    dt = problem.dt
    fv = _values(f, grid)
    gv = _values(g, grid)
    u, q = functional_quadrature(problem.weight, problem.pattern, dt)
    if not np.any(q):
        return OracleSolution(obs, np.zeros(obs.size), 0.0, 0.0, 1.0)

    K = covariance_from_density(fv + gv, obs, grid)
    # Cov(A xi, xi(t_k)) = sum_j q_j r_f(-u_j - t_k)
    b = covariance_lags(fv, grid, obs[:, None] + u[None, :]) @ q
    var_a = float(q @ covariance_lags(fv, grid, u[:, None] - u[None, :]) @ q)

    cond = float(np.linalg.cond(K))
    ridge = 0.0
    if not np.isfinite(cond) or cond > cond_max:
        ridge = RIDGE * float(np.trace(K)) / K.shape[0]
        log.warning("observation covariance has condition number %.3e; adding ridge %.3e", cond, ridge)
    beta = np.linalg.solve(K + ridge * np.eye(K.shape[0]), b)
    if ridge:
        residual = np.linalg.norm(K @ beta - b) / max(np.linalg.norm(b), np.finfo(float).tiny)
        if residual > 1e-8:
            raise IllConditioned(f"ridge solve of the observation covariance leaves residual {residual:.3e}")
    mse = float(var_a - b @ beta)
    return OracleSolution(obs, beta / dt, mse, var_a, cond, ridge)
