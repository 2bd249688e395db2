"""Discretized operators B, R, Q on the target grid and the solve ``Bc = Ra``.

Each operator is a truncated-frequency quadratic form
``E^H diag(d_lambda w(lambda) / 2pi) E`` times the time quadrature weights,
where ``E[m, k] = exp(i lambda_m t_k)``. Kernels of ``1/(f+g)`` are never
formed in the time domain.

Two readings of the R kernel are available through ``r_gap_kernel``:

``"mirrored"``
    every block uses the argument ``-(u + t)``, so that ``(Ra)(t)`` equals
    the transform of ``A f/(f+g)`` evaluated at ``-t``.
``"as_printed"``
    the gap block uses ``-(u + t)`` and the half-line block ``u - t``.
    The weight vanishes on the gaps, so on any weight this reduces to the
    half-line kernel.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from .errors import IllConditioned, SingularDensitySum
from .spectra import TWO_PI, FrequencyGrid

log = logging.getLogger(__name__)

KERNELS = ("mirrored", "as_printed")
COND_MAX = 1e12
RIDGE = 1e-10
TOL_SOLVE = 1e-8


def fourier_matrix(times, grid: FrequencyGrid) -> np.ndarray:
    """``E[m, k] = exp(i lambda_m t_k)``."""
    return np.exp(1j * np.outer(grid.points, np.asarray(times, dtype=float)))


def _check_sum(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    total = np.asarray(f, dtype=float) + np.asarray(g, dtype=float)
    if np.any(total <= 0) or not np.all(np.isfinite(total)):
        raise SingularDensitySum("f + g is not positive on the frequency grid")
    return total


def _form(E: np.ndarray, diag: np.ndarray, right: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return (E.conj().T @ (diag[:, None] * right)) * weights[None, :]


def assemble_B(f, g, E, grid: FrequencyGrid, weights) -> np.ndarray:
    """Operator with spectral weight ``1/(f+g)``."""
    d = grid.spacing / TWO_PI / _check_sum(f, g)
    return _form(E, d, E, np.asarray(weights))


def assemble_R(f, g, E, grid: FrequencyGrid, weights, kernel: str = "mirrored", gap_mask=None) -> np.ndarray:
    """Operator with spectral weight ``f/(f+g)``; see the module notes for ``kernel``."""
    if kernel not in KERNELS:
        raise ValueError(f"unknown R kernel {kernel!r}; expected one of {KERNELS}")
    d = grid.spacing / TWO_PI * np.asarray(f, dtype=float) / _check_sum(f, g)
    weights = np.asarray(weights)
    if kernel == "mirrored":
        return _form(E, d, E.conj(), weights)
    R = _form(E, d, E, weights)
    if gap_mask is not None and np.any(gap_mask):
        R[:, gap_mask] = _form(E, d, E[:, gap_mask].conj(), weights[gap_mask])
    return R


def assemble_Q(f, g, E, grid: FrequencyGrid, weights) -> np.ndarray:
    """Operator with spectral weight ``fg/(f+g)``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    d = grid.spacing / TWO_PI * f * g / _check_sum(f, g)
    return _form(E, d, E, np.asarray(weights))


@dataclass(frozen=True, eq=False)
class OperatorSystem:
    """Operators for one pair of densities on a fixed target grid."""

    E: np.ndarray
    weights: np.ndarray
    active: np.ndarray
    B: np.ndarray
    R: np.ndarray
    Q: np.ndarray
    grid: FrequencyGrid
    kernel: str

    @property
    def size(self) -> int:
        return self.weights.size

    def inner(self, x, y) -> complex:
        """``<x, y> = sum_k w_k x_k conj(y_k)``."""
        return complex(np.sum(self.weights * x * np.conj(y)))


def assemble(f, g, E, grid: FrequencyGrid, weights, active=None, kernel="mirrored", gap_mask=None) -> OperatorSystem:
    weights = np.asarray(weights, dtype=float)
    active = np.ones(weights.size, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    return OperatorSystem(
        E=E,
        weights=weights,
        active=active,
        B=assemble_B(f, g, E, grid, weights),
        R=assemble_R(f, g, E, grid, weights, kernel, gap_mask),
        Q=assemble_Q(f, g, E, grid, weights),
        grid=grid,
        kernel=kernel,
    )


@dataclass(frozen=True)
class SolveResult:
    c: np.ndarray
    residual: float
    cond: float
    ridge: float
    method: str

    @property
    def regularized(self) -> bool:
        return self.ridge > 0


def _cg(M: np.ndarray, rhs: np.ndarray, tol: float) -> np.ndarray:
    op = LinearOperator(M.shape, matvec=lambda x: M @ x, dtype=complex)
    x, info = cg(op, rhs, rtol=tol, atol=0.0, maxiter=10 * M.shape[0])
    if info > 0:
        log.warning("conjugate-gradient solve stopped after %d iterations", info)
    return x


def solve_c(
    B: np.ndarray,
    R: np.ndarray,
    ahat: np.ndarray,
    active=None,
    cond_max: float = COND_MAX,
    tol: float = TOL_SOLVE,
    method: str = "direct",
) -> SolveResult:
    """Solve ``B c = R a`` on the active nodes; ``c`` is zero elsewhere.

    A Tikhonov ridge ``RIDGE * trace(B) / dim`` is added when the condition
    number exceeds ``cond_max``.
    """
    rhs_full = R @ np.asarray(ahat, dtype=complex)
    active = np.ones(rhs_full.size, dtype=bool) if active is None else np.asarray(active, dtype=bool)
    c = np.zeros(rhs_full.size, dtype=complex)
    rhs = rhs_full[active]
    M = B[np.ix_(active, active)]
    norm_rhs = np.linalg.norm(rhs)
    if norm_rhs == 0 or M.size == 0:
        return SolveResult(c, 0.0, 1.0, 0.0, method)
    cond = float(np.linalg.cond(M))
    ridge = 0.0
    if not np.isfinite(cond) or cond > cond_max:
        ridge = RIDGE * float(np.real(np.trace(M))) / M.shape[0]
        log.warning("B has condition number %.3e; adding ridge %.3e", cond, ridge)
    Mr = M + ridge * np.eye(M.shape[0]) if ridge else M
    if method == "direct":
        x = np.linalg.solve(Mr, rhs)
    elif method == "cg":
        x = _cg(Mr, rhs, tol * 1e-2)
    else:
        raise ValueError(f"unknown solve method {method!r}")
    residual = float(np.linalg.norm(M @ x - rhs) / norm_rhs)
    if ridge and residual > tol:
        raise IllConditioned(
            f"B is ill-conditioned (cond {cond:.3e}) and the ridge solve leaves residual {residual:.3e}"
        )
    c[active] = x
    return SolveResult(c, residual, cond, ridge, method)
