"""Steady-state covariance matrix from ``M V + V M^T = -D``.

The production path is a dense solve of the vectorized equation. The
time-integration routines exist as an independent check of that solve.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .drift import QUADRATURES, check_stability

__all__ = [
    "CovarianceMatrix",
    "IntegrationError",
    "LyapunovError",
    "NoSteadyStateError",
    "integrate_covariance_ode",
    "relax_covariance",
    "solve_lyapunov",
]


class LyapunovError(ArithmeticError):
    pass


class NoSteadyStateError(LyapunovError):
    """The drift matrix is not Hurwitz, so no stationary covariance exists."""


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class CovarianceMatrix:
    V: np.ndarray
    residual: float
    mode_order: tuple[str, ...] = QUADRATURES


def _lyapunov_residual(M, V, D) -> float:
    scale = np.linalg.norm(D)
    r = np.linalg.norm(M @ V + V @ M.T + D)
    return float(r / scale) if scale > 0 else float(r)


def solve_lyapunov(M, D, *, check: bool = True) -> CovarianceMatrix:
    """Solve ``M V + V M^T = -D`` through ``(M (x) I + I (x) M) vec V = -vec D``.

    ``vec`` is row-major flattening. The result is symmetrized.

    Raises
    ------
    NoSteadyStateError
        ``M`` has an eigenvalue with non-negative real part (only when
        ``check`` is true).
    LyapunovError
        The vectorized system is numerically singular.
    """
    M = np.asarray(M, dtype=float)
    D = np.asarray(D, dtype=float)
    n = M.shape[0]
    if check:
        report = check_stability(M)
        if not report.stable:
            raise NoSteadyStateError(f"no steady state: max Re(eig M) = {report.max_real:.3g}")
    eye = np.eye(n)
    A = np.kron(M, eye) + np.kron(eye, M)
    try:
        v = np.linalg.solve(A, -D.reshape(-1))
    except np.linalg.LinAlgError:
        raise LyapunovError(f"vectorized Lyapunov system is singular (cond ~ {np.linalg.cond(A):.3g})") from None
    V = v.reshape(n, n)
    asym = np.max(np.abs(V - V.T))
    if asym > 1e-10 * max(1.0, np.max(np.abs(V))):
        warnings.warn(f"Lyapunov solution asymmetric by {asym:.3g} before symmetrization", stacklevel=2)
    V = 0.5 * (V + V.T)
    return CovarianceMatrix(V=V, residual=_lyapunov_residual(M, V, D))


def _rhs(M, D):
    n = M.shape[0]

    def f(_t, y):
        V = y.reshape(n, n)
        dV = M @ V + V @ M.T + D
        return (0.5 * (dV + dV.T)).reshape(-1)

    return f


def integrate_covariance_ode(M, D, V0, t_final: float, tol: float = 1e-10) -> np.ndarray:
    """Integrate ``dV/dt = M V + V M^T + D`` from ``V0`` up to ``t_final``.

    Uses the adaptive 8th-order Dormand-Prince scheme with ``rtol = atol = tol``.
    """
    M = np.asarray(M, dtype=float)
    D = np.asarray(D, dtype=float)
    V0 = np.asarray(V0, dtype=float)
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(D)) and np.all(np.isfinite(V0))):
        raise ValueError("non-finite input")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if t_final == 0:
        return V0.copy()
    sol = solve_ivp(_rhs(M, D), (0.0, t_final), V0.reshape(-1), method="DOP853", rtol=tol, atol=tol)
    if sol.status != 0:
        raise IntegrationError(f"integration failed: {sol.message}")
    V = sol.y[:, -1].reshape(V0.shape)
    return 0.5 * (V + V.T)


def relax_covariance(M, D, V0=None, *, rate_tol: float = 1e-12, tol: float = 1e-12,
                     max_time: float = 1e7) -> np.ndarray:
    """Integrate from ``V0`` (default ``I/2``) until ``||dV/dt||_max < rate_tol``.

    Integration runs in chunks of five slowest decay times. If the rate
    stops falling for three chunks in a row the integrator has hit its
    accuracy floor and the current ``V`` is returned.
    """
    M = np.asarray(M, dtype=float)
    D = np.asarray(D, dtype=float)
    n = M.shape[0]
    V = 0.5 * np.eye(n) if V0 is None else np.asarray(V0, dtype=float)
    decay = -np.max(np.linalg.eigvals(M).real)
    if decay <= 0:
        raise NoSteadyStateError("drift matrix is not stable; covariance does not relax")
    chunk = 5.0 / decay
    t = 0.0
    f = _rhs(M, D)
    best, stalled = np.inf, 0
    while t < max_time:
        V = integrate_covariance_ode(M, D, V, chunk, tol)
        t += chunk
        rate = np.max(np.abs(f(t, V.reshape(-1))))
        if rate < rate_tol:
            return V
        stalled = stalled + 1 if rate > 0.5 * best else 0
        best = min(best, rate)
        if stalled >= 3:
            return V
    raise IntegrationError(f"covariance still drifting after t = {t:g}")
