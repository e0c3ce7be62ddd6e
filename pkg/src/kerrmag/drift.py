"""Linearized fluctuation dynamics: drift matrix, diffusion matrix, stability."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .params import SystemParams
from .steady import SteadyState

__all__ = [
    "MODE_ORDER",
    "QUADRATURES",
    "DriftModel",
    "StabilityReport",
    "build_diffusion_matrix",
    "build_drift_matrix",
    "check_stability",
    "format_matrix",
    "kerr_detunings",
]

# quadrature pairs: phonon (q, p), magnon (x, y), cavity 1 (X1, Y1), cavity 2 (X2, Y2)
MODE_ORDER = ("b", "m", "c1", "c2")
QUADRATURES = ("q", "p", "x", "y", "X1", "Y1", "X2", "Y2")
STABILITY_MARGIN = 1e-12


@dataclass(frozen=True)
class DriftModel:
    M: np.ndarray
    D: np.ndarray
    delta_plus: float
    delta_minus: float
    G: float
    mode_order: tuple[str, ...] = QUADRATURES


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    max_real: float
    eigenvalues: np.ndarray


def kerr_detunings(delta_m: float, delta_K: float) -> tuple[float, float]:
    """Quadrature detunings ``(delta_plus, delta_minus)``.

    With the linearized Kerr terms ``4 K|m_s|^2 = 2 dK`` and
    ``2 K m_s^2 = -dK``::

        delta_plus  = +(delta_m + 2 dK) + dK = delta_m + 3 dK
        delta_minus = -(delta_m + 2 dK) + dK = -(delta_m + dK)
    """
    k1 = 2.0 * delta_K
    k2 = -delta_K
    return (delta_m + k1) - k2, -(delta_m + k1) - k2


def build_diffusion_matrix(params: SystemParams) -> np.ndarray:
    p = params
    return np.diag([
        0.0,
        p.gamma_b * (2 * p.n_b + 1),
        p.kappa_m * (2 * p.n_m + 1),
        p.kappa_m * (2 * p.n_m + 1),
        p.kappa_1 * (2 * p.n_1 + 1),
        p.kappa_1 * (2 * p.n_1 + 1),
        p.kappa_2 * (2 * p.n_2 + 1),
        p.kappa_2 * (2 * p.n_2 + 1),
    ])


def build_drift_matrix(
    params: SystemParams,
    ss: SteadyState | None = None,
    *,
    G: float | None = None,
    delta_K: float | None = None,
    delta_m: float | None = None,
) -> DriftModel:
    """Assemble the 8x8 drift matrix and the diffusion matrix.

    ``G``, ``delta_K`` and ``delta_m`` come from ``ss`` unless given
    explicitly; explicit values win. Without a steady state, missing
    values default to ``G = 0``, ``delta_K = 0`` and the pinned or bare
    magnon detuning.
    """
    p = params
    if ss is not None:
        G = ss.G_eff if G is None else G
        delta_K = ss.delta_K if delta_K is None else delta_K
        delta_m = ss.delta_m if delta_m is None else delta_m
    G = 0.0 if G is None else G
    delta_K = 0.0 if delta_K is None else delta_K
    if delta_m is None:
        delta_m = p.delta_m if p.delta_m is not None else p.delta_m0
    dp, dn = kerr_detunings(delta_m, delta_K)
    g1, g2 = p.coupling_gamma_1, p.coupling_gamma_2
    k1, k2, km = p.kappa_1, p.kappa_2, p.kappa_m
    d1, d2 = p.delta_1, p.delta_2

    M = np.zeros((8, 8))
    M[0, 1] = 1.0
    M[1, 0], M[1, 1], M[1, 3] = -1.0, -p.gamma_b, G
    M[2, 0], M[2, 2], M[2, 3], M[2, 5], M[2, 7] = -G, -km, dp, g1, g2
    M[3, 2], M[3, 3], M[3, 4], M[3, 6] = dn, -km, -g1, -g2
    M[4, 3], M[4, 4], M[4, 5] = g1, -k1, d1
    M[5, 2], M[5, 4], M[5, 5] = -g1, -d1, -k1
    M[6, 3], M[6, 6], M[6, 7] = g2, -k2, d2
    M[7, 2], M[7, 6], M[7, 7] = -g2, -d2, -k2
    return DriftModel(M=M, D=build_diffusion_matrix(p), delta_plus=dp, delta_minus=dn, G=G)


def check_stability(model: DriftModel | np.ndarray, margin: float = STABILITY_MARGIN) -> StabilityReport:
    """Stable iff every eigenvalue of M has real part below ``-margin``.

    Eigenvalues are returned sorted by real part, largest first.
    """
    M = model.M if isinstance(model, DriftModel) else np.asarray(model, dtype=float)
    if not np.all(np.isfinite(M)):
        raise ValueError("drift matrix has non-finite entries")
    ev = np.linalg.eigvals(M)
    ev = ev[np.lexsort((-ev.imag, -ev.real))]
    max_real = float(ev[0].real)
    return StabilityReport(stable=max_real < -margin, max_real=max_real, eigenvalues=ev)


def format_matrix(A: np.ndarray, fmt: str = "text", labels=QUADRATURES) -> str:
    """Render a matrix as aligned text columns or CSV (17 significant digits)."""
    A = np.asarray(A)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["", *labels])
        for lab, row in zip(labels, A):
            w.writerow([lab, *(f"{v:.17g}" for v in row)])
        return buf.getvalue()
    if fmt != "text":
        raise ValueError(f"unknown format {fmt!r}")
    cells = [[f"{v:.6g}" for v in row] for row in A]
    width = max(8, max(len(c) for row in cells for c in row) + 2)
    head = " " * 4 + "".join(f"{lab:>{width}}" for lab in labels)
    body = [f"{lab:<4}" + "".join(f"{c:>{width}}" for c in row) for lab, row in zip(labels, cells)]
    return "\n".join([head, *body]) + "\n"
