"""Gaussian entanglement measures on quadrature covariance matrices.

Covariance matrices are ordered as consecutive ``(x, p)`` pairs, one per
mode, with vacuum ``V = I/2``. The partial transpose of a mode flips the
sign of its momentum quadrature. Logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .drift import MODE_ORDER

__all__ = [
    "MEASURES",
    "MODE_INDEX",
    "EntanglementReport",
    "MonogamyViolation",
    "UnphysicalStateError",
    "entanglement_report",
    "evaluate_measure",
    "is_physical",
    "log_negativity",
    "log_negativity_bipartite",
    "log_negativity_one_vs_two",
    "min_symplectic_eigenvalue",
    "partial_transpose",
    "reduce_cm",
    "residual_contangle_min",
    "residual_contangles",
    "symplectic_eigenvalues",
    "symplectic_form",
]

MODE_INDEX = {name: i for i, name in enumerate(MODE_ORDER)}
PHYSICAL_TOL = 1e-9
MONOGAMY_TOL = 1e-9
# 2 nu_min this close to 1 is rounding noise on a separable state
SEPARABLE_TOL = 1e-12

# measure id -> modes; bipartite ids hold two modes, contangle ids three
MEASURES: dict[str, tuple[str, ...]] = {
    "E_c1c2": ("c1", "c2"),
    "E_c1m": ("c1", "m"),
    "E_c1b": ("c1", "b"),
    "E_mb": ("m", "b"),
    "E_c2m": ("c2", "m"),
    "E_c2b": ("c2", "b"),
    "R_c1mb": ("c1", "m", "b"),
    "R_c1mc2": ("c1", "m", "c2"),
}


class UnphysicalStateError(ValueError):
    """Covariance matrix violates the uncertainty principle."""


class MonogamyViolation(ArithmeticError):
    """A residual contangle came out negative beyond tolerance."""

    def __init__(self, residuals):
        self.residuals = tuple(residuals)
        super().__init__(f"monogamy violated: residual contangles {self.residuals}")


def symplectic_form(n_modes: int) -> np.ndarray:
    return np.kron(np.eye(n_modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _mode_indices(modes: Iterable, n_modes: int) -> list[int]:
    idx = [MODE_INDEX[m] if isinstance(m, str) else int(m) for m in modes]
    if len(set(idx)) != len(idx):
        raise ValueError(f"repeated mode in selection {list(modes)!r}")
    if any(i < 0 or i >= n_modes for i in idx):
        raise ValueError(f"mode index out of range in {list(modes)!r}")
    return idx


def reduce_cm(V, modes: Sequence) -> np.ndarray:
    """Principal submatrix of ``V`` on the selected modes, in the given order.

    Modes are names from ``MODE_ORDER`` or integer slots.
    """
    V = np.asarray(V)
    idx = _mode_indices(modes, V.shape[0] // 2)
    q = [k for i in idx for k in (2 * i, 2 * i + 1)]
    return V[np.ix_(q, q)]


def partial_transpose(V, party) -> np.ndarray:
    """Conjugate ``V`` by ``P = diag(..., 1, -1, ...)`` flipping the momenta of ``party``."""
    V = np.asarray(V)
    n = V.shape[0] // 2
    party = [party] if isinstance(party, (int, np.integer, str)) else list(party)
    idx = _mode_indices(party, n)
    if not idx or len(idx) >= n:
        raise ValueError("partial transpose needs a nonempty proper subset of modes")
    s = np.ones(2 * n)
    s[[2 * i + 1 for i in idx]] = -1.0
    return V * np.outer(s, s)


def symplectic_eigenvalues(V, tol: float = 1e-9) -> np.ndarray:
    """Symplectic spectrum of ``V``, ascending.

    The eigenvalues of ``Omega V`` are ``+-i nu_k``; each modulus appears
    twice and one copy per pair is kept.
    """
    V = np.asarray(V, dtype=float)
    if np.max(np.abs(V - V.T)) > tol * max(1.0, np.max(np.abs(V))):
        raise ValueError("covariance matrix is not symmetric")
    n = V.shape[0] // 2
    moduli = np.sort(np.abs(np.linalg.eigvals(symplectic_form(n) @ V)))
    return moduli[::2]


def min_symplectic_eigenvalue(V) -> float:
    return float(symplectic_eigenvalues(V)[0])


def is_physical(V, tol: float = PHYSICAL_TOL) -> bool:
    """``V + i Omega / 2 >= 0`` up to ``tol``."""
    V = np.asarray(V, dtype=float)
    n = V.shape[0] // 2
    return bool(np.min(np.linalg.eigvalsh(V + 0.5j * symplectic_form(n))) >= -tol)


def log_negativity(V, party=0, *, check: bool = True) -> float:
    """``max(0, -ln(2 nu_min))`` of ``V`` partially transposed on ``party``.

    Returns exactly 0 when ``2 nu_min >= 1 - SEPARABLE_TOL``.
    """
    V = np.asarray(V, dtype=float)
    if check and not is_physical(V):
        raise UnphysicalStateError("input covariance matrix is unphysical")
    nu = min_symplectic_eigenvalue(partial_transpose(V, party))
    if 2.0 * nu >= 1.0 - SEPARABLE_TOL:
        return 0.0
    return -math.log(2.0 * nu)


def log_negativity_bipartite(V4, *, check: bool = True) -> float:
    V4 = np.asarray(V4, dtype=float)
    if V4.shape != (4, 4):
        raise ValueError("expected a 4x4 covariance matrix")
    return log_negativity(V4, 0, check=check)


def log_negativity_one_vs_two(V6, single: int, *, check: bool = True) -> float:
    V6 = np.asarray(V6, dtype=float)
    if V6.shape != (6, 6):
        raise ValueError("expected a 6x6 covariance matrix")
    return log_negativity(V6, single, check=check)


def residual_contangles(V6, *, check: bool = True, tol: float = MONOGAMY_TOL,
                        clamp: bool = True) -> tuple[float, float, float]:
    """Residuals ``E^2_{i|jk} - E^2_{i|j} - E^2_{i|k}`` for ``i = 0, 1, 2``.

    Values in ``[-tol, 0)`` are clamped to 0; anything lower raises
    :class:`MonogamyViolation`. ``clamp=False`` returns the raw values
    without either step.
    """
    V6 = np.asarray(V6, dtype=float)
    if V6.shape != (6, 6):
        raise ValueError("expected a 6x6 covariance matrix")
    if check and not is_physical(V6):
        raise UnphysicalStateError("input covariance matrix is unphysical")
    pair = {}
    for i, j in ((0, 1), (0, 2), (1, 2)):
        pair[i, j] = pair[j, i] = log_negativity(reduce_cm(V6, (i, j)), 0, check=False) ** 2
    raw = []
    for i in range(3):
        j, k = (x for x in range(3) if x != i)
        raw.append(log_negativity(V6, i, check=False) ** 2 - pair[i, j] - pair[i, k])
    if not clamp:
        return tuple(raw)
    if min(raw) < -tol:
        raise MonogamyViolation(raw)
    return tuple(max(0.0, r) for r in raw)


def residual_contangle_min(V6, *, check: bool = True) -> float:
    """Minimum residual contangle over the three single-mode cuts."""
    return min(residual_contangles(V6, check=check))


def evaluate_measure(V, measure: str, *, check: bool = False) -> float:
    """Evaluate a named measure (see ``MEASURES``) on the full 8x8 covariance matrix."""
    try:
        modes = MEASURES[measure]
    except KeyError:
        raise ValueError(f"unknown measure {measure!r}; known: {', '.join(MEASURES)}") from None
    sub = reduce_cm(V, modes)
    if len(modes) == 2:
        return log_negativity_bipartite(sub, check=check)
    return residual_contangle_min(sub, check=check)


@dataclass(frozen=True)
class EntanglementReport:
    E_c1c2: float
    E_c1m: float
    E_c1b: float
    E_mb: float
    R_c1mb: float
    R_c1mc2: float
    stable: bool
    parameters: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in ("E_c1c2", "E_c1m", "E_c1b", "E_mb", "R_c1mb", "R_c1mc2")}


def entanglement_report(V, *, stable: bool = True, parameters: dict | None = None) -> EntanglementReport:
    """All four bipartite negativities and both contangles of an 8x8 CM.

    For an unstable point pass ``V=None`` with ``stable=False``; every
    measure is then NaN.
    """
    names = ("E_c1c2", "E_c1m", "E_c1b", "E_mb", "R_c1mb", "R_c1mc2")
    if not stable:
        values = {k: math.nan for k in names}
    else:
        if not is_physical(V):
            raise UnphysicalStateError("steady-state covariance matrix is unphysical")
        values = {k: evaluate_measure(V, k) for k in names}
    return EntanglementReport(**values, stable=stable, parameters=dict(parameters or {}))
