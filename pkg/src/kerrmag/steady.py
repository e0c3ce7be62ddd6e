"""Mean-field steady state of the driven two-cavity magnomechanical system.

Everything here is in units of ``omega_b``. The Kerr shift couples back
into the magnon detuning through ``|m_s|**2``, so the mean-value equations
are solved as a fixed point in the magnon number ``n = |m_s|**2``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .params import MaterialConstants, SystemParams

__all__ = [
    "BistabilityError",
    "FeasibilityReport",
    "MeanFieldError",
    "SingularConfigurationError",
    "SteadyState",
    "SteadyStateError",
    "approximate_ms",
    "check_feasibility",
    "effective_coupling",
    "solve_steady_state",
    "steady_state_from_amplitude",
    "tune_drives",
]


class SteadyStateError(RuntimeError):
    def __init__(self, message: str, residual: float = math.nan, iterations: int = 0):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)


class BistabilityError(SteadyStateError):
    """The fixed-point iteration oscillates; more than one branch may exist."""


class SingularConfigurationError(ValueError):
    pass


class MeanFieldError(ValueError):
    pass


@dataclass(frozen=True)
class SteadyState:
    """Mean amplitudes and derived shifts (units of omega_b).

    ``G_eff`` is the magnomechanical coupling after rotating the magnon
    phase so that ``m_s`` lies on the negative imaginary axis. That
    rotation is a local phase change of the magnon and both cavity modes
    and leaves every entanglement measure unchanged.
    """

    m_s: complex
    c1_s: complex
    c2_s: complex
    q_s: float
    p_s: float
    delta_K: float
    delta_m: float
    G_eff: float
    iterations: int
    converged: bool
    residual: float

    @property
    def magnon_number(self) -> float:
        return abs(self.m_s) ** 2

    @property
    def delta_m_tilde(self) -> float:
        return self.delta_m + self.delta_K


def _amplitudes(p: SystemParams, delta_tilde: float) -> tuple[complex, complex, complex]:
    a1 = complex(p.kappa_1, p.delta_1)
    a2 = complex(p.kappa_2, p.delta_2)
    am = complex(p.kappa_m, delta_tilde)
    g1, g2 = p.coupling_gamma_1, p.coupling_gamma_2
    e1, e2 = p.drive_E1_n, p.drive_E2_n
    den = a1 * a2 * am + g1 * g1 * a2 + g2 * g2 * a1
    if den == 0 or a1 == 0 or a2 == 0:
        raise SingularConfigurationError("mean-value equations are singular at this operating point")
    num = -1j * g1 * e1 * a2 - 1j * g2 * e2 * a1 + p.rabi_Omega_n * a1 * a2
    m = num / den
    return m, (e1 - 1j * g1 * m) / a1, (e2 - 1j * g2 * m) / a2


def _shifts(p: SystemParams, n: float, kerr: float) -> tuple[float, float]:
    if p.delta_m is not None:
        dm = p.delta_m
    else:
        dm = p.delta_m0 - p.g_mb_n**2 * n
    dk = p.delta_K_override if p.delta_K_override is not None else 2.0 * kerr * n
    return dm, dk


def _picard(p, n, kerr, tol, max_iter, damping):
    """Damped iteration ``n <- n + damping * (|m(n)|**2 - n)``."""
    history: list[float] = []
    for it in range(1, max_iter + 1):
        dm, dk = _shifts(p, n, kerr)
        m, _, _ = _amplitudes(p, dm + dk)
        step = abs(m) ** 2 - n
        scale = max(n, abs(m) ** 2)
        if scale == 0.0 or abs(step) <= tol * scale:
            return n, it, 0.0 if scale == 0.0 else abs(step) / scale
        n = max(n + damping * step, 0.0)
        history.append(step / scale)
        if len(history) >= 60 and it % 20 == 0:
            window = history[-60:]
            flips = sum(1 for a, b in zip(window, window[1:]) if a * b < 0)
            if flips > 50 and abs(window[-1]) >= 0.5 * abs(window[0]):
                raise BistabilityError(
                    f"fixed-point iteration oscillates (relative step {abs(window[-1]):.3g}); "
                    "possible bistability",
                    residual=abs(window[-1]), iterations=it,
                )
    raise SteadyStateError(
        f"steady state did not converge in {max_iter} iterations "
        f"(last relative step {abs(history[-1]) if history else math.nan:.3g})",
        residual=abs(history[-1]) if history else math.nan, iterations=max_iter,
    )


def solve_steady_state(
    params: SystemParams,
    *,
    tol: float = 1e-12,
    max_iter: int = 10_000,
    damping: float = 0.5,
    residual_tol: float = 1e-10,
) -> SteadyState:
    """Solve the mean-value equations including the Kerr and radiation-pressure shifts.

    The iteration starts from the closed-form solution without Kerr
    shift. If a direct damped iteration at the full Kerr coefficient fails,
    the coefficient is ramped up from zero in 16 steps, each step starting
    from the previous solution.

    Raises
    ------
    BistabilityError
        The iteration oscillates without settling.
    SteadyStateError
        No convergence within ``max_iter`` iterations.
    SingularConfigurationError
        The linear mean-value system is singular.
    """
    p = params
    kerr = p.kerr_K_n
    dm, dk = _shifts(p, 0.0, 0.0)
    m0, _, _ = _amplitudes(p, dm + dk)
    n = abs(m0) ** 2
    kerr_active = p.delta_K_override is None and kerr != 0.0
    shift_active = p.delta_m is None and p.g_mb_n != 0.0

    iterations = 0
    if kerr_active or shift_active:
        try:
            n, iterations, _ = _picard(p, n, kerr, tol, max_iter, damping)
        except SteadyStateError as first:
            if not kerr_active:
                raise
            n_prev = abs(m0) ** 2
            iterations = first.iterations
            for s in range(1, 17):
                n_prev, its, _ = _picard(p, n_prev, kerr * s / 16, tol, max_iter, damping)
                iterations += its
            n = n_prev

    dm, dk = _shifts(p, n, kerr)
    m, c1, c2 = _amplitudes(p, dm + dk)
    residual = 0.0
    if kerr_active or shift_active:
        n_m = abs(m) ** 2
        dm, dk = _shifts(p, n_m, kerr)
        m_check, _, _ = _amplitudes(p, dm + dk)
        residual = abs(m_check - m) / abs(m) if m != 0 else 0.0
        if residual > residual_tol:
            raise SteadyStateError(f"fixed-point residual {residual:.3g} above {residual_tol:g}",
                                   residual=residual, iterations=iterations)
    n = abs(m) ** 2
    return SteadyState(
        m_s=m,
        c1_s=c1,
        c2_s=c2,
        q_s=-p.g_mb_n * n,
        p_s=0.0,
        delta_K=dk,
        delta_m=dm,
        G_eff=math.sqrt(2.0) * p.g_mb_n * abs(m),
        iterations=iterations,
        converged=True,
        residual=residual,
    )


def steady_state_from_amplitude(m_s: complex, params: SystemParams | None = None) -> SteadyState:
    """Wrap a known magnon amplitude as a :class:`SteadyState` (diagnostics, tests)."""
    n = abs(m_s) ** 2
    g = params.g_mb_n if params is not None else 0.0
    kerr = params.kerr_K_n if params is not None else 0.0
    dm = 0.0 if params is None else (params.delta_m if params.delta_m is not None else params.delta_m0 - g * g * n)
    return SteadyState(m_s=complex(m_s), c1_s=0j, c2_s=0j, q_s=-g * n, p_s=0.0, delta_K=2 * kerr * n,
                       delta_m=dm, G_eff=math.sqrt(2.0) * g * abs(m_s), iterations=0, converged=True,
                       residual=0.0)


def approximate_ms(params: SystemParams, ratio_warning: float = 5.0) -> complex:
    """Dispersive-limit magnon amplitude (purely imaginary).

    Uses the effective magnon detuning (pinned ``delta_m`` if set, else
    ``delta_m0``) plus ``delta_K_override`` when given.
    """
    p = params
    dm = p.delta_m if p.delta_m is not None else p.delta_m0
    if p.delta_K_override is not None:
        dm += p.delta_K_override
    d1, d2 = p.delta_1, p.delta_2
    for det, kap, label in ((dm, p.kappa_m, "magnon"), (d1, p.kappa_1, "cavity 1"), (d2, p.kappa_2, "cavity 2")):
        if kap > 0 and abs(det) < ratio_warning * kap:
            warnings.warn(f"{label} detuning is not >> its decay rate "
                          f"(|delta|/kappa = {abs(det) / kap:.3g})", stacklevel=2)
    g1, g2 = p.coupling_gamma_1, p.coupling_gamma_2
    den = d1 * d2 * dm - d1 * g2**2 - d2 * g1**2
    if den == 0:
        raise SingularConfigurationError("dispersive denominator vanishes")
    num = d2 * g1 * p.drive_E1_n + d1 * g2 * p.drive_E2_n - p.rabi_Omega_n * d1 * d2
    return complex(0.0, num / den)


def effective_coupling(ss: SteadyState, params: SystemParams, purity_tol: float | None = None) -> float:
    """Magnomechanical coupling ``sqrt(2) g_mb |m_s|`` in units of omega_b.

    With ``purity_tol`` set, raises :class:`MeanFieldError` when
    ``|Re m_s| / |m_s|`` exceeds it, i.e. when ``m_s`` is not close to
    purely imaginary before the phase rotation.
    """
    if not ss.converged:
        raise SteadyStateError("steady state not converged")
    if ss.m_s == 0:
        return 0.0
    purity = abs(ss.m_s.real) / abs(ss.m_s)
    if purity_tol is not None and purity > purity_tol:
        raise MeanFieldError(f"mean field not imaginary: |Re m_s|/|m_s| = {purity:.3g} > {purity_tol:g}")
    return math.sqrt(2.0) * params.g_mb_n * abs(ss.m_s)


def tune_drives(params: SystemParams, coupling_ratio: float, *, max_iter: int = 50) -> SystemParams:
    """Rescale ``rabi_Omega`` and both cavity drives by one common factor.

    After rescaling, the steady state with the Kerr shift switched off
    (``kerr_K = 0``, no override) has ``G_eff / coupling_gamma_1`` equal to
    ``coupling_ratio`` at the operating point in ``params``.
    """
    if coupling_ratio < 0:
        raise ValueError("coupling_ratio must be >= 0")
    target = coupling_ratio * params.coupling_gamma_1
    probe = params.replace(kerr_K=0.0, delta_K_override=None)
    scale = 0.0 if target == 0 else 1.0
    for _ in range(max_iter if target else 0):
        trial = probe.replace(rabi_Omega=params.rabi_Omega * scale, drive_E1=params.drive_E1 * scale,
                              drive_E2=params.drive_E2 * scale)
        g = solve_steady_state(trial).G_eff
        if g == 0:
            raise SingularConfigurationError("drives produce no magnon amplitude; cannot tune coupling")
        if abs(g / target - 1.0) < 1e-13:
            break
        scale *= target / g
    return params.replace(rabi_Omega=params.rabi_Omega * scale, drive_E1=params.drive_E1 * scale,
                          drive_E2=params.drive_E2 * scale)


@dataclass(frozen=True)
class FeasibilityReport:
    magnon_number: float
    spin_bound: float
    excitation_ratio: float
    low_excitation_ok: bool
    kerr_drive_ratio: float
    kerr_negligible: bool
    kerr_K: float
    rabi_Omega: float

    def format(self) -> str:
        lines = [
            f"magnon number |m_s|^2      {self.magnon_number:.4g}",
            f"spin bound 5N              {self.spin_bound:.4g}",
            f"|m_s|^2 / 5N               {self.excitation_ratio:.4g}  "
            f"({'ok' if self.low_excitation_ok else 'VIOLATED'})",
            f"Omega (rad/s)              {self.rabi_Omega:.4g}",
            f"K_r |m_s|^3 (rad/s)        {abs(self.kerr_K) * self.magnon_number ** 1.5:.4g}",
            f"K_r |m_s|^3 / Omega        {self.kerr_drive_ratio:.4g}  "
            f"({'Kerr negligible' if self.kerr_negligible else 'Kerr NOT negligible'})",
        ]
        return "\n".join(lines)


def check_feasibility(
    ss: SteadyState,
    mat: MaterialConstants,
    *,
    kerr_K: float | None = None,
    rabi_Omega: float | None = None,
    excitation_threshold: float = 1e-2,
    kerr_threshold: float = 0.1,
) -> FeasibilityReport:
    """Low-excitation and Kerr-vs-drive diagnostics.

    ``kerr_K`` and ``rabi_Omega`` (rad/s) default to the values derived from
    ``mat``. The Kerr term counts as negligible when
    ``|K_r| |m_s|**3 / Omega < kerr_threshold``.
    """
    from .params import derive_kerr_and_drives

    if kerr_K is None or rabi_Omega is None:
        k, om, _ = derive_kerr_and_drives(mat, 1.0)
        kerr_K = k if kerr_K is None else kerr_K
        rabi_Omega = om if rabi_Omega is None else rabi_Omega
    n = ss.magnon_number
    bound = 5.0 * mat.spin_number
    exc = n / bound
    kerr_ratio = abs(kerr_K) * n**1.5 / rabi_Omega if rabi_Omega > 0 else math.inf
    if n == 0:
        kerr_ratio = 0.0
    return FeasibilityReport(
        magnon_number=n,
        spin_bound=bound,
        excitation_ratio=exc,
        low_excitation_ok=exc < excitation_threshold,
        kerr_drive_ratio=kerr_ratio,
        kerr_negligible=kerr_ratio < kerr_threshold,
        kerr_K=kerr_K,
        rabi_Omega=rabi_Omega,
    )
