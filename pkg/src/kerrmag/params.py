"""System parameters, unit handling and material-constant derivations.

All solver code works in units where the phonon angular frequency is 1.
SI values (rad/s, K, m, ...) only appear at the ingestion boundary
(:func:`load_params`) and in the material derivations below.

Physical constants are CODATA 2018 exact/recommended values::

    hbar = 1.054571817e-34 J s
    k_B  = 1.380649e-23 J/K
    c    = 299792458 m/s
"""

from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

HBAR = 1.054571817e-34
K_B = 1.380649e-23
C_LIGHT = 299792458.0
TWO_PI = 2.0 * math.pi

__all__ = [
    "ConfigError",
    "MaterialConstants",
    "ParameterError",
    "SystemParams",
    "baseline_config_path",
    "bose_occupation",
    "derive_kerr_and_drives",
    "derive_optomagnonic_coupling",
    "load_params",
    "sphere_volume",
]


class ParameterError(ValueError):
    """Invalid physical parameter. ``field`` names the offending entry."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


class ConfigError(ParameterError):
    """Configuration document could not be turned into :class:`SystemParams`."""


def bose_occupation(omega: float, temperature: float) -> float:
    """Bose-Einstein occupation ``1 / (exp(hbar*omega / k_B T) - 1)``.

    Parameters
    ----------
    omega : float
        Angular frequency in rad/s, must be positive.
    temperature : float
        Bath temperature in K. ``0`` returns exactly ``0.0``.
    """
    if not omega > 0:
        raise ParameterError("omega", f"angular frequency must be positive, got {omega!r}")
    if temperature < 0:
        raise ParameterError("temperature", f"must be >= 0, got {temperature!r}")
    if temperature == 0:
        return 0.0
    x = HBAR * omega / (K_B * temperature)
    if x > 50.0:
        # expm1 overflows long before 1/expm1 loses precision against exp(-x)
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def sphere_volume(radius: float) -> float:
    return 4.0 / 3.0 * math.pi * radius**3


@dataclass(frozen=True)
class MaterialConstants:
    """SI material and drive constants of the YIG sphere.

    Defaults describe a 100 um diameter YIG sphere. ``mu0_kan`` is an
    effective value fixed so that a 250 um diameter sphere gives
    ``K_r = 6.4e-9`` under ``K_r = mu0_kan * gamma_G**2 / (M**2 V)``.
    ``verdet`` is the Faraday rotation per unit length (rad/m).
    """

    verdet: float = 418.9
    refractive_index: float = 2.19
    spin_density: float = 4.22e27
    sphere_radius: float = 50e-6
    mu0_kan: float = 3.268529608289233e-32
    saturation_M: float = 1.39e5
    gamma_G: float = TWO_PI * 28e9
    spin_number_density: float = 4.22e27
    drive_field: float = 1.3e-4
    laser_power: float = 50e-3
    laser_frequency: float = TWO_PI * 10e9
    crystal_axis: str = "110"

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name == "crystal_axis":
                continue
            value = getattr(self, f.name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f.name, f"material constant must be positive, got {value!r}")
        if self.crystal_axis not in ("100", "110"):
            raise ParameterError("crystal_axis", f"expected '100' or '110', got {self.crystal_axis!r}")

    @property
    def volume(self) -> float:
        """Sphere volume ``(4/3) pi r**3`` in m^3."""
        return sphere_volume(self.sphere_radius)

    @property
    def spin_number(self) -> float:
        """Total spin number ``N = rho * V``."""
        return self.spin_number_density * self.volume


def derive_optomagnonic_coupling(mat: MaterialConstants) -> float:
    """Cavity-magnon coupling ``Verdet * c / n_r * sqrt(2 / (rho_spin V))`` in rad/s."""
    return mat.verdet * C_LIGHT / mat.refractive_index * math.sqrt(2.0 / (mat.spin_density * mat.volume))


def derive_kerr_and_drives(
    mat: MaterialConstants, kappa_1: float, kappa_2: float | None = None
) -> tuple[float, float, tuple[float, float]]:
    """Kerr coefficient, magnon Rabi frequency and cavity drive strengths.

    Parameters
    ----------
    mat : MaterialConstants
    kappa_1, kappa_2 : float
        Cavity amplitude decay rates in rad/s (``kappa_2`` defaults to ``kappa_1``).

    Returns
    -------
    kerr_K : float
        Signed self-Kerr coefficient (rad/s); positive for the [100] axis,
        negative for [110].
    rabi_Omega : float
        ``5/4 * gamma_G * sqrt(N) * H_d`` (rad/s).
    drive_E : (float, float)
        ``sqrt(2 kappa_j P / (hbar omega_L))`` for both cavities (rad/s).
    """
    if kappa_2 is None:
        kappa_2 = kappa_1
    for name, value in (("kappa_1", kappa_1), ("kappa_2", kappa_2)):
        if not value > 0:
            raise ParameterError(name, f"must be positive, got {value!r}")
    kerr = mat.mu0_kan * mat.gamma_G**2 / (mat.saturation_M**2 * mat.volume)
    if mat.crystal_axis == "110":
        kerr = -kerr
    omega = 1.25 * mat.gamma_G * math.sqrt(mat.spin_number) * mat.drive_field
    photon = HBAR * mat.laser_frequency
    drives = tuple(math.sqrt(2.0 * k * mat.laser_power / photon) for k in (kappa_1, kappa_2))
    return kerr, omega, drives


# fields stored in units of omega_b
_NORMALIZED = (
    "delta_1", "delta_2", "delta_m0", "kappa_1", "kappa_2", "kappa_m", "gamma_b",
    "coupling_gamma_1", "coupling_gamma_2",
)
_DECAY_RATES = ("kappa_1", "kappa_2", "kappa_m", "gamma_b")


@dataclass(frozen=True)
class SystemParams:
    """Immutable parameter set.

    Angular frequencies ``omega_*`` and the couplings/drives ``g_mb``,
    ``kerr_K``, ``rabi_Omega``, ``drive_E1``, ``drive_E2`` are in rad/s.
    Detunings, decay rates and ``coupling_gamma_*`` are in units of
    ``omega_b``. ``n_b, n_m, n_1, n_2`` are derived on construction.

    ``delta_m`` (units of omega_b), when set, pins the effective magnon
    detuning ``delta_m0 + g_mb q_s`` and ``delta_m0`` is then ignored by
    the steady-state solver. ``delta_K_override`` fixes the Kerr shift
    instead of solving for it self-consistently.
    """

    omega_b: float
    omega_1: float
    omega_2: float
    omega_m: float
    delta_1: float
    delta_2: float
    delta_m0: float
    kappa_1: float
    kappa_2: float
    kappa_m: float
    gamma_b: float
    coupling_gamma_1: float
    coupling_gamma_2: float
    g_mb: float
    kerr_K: float
    rabi_Omega: float
    drive_E1: float
    drive_E2: float
    temperature: float
    delta_m: float | None = None
    delta_K_override: float | None = None
    material: MaterialConstants = field(default_factory=MaterialConstants)
    n_b: float = field(init=False)
    n_m: float = field(init=False)
    n_1: float = field(init=False)
    n_2: float = field(init=False)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name in ("material", "delta_m", "delta_K_override") or not f.init:
                continue
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ParameterError(f.name, f"expected a finite number, got {value!r}")
        if not self.omega_b > 0:
            raise ParameterError("omega_b", "must be positive")
        for name in ("omega_1", "omega_2", "omega_m"):
            if not getattr(self, name) > 0:
                raise ParameterError(name, "must be positive")
        for name in _DECAY_RATES:
            if getattr(self, name) < 0:
                raise ParameterError(name, f"negative decay rate {getattr(self, name)!r}")
        if self.temperature < 0:
            raise ParameterError("temperature", "must be >= 0")
        T = self.temperature
        object.__setattr__(self, "n_b", bose_occupation(self.omega_b, T))
        object.__setattr__(self, "n_m", bose_occupation(self.omega_m, T))
        object.__setattr__(self, "n_1", bose_occupation(self.omega_1, T))
        object.__setattr__(self, "n_2", bose_occupation(self.omega_2, T))

    # normalized views of the rad/s quantities
    @property
    def g_mb_n(self) -> float:
        return self.g_mb / self.omega_b

    @property
    def kerr_K_n(self) -> float:
        return self.kerr_K / self.omega_b

    @property
    def rabi_Omega_n(self) -> float:
        return self.rabi_Omega / self.omega_b

    @property
    def drive_E1_n(self) -> float:
        return self.drive_E1 / self.omega_b

    @property
    def drive_E2_n(self) -> float:
        return self.drive_E2 / self.omega_b

    @property
    def omega_0(self) -> float:
        """Drive angular frequency implied by ``omega_1`` and ``delta_1`` (rad/s)."""
        return self.omega_1 - self.delta_1 * self.omega_b

    def replace(self, **changes) -> "SystemParams":
        return dataclasses.replace(self, **changes)

    def to_si(self) -> dict[str, float | None]:
        """All rates in rad/s (normalized fields multiplied by ``omega_b``)."""
        out: dict[str, float | None] = {}
        for f in dataclasses.fields(self):
            if not f.init or f.name == "material":
                continue
            value = getattr(self, f.name)
            if f.name in _NORMALIZED or f.name in ("delta_m", "delta_K_override"):
                value = None if value is None else value * self.omega_b
            out[f.name] = value
        return out

    @classmethod
    def from_si(cls, values: Mapping[str, float | None], material: MaterialConstants | None = None):
        omega_b = values["omega_b"]
        kwargs = {}
        for name, value in values.items():
            if name in _NORMALIZED or name in ("delta_m", "delta_K_override"):
                value = None if value is None else value / omega_b
            kwargs[name] = value
        if material is not None:
            kwargs["material"] = material
        return cls(**kwargs)


# ---------------------------------------------------------------------------
# configuration files
# ---------------------------------------------------------------------------

# key -> (section, kind); kind "hz" means the value is an ordinary frequency
# and is multiplied by 2*pi on load.
_SCHEMA: dict[str, tuple[str, str]] = {
    "omega_b_hz": ("system", "hz"),
    "omega_1_hz": ("system", "hz"),
    "omega_2_hz": ("system", "hz"),
    "omega_m_hz": ("system", "hz"),
    "delta_1": ("system", "wb"),
    "delta_2": ("system", "wb"),
    "delta_m0": ("system", "wb"),
    "delta_m": ("system", "wb"),
    "kappa_1": ("system", "wb"),
    "kappa_2": ("system", "wb"),
    "kappa_m": ("system", "wb"),
    "gamma_b": ("system", "wb"),
    "coupling_gamma_1": ("system", "wb"),
    "coupling_gamma_2": ("system", "wb"),
    "g_mb_hz": ("system", "hz"),
    "kerr_K": ("system", "rad"),
    "delta_K_override": ("system", "wb"),
    "rabi_Omega": ("drive", "rad"),
    "drive_E1": ("drive", "rad"),
    "drive_E2": ("drive", "rad"),
    "coupling_ratio": ("drive", "plain"),
    "temperature": ("bath", "plain"),
    "verdet": ("material", "plain"),
    "refractive_index": ("material", "plain"),
    "spin_density": ("material", "plain"),
    "sphere_radius": ("material", "plain"),
    "mu0_kan": ("material", "plain"),
    "saturation_M": ("material", "plain"),
    "gamma_G_hz_per_T": ("material", "hz"),
    "spin_number_density": ("material", "plain"),
    "drive_field": ("material", "plain"),
    "laser_power": ("material", "plain"),
    "laser_frequency_hz": ("material", "hz"),
    "crystal_axis": ("material", "text"),
}
_OPTIONAL = {
    "delta_m0", "delta_m", "delta_K_override", "coupling_ratio",
    *(k for k, (s, _) in _SCHEMA.items() if s == "material"),
}
_MATERIAL_NAMES = {"gamma_G_hz_per_T": "gamma_G", "laser_frequency_hz": "laser_frequency"}


def baseline_config_path() -> Path:
    """Path of the bundled baseline configuration."""
    return Path(str(resources.files("kerrmag") / "data" / "baseline.ini"))


def _read_document(config) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    if isinstance(config, Mapping):
        parser.read_dict(config)
    elif isinstance(config, Path) or (isinstance(config, str) and "\n" not in config and "[" not in config):
        path = Path(config)
        if not path.exists():
            raise ConfigError("config", f"file not found: {path}")
        parser.read(path)
    else:
        parser.read_string(config)
    return parser


def _parse_number(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(key, f"unparseable number {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(key, f"non-finite value {text!r}")
    return value


def load_params(config, overrides: Mapping[str, str] | None = None) -> SystemParams:
    """Build :class:`SystemParams` from an INI document.

    Parameters
    ----------
    config : path, str or mapping
        File path, INI text, or a ``{section: {key: value}}`` mapping.
    overrides : mapping, optional
        Dotted ``section.key`` -> value strings applied after parsing.

    Fields ending in ``_hz`` are ordinary frequencies and are multiplied by
    2*pi. Detunings, decay rates and cavity-magnon couplings are given in
    units of omega_b. ``kerr_K`` and the drives are rad/s. The optional
    ``[drive] coupling_ratio`` rescales all drives so that, with the Kerr
    shift switched off, the configured operating point has ``|G| / Gamma_1``
    equal to that value.
    """
    parser = _read_document(config)
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.rpartition(".")
        if key not in _SCHEMA:
            raise ConfigError(dotted, "unknown field")
        section = section or _SCHEMA[key][0]
        if section != _SCHEMA[key][0]:
            raise ConfigError(dotted, f"field belongs to section [{_SCHEMA[key][0]}]")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(value))

    raw: dict[str, float | str] = {}
    for section in parser.sections():
        for key, text in parser.items(section):
            if key not in _SCHEMA:
                raise ConfigError(f"{section}.{key}", "unknown field")
            expected = _SCHEMA[key][0]
            if expected != section:
                raise ConfigError(f"{section}.{key}", f"field belongs to section [{expected}]")
            kind = _SCHEMA[key][1]
            if kind == "text":
                raw[key] = text.strip().strip("[]")
                continue
            value = _parse_number(key, text)
            raw[key] = value * TWO_PI if kind == "hz" else value

    missing = [k for k in _SCHEMA if k not in _OPTIONAL and k not in raw]
    if "delta_m0" not in raw and "delta_m" not in raw:
        missing.append("delta_m0")
    if missing:
        raise ConfigError(missing[0], "missing required field" + (f" (also: {', '.join(missing[1:])})" if missing[1:] else ""))
    for key in _DECAY_RATES:
        if raw[key] < 0:
            raise ConfigError(key, f"negative decay rate {raw[key]!r}")

    mat_kwargs = {
        _MATERIAL_NAMES.get(k, k): v for k, v in raw.items() if _SCHEMA[k][0] == "material"
    }
    material = MaterialConstants(**mat_kwargs)

    params = SystemParams(
        omega_b=raw["omega_b_hz"],
        omega_1=raw["omega_1_hz"],
        omega_2=raw["omega_2_hz"],
        omega_m=raw["omega_m_hz"],
        delta_1=raw["delta_1"],
        delta_2=raw["delta_2"],
        delta_m0=raw.get("delta_m0", raw.get("delta_m")),
        delta_m=raw.get("delta_m"),
        kappa_1=raw["kappa_1"],
        kappa_2=raw["kappa_2"],
        kappa_m=raw["kappa_m"],
        gamma_b=raw["gamma_b"],
        coupling_gamma_1=raw["coupling_gamma_1"],
        coupling_gamma_2=raw["coupling_gamma_2"],
        g_mb=raw["g_mb_hz"],
        kerr_K=raw["kerr_K"],
        delta_K_override=raw.get("delta_K_override"),
        rabi_Omega=raw["rabi_Omega"],
        drive_E1=raw["drive_E1"],
        drive_E2=raw["drive_E2"],
        temperature=raw["temperature"],
        material=material,
    )
    if "coupling_ratio" in raw:
        from .steady import tune_drives

        params = tune_drives(params, raw["coupling_ratio"])
    return params
