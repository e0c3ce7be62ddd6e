"""Parameter-grid evaluation, figure presets and CSV / plot-data output.

A sweep evaluates the full pipeline (steady state -> drift matrix ->
stability -> Lyapunov -> measures) on a 1-D or 2-D grid for up to three
Kerr configurations:

``zero``   Kerr shift switched off.
``plus``   ``delta_K > 0`` ([100] axis).
``minus``  ``delta_K < 0`` ([110] axis).

With ``operating="reference"`` (the default) the steady state of each
Kerr configuration is solved once, at the sweep's reference detunings, and
the resulting ``(G, delta_K)`` pair is held fixed while the grid varies
the detunings in the drift matrix. ``operating="pointwise"`` re-solves the
steady state at every grid point instead.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .drift import DriftModel, StabilityReport, build_drift_matrix, check_stability
from .lyapunov import CovarianceMatrix, solve_lyapunov
from .measures import MEASURES, EntanglementReport, entanglement_report, evaluate_measure, is_physical
from .nonrecip import NonreciprocityPair, bidirectional_contrast_ratio, bipartite_nonlinear_index
from .params import SystemParams
from .steady import SteadyState, solve_steady_state, tune_drives

__all__ = [
    "AXIS_NAMES",
    "DEFAULT_REFERENCE",
    "FIGURES",
    "KERR_MODES",
    "Axis",
    "FigureSpec",
    "ModeState",
    "PointAnalysis",
    "SweepResult",
    "SweepSpec",
    "analyze_point",
    "covariance_grid",
    "emit_csv",
    "evaluate_point",
    "figure_preset",
    "mode_states",
    "nonreciprocity_column",
    "read_csv",
    "run_sweep",
    "write_metadata",
    "write_plot_data",
]

AXIS_NAMES = ("delta_1", "delta_2", "delta_m", "g_ratio")
KERR_MODES = ("zero", "plus", "minus")
_MODE_ALIASES = {"both": ("plus", "minus"), "all": KERR_MODES}
DEFAULT_REFERENCE = {"delta_1": -1.0, "delta_2": 1.0, "delta_m": 1.0}


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    points: int

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}; expected one of {AXIS_NAMES}")
        if self.points < 2:
            raise ValueError(f"axis {self.name}: need at least 2 points")
        if not self.start < self.stop:
            raise ValueError(f"axis {self.name}: start must be below stop")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """``name:start:stop:points``."""
        try:
            name, start, stop, points = text.split(":")
            return cls(name, float(start), float(stop), int(points))
        except ValueError as exc:
            raise ValueError(f"bad axis {text!r} (expected name:start:stop:points): {exc}") from None


def _normalize_modes(modes) -> tuple[str, ...]:
    if isinstance(modes, str):
        modes = _MODE_ALIASES.get(modes, (modes,))
    modes = tuple(modes)
    for m in modes:
        if m not in KERR_MODES:
            raise ValueError(f"unknown kerr mode {m!r}; expected zero, plus, minus, both or all")
    if len(set(modes)) != len(modes):
        raise ValueError("repeated kerr mode")
    return tuple(m for m in KERR_MODES if m in modes)


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep.

    ``fixed`` and ``reference`` take keys from ``AXIS_NAMES`` (``g_ratio``
    only in ``fixed``). ``reference`` is the operating point at which the
    drives are tuned to ``coupling_ratio`` (``None`` keeps the configured
    drives) and at which the per-mode steady state is solved.
    ``kerr_magnitude=None`` takes the Kerr shift self-consistently from
    ``+-|kerr_K|``; a number fixes ``|delta_K|`` (units of omega_b).
    """

    axes: tuple[Axis, ...]
    kerr_modes: tuple[str, ...] = ("zero",)
    measures: tuple[str, ...] = ()
    fixed: Mapping[str, float] = field(default_factory=dict)
    reference: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_REFERENCE))
    coupling_ratio: float | None = 1.1
    kerr_magnitude: float | None = None
    operating: str = "reference"
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "kerr_modes", _normalize_modes(self.kerr_modes))
        object.__setattr__(self, "measures", tuple(self.measures))
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep has one or two axes")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError("repeated axis")
        for key in self.fixed:
            if key not in AXIS_NAMES:
                raise ValueError(f"unknown fixed parameter {key!r}")
            if key in names:
                raise ValueError(f"{key!r} is both an axis and fixed")
        for key in self.reference:
            if key not in AXIS_NAMES[:3]:
                raise ValueError(f"unknown reference parameter {key!r}")
        for m in self.measures:
            if m not in MEASURES:
                raise ValueError(f"unknown measure {m!r}")
        if self.operating not in ("reference", "pointwise"):
            raise ValueError(f"operating must be 'reference' or 'pointwise', got {self.operating!r}")
        if self.kerr_magnitude is not None and self.kerr_magnitude < 0:
            raise ValueError("kerr_magnitude must be >= 0")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(a.points for a in self.axes)

    @property
    def nonreciprocal(self) -> bool:
        return "plus" in self.kerr_modes and "minus" in self.kerr_modes

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["fixed"] = dict(self.fixed)
        d["reference"] = dict(self.reference)
        return d


def nonreciprocity_column(measure: str) -> str:
    """Bipartite measures get ``dEK_<id>``, contangles ``Bcr_<id>``."""
    return ("Bcr_" if measure.startswith("R_") else "dEK_") + measure


@dataclass
class SweepResult:
    """Rectangular table, one row per grid point and Kerr mode.

    Rows are ordered axis-1 major, then axis 2, then zero/plus/minus.
    Measures of unstable points are NaN.
    """

    columns: tuple[str, ...]
    rows: list[tuple]
    metadata: dict = field(default_factory=dict)
    failures: list[tuple[int, str]] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def select(self, kerr_mode: str) -> "SweepResult":
        i = self.columns.index("kerr_mode")
        rows = [r for r in self.rows if r[i] == kerr_mode]
        return SweepResult(self.columns, rows, dict(self.metadata), [])

    def __len__(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class ModeState:
    """Operating condition of one Kerr mode: coupling, Kerr shift, magnon detuning."""

    mode: str
    G: float
    delta_K: float
    delta_m: float
    steady: SteadyState | None = None


def _mode_params(params: SystemParams, mode: str, kerr_magnitude: float | None) -> SystemParams:
    if mode == "zero":
        return params.replace(kerr_K=0.0, delta_K_override=None)
    sign = 1.0 if mode == "plus" else -1.0
    if kerr_magnitude is None:
        return params.replace(kerr_K=sign * abs(params.kerr_K), delta_K_override=None)
    return params.replace(delta_K_override=sign * kerr_magnitude)


def _reference_params(spec: SweepSpec, params: SystemParams) -> SystemParams:
    ref = dict(spec.reference)
    p = params.replace(**{k: v for k, v in ref.items() if k != "delta_m"})
    if "delta_m" in ref:
        p = p.replace(delta_m=ref["delta_m"])
    if spec.coupling_ratio is not None:
        p = tune_drives(p, spec.coupling_ratio)
    return p


def mode_states(spec: SweepSpec, params: SystemParams) -> dict[str, ModeState]:
    """Steady-state ``(G, delta_K, delta_m)`` of each Kerr mode at the reference point."""
    base = _reference_params(spec, params)
    out = {}
    for mode in spec.kerr_modes:
        ss = solve_steady_state(_mode_params(base, mode, spec.kerr_magnitude))
        out[mode] = ModeState(mode, ss.G_eff, ss.delta_K, ss.delta_m, ss)
    return out


def evaluate_point(
    params: SystemParams,
    measures: Iterable[str],
    *,
    G: float,
    delta_K: float,
    delta_m: float,
) -> tuple[bool, dict[str, float]]:
    """Stability verdict and measures at one operating point (NaN when unstable)."""
    model = build_drift_matrix(params, G=G, delta_K=delta_K, delta_m=delta_m)
    measures = tuple(measures)
    if not check_stability(model).stable:
        return False, {m: math.nan for m in measures}
    cm = solve_lyapunov(model.M, model.D, check=False)
    if measures and not is_physical(cm.V):
        raise ArithmeticError("steady-state covariance matrix is unphysical")
    return True, {m: evaluate_measure(cm.V, m) for m in measures}


def _grid(spec: SweepSpec) -> list[tuple[float, ...]]:
    values = [a.values() for a in spec.axes]
    if len(values) == 1:
        return [(float(x),) for x in values[0]]
    return [(float(x), float(y)) for x in values[0] for y in values[1]]


def _operating(spec: SweepSpec, base: SystemParams, states, point, mode):
    """``(params, G, delta_K, delta_m)`` for one grid point and Kerr mode."""
    coords = dict(spec.fixed)
    coords.update(zip((a.name for a in spec.axes), point))
    p = base.replace(**{k: coords[k] for k in ("delta_1", "delta_2") if k in coords})
    st = states.get(mode)
    if st is None:  # pointwise operation
        pm = p.replace(delta_m=coords["delta_m"]) if "delta_m" in coords else p
        ss = solve_steady_state(_mode_params(pm, mode, spec.kerr_magnitude))
        st = ModeState(mode, ss.G_eff, ss.delta_K, ss.delta_m)
    G = coords["g_ratio"] * p.coupling_gamma_1 if "g_ratio" in coords else st.G
    return p, G, st.delta_K, coords.get("delta_m", st.delta_m)


def _evaluate_task(args):
    spec, base, states, point = args
    out = []
    for mode in spec.kerr_modes:
        try:
            p, G, delta_K, delta_m = _operating(spec, base, states, point, mode)
            stable, vals = evaluate_point(p, spec.measures, G=G, delta_K=delta_K, delta_m=delta_m)
            out.append((mode, stable, vals, None))
        except Exception as exc:  # recorded per row, sweep continues
            out.append((mode, False, {m: math.nan for m in spec.measures}, f"{type(exc).__name__}: {exc}"))
    return out


def covariance_grid(spec: SweepSpec, params: SystemParams):
    """Yield ``(point, mode, V)`` over the grid, in row order.

    ``V`` is the 8x8 steady-state covariance matrix, or ``None`` where the
    drift matrix is unstable.
    """
    base = _reference_params(spec, params)
    states = mode_states(spec, params) if spec.operating == "reference" else {}
    for point in _grid(spec):
        for mode in spec.kerr_modes:
            p, G, delta_K, delta_m = _operating(spec, base, states, point, mode)
            model = build_drift_matrix(p, G=G, delta_K=delta_K, delta_m=delta_m)
            V = solve_lyapunov(model.M, model.D, check=False).V if check_stability(model).stable else None
            yield point, mode, V


def _evaluate_chunk(tasks):
    return [_evaluate_task(t) for t in tasks]


def run_sweep(spec: SweepSpec, params: SystemParams, *, workers: int = 1, chunksize: int = 256) -> SweepResult:
    """Evaluate ``spec`` on ``params``; see the module docstring for the operating modes."""
    base = _reference_params(spec, params)
    if spec.operating == "reference":
        states = mode_states(spec, params)
        state_meta = {m: {"G": s.G, "g_ratio": s.G / base.coupling_gamma_1, "delta_K": s.delta_K,
                          "delta_m": s.delta_m} for m, s in states.items()}
    else:
        states, state_meta = {}, {}
    grid = _grid(spec)
    tasks = [(spec, base, states, pt) for pt in grid]
    chunks = [tasks[i:i + chunksize] for i in range(0, len(tasks), chunksize)]
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            evaluated = [r for chunk in pool.map(_evaluate_chunk, chunks) for r in chunk]
    else:
        evaluated = [r for chunk in chunks for r in _evaluate_chunk(chunk)]

    axis_names = tuple(a.name for a in spec.axes)
    nonrec = tuple(nonreciprocity_column(m) for m in spec.measures) if spec.nonreciprocal else ()
    columns = axis_names + ("kerr_mode", "stable") + spec.measures + nonrec
    rows, failures = [], []
    for point, per_mode in zip(grid, evaluated):
        extra = ()
        if nonrec:
            by_mode = {mode: vals for mode, _, vals, _ in per_mode}
            extra = tuple(_nonrec_value(m, by_mode["plus"][m], by_mode["minus"][m]) for m in spec.measures)
        for mode, stable, vals, err in per_mode:
            if err is not None:
                failures.append((len(rows), err))
            rows.append(point + (mode, stable) + tuple(vals[m] for m in spec.measures) + extra)

    stable_col = columns.index("stable")
    if rows and not any(r[stable_col] for r in rows):
        warnings.warn(f"sweep {spec.name or ''}: every grid point is unstable", stacklevel=2)
    metadata = {
        "spec": spec.to_dict(),
        "operating_points": state_meta,
        "drives": {"rabi_Omega": base.rabi_Omega, "drive_E1": base.drive_E1, "drive_E2": base.drive_E2},
        "kerr_K": params.kerr_K,
        "kerr_shift_mode": "self-consistent" if spec.kerr_magnitude is None else "fixed",
    }
    return SweepResult(columns, rows, metadata, failures)


def _nonrec_value(measure: str, plus: float, minus: float) -> float:
    pair = NonreciprocityPair(plus, minus, measure)
    if measure.startswith("R_"):
        return bidirectional_contrast_ratio(pair)
    return bipartite_nonlinear_index(pair)


# ---------------------------------------------------------------------------
# single-point analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointAnalysis:
    params: SystemParams
    steady: SteadyState
    model: DriftModel
    stability: StabilityReport
    covariance: CovarianceMatrix | None
    report: EntanglementReport


def analyze_point(params: SystemParams, *, g_ratio: float | None = None) -> PointAnalysis:
    """Full pipeline at the operating point described by ``params``.

    ``g_ratio`` replaces the steady-state coupling by ``g_ratio * Gamma_1``
    (the Kerr shift still comes from the steady state). The returned
    covariance is ``None`` when the drift matrix is unstable.
    """
    ss = solve_steady_state(params)
    G = ss.G_eff if g_ratio is None else g_ratio * params.coupling_gamma_1
    model = build_drift_matrix(params, ss, G=G)
    stab = check_stability(model)
    cm = solve_lyapunov(model.M, model.D, check=False) if stab.stable else None
    echo = {"G": G, "g_ratio": G / params.coupling_gamma_1 if params.coupling_gamma_1 else math.nan,
            "delta_K": ss.delta_K, "delta_m": ss.delta_m, "magnon_number": ss.magnon_number}
    report = entanglement_report(None if cm is None else cm.V, stable=stab.stable, parameters=echo)
    return PointAnalysis(params, ss, model, stab, cm, report)


# ---------------------------------------------------------------------------
# figure presets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FigureSpec:
    name: str
    panels: tuple[SweepSpec, ...]
    description: str = ""

    @property
    def spec(self) -> SweepSpec:
        """The only panel of a single-panel figure."""
        if len(self.panels) != 1:
            raise ValueError(f"{self.name} has {len(self.panels)} panels")
        return self.panels[0]


# Grid argmax (delta_1, delta_2) of each bipartite measure with the Kerr
# shift off, from the 101x101 fig2..fig5 sweeps on the baseline config.
OPTIMA = {
    "E_c1c2": (0.92, -0.88),
    "E_c1m": (-0.92, -0.60),
    "E_c1b": (-0.88, 0.32),
    "E_mb": (-0.24, 1.84),
}
_FIG_2D = {"fig2": "E_c1c2", "fig3": "E_c1m", "fig4": "E_c1b", "fig5": "E_mb"}
_BIPARTITE = ("E_c1c2", "E_c1m", "E_c1b", "E_mb")


def _figure(name: str, points_2d: int, points_1d: int) -> FigureSpec:
    if name in _FIG_2D:
        measure = _FIG_2D[name]
        spec = SweepSpec(
            axes=(Axis("delta_1", -2.0, 2.0, points_2d), Axis("delta_2", -2.0, 2.0, points_2d)),
            kerr_modes="all", measures=(measure,), fixed={"delta_m": 1.0}, name=name,
        )
        return FigureSpec(name, (spec,), f"{measure} versus (delta_1, delta_2)")
    if name in ("fig6a-d", "fig6e-h"):
        letters = "abcd" if name == "fig6a-d" else "efgh"
        panels = []
        for letter, measure in zip(letters, _BIPARTITE):
            d1, d2 = OPTIMA[measure] if name == "fig6a-d" else (-1.0, 1.0)
            panels.append(SweepSpec(
                axes=(Axis("g_ratio", 0.0, 2.0, points_1d),), kerr_modes="all", measures=(measure,),
                fixed={"delta_1": d1, "delta_2": d2, "delta_m": 1.0}, name=f"fig6{letter}",
            ))
        return FigureSpec(name, tuple(panels), "bipartite negativities versus G/Gamma")
    if name == "fig7":
        spec = SweepSpec(
            axes=(Axis("delta_1", -2.0, 2.0, points_1d),), kerr_modes="all",
            measures=("R_c1mb", "R_c1mc2"), fixed={"delta_2": -1.0, "delta_m": 1.0}, name="fig7",
        )
        return FigureSpec(name, (spec,), "residual contangles and contrast ratios versus delta_1")
    raise KeyError(f"unknown figure preset {name!r}; known: {', '.join(FIGURES)}")


FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6a-d", "fig6e-h", "fig7")


def figure_preset(name: str, *, points_2d: int = 101, points_1d: int = 201) -> FigureSpec:
    """Preset reproducing one figure; raises ``KeyError`` for unknown names."""
    return _figure(name, points_2d, points_1d)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (float, np.floating)) and math.isnan(value):
        return ""
    return f"{float(value):.17g}"


def emit_csv(result: SweepResult, path) -> Path:
    """Write ``result`` as CSV: header row, 17 significant digits, empty cell for NaN."""
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(result.columns)
    for row in result.rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue(), newline="")
    return path


def read_csv(path) -> SweepResult:
    """Parse a file written by :func:`emit_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = tuple(next(reader))
        rows = []
        for raw in reader:
            row = []
            for name, text in zip(columns, raw):
                if name == "kerr_mode":
                    row.append(text)
                elif name == "stable":
                    row.append(text == "true")
                else:
                    row.append(float(text) if text else math.nan)
            rows.append(tuple(row))
    return SweepResult(columns, rows)


def write_plot_data(result: SweepResult, spec: SweepSpec, stem) -> tuple[Path, Path]:
    """Gnuplot data (``stem.dat``) and script (``stem.gp``).

    2-D sweeps produce one pm3d block per Kerr mode and measure; 1-D
    sweeps produce one whitespace table with a column per measure and mode
    (plus the nonreciprocity columns).
    """
    stem = Path(stem)
    dat, gp = stem.with_suffix(".dat"), stem.with_suffix(".gp")
    names = [a.name for a in spec.axes]
    modes = spec.kerr_modes
    lines: list[str] = []
    script = [f"# {spec.name}", "set datafile missing 'nan'"]

    def fmt(v):
        return "nan" if isinstance(v, float) and math.isnan(v) else f"{v:.10g}"

    if len(spec.axes) == 2:
        n2 = spec.axes[1].points
        script += ["set pm3d map", f"set xlabel '{names[0]}'", f"set ylabel '{names[1]}'"]
        block = 0
        for measure in spec.measures:
            for mode in modes:
                sub = result.select(mode)
                x, y, z = sub.column(names[0]), sub.column(names[1]), sub.column(measure)
                lines.append(f"# {measure} kerr_mode={mode}")
                for k in range(len(x)):
                    lines.append(f"{fmt(x[k])} {fmt(y[k])} {fmt(float(z[k]))}")
                    if (k + 1) % n2 == 0:
                        lines.append("")
                lines += ["", ""]
                script.append(f"set title '{measure} ({mode})'")
                script.append(f"splot '{dat.name}' index {block} using 1:2:3 with pm3d notitle")
                script.append("pause -1")
                block += 1
    else:
        header = [names[0]]
        cols = []
        for measure in spec.measures:
            for mode in modes:
                header.append(f"{measure}_{mode}")
                cols.append(result.select(mode).column(measure))
            if spec.nonreciprocal:
                key = nonreciprocity_column(measure)
                header.append(key)
                cols.append(result.select("plus").column(key))
        x = result.select(modes[0]).column(names[0])
        lines.append("# " + " ".join(header))
        for k in range(len(x)):
            lines.append(" ".join([fmt(float(x[k]))] + [fmt(float(c[k])) for c in cols]))
        script.append(f"set xlabel '{names[0]}'")
        plots = [f"'{dat.name}' using 1:{i + 2} with lines title '{h}'" for i, h in enumerate(header[1:])]
        script.append("plot " + ", \\\n     ".join(plots))
        script.append("pause -1")
    dat.write_text("\n".join(lines) + "\n")
    gp.write_text("\n".join(script) + "\n")
    return dat, gp


def write_metadata(result: SweepResult, path, **extra) -> Path:
    path = Path(path)
    data = dict(result.metadata)
    data.update(extra)
    data["failures"] = [{"row": i, "error": e} for i, e in result.failures]
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")
    return path
