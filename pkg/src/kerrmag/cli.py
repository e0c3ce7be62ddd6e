"""``kerrmag`` command-line interface.

Exit codes: 0 success, 1 solver or physics error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

from . import __version__
from .drift import build_diffusion_matrix, build_drift_matrix, check_stability, format_matrix
from .lyapunov import LyapunovError, solve_lyapunov
from .measures import MEASURES, MonogamyViolation, UnphysicalStateError
from .params import ParameterError, baseline_config_path, load_params
from .steady import (
    MeanFieldError,
    SingularConfigurationError,
    SteadyStateError,
    check_feasibility,
    solve_steady_state,
    steady_state_from_amplitude,
)
from .sweep import (
    FIGURES,
    Axis,
    SweepSpec,
    analyze_point,
    emit_csv,
    figure_preset,
    run_sweep,
    write_metadata,
    write_plot_data,
)

EXIT_OK, EXIT_PHYSICS, EXIT_USAGE = 0, 1, 2

_LABELS = {
    "E_c1c2": "E_N^{c1-c2}",
    "E_c1m": "E_N^{c1-m}",
    "E_c1b": "E_N^{c1-b}",
    "E_mb": "E_N^{m-b}",
    "R_c1mb": "R_tau^{c1-m-b}",
    "R_c1mc2": "R_tau^{c1-m-c2}",
}

_PHYSICS_ERRORS = (
    SteadyStateError,
    SingularConfigurationError,
    MeanFieldError,
    LyapunovError,
    MonogamyViolation,
    UnphysicalStateError,
    ArithmeticError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_set(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise UsageError(f"--set expects section.key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _params(args):
    return load_params(args.config or baseline_config_path(), _parse_set(args.set))


def _fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.6g}"


def cmd_point(args) -> int:
    params = _params(args)
    a = analyze_point(params, g_ratio=args.g_ratio)
    ss, rep = a.steady, a.report
    print("steady state")
    print(f"  |m_s|^2        {ss.magnon_number:.6g}")
    print(f"  delta_K        {ss.delta_K:.6g}")
    print(f"  delta_m        {ss.delta_m:.6g}")
    print(f"  G/Gamma        {rep.parameters['g_ratio']:.6g}")
    print(f"stability        {'stable' if a.stability.stable else 'UNSTABLE'} "
          f"(max Re lambda = {a.stability.max_real:.3g})")
    for key, value in rep.as_dict().items():
        print(f"  {_LABELS[key]:<16}{_fmt(value)}")
    if args.csv:
        row = dict(rep.parameters, stable=rep.stable, **rep.as_dict())
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(list(row))
            w.writerow([f"{v:.17g}" if isinstance(v, float) else str(v).lower() for v in row.values()])
    if not a.stability.stable:
        print("no steady state: drift matrix is unstable", file=sys.stderr)
        return EXIT_PHYSICS
    return EXIT_OK


def cmd_stability(args) -> int:
    params = _params(args)
    ss = solve_steady_state(params)
    G = None if args.g_ratio is None else args.g_ratio * params.coupling_gamma_1
    report = check_stability(build_drift_matrix(params, ss, G=G))
    print(f"{'stable' if report.stable else 'UNSTABLE'}: max Re lambda = {report.max_real:.6g}")
    for ev in report.eigenvalues:
        print(f"  {ev.real:+.6e} {ev.imag:+.6e}i")
    return EXIT_OK if report.stable else EXIT_PHYSICS


def cmd_feasibility(args) -> int:
    params = _params(args)
    if args.magnon_number is not None:
        ss = steady_state_from_amplitude(args.magnon_number ** 0.5, params)
    else:
        ss = solve_steady_state(params)
    kerr = args.kerr_K if args.kerr_K is not None else params.kerr_K
    omega = args.rabi_Omega if args.rabi_Omega is not None else params.rabi_Omega
    print(check_feasibility(ss, params.material, kerr_K=kerr, rabi_Omega=omega).format())
    return EXIT_OK


def cmd_dump(args) -> int:
    params = _params(args)
    ss = solve_steady_state(params)
    model = build_drift_matrix(params, ss)
    if args.what == "matrix":
        A = model.M
    elif args.what == "diffusion":
        A = build_diffusion_matrix(params)
    else:
        A = solve_lyapunov(model.M, model.D).V
    text = format_matrix(A, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _write_sweep(spec, result, out: Path, stem: str, plot: bool):
    if spec.nonreciprocal or len(spec.kerr_modes) > 1:
        for mode in spec.kerr_modes:
            emit_csv(result.select(mode), out / f"{stem}_{mode}.csv")
    else:
        emit_csv(result, out / f"{stem}_{spec.kerr_modes[0]}.csv")
    if plot:
        write_plot_data(result, spec, out / stem)


def cmd_sweep(args) -> int:
    try:
        axes = tuple(Axis.parse(a) for a in args.axis)
        fixed = {}
        for item in args.fix or ():
            key, sep, value = item.partition("=")
            if not sep:
                raise ValueError(f"--fix expects name=value, got {item!r}")
            fixed[key] = float(value)
        spec = SweepSpec(
            axes=axes,
            kerr_modes=args.kerr,
            measures=tuple(args.measure or ()),
            fixed=fixed,
            coupling_ratio=None if args.keep_drives else args.coupling_ratio,
            kerr_magnitude=args.kerr_shift,
            operating="pointwise" if args.pointwise else "reference",
            name=args.name,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = run_sweep(spec, _params(args), workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_sweep(spec, result, out, args.name, args.plot)
    write_metadata(result, out / f"{args.name}_metadata.json", version=__version__, created=time.time())
    print(f"{len(result)} rows, {len(result.failures)} failures -> {out}")
    return EXIT_PHYSICS if result.failures else EXIT_OK


def cmd_figure(args) -> int:
    try:
        fig = figure_preset(args.name, points_2d=args.points_2d, points_1d=args.points_1d)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    params = _params(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    failures = 0
    for spec in fig.panels:
        result = run_sweep(spec, params, workers=args.workers)
        failures += len(result.failures)
        _write_sweep(spec, result, out, spec.name, True)
        write_metadata(result, out / f"{spec.name}_metadata.json", figure=fig.name,
                       description=fig.description, version=__version__, created=time.time())
        print(f"{spec.name}: {len(result)} rows, {len(result.failures)} failures")
    return EXIT_PHYSICS if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kerrmag", description="Steady-state entanglement of the Kerr-magnon system.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = _Parser(add_help=False)
    common.add_argument("-c", "--config", help="INI configuration (default: bundled baseline)")
    common.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                        help="override a config field; repeatable")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("point", parents=[common], help="evaluate one operating point")
    p.add_argument("--g-ratio", type=float, help="replace G by this multiple of Gamma_1")
    p.add_argument("--csv", help="also write the report as a one-row CSV")
    p.set_defaults(func=cmd_point)

    p = sub.add_parser("stability", parents=[common], help="eigenvalues of the drift matrix")
    p.add_argument("--g-ratio", type=float)
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("feasibility", parents=[common], help="low-excitation and Kerr-vs-drive checks")
    p.add_argument("--magnon-number", type=float, help="use this |m_s|^2 instead of solving")
    p.add_argument("--kerr-K", type=float, help="K_r in rad/s")
    p.add_argument("--rabi-Omega", type=float, help="Omega in rad/s")
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("dump", parents=[common], help="print drift, diffusion or covariance matrix")
    p.add_argument("what", choices=("matrix", "diffusion", "cm"))
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("sweep", parents=[common], help="custom 1-D or 2-D grid")
    p.add_argument("--axis", action="append", required=True, metavar="NAME:START:STOP:POINTS")
    p.add_argument("--measure", action="append", choices=tuple(MEASURES))
    p.add_argument("--kerr", default="zero", choices=("zero", "plus", "minus", "both", "all"))
    p.add_argument("--fix", action="append", metavar="NAME=VALUE", help="delta_1, delta_2, delta_m or g_ratio")
    p.add_argument("--coupling-ratio", type=float, default=1.1)
    p.add_argument("--keep-drives", action="store_true", help="do not retune drives")
    p.add_argument("--kerr-shift", type=float, help="fixed |delta_K| instead of the self-consistent one")
    p.add_argument("--pointwise", action="store_true", help="re-solve the steady state at every point")
    p.add_argument("--name", default="sweep")
    p.add_argument("--plot", action="store_true", help="write gnuplot data and script")
    p.add_argument("-o", "--out", default=".")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("figure", parents=[common], help="run a figure preset")
    p.add_argument("name", help=", ".join(FIGURES))
    p.add_argument("-o", "--out", default=".")
    p.add_argument("-j", "--workers", type=int, default=1)
    p.add_argument("--points-2d", type=int, default=101)
    p.add_argument("--points-1d", type=int, default=201)
    p.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ParameterError as exc:
        print(f"kerrmag: invalid parameter {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _PHYSICS_ERRORS as exc:
        print(f"kerrmag: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PHYSICS
    except OSError as exc:
        print(f"kerrmag: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
