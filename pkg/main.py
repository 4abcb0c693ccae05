import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from analysis.biorthogonal import DEFAULT_GRID, BiorthogonalFamily, build_family, verify_family
from analysis.canonical_products import DEFAULT_TRUNCATION
from analysis.moments import MomentSystem, beta_coefficients, build_moment_system, solve_min_norm, verify_moments
from analysis.solver import evolve_forced_with_error, evolve_free, sobolev_norm
from analysis.spectrum import asymptotic_residuals, build_table, mu_sequence
from analysis.synthesis import closed_loop_report, phases_from_dict, run_pipeline
from errors import ControlToolkitError, NumericalError, ValidationError
from inputs.config import LOG_LEVELS, RunConfig
from inputs.problem import ControlProblem, Method
from inputs.shapes import DEFAULT_SIGMA, ControlShape
from inputs.state import FourierState, SampledControl
from outputs.figures import control_figure, family_norm_figure, spectrum_figure, write_figure
from outputs.json_export import load_json, write_json
from outputs.tables import phases_frame, write_csv

logger = logging.getLogger("main")

DEFAULT_OUT = "out"
SHAPE_CHOICES = ControlShape.available_shapes()
# arguments that do not change results and stay out of the parameter echo
NON_PARAMETERS = {"out", "seed", "log_level", "handler"}


# ========== HELPERS ==========

def _config(args: argparse.Namespace, command: str) -> RunConfig:
    parameters = {k: v for k, v in sorted(vars(args).items()) if k not in NON_PARAMETERS and k != "command"}
    return RunConfig(command=command, parameters=parameters, seed=args.seed, out=args.out,
                     log_level=args.log_level)


def _shape(args: argparse.Namespace) -> ControlShape:
    overrides = {}
    if args.shape == "indicator_difference":
        overrides = {"offset": args.offset, "sigma": args.sigma}
    return ControlShape.from_library(args.shape, **overrides)


def _load_state(path, config: RunConfig) -> FourierState:
    data = load_json(path)
    return FourierState.from_dict(data.get("state", data), rng=config.rng(), context=str(path))


def _report_status(report: Dict) -> int:
    """Exit code 3 when a closed-loop report misses its thresholds."""
    for failure in report["failed_checks"]:
        print(f"check failed: {failure}", file=sys.stderr)
    return 0 if report["passed"] else NumericalError.exit_code


def _add_shape_arguments(parser: argparse.ArgumentParser, required: bool):
    parser.add_argument("--shape", choices=SHAPE_CHOICES, required=required, default=None)
    parser.add_argument("--sigma", type=float, default=DEFAULT_SIGMA)
    parser.add_argument("--offset", type=float, default=0.0)


# ========== COMMANDS ==========

def cmd_spectrum(args: argparse.Namespace) -> int:
    config = _config(args, "spectrum")
    table = build_table(args.kmax)
    table.check_invariants()
    frame = table.as_frame()
    write_csv(config.out / "spectrum.csv", frame)
    residuals = asymptotic_residuals(args.kmax)
    mus = mu_sequence(args.kmax)
    write_json(config.out / "spectrum.json", {
        "rows": len(frame),
        "max_residual": table.max_residual(),
        "branch_separation": table.branch_separation(),
        "asymptotic_plus_max": max(r[1] for r in residuals),
        "asymptotic_minus_max": max(r[2] for r in residuals),
        "mu_separation": mus.separation,
        "mu_tail_constant": mus.tail_constant,
    }, config)
    if args.figures:
        write_figure(config.out / "spectrum_figure.json", spectrum_figure(frame))
    print(f"spectrum: {len(frame)} eigenvalues, max residual {table.max_residual():.2e}")
    return 0


def cmd_solve(args: argparse.Namespace) -> int:
    config = _config(args, "solve")
    state = _load_state(args.state, config)
    error = 0.0
    if args.control:
        data = load_json(args.control)
        h = SampledControl.from_dict(data.get("control", data), context=str(args.control))
        betas = None
        if not h.is_ledger:
            if args.shape is None:
                raise ValidationError("a scalar control needs --shape.")
            betas = beta_coefficients(_shape(args), state.K)
        final, error = evolve_forced_with_error(state, betas, h, t=args.T)
    else:
        final = evolve_free(state, args.T)
    write_json(config.out / "final_state.json", {
        "state": final.to_dict(),
        "T": args.T,
        "quadrature_error": error,
        "sobolev_norm": sobolev_norm(final, 0.0),
    }, config)
    print(f"solve: ||v(T)||_0 = {sobolev_norm(final, 0.0):.6e}")
    return 0


def cmd_moments_build(args: argparse.Namespace) -> int:
    config = _config(args, "moments build")
    state = _load_state(args.state, config)
    system = build_moment_system(_shape(args), state, args.T, args.kmax)
    write_json(config.out / "system.json", {"system": system.to_dict()}, config)
    write_csv(config.out / "system.csv", system.as_frame())
    print(f"moments build: {len(system)} constraints")
    return 0


def cmd_moments_solve(args: argparse.Namespace) -> int:
    config = _config(args, "moments solve")
    data = load_json(args.sys)
    system = MomentSystem.from_dict(data.get("system", data), context=str(args.sys))
    h = solve_min_norm(system, grid=args.grid)
    report = verify_moments(h, system)
    write_json(config.out / "control.json", {"control": h.to_dict(), "report": report.summary()}, config)
    write_csv(config.out / "residuals.csv", report.as_frame())
    print(f"moments solve: residual {report.max_abs:.2e}, ||h|| = {h.l2_norm():.6e}")
    return 0


def cmd_biortho_build(args: argparse.Namespace) -> int:
    config = _config(args, "biortho build")
    period = np.pi * args.grid / args.window if args.window else None
    family = build_family(args.T, args.kmax, grid=args.grid, period=period, truncation=args.truncation)
    write_json(config.out / "family.json", {"family": family.to_dict()}, config)
    print(f"biortho build: {len(family.keys())} functions, window {family.window:.1f}")
    return 0


def cmd_biortho_verify(args: argparse.Namespace) -> int:
    config = _config(args, "biortho verify")
    data = load_json(args.family)
    family = BiorthogonalFamily.from_dict(data.get("family", data))
    report = verify_family(family, k_test=args.ktest)
    write_csv(Path(args.report) if args.report else config.out / "gram.csv", report.entries)
    write_csv(config.out / "family_norms.csv", report.norms)
    write_json(config.out / "gram_report.json", {"report": report.summary()}, config)
    if args.figures:
        write_figure(config.out / "family_norms_figure.json", family_norm_figure(report.norms))
    print(f"biortho verify: quadrature {report.max_quadrature_deviation:.2e}, "
          f"{len(report.unverified_columns)} unverified columns, passed={report.passed()}")
    return 0 if report.passed() else 3


def cmd_synthesize(args: argparse.Namespace) -> int:
    config = _config(args, "synthesize")
    data = load_json(args.problem)
    if args.method:
        data = {**data, "method": args.method}
    problem = ControlProblem.from_dict(data, rng=config.rng())
    result = run_pipeline(problem)
    write_json(config.out / "problem.json", problem.to_dict(), config)
    write_json(config.out / "control.json", result.controls_dict(), config)
    write_json(config.out / "final_state.json", {"state": result.final_state.to_dict(), "T": problem.T}, config)
    write_json(config.out / "report.json", {"report": result.report}, config)
    frame = phases_frame(result.phases)
    write_csv(config.out / "control.csv", frame)
    if args.figures:
        write_figure(config.out / "control_figure.json", control_figure(frame))
    print(f"synthesize ({result.report['pipeline']}, {problem.method.value}): "
          f"final norm ratio {result.report['final_norm_ratio']:.2e}, "
          f"moment residual {result.report['moment_residual_max']:.2e}")
    return _report_status(result.report)


def cmd_verify(args: argparse.Namespace) -> int:
    run = Path(args.run)
    config = _config(args, "verify")
    problem = ControlProblem.from_dict(load_json(run / "problem.json"), context="problem")
    phases = phases_from_dict(load_json(run / "control.json"))
    report = closed_loop_report(problem, phases)
    write_json(run / "verify_report.json", {"report": report}, config)
    print(f"verify: final norm ratio {report['final_norm_ratio']:.2e}, "
          f"moment residual {report['moment_residual_max']:.2e}")
    return _report_status(report)


# ========== PARSER ==========

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=DEFAULT_OUT, metavar="DIR")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--log-level", default="WARNING", choices=LOG_LEVELS, type=str.upper)

    parser = argparse.ArgumentParser(
        prog="moving-control",
        description="Null controllability of the structurally damped wave equation with moving controls.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    spectrum = sub.add_parser("spectrum", parents=[common], help="Eigenvalue table of the moving-frame operator.")
    spectrum.add_argument("--kmax", type=int, required=True)
    spectrum.add_argument("--figures", action="store_true")
    spectrum.set_defaults(handler=cmd_spectrum)

    solve = sub.add_parser("solve", parents=[common], help="Free or forced evolution of a Fourier state.")
    solve.add_argument("--state", required=True, metavar="JSON")
    solve.add_argument("--T", type=float, required=True)
    solve.add_argument("--control", default=None, metavar="JSON")
    _add_shape_arguments(solve, required=False)
    solve.set_defaults(handler=cmd_solve)

    moments = sub.add_parser("moments", help="Moment systems and the minimum-norm oracle.")
    moments_sub = moments.add_subparsers(dest="moments_command", required=True)
    build = moments_sub.add_parser("build", parents=[common])
    build.add_argument("--state", required=True, metavar="JSON")
    build.add_argument("--T", type=float, required=True)
    build.add_argument("--kmax", type=int, required=True)
    _add_shape_arguments(build, required=True)
    build.set_defaults(handler=cmd_moments_build)
    msolve = moments_sub.add_parser("solve", parents=[common])
    msolve.add_argument("--sys", required=True, metavar="JSON")
    msolve.add_argument("--grid", type=int, default=None)
    msolve.set_defaults(handler=cmd_moments_solve)

    biortho = sub.add_parser("biortho", help="Biorthogonal family construction and Gram checks.")
    biortho_sub = biortho.add_subparsers(dest="biortho_command", required=True)
    bbuild = biortho_sub.add_parser("build", parents=[common])
    bbuild.add_argument("--T", type=float, required=True)
    bbuild.add_argument("--kmax", type=int, required=True)
    bbuild.add_argument("--grid", type=int, default=DEFAULT_GRID)
    bbuild.add_argument("--window", type=float, default=None)
    bbuild.add_argument("--truncation", type=int, default=DEFAULT_TRUNCATION)
    bbuild.set_defaults(handler=cmd_biortho_build)
    bverify = biortho_sub.add_parser("verify", parents=[common])
    bverify.add_argument("--family", required=True, metavar="JSON")
    bverify.add_argument("--report", default=None, metavar="CSV")
    bverify.add_argument("--ktest", type=int, default=None)
    bverify.add_argument("--figures", action="store_true")
    bverify.set_defaults(handler=cmd_biortho_verify)

    synthesize = sub.add_parser("synthesize", parents=[common], help="Synthesize and certify a null control.")
    synthesize.add_argument("--problem", required=True, metavar="JSON")
    synthesize.add_argument("--method", choices=[m.value for m in Method], default=None)
    synthesize.add_argument("--figures", action="store_true")
    synthesize.set_defaults(handler=cmd_synthesize)

    verify = sub.add_parser("verify", parents=[common], help="Re-simulate a stored run and recompute residuals.")
    verify.add_argument("--run", required=True, metavar="DIR")
    verify.set_defaults(handler=cmd_verify)
    return parser


# ========== ENTRY POINT ==========

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except (ValidationError, NumericalError) as e:
        kind = "invalid input" if isinstance(e, ValidationError) else "numerical failure"
        print(f"error ({kind}): {e}", file=sys.stderr)
        return e.exit_code
    except ControlToolkitError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
