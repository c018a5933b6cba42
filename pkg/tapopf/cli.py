"""Command line interface for tapopf."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .admittance import TapState, network
from .case_model import Case, CaseError, CaseFormat, InternalModel, load_case, to_internal, validate_case
from .derivative_suite import CheckTolerances, run_checks
from .fd_oracle import NonFiniteValueError
from .global_variables import EXIT_DOMAIN_ERROR, EXIT_NUMERIC_FAILURE, EXIT_OK, EXIT_USAGE
from .interior_point import IpmOptions
from .opf_solver import OpfProblem, SolverError, newton_power_flow, solve_opf
from .reporting import (
    dumps,
    fd_payload,
    format_fd_reports,
    format_solution,
    format_ybus,
    solution_payload,
    validation_lines,
    validation_payload,
    ybus_payload,
)
from .settings import SettingsError, TapOpfSettings, load_settings

logger = logging.getLogger(__name__)


class CommandError(Exception):
    """Failure of a subcommand carrying the exit code to report."""

    def __init__(self, message: str, exit_code: int) -> None:
        super().__init__(message)
        self.exit_code = exit_code


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors with the usage exit code."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _assignment(text: str) -> tuple[int, float]:
    """Parse ``k=v`` into a branch index and a value."""
    key, sep, value = text.partition("=")
    try:
        if not sep:
            raise ValueError
        return int(key), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected k=v with an integer k and a number v, got {text!r}") from None


def _global_options() -> argparse.ArgumentParser:
    """Flags accepted both before and after the subcommand."""
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument(
        "--format",
        choices=[f.value for f in CaseFormat],
        help="Input case format (default: from the file extension).",
    )
    common.add_argument("--json", action="store_true", help="Print machine-readable JSON.")
    common.add_argument("--seed", type=int, metavar="N", help="Seed of the random derivative trials.")
    common.add_argument("--quiet", action="store_true", help="Only log errors.")
    common.add_argument("--verbose", action="store_true", help="Log solver iterations.")
    common.add_argument("--settings", type=Path, metavar="PATH", help="Settings file to read defaults from.")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options()
    parser = _ArgumentParser(
        prog="tapopf",
        description="AC power flow and optimal power flow with adjustable transformer taps.",
        parents=[common],
    )
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")

    validate_parser = subparsers.add_parser(
        "validate", parents=[common], help="Check a case file for structural errors"
    )
    validate_parser.add_argument("case", type=Path, metavar="CASE", help="Case file to check.")
    validate_parser.set_defaults(func=_run_validate)

    ybus_parser = subparsers.add_parser(
        "ybus", parents=[common], help="Print the bus admittance matrix as triplets"
    )
    ybus_parser.add_argument("case", type=Path, metavar="CASE")
    ybus_parser.add_argument(
        "--tau",
        type=_assignment,
        action="append",
        default=[],
        metavar="K=V",
        help="Override the tap magnitude of branch K (0-based, in-service order).",
    )
    ybus_parser.add_argument(
        "--theta",
        type=_assignment,
        action="append",
        default=[],
        metavar="K=V",
        help="Override the phase shift of branch K in degrees.",
    )
    ybus_parser.set_defaults(func=_run_ybus)

    check_parser = subparsers.add_parser(
        "check-derivs",
        parents=[common],
        help="Compare analytic derivatives with finite differences",
        description=(
            "Run the finite-difference checks on the case (every tap free) and on random"
            " cases of similar size, printing the worst error of every derivative block."
        ),
    )
    check_parser.add_argument("case", type=Path, metavar="CASE")
    check_parser.add_argument("--trials", type=int, default=None, metavar="K", help="Number of random cases.")
    check_parser.set_defaults(func=_run_check_derivs)

    pf_parser = subparsers.add_parser("pf", parents=[common], help="Solve a Newton power flow at the written taps")
    pf_parser.add_argument("case", type=Path, metavar="CASE")
    pf_parser.set_defaults(func=_run_pf)

    opf_parser = subparsers.add_parser("opf", parents=[common], help="Solve the optimal power flow")
    opf_parser.add_argument("case", type=Path, metavar="CASE")
    opf_parser.add_argument("--max-iter", dest="max_iter", type=int, default=None, metavar="N")
    opf_parser.add_argument("--tol", type=float, default=None, metavar="T")
    opf_parser.add_argument(
        "--fixed-taps",
        action="store_true",
        help="Hold every adjustable tap at its written setting.",
    )
    opf_parser.set_defaults(func=_run_opf)

    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    if getattr(args, "quiet", False):
        level = logging.ERROR
    elif getattr(args, "verbose", False):
        level = logging.DEBUG
    else:
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("tapopf").setLevel(level)


def _resolve_settings(args: argparse.Namespace) -> TapOpfSettings:
    base = load_settings(getattr(args, "settings", None))
    overrides = argparse.Namespace(
        seed=getattr(args, "seed", None),
        trials=getattr(args, "trials", None),
        max_iter=getattr(args, "max_iter", None),
        tol=getattr(args, "tol", None),
        output="json" if getattr(args, "json", False) else None,
    )
    merged, touched = base.merge_with_namespace(overrides)
    if touched:
        logger.debug("command line overrides settings: %s", ", ".join(sorted(touched)))
    try:
        return merged.validate()
    except SettingsError as exc:
        raise CommandError(str(exc), EXIT_USAGE) from None


def _read_case(args: argparse.Namespace) -> Case:
    path: Path = args.case
    try:
        return load_case(path, getattr(args, "format", None))
    except OSError as exc:
        raise CommandError(f"{path}: {exc.strerror or exc}", EXIT_DOMAIN_ERROR) from None
    except CaseError as exc:
        raise CommandError(f"{path}: {exc}", EXIT_DOMAIN_ERROR) from None


def _load_model(args: argparse.Namespace) -> tuple[Case, InternalModel]:
    case = _read_case(args)
    report = validate_case(case)
    if not report.ok:
        for line in validation_lines(report):
            print(f"{args.case}: {line}", file=sys.stderr)
        raise CommandError(f"{args.case}: case failed validation", EXIT_DOMAIN_ERROR)
    try:
        return case, to_internal(case)
    except CaseError as exc:
        raise CommandError(f"{args.case}: {exc}", EXIT_DOMAIN_ERROR) from None


def _run_validate(args: argparse.Namespace, settings: TapOpfSettings) -> int:
    report = validate_case(_read_case(args))
    if settings.output == "json":
        print(dumps(validation_payload(report)))
    else:
        for line in validation_lines(report):
            print(line)
    return EXIT_OK if report.ok else EXIT_DOMAIN_ERROR


def _run_ybus(args: argparse.Namespace, settings: TapOpfSettings) -> int:
    _, m = _load_model(args)
    taps = TapState.nominal(m)
    try:
        for k, value in args.tau:
            _check_branch(m, k)
            taps = taps.with_branch(k, tau=value)
        for k, value in args.theta:
            _check_branch(m, k)
            taps = taps.with_branch(k, theta=float(np.deg2rad(value)))
    except ValueError as exc:
        raise CommandError(str(exc), EXIT_USAGE) from None
    _, system = network(m, taps)
    if settings.output == "json":
        print(dumps(ybus_payload(system.Ybus)))
    else:
        print(format_ybus(system.Ybus))
    return EXIT_OK


def _check_branch(m: InternalModel, k: int) -> None:
    if not 0 <= k < m.nl:
        raise ValueError(f"branch index {k} out of range for {m.nl} in-service branches")


def _run_check_derivs(args: argparse.Namespace, settings: TapOpfSettings) -> int:
    case, _ = _load_model(args)
    tol = CheckTolerances(
        step=settings.fd_step,
        hessian_step=settings.fd_hessian_step,
        rtol=settings.rtol,
        hessian_rtol=settings.hessian_rtol,
        atol=settings.atol,
    )
    rng = np.random.default_rng(settings.seed)
    try:
        reports = run_checks(case, rng, settings.trials, tol)
    except NonFiniteValueError as exc:
        raise CommandError(f"{args.case}: {exc}", EXIT_NUMERIC_FAILURE) from None
    if settings.output == "json":
        print(dumps(fd_payload(reports, settings.seed, settings.trials)))
    else:
        print(format_fd_reports(reports))
    return EXIT_OK if all(r.passed for r in reports) else EXIT_NUMERIC_FAILURE


def _run_pf(args: argparse.Namespace, settings: TapOpfSettings) -> int:
    _, m = _load_model(args)
    result = newton_power_flow(m)
    payload = solution_payload(m, result)
    print(dumps(payload) if settings.output == "json" else format_solution(payload))
    return EXIT_OK if result.converged else EXIT_NUMERIC_FAILURE


def _run_opf(args: argparse.Namespace, settings: TapOpfSettings) -> int:
    _, m = _load_model(args)
    try:
        problem = OpfProblem.from_model(m, fixed_taps=args.fixed_taps)
    except SolverError as exc:
        raise CommandError(f"{args.case}: {exc}", EXIT_DOMAIN_ERROR) from None
    options = IpmOptions(max_iter=settings.max_iter, feas_tol=settings.tol, comp_tol=settings.tol)
    result = solve_opf(problem, options)
    payload = solution_payload(m, result, problem)
    print(dumps(payload) if settings.output == "json" else format_solution(payload))
    return EXIT_OK if result.converged else EXIT_NUMERIC_FAILURE


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    _configure_logging(args)
    try:
        settings = _resolve_settings(args)
        return args.func(args, settings)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
