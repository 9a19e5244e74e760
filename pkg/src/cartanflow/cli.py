"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure (including
a verify run with failing checks).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import cartan, flows
from .errors import CartanFlowError, InputError, NumericalError
from .kernel import ToleranceConfig, mat_exp, matrix_from_json, matrix_to_json
from .lie import LieAlgebraSpec
from .verify import DEFAULT_SEED, run_verify

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def parse_grid(text: str) -> np.ndarray:
    """``start:end:samples`` with inclusive endpoints."""
    parts = text.split(":")
    if len(parts) != 3:
        raise InputError(f"bad grid {text!r}; expected start:end:samples")
    try:
        start, end, samples = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise InputError(f"bad grid {text!r}; expected start:end:samples") from None
    if samples < 2:
        raise InputError("grid needs at least 2 samples")
    return np.linspace(start, end, samples)


def _read_matrix(path: str | None, inline: str | None, what: str) -> np.ndarray:
    if inline is not None:
        text = inline
    elif path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise InputError(f"cannot read {what} file {path!r}: {exc}") from exc
    else:
        raise InputError(f"missing {what}: give --{what} PATH or --{what}-json TEXT")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} is not valid JSON: {exc}") from exc
    return matrix_from_json(obj)


def _algebra(args, n: int) -> LieAlgebraSpec:
    spec = LieAlgebraSpec.parse_selector(args.algebra or f"su:{n}")
    if spec.n != n:
        raise InputError(f"matrix is {n}x{n} but algebra acts on {spec.n}x{spec.n}")
    return spec


def _element(args, name="in"):
    M = _read_matrix(getattr(args, name), getattr(args, f"{name}_json"), name)
    return _algebra(args, M.shape[0]).element(M)


def _config(args) -> ToleranceConfig:
    base = ToleranceConfig()
    return ToleranceConfig(
        abs_tol=args.abs_tol if args.abs_tol is not None else base.abs_tol,
        ode_tol=args.ode_tol if args.ode_tol is not None else base.ode_tol,
        quad_nodes=args.quad_nodes if args.quad_nodes is not None else base.quad_nodes,
        series_kmax=args.series_kmax if args.series_kmax is not None else base.series_kmax,
    )


def _emit(args, payload, csv_text: str | None = None) -> None:
    fmt = args.format
    if fmt is None:
        fmt = "csv" if args.out and args.out.endswith(".csv") else "json"
    if fmt == "csv":
        if csv_text is None:
            raise InputError("csv output is only available for traces")
        text = csv_text
    else:
        text = json.dumps(payload) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _cmd_exp(args):
    X = _element(args)
    _emit(args, matrix_to_json(mat_exp(X.matrix)))


def _cmd_hexp(args):
    X = _element(args)
    _emit(args, matrix_to_json(cartan.hexp(X)))


def _cmd_dexp(args):
    X = _element(args)
    Y = _element(args, "dir")
    if Y.spec.n != X.spec.n:
        raise InputError("direction and base point have different sizes")
    Y = X.spec.element(Y.matrix)
    _emit(args, matrix_to_json(flows.d_exp(X, Y, _config(args))))


def _cmd_flow(args):
    A = _element(args)
    if args.slope or args.slope_json:
        B = A.spec.element(_read_matrix(args.slope, args.slope_json, "slope"))
        field = flows.TimeDependentField.affine(A.matrix, B.matrix)
    else:
        field = flows.TimeDependentField.constant(A.matrix)
    trace = flows.flow_ode(field, 0.0, _config(args), times=parse_grid(args.grid))
    _emit(args, trace.to_json(), trace.to_csv())


def _cmd_geodesic(args):
    X = _element(args)
    grid = parse_grid(args.grid)
    if grid[0] != 0.0:
        raise InputError("geodesic grids must start at 0")
    build = cartan.riemannian_geodesic if args.riemannian else cartan.geodesic
    trace = build(X, grid, _config(args), fd_curvature=not args.no_fd)
    _emit(args, trace.to_json(), trace.to_csv())


def _cmd_verify(args):
    seed = args.seed
    if seed is None:
        env = os.environ.get("CARTANFLOW_SEED")
        try:
            seed = int(env) if env is not None else DEFAULT_SEED
        except ValueError:
            raise InputError(f"CARTANFLOW_SEED must be an integer, got {env!r}") from None
    report = run_verify(seed, _config(args), scale=args.scale)
    text = report.to_json(timing=not args.no_timing) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        if not args.quiet:
            print("\n".join(report.summary_lines()))
    else:
        sys.stdout.write(text)
    if not report.all_passed:
        raise NumericalError("verification checks failed")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cartanflow",
                     description="Group, chronological and Cartan exponentials on compact matrix Lie groups.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, needs_input=True):
        p.add_argument("--algebra", help="su:N or custom:SPEC.json (default: su:N from the input size)")
        if needs_input:
            p.add_argument("--in", dest="in", metavar="PATH", help="matrix JSON file")
            p.add_argument("--in-json", metavar="TEXT", help="inline matrix JSON")
        p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--abs-tol", type=float)
        p.add_argument("--ode-tol", type=float)
        p.add_argument("--quad-nodes", type=int)
        p.add_argument("--series-kmax", type=int)

    p = sub.add_parser("exp", help="group exponential e^X")
    common(p)
    p.set_defaults(func=_cmd_exp)

    p = sub.add_parser("hexp", help="Cartan exponential e^X e^-T")
    common(p)
    p.set_defaults(func=_cmd_hexp)

    p = sub.add_parser("dexp", help="differential of exp at X in direction Y")
    common(p)
    p.add_argument("--dir", metavar="PATH", help="direction matrix JSON file")
    p.add_argument("--dir-json", metavar="TEXT")
    p.set_defaults(func=_cmd_dexp)

    p = sub.add_parser("flow", help="flow of X(t) = A + t B sampled on a grid")
    common(p)
    p.add_argument("--slope", metavar="PATH", help="matrix B (default 0: constant field)")
    p.add_argument("--slope-json", metavar="TEXT")
    p.add_argument("--grid", default="0:1:11", help="start:end:samples (default 0:1:11)")
    p.set_defaults(func=_cmd_flow)

    p = sub.add_parser("geodesic", help="sub-Riemannian geodesic hexp(tX) on a grid")
    common(p)
    p.add_argument("--grid", default="0:1:101", help="0:end:samples (default 0:1:101)")
    p.add_argument("--riemannian", action="store_true", help="sample e^{tX} instead")
    p.add_argument("--no-fd", action="store_true", help="skip finite-difference curvature")
    p.set_defaults(func=_cmd_geodesic)

    p = sub.add_parser("verify", help="run the verification suite")
    common(p, needs_input=False)
    p.add_argument("--seed", type=int, help=f"RNG seed (default $CARTANFLOW_SEED or {DEFAULT_SEED})")
    p.add_argument("--scale", type=float, default=1.0, help="multiplier on case counts")
    p.add_argument("--no-timing", action="store_true", help="write wall_time_s as 0 for byte-stable reports")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_verify)
    return parser


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except InputError as exc:
        print(f"cartanflow: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"cartanflow: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CartanFlowError as exc:
        print(f"cartanflow: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
