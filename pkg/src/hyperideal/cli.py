"""Command-line entry point.

Exit codes: 0 success, 1 validation failure or bad metric dimension,
2 unreadable or malformed input, 3 no convergence by t_max (or no regular
solution), 4 non-finite state during integration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import curvature, solver
from .triangulation import ParseError, TriangulationError, Triangulation, parse, validate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_PARSE = 2
EXIT_MAX_TIME = 3
EXIT_DIVERGED = 4

_STATUS_EXIT = {
    solver.CONVERGED: EXIT_OK,
    solver.NEWTON_CONVERGED: EXIT_OK,
    solver.MAX_TIME: EXIT_MAX_TIME,
    solver.DIVERGED: EXIT_DIVERGED,
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _emit(payload: dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2) + "\n")


def _load(args, check: bool = True) -> Triangulation:
    try:
        text = Path(args.input).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {args.input}: {exc}", EXIT_PARSE) from None
    try:
        return parse(text, args.format, check=check)
    except TriangulationError as exc:
        raise CliError(str(exc), EXIT_PARSE) from None


def _read_vector(path: str) -> np.ndarray:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_PARSE) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = text.replace(",", " ").split()
    try:
        return np.array(data, dtype=float).reshape(-1)
    except ValueError:
        raise CliError(f"{path} does not contain a list of numbers", EXIT_PARSE) from None


def _initial_metric(args, tri: Triangulation) -> np.ndarray:
    n = tri.num_edges
    if args.metric_file is not None:
        l0 = _read_vector(args.metric_file)
    elif args.metric_random is not None:
        l0 = np.random.default_rng(args.metric_random).uniform(0.5, 2.0, n)
    else:
        l0 = np.full(n, 1.0 if args.metric_const is None else args.metric_const)
    if l0.shape != (n,):
        raise CliError(f"metric has {l0.size} entries, triangulation has {n} edges", EXIT_INVALID)
    return l0


def _target(args, tri: Triangulation):
    if args.target is None:
        return None
    k = _read_vector(args.target)
    if k.shape != (tri.num_edges,):
        raise CliError(
            f"target has {k.size} entries, triangulation has {tri.num_edges} edges", EXIT_INVALID
        )
    return k


def _config(args, newton: str) -> solver.FlowConfig:
    try:
        return solver.FlowConfig(
            method=args.method,
            step=args.step,
            t_max=args.tmax,
            tol_curvature=args.tol,
            record_every=args.record_every,
            newton=newton,
            seed=args.metric_random or 0,
        )
    except ValueError as exc:
        raise CliError(str(exc), EXIT_PARSE) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args) -> int:
    tri = _load(args, check=False)
    report = validate(tri, strict=args.strict)
    _emit(report.to_dict())
    return EXIT_OK if report.ok else EXIT_INVALID


def cmd_curvature(args) -> int:
    tri = _load(args)
    l = _initial_metric(args, tri)
    k = curvature.extended_curvature(tri, l)
    ok, regions = curvature.is_nondegenerate(tri, l)
    _emit(
        {
            "edges": [
                {"edge": f"e{e}", "length": float(l[e]), "curvature": float(k[e])}
                for e in range(tri.num_edges)
            ],
            "tets": [{"tet": t, "region": r.value} for t, r in enumerate(regions)],
            "nondegenerate": ok,
        }
    )
    return EXIT_OK


def _run(args, hybrid: bool) -> int:
    tri = _load(args)
    l0 = _initial_metric(args, tri)
    target = _target(args, tri)
    config = _config(args, "hybrid" if hybrid else "off")
    run = solver.hybrid_solve if hybrid else solver.flow
    trace, report = run(tri, l0, target, config)
    if args.trace:
        Path(args.trace).write_text(trace.to_csv())
        Path(_events_path(args.trace)).write_text(trace.events_to_csv())
    payload = report.to_dict(timing=args.timing)
    if args.report:
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n")
    _emit(payload)
    return _STATUS_EXIT[report.status]


def _events_path(trace_path: str) -> str:
    p = Path(trace_path)
    return str(p.with_name(p.stem + ".events.csv"))


def cmd_flow(args) -> int:
    return _run(args, hybrid=False)


def cmd_solve(args) -> int:
    return _run(args, hybrid=True)


def cmd_regular(args) -> int:
    if args.N < 1:
        raise CliError(f"--N must be a positive integer, got {args.N}", EXIT_PARSE)
    result = solver.regular_solve(args.N)
    if isinstance(result, solver.NoSolution):
        _emit(
            {
                "N": result.degree,
                "solution": None,
                "limit_curvature": result.limit_curvature,
                "message": "no zero-curvature constant metric for N <= 6",
            }
        )
        return EXIT_MAX_TIME
    _emit(
        {
            "N": result.degree,
            "solution": result.length,
            "cosh_solution": result.cosh_length,
            "residual": result.residual,
        }
    )
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hyperideal",
        description="Hyper-ideal polyhedral metrics via the extended combinatorial Ricci flow.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p):
        p.add_argument("input", help="triangulation file")
        p.add_argument("--format", choices=("gluing", "incidence", "auto"), default="auto")

    def add_metric(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--metric-const", type=float, metavar="C", help="constant initial metric (default 1.0)")
        g.add_argument("--metric-file", metavar="PATH", help="initial metric, one length per edge")
        g.add_argument("--metric-random", type=int, metavar="SEED", help="uniform [0.5, 2] lengths")

    p = sub.add_parser("validate", help="check a triangulation")
    add_input(p)
    p.add_argument("--strict", action="store_true", help="require chi < 0 on every boundary component")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("curvature", help="evaluate the extended curvature of a metric")
    add_input(p)
    add_metric(p)
    p.set_defaults(func=cmd_curvature)

    for name, func, text in (
        ("flow", cmd_flow, "integrate the extended Ricci flow"),
        ("solve", cmd_solve, "flow, then Newton once inside the basin"),
    ):
        p = sub.add_parser(name, help=text)
        add_input(p)
        add_metric(p)
        p.add_argument("--target", metavar="PATH", help="prescribed curvature, one value per edge")
        p.add_argument("--method", choices=solver.METHODS, default="rk4")
        p.add_argument("--step", type=float, default=0.05)
        p.add_argument("--tmax", type=float, default=100.0)
        p.add_argument("--tol", type=float, default=1e-10)
        p.add_argument("--record-every", type=int, default=1)
        p.add_argument("--trace", metavar="PATH", help="write the trace CSV (events go to *.events.csv)")
        p.add_argument("--report", metavar="PATH", help="write the report JSON")
        p.add_argument("--timing", action="store_true", help="include wall time in the report")
        p.set_defaults(func=func)

    p = sub.add_parser("regular", help="constant solution when every edge has degree N")
    p.add_argument("--N", type=int, required=True)
    p.set_defaults(func=cmd_regular)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"hyperideal: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
