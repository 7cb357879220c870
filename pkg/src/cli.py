"""Command-line surface.

    python main.py convergence --example 1 --mesh uniform --eps 1,2^-6 --levels 2..6
    python main.py verify --suite basis
    python main.py projection --family cr --selection s3 --dual-demo
    python main.py inspect --dump-basis 2,2
"""

import argparse
import json
import logging
import sys
from typing import List, Optional, Sequence

import structlog

from .config import settings
from .core.exceptions import EXIT_USAGE
from .tools import ConvergenceStudyTool, InspectionTool, ProjectionTool, VerificationTool
from .tools.projection import SELECTIONS
from .tools.verification import SUITES


def configure_logging(level: Optional[str] = None):
    """Structured console logging on stderr; stdout carries the results."""
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.stdlib.PositionalArgumentsFormatter(),
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            structlog.dev.ConsoleRenderer()
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def parse_number(text: str) -> float:
    """Float or a power of two written as 2^-k."""
    text = text.strip()
    try:
        if text.startswith("2^"):
            return 2.0 ** float(text[2:])
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def parse_eps(text: str) -> List[float]:
    values = [parse_number(part) for part in text.split(",") if part.strip()]
    if not values or any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("eps needs non-negative values")
    return values


def parse_levels(text: str) -> List[int]:
    """'2..6' or '2,3,4'."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split(".."))
            levels = list(range(lo, hi + 1))
        else:
            levels = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list: {text!r}")
    if not levels or min(levels) < 0:
        raise argparse.ArgumentTypeError("levels must be non-negative and non-empty")
    return levels


def parse_cell(text: str):
    try:
        i, j = (int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"cell must be 'i,j', got {text!r}")
    return i, j


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rrm", description="Reduced rectangular Morley elements for singular perturbation problems")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    conv = sub.add_parser("convergence", help="Run a manufactured-solution convergence study")
    conv.add_argument("--example", type=int, choices=(1, 2, 3), required=True)
    conv.add_argument("--mesh", choices=("uniform", "pattern"), default="uniform")
    conv.add_argument("--ratio", type=float, default=None, help="Split ratio of pattern meshes")
    conv.add_argument("--eps", type=parse_eps, default=None, help="e.g. 1,2^-6,2^-10")
    conv.add_argument("--levels", type=parse_levels, default=None, help="e.g. 2..6")
    conv.add_argument("--out", default=None, help="CSV output file; stdout if omitted")
    conv.add_argument("--check-tables", action="store_true", help="Compare with the published table")
    conv.add_argument("--with-interpolation", action="store_true", help="Add the interpolation error column")

    ver = sub.add_parser("verify", help="Run property suites")
    ver.add_argument("--suite", choices=SUITES + ("all",), default="all")
    ver.add_argument("--seed", type=int, default=20240601)

    proj = sub.add_parser("projection", help="Projectivity tests and dual coefficients")
    proj.add_argument("--family", choices=tuple(SELECTIONS), default="rrm")
    proj.add_argument("--selection", choices=sorted({s for v in SELECTIONS.values() for s in v}), default=None)
    proj.add_argument("--n", type=int, default=None, help="Cells per side (default 6 for rrm, 4 for cr)")
    proj.add_argument("--fraction", type=float, default=0.25, help="S3 diamond position along the edge")
    proj.add_argument("--tol", type=float, default=None)
    proj.add_argument("--dual-demo", action="store_true", help="Print h^2-scaled CR dual coefficients")
    proj.add_argument("--h", type=float, default=0.25, help="Mesh size of the dual demo")

    insp = sub.add_parser("inspect", help="Dump a grid, a basis function or the system")
    insp.add_argument("--domain", choices=("square", "lshape"), default="square")
    insp.add_argument("--mesh", choices=("uniform", "pattern"), default="uniform")
    insp.add_argument("--level", type=int, default=2)
    insp.add_argument("--ratio", type=float, default=None)
    group = insp.add_mutually_exclusive_group(required=True)
    group.add_argument("--dump-mesh", action="store_true")
    group.add_argument("--dump-basis", type=parse_cell, metavar="I,J")
    group.add_argument("--dump-system", metavar="FILE")
    insp.add_argument("--extended", action="store_true", help="Look --dump-basis up in the extended set")
    insp.add_argument("--example", type=int, choices=(1, 2, 3), default=None)
    insp.add_argument("--eps", type=parse_number, default=1.0)
    return parser


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _print_json(result) -> None:
    print(json.dumps(result, indent=2, default=str))


def _report_error(result) -> int:
    print(f"error: {result['error']}", file=sys.stderr)
    return result["exit_code"]


def _convergence(args) -> int:
    result = ConvergenceStudyTool().run(
        example=args.example,
        mesh=args.mesh,
        eps=args.eps,
        levels=args.levels,
        ratio=args.ratio,
        out=args.out,
        check_tables=args.check_tables,
        with_interpolation=args.with_interpolation,
    )
    if "error" in result:
        return _report_error(result)
    if args.out:
        print(f"wrote {result['out']}", file=sys.stderr)
    else:
        sys.stdout.write(result["csv"])
    if "check" in result:
        for line in result["check"]["failures"]:
            print(f"FAIL {line}", file=sys.stderr)
        for line in result["check"]["notes"]:
            print(f"NOTE {line}", file=sys.stderr)
    return result["exit_code"]


def _verify(args) -> int:
    result = VerificationTool(seed=args.seed).run(suite=args.suite)
    if "error" in result:
        return _report_error(result)
    for suite, checks in result["checks"].items():
        for check in checks:
            status = "ok  " if check["passed"] else "FAIL"
            threshold = "" if check["threshold"] is None else f" (threshold {check['threshold']:g})"
            print(f"{status} [{suite}] {check['name']}: {check['value']:.3e}{threshold}")
    return result["exit_code"]


def _projection(args) -> int:
    selection = args.selection or SELECTIONS[args.family][0]
    n = args.n if args.n is not None else (6 if args.family == "rrm" else 4)
    result = ProjectionTool().run(
        family=args.family,
        selection=selection,
        n=n,
        fraction=args.fraction,
        tol=args.tol,
        dual_demo=args.dual_demo,
        h=args.h,
    )
    if "error" in result:
        return _report_error(result)
    _print_json(result)
    return result["exit_code"]


def _inspect(args) -> int:
    if args.dump_mesh:
        operation = "mesh"
    elif args.dump_basis is not None:
        operation = "basis"
    else:
        operation = "system"
    example = args.example or (2 if args.domain == "lshape" else 1)
    result = InspectionTool().run(
        operation=operation,
        domain=args.domain,
        mesh=args.mesh,
        level=args.level,
        ratio=args.ratio,
        cell=args.dump_basis,
        extended=args.extended,
        path=args.dump_system,
        example=example,
        eps=args.eps,
    )
    if "error" in result:
        return _report_error(result)
    if "text" in result:
        sys.stdout.write(result["text"])
    else:
        _print_json(result)
    return result["exit_code"]


COMMANDS = {
    "convergence": _convergence,
    "verify": _verify,
    "projection": _projection,
    "inspect": _inspect,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging(args.log_level)
    return COMMANDS[args.command](args)
