"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 solver failure, 4 cross-check mismatch.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from ..casefile import emit_report, load_case
from ..errors import (CaseSemanticError, CaseSyntaxError, NetworkError, TielineError)
from .cases import SHIPPED, shipped_case
from .oracles import OracleError
from .runner import run_check, run_det, run_oracle, run_robust, run_sample

EXIT_OK, EXIT_INPUT, EXIT_SOLVER, EXIT_MISMATCH = 0, 2, 3, 4


def _big_m(text):
    if text == "auto":
        return "auto"
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or a positive number") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("big-M must be positive")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", required=True, help=f"case file, or a shipped name ({', '.join(SHIPPED)})")
    common.add_argument("--epsilon", type=float, help="probe step length")
    common.add_argument("--tol", type=float, help="relative optimality tolerance")
    common.add_argument("--big-m", type=_big_m, help="'auto' or a fixed value")
    common.add_argument("--max-iters", type=int, help="cap on inner and outer iterations")
    common.add_argument("--report", type=Path, help="write the JSON report here instead of stdout")
    common.add_argument("--timings", action="store_true", help="include wall-clock timings in the report")

    parser = argparse.ArgumentParser(prog="tieline", description="Multi-area tie-line scheduling.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="run the coordinator")
    p.add_argument("--mode", choices=("det", "robust"), default="det")
    p = sub.add_parser("oracle", parents=[common], help="solve centrally for reference")
    p.add_argument("--mode", choices=("det", "robust"), default="det")
    p = sub.add_parser("sample", parents=[common], help="sample scenarios at the robust schedule")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    sub.add_parser("check", parents=[common], help="cross-check both solvers against the oracles")
    return parser


def _load(name):
    path = Path(name)
    if not path.exists() and name in SHIPPED:
        return shipped_case(name)
    return load_case(path)


def _options(case, args):
    changes = {}
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    if args.tol is not None:
        changes["tol_opt"] = args.tol
    if args.big_m is not None:
        changes["big_m"] = args.big_m
    if args.max_iters is not None:
        changes["max_inner_iters"] = args.max_iters
        changes["max_outer_iters"] = args.max_iters
    return dataclasses.replace(case.options, **changes)


def _emit(rec, target):
    text = emit_report(rec)
    if target is None:
        sys.stdout.write(text)
    else:
        target.write_text(text, encoding="utf-8")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        case = _load(args.case)
        opts = _options(case, args)
    except (OSError, CaseSyntaxError, CaseSemanticError, NetworkError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    code = EXIT_OK
    try:
        if args.command == "solve":
            run = run_det if args.mode == "det" else run_robust
            rec, _ = run(case, opts, timings=args.timings)
        elif args.command == "oracle":
            rec = run_oracle(case, args.mode, timings=args.timings)
        elif args.command == "sample":
            rec, s = run_sample(case, args.n, args.seed, opts, timings=args.timings)
            if s.violations:
                code = EXIT_MISMATCH
        else:
            rec, ok = run_check(case, opts)
            if not ok:
                code = EXIT_MISMATCH
    except (NetworkError, CaseSemanticError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TielineError, OracleError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _emit(rec, args.report)
    return code


if __name__ == "__main__":
    sys.exit(main())
