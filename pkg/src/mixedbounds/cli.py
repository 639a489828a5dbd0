"""Command line entry point: ``run``, ``verify`` and ``mesh`` subcommands."""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex
from .mesh import BUILTINS
from .spectra import EigenSolverError

EXIT_FAIL = 1
EXIT_SOLVER = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mixedbounds",
                                description="Guaranteed lower eigenvalue bounds from mixed FEM.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a benchmark and write its table")
    r.add_argument("--problem", required=True, choices=list(ex.PROBLEMS))
    r.add_argument("--levels", type=int, default=5)
    r.add_argument("--eigs", type=int, default=1, help="index J of the bounded eigenvalue")
    r.add_argument("--tol", type=float, default=1e-9)
    r.add_argument("--constant", choices=("pi", "bessel"), default="pi")
    r.add_argument("--format", dest="fmt", choices=("csv", "md"), default="csv")
    r.add_argument("--out", default=None, help="output path (stdout if omitted)")
    r.add_argument("--seed", type=int, default=None)

    v = sub.add_parser("verify", help="compare a computed table with a reference table")
    v.add_argument("--problem", required=True, choices=list(ex.PROBLEMS))
    v.add_argument("--reference", default=None, help="reference CSV (default: shipped table)")
    v.add_argument("--computed", default=None, help="computed CSV (default: run the problem)")
    v.add_argument("--rtol-lambda", type=float, default=None)
    v.add_argument("--rtol-lower", type=float, default=None)
    v.add_argument("--rtol-upper", type=float, default=None)

    m = sub.add_parser("mesh", help="write a refined builtin mesh")
    m.add_argument("--builtin", required=True, choices=BUILTINS)
    m.add_argument("--refine", type=int, default=0)
    m.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            try:
                cfg = ex.ExperimentConfig(args.problem, args.levels, args.eigs, args.tol,
                                          args.constant, args.fmt, args.out, args.seed)
            except ValueError as exc:
                parser.error(str(exc))
            reports = ex.run(cfg)
            if not args.out:
                sys.stdout.write(ex.format_table(reports, args.problem, args.fmt))
            return 0

        if args.command == "verify":
            reference = ex.load_reference(args.reference or args.problem)
            if args.computed:
                computed = ex.read_computed(args.computed)
            else:
                cfg = ex.ExperimentConfig(args.problem, levels=len(reference.rows))
                computed = ex.run(cfg)
            rtol = dict(ex.DEFAULT_RTOL_BY_PROBLEM.get(args.problem, ex.DEFAULT_RTOL))
            for col, val in (("lambda_h", args.rtol_lambda), ("lower", args.rtol_lower),
                             ("upper", args.rtol_upper)):
                if val is not None:
                    rtol[col] = val
            report = ex.verify(reference, computed, rtol)
            print(report.summary())
            return 0 if report.passed else EXIT_FAIL

        if args.command == "mesh":
            if args.refine < 0:
                parser.error("--refine must be nonnegative")
            ex.mesh_tool(args.builtin, args.refine, args.out)
            return 0
    except EigenSolverError as exc:
        print(f"error: eigensolver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return 0


if __name__ == "__main__":
    sys.exit(main())
