"""``ratelab`` command line.

Subcommands: ``rate``, ``fig2``, ``fig3``, ``solve``, ``verify``. Tables go to
``--out`` (or stdout) as CSV or JSON; diagnostics go to stderr.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 numeric or solver error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from ratelab import entangling as ent
from ratelab import io as rio
from ratelab import linalg, solver, verify
from ratelab.errors import RatelabError

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3
DENSE_HAM_LIMIT = 4096  # largest A*B for which the optimal H is written out


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2^64)")
    return v


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"expected positive integers, got {text!r}")
    return vals


def _unit_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError("value must be finite")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    common.add_argument("--out", type=Path, help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    solver_opts = argparse.ArgumentParser(add_help=False)
    solver_opts.add_argument("--iters", type=_positive_int, default=32, help="alternation steps N")
    solver_opts.add_argument("--restarts", type=_positive_int, default=128, help="random restarts M")
    solver_opts.add_argument("--workers", type=_positive_int, default=1, help="worker processes")

    parser = argparse.ArgumentParser(prog="ratelab", description="Entangling and mixing rate toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rate", parents=[common], help="entangling rate of a pure state")
    p.add_argument("--state", type=Path, help="state file")
    p.add_argument("--lambda", dest="lam", type=_unit_float, help="binary-spectrum weight")
    p.add_argument("--d", type=_positive_int, help="local dimension for --lambda")
    p.add_argument("--ham", type=Path, help="Hamiltonian file; omitted means maximize over H")
    p.add_argument("--ham-out", type=Path, default=Path("optimal_ham.json"),
                   help="where the optimal H is written when --ham is omitted")

    p = sub.add_parser("fig2", parents=[common], help="optimal binary-spectrum states")
    p.add_argument("--d", type=_positive_int, default=1024, help="largest d (rows d = 2, 4, ...)")

    p = sub.add_parser("fig3", parents=[common, solver_opts], help="mixing-rate scan on embezzling states")
    p.add_argument("--dims", type=_int_list, default=[4, 8])
    p.add_argument("--pcount", type=_positive_int, default=10)

    p = sub.add_parser("solve", parents=[common, solver_opts], help="maximize the mixing rate for one (rho, p)")
    p.add_argument("--dims", type=_int_list, help="use the embezzling state of this dimension")
    p.add_argument("--rho", type=Path, help="density-matrix file (instead of --dims)")
    p.add_argument("--p", type=_unit_float, default=0.5, help="ensemble weight in (0, 1/2]")

    p = sub.add_parser("verify", parents=[common], help="randomized verification suites")
    p.add_argument("--suite", choices=verify.SUITES + ("all",), default="all")
    p.add_argument("--instances", type=_positive_int, default=100)
    return parser


# ---------------------------------------------------------------------------


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _solver_config(args) -> solver.SolverConfig:
    return solver.SolverConfig(iterations=args.iters, restarts=args.restarts,
                               master_seed=args.seed, workers=args.workers)


def cmd_rate(args) -> int:
    if args.state is not None and args.lam is not None:
        raise UsageError("give either --state or --lambda/--d, not both")
    if args.state is None and (args.lam is None or args.d is None):
        raise UsageError("rate needs --state or both --lambda and --d")
    if args.state is not None:
        state = rio.load_state(args.state)
        schmidt = None
    else:
        schmidt = ent.binary_spectrum(args.lam, args.d)
        state = None
        dims = (args.d, args.d)

    record: dict = {}
    if args.ham is not None:
        if state is None:
            state = ent.psi_lambda(args.lam, args.d)
        h = rio.load_matrix(args.ham)
        record.update(mode="given", gamma=ent.entangling_rate(state, h))
        dims = state.dims
    else:
        if state is not None:
            gamma, h_opt = ent.gamma_no_ancilla_max(state)
            dims = state.dims
        else:
            gamma = ent.gamma_from_schmidt(schmidt)
            h_opt = None
            if args.d**2 <= DENSE_HAM_LIMIT:
                gamma, h_opt = ent.gamma_no_ancilla_max(ent.psi_lambda(args.lam, args.d))
        record.update(mode="max", gamma=gamma)
        if h_opt is not None:
            rio.save_matrix(args.ham_out, h_opt)
            record["ham_file"] = str(args.ham_out)
        else:
            print(f"ratelab: A*B = {args.d**2} exceeds {DENSE_HAM_LIMIT}; optimal H not written",
                  file=sys.stderr)
            record["ham_file"] = ""
    record["dims"] = "x".join(str(v) for v in dims)
    if args.format == "json":
        _emit(args, _json(record))
    else:
        header = ("dims", "mode", "gamma", "ham_file")
        _emit(args, rio.csv_text(header, [[record.get(k, "") for k in header]]))
    return EXIT_OK


def fig2_dims(d_max: int) -> list[int]:
    if d_max < 2:
        raise UsageError("--d must be at least 2")
    return [2**k for k in range(1, int(math.floor(math.log2(d_max))) + 1)]


def cmd_fig2(args) -> int:
    rows = ent.figure2_scan(fig2_dims(args.d))
    if args.format == "json":
        _emit(args, _json({"header": list(ent.FIG2_HEADER),
                           "rows": [[float(v) if isinstance(v, float) else v for v in r] for r in rows]}))
    else:
        _emit(args, rio.csv_text(ent.FIG2_HEADER, rows))
    return EXIT_OK


def cmd_fig3(args) -> int:
    config = _solver_config(args)
    scan = solver.figure3_scan(args.dims, args.pcount, config)
    if args.format == "json":
        _emit(args, _json({
            "header": list(solver.FIG3_HEADER),
            "rows": [list(r) for r in scan.rows],
            "p_grids": {str(k): v for k, v in scan.p_grids.items()},
            "config": {"iterations": config.iterations, "restarts": config.restarts,
                       "master_seed": config.master_seed},
            "duality_gaps": [r.duality_gap for r in scan.results],
            "errors": scan.errors,
        }))
    else:
        _emit(args, rio.csv_text(solver.FIG3_HEADER, scan.rows))
    for err in scan.errors:
        print(f"ratelab: D={err['D']} p={err['p']}: {err['error']}", file=sys.stderr)
    return EXIT_NUMERIC if scan.errors else EXIT_OK


def cmd_solve(args) -> int:
    if (args.rho is None) == (args.dims is None):
        raise UsageError("solve needs exactly one of --rho or --dims")
    if args.rho is not None:
        rho = linalg.density_matrix(rio.load_matrix(args.rho))
    else:
        if len(args.dims) != 1:
            raise UsageError("solve takes a single value for --dims")
        rho = solver.embezzling_state(args.dims[0])
    res = solver.alternate_solve(solver.SimProblem(rho, args.p), _solver_config(args))
    if args.format == "json":
        d = res.to_dict()
        d["p"] = args.p
        d["entropy_bits"] = linalg.binary_entropy(args.p)
        _emit(args, _json(d))
    else:
        header = ("dim", "p", "F_max", "entropy_bits", "precision", "duality_gap")
        row = (rho.shape[0], args.p, res.F_max, linalg.binary_entropy(args.p),
               res.estimated_precision, res.duality_gap)
        _emit(args, rio.csv_text(header, [row]))
    if res.failures:
        print(f"ratelab: {len(res.failures)} restart(s) failed", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    start = time.perf_counter()
    report = verify.run_suite(args.suite, args.instances, args.seed)
    d = report.to_dict()
    d.pop("seconds")  # keep the file byte-stable; timing goes to stderr
    if args.format == "json":
        _emit(args, _json(d))
    else:
        fail_counts: dict[str, int] = {}
        for f in report.failures:
            fail_counts[f.check] = fail_counts.get(f.check, 0) + 1
        rows = [[name, count, fail_counts.get(name, 0)] for name, count in sorted(report.checks.items())]
        _emit(args, rio.csv_text(("check", "instances", "failures"), rows))
    status = "ok" if report.ok else f"{len(report.failures)} failure(s)"
    print(f"ratelab verify {args.suite}: {sum(report.checks.values())} checks, {status}, "
          f"{len(report.skipped)} skipped, {time.perf_counter() - start:.2f}s", file=sys.stderr)
    for note in report.skipped:
        print(f"  skipped {note}", file=sys.stderr)
    for f in report.failures[:20]:
        print(f"  FAIL {f.check}[{f.instance}]: observed {f.observed:.6g}, expected {f.expected}",
              file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VERIFY


COMMANDS = {"rate": cmd_rate, "fig2": cmd_fig2, "fig3": cmd_fig3, "solve": cmd_solve,
            "verify": cmd_verify}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on bad flags
    try:
        return COMMANDS[args.command](args)
    except np.linalg.LinAlgError as exc:
        print(f"ratelab: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"ratelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError) as exc:
        # malformed files and out-of-domain inputs (input validation errors are ValueErrors)
        print(f"ratelab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RatelabError, ArithmeticError) as exc:
        print(f"ratelab: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
