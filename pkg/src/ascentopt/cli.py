"""Command-line harness: solve one problem file, or benchmark the seeded
instance families.

Exit codes: 0 solved, 1 bad input or arguments, 2 infeasible, 3 numerical
failure.  Benchmarks write CSV with one row per (instance, method), ordered
by seed and then by the requested method order regardless of worker
scheduling.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from .dual import DualConfig, run_dual
from .errors import (
    InfeasibleProblemError,
    InputValidationError,
    NumericalError,
    ProblemFileError,
    SolverError,
    UnsupportedProblemError,
)
from .gp import GpConfig, solve_gp
from .model import (
    AscendingProblem,
    KktCertificate,
    LastConstraint,
    SolveReport,
    check_feasibility,
)
from .oracles import kkt_residual, ps_solve
from .projection import project_raw
from .testbed import InstanceSpec, problem_from_dict
from .transforms import eliminate_equality

SCHEMA_VERSION = 1
METHODS = ("dual", "gp", "ps")
BENCH_KINDS = ("tp1", "tp2", "tp3", "quadratic")

CSV_COLUMNS = (
    "kind",
    "n",
    "seed",
    "method",
    "objective",
    "kkt_residual",
    "outer_iters",
    "inner_solves",
    "L",
    "wall_ms",
)


def parse_problem_file(path: str) -> AscendingProblem:
    """Read and validate a JSON problem file; errors carry the location."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError("%s: %s" % (path, exc.strerror or exc))
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFileError(
            "%s:%d:%d: %s" % (path, exc.lineno, exc.colno, exc.msg)
        )
    try:
        return problem_from_dict(data)
    except ProblemFileError:
        raise
    except InputValidationError as exc:
        raise ProblemFileError("%s: %s" % (path, exc))


def _gp_multipliers(problem: AscendingProblem, x: np.ndarray) -> np.ndarray:
    """Multiplier estimate at a candidate point via one unit-step projection.

    At a fixed point of the projected step the projection returns x itself
    and its multipliers equal 2 * lambda, so halving recovers them.
    """
    g = problem.gradient(x)
    g = np.nan_to_num(g, nan=0.0, posinf=1e8, neginf=-1e8)
    _, lam, _ = project_raw(x - g, problem.alpha, problem.beta)
    return lam / 2.0


def _solve_inequality(
    problem: AscendingProblem, method: str, tol: Optional[float], seed: int
) -> tuple[KktCertificate, SolveReport]:
    if method == "dual":
        cfg = DualConfig() if tol is None else DualConfig(eq_tol=tol)
        return run_dual(problem, cfg)
    if method == "ps":
        if tol is None:
            return ps_solve(problem)
        return ps_solve(problem, level_tol=tol)
    cfg = GpConfig() if tol is None else GpConfig(kkt_tol=tol)
    x, report = solve_gp(problem, cfg)
    return kkt_residual(problem, x, _gp_multipliers(problem, x)), report


def _solve_equality(
    problem: AscendingProblem, method: str, tol: Optional[float], seed: int
) -> tuple[KktCertificate, SolveReport]:
    """Eliminate the terminal equality, solve, and certify on the original.

    Elimination couples the last coordinate into every gradient entry, so
    the reduced problem is not separable and only gp can run on it.  The
    eliminated coordinate's multiplier is free-signed and equals the
    negated gradient there; prefix multipliers carry over unchanged.
    """
    if problem.n == 1:
        t0 = time.perf_counter()
        y = problem.alpha.copy()
        if y[0] > problem.beta[0]:
            raise InfeasibleProblemError("demand exceeds the single bound")
        lam = np.array([-problem.gradient(y)[0]])
        cert = kkt_residual(problem, y, lam)
        report = SolveReport(
            method=method,
            objective=problem.value(y),
            iterations=0,
            inner_solves=0,
            wall_time=time.perf_counter() - t0,
            termination="finite",
            n=1,
        )
        return cert, report
    if method != "gp":
        raise UnsupportedProblemError(
            "equality flavor solves through elimination, whose reduced "
            "problem is not separable; use --method gp"
        )
    reduced, rebuild = eliminate_equality(problem, seed=seed)
    cfg = GpConfig() if tol is None else GpConfig(kkt_tol=tol)
    x, report = solve_gp(reduced, cfg)
    y = rebuild(x)
    lam = np.append(_gp_multipliers(reduced, x), -problem.gradient(y)[-1])
    cert = kkt_residual(problem, y, lam)
    report.objective = problem.value(y)
    report.n = problem.n
    return cert, report


def solve_command(args: argparse.Namespace) -> int:
    problem = parse_problem_file(args.problem)
    if problem.last_constraint is LastConstraint.EQUALITY:
        cert, report = _solve_equality(problem, args.method, args.tol, args.seed)
    else:
        cert, report = _solve_inequality(problem, args.method, args.tol, args.seed)
    feas = check_feasibility(problem, cert.y)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "method": report.method,
        "n": report.n,
        "objective": report.objective,
        "y": [float(v) for v in cert.y],
        "lam": [float(v) for v in cert.lam],
        "residuals": {
            "stationarity": cert.stationarity_residual,
            "feasibility": cert.feasibility_residual,
            "complementarity": cert.complementarity_residual,
            "max": cert.max_residual,
        },
        "feasible": feas.feasible,
        "termination": report.termination,
        "iterations": report.iterations,
        "inner_solves": report.inner_solves,
        "breakpoint_count": report.breakpoint_count,
        "counters": {k: int(v) for k, v in report.counters.items()},
        "wall_ms": report.wall_time * 1e3,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def _bench_one(task: tuple) -> dict:
    """Worker body: rebuild the instance from its spec and run one method."""
    kind, n, seed, method, tol = task
    problem = InstanceSpec(kind=kind, n=n, seed=seed).build()
    cert, report = _solve_inequality(problem, method, tol, seed)
    return {
        "kind": kind,
        "n": n,
        "seed": seed,
        "method": method,
        "objective": "%.12g" % report.objective,
        "kkt_residual": "%.6g" % cert.max_residual,
        "outer_iters": report.iterations,
        "inner_solves": report.inner_solves,
        "L": "" if report.breakpoint_count is None else report.breakpoint_count,
        "wall_ms": "%.3f" % (report.wall_time * 1e3),
    }


def _worker_count(n_tasks: int) -> int:
    cap = os.environ.get("ASCENT_OPT_THREADS", "")
    try:
        limit = int(cap) if cap else os.cpu_count() or 1
    except ValueError:
        limit = os.cpu_count() or 1
    return max(1, min(limit, os.cpu_count() or 1, n_tasks))


def bench_command(args: argparse.Namespace) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise InputValidationError(
                "unknown method %r; choose from %s" % (m, ", ".join(METHODS))
            )
    if not methods:
        raise InputValidationError("no methods requested")
    tasks = [
        (args.kind, args.n, seed, method, args.tol)
        for seed in range(args.seed, args.seed + args.instances)
        for method in methods
    ]
    workers = _worker_count(len(tasks))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_bench_one, tasks, chunksize=1))
    else:
        rows = [_bench_one(t) for t in tasks]
    order = {m: k for k, m in enumerate(methods)}
    rows.sort(key=lambda r: (r["seed"], order[r["method"]]))
    sink = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.DictWriter(sink, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.out:
            sink.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ascentopt",
        description="Solve or benchmark separable problems under ascending "
        "prefix-sum constraints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one JSON problem file")
    ps.add_argument("--problem", required=True, help="path to the problem file")
    ps.add_argument("--method", choices=METHODS, default="dual")
    ps.add_argument(
        "--tol",
        type=float,
        default=None,
        help="solver tolerance (inner-equation for dual, stationarity "
        "target for gp, level tolerance for ps)",
    )
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", default=None, help="write the JSON report here")
    ps.set_defaults(func=solve_command)

    pb = sub.add_parser("bench", help="benchmark a seeded instance family")
    pb.add_argument("--kind", choices=BENCH_KINDS, required=True)
    pb.add_argument("--n", type=int, default=100)
    pb.add_argument("--instances", type=int, default=30)
    pb.add_argument("--seed", type=int, default=0, help="first seed")
    pb.add_argument(
        "--methods", default="dual", help="comma-separated subset of dual,gp,ps"
    )
    pb.add_argument("--tol", type=float, default=None)
    pb.add_argument("--out", default=None, help="write CSV here (default stdout)")
    pb.set_defaults(func=bench_command)
    return parser


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ProblemFileError, InputValidationError, UnsupportedProblemError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except InfeasibleProblemError as exc:
        print("infeasible: %s" % exc, file=sys.stderr)
        return 2
    except (NumericalError, SolverError) as exc:
        print("numerical failure: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
