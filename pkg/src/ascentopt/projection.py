"""Euclidean projection onto the ascending polytope.

Projecting z means minimizing sum (y_i - z_i)^2 under the prefix constraints
and bounds, which is the separable dual method with unit quadratic pieces.
Every inner block equation then reads

    rho(xi) = sum_s max(0, min(2 beta_s, 2 z_s - shift - xi)) / 2 - sum alpha_s,

a non-increasing piecewise-linear function with at most two kinks per term,
so each equation is solved exactly: sort the kink locations, binary-search
the sign-change piece, one linear solve inside it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalError
from .model import (
    AscendingProblem,
    KktCertificate,
    ScalarConvexPiece,
    SeparableObjective,
    SolveReport,
    quadratic_piece,
)

Array = np.ndarray


def rho_comparison_charge(n_breakpoints: int, width: int) -> int:
    """Comparison-work estimate for one piecewise-linear equation solve.

    Charged as sort (b log2 b) + piece binary search (log2 (b+1)) + one
    assembly scan of the block.  Both solver paths use this same accounting
    so scaling probes are path-independent.
    """
    b = n_breakpoints
    sort_charge = b * max(1, math.ceil(math.log2(b))) if b > 1 else b
    search_charge = max(1, math.ceil(math.log2(b + 1)))
    return sort_charge + search_charge + width


@dataclass(frozen=True)
class RhoFunction:
    """One block equation of a projection, in kink-sorted form.

    targets[s] = 2 z_s - shift and caps[s] = 2 beta_s describe the terms;
    breakpoints holds the positive kink locations sorted ascending (at most
    two per term); slopes/values give the piecewise-linear graph at those
    locations, precomputed by a left-to-right sweep.
    """

    targets: Array
    caps: Array
    alpha_total: float
    breakpoints: Array
    values: Array
    slopes: Array
    value_at_zero: float
    slope_at_zero: float

    def value(self, xi: float) -> float:
        terms = np.minimum(self.caps, self.targets - xi)
        return float(np.sum(np.maximum(terms, 0.0)) / 2.0 - self.alpha_total)


def build_rho(
    centers: Array, betas: Array, alpha_total: float, shift: float
) -> RhoFunction:
    """Assemble the kink-sorted form of a block equation."""
    centers = np.asarray(centers, dtype=float)
    betas = np.asarray(betas, dtype=float)
    t = 2.0 * centers - shift
    caps = 2.0 * betas
    # Terms are linear (slope -1/2) for xi in (t - cap, t), flat elsewhere.
    enter = t - caps  # entering the linear regime (leaving the cap)
    leave = t  # leaving the linear regime (hitting zero)
    events = []
    deltas = []
    fin = np.isfinite(enter)
    for v in enter[fin & (enter > 0.0)]:
        events.append(v)
        deltas.append(-0.5)
    for v in leave[leave > 0.0]:
        events.append(v)
        deltas.append(0.5)
    value0 = float(np.sum(np.maximum(np.minimum(caps, t), 0.0)) / 2.0 - alpha_total)
    active0 = (t > 0.0) & (enter <= 0.0)
    slope0 = -0.5 * float(np.count_nonzero(active0))
    if events:
        ev = np.array(events)
        dl = np.array(deltas)
        order = np.argsort(ev, kind="stable")
        ev, dl = ev[order], dl[order]
        slopes = slope0 + np.cumsum(dl)
        gaps = np.diff(np.concatenate(([0.0], ev)))
        seg_slopes = np.concatenate(([slope0], slopes[:-1]))
        vals = value0 + np.cumsum(seg_slopes * gaps)
    else:
        ev = np.empty(0)
        vals = np.empty(0)
        slopes = np.empty(0)
    return RhoFunction(
        targets=t,
        caps=caps,
        alpha_total=float(alpha_total),
        breakpoints=ev,
        values=vals,
        slopes=slopes,
        value_at_zero=value0,
        slope_at_zero=slope0,
    )


def solve_rho_root(rho: RhoFunction, counters: Optional[dict] = None) -> float:
    """Exact smallest root of a block equation.

    Requires rho(0) >= 0 (up to roundoff); rho(0) <= 0 returns 0.  Otherwise
    binary-searches the precomputed kink values for the sign change and
    solves the linear piece in closed form.
    """
    if counters is not None:
        counters["comparisons"] = counters.get("comparisons", 0) + rho_comparison_charge(
            len(rho.breakpoints), len(rho.targets)
        )
    if rho.value_at_zero <= 0.0:
        return 0.0
    vals = rho.values
    if vals.size == 0:
        raise NumericalError("block equation has no sign change")
    idx = int(np.searchsorted(-vals, 0.0, side="left"))
    if idx >= vals.size:
        raise NumericalError("block equation has no sign change")
    if idx == 0:
        left_x, left_v, slope = 0.0, rho.value_at_zero, rho.slope_at_zero
    else:
        left_x, left_v, slope = (
            float(rho.breakpoints[idx - 1]),
            float(vals[idx - 1]),
            float(rho.slopes[idx - 1]),
        )
    if not slope < 0.0:
        raise NumericalError("flat piece bracketed the sign change")
    return left_x + left_v / (-slope)


def quadratic_objective(z: Array, beta: Array) -> SeparableObjective:
    """Separable objective sum (y_i - z_i)^2 with vectorized hooks."""
    z = np.asarray(z, dtype=float)
    beta = np.asarray(beta, dtype=float)
    pieces = tuple(quadratic_piece(c, b) for c, b in zip(z, beta))
    return SeparableObjective(
        pieces=pieces,
        eval_vec=lambda y, idx: (y - z[idx]) ** 2,
        deriv_vec=lambda y, idx: 2.0 * (y - z[idx]),
        deriv_inv_vec=lambda u, idx: z[idx] + 0.5 * u,
    )


try:  # compiled fast path; the pure path below is the reference
    from ._fastproj import project_kernel as _project_kernel

    HAVE_FAST_KERNEL = True
except Exception:  # pragma: no cover - exercised only without numba
    _project_kernel = None
    HAVE_FAST_KERNEL = False

_KERNEL_COUNTER_KEYS = (
    "iterations",
    "inner_solves",
    "case1",
    "case2",
    "notfound_branch",
    "comparisons",
    "merge_target_violations",
    "primal_ceiling_violations",
    "rstar_fallbacks",
)


def project_raw(
    z: Array,
    alpha: Array,
    beta: Array,
    *,
    eq_tol: float = 1.5e-8,
    use_fast: bool = True,
) -> tuple[Array, Array, dict]:
    """Allocation-light projection: (y, prefix multipliers, counters).

    Skips the certificate and report of `project`; meant for callers that
    project in a loop against fixed constraints, like the gradient solver.
    """
    if use_fast and HAVE_FAST_KERNEL:
        y, lam, raw = _project_kernel(z, alpha, beta, eq_tol, 0.0)
        counters = {k: int(v) for k, v in zip(_KERNEL_COUNTER_KEYS, raw)}
        if counters.pop("merge_target_violations"):
            raise NumericalError("merge target multiplier is not positive")
        if counters.pop("primal_ceiling_violations"):
            raise NumericalError("primal point exceeded the unconstrained minimizers")
        return y, lam, counters

    from .dual import DualConfig, run_dual  # local import to avoid a cycle

    problem = AscendingProblem(
        alpha=alpha, beta=beta, objective=quadratic_objective(z, beta)
    )
    cert, report = run_dual(problem, DualConfig(eq_tol=eq_tol))
    counters = dict(report.counters)
    counters["iterations"] = report.iterations
    return cert.y, cert.lam, counters


def project(
    z: Array,
    alpha: Array,
    beta: Optional[Array] = None,
    *,
    eq_tol: float = 1.5e-8,
    validate: bool = False,
    use_fast: bool = True,
) -> tuple[Array, KktCertificate, SolveReport]:
    """Project z onto {y : prefix sums <= prefix alpha, 0 <= y <= beta}.

    Returns the projection, a certificate with multipliers and residuals,
    and a report whose counters include the comparison-work estimate.  With
    validate=True the pure solver path runs with its per-iteration invariant
    checks; otherwise a compiled kernel of the same method is used when
    available.
    """
    from .dual import DualConfig, run_dual  # local import to avoid a cycle
    from .oracles import kkt_residual

    z = np.asarray(z, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if beta is None:
        beta = np.full(z.shape, math.inf)
    beta = np.asarray(beta, dtype=float)
    problem = AscendingProblem(
        alpha=alpha, beta=beta, objective=quadratic_objective(z, beta)
    )

    if use_fast and HAVE_FAST_KERNEL and not validate:
        t0 = time.perf_counter()
        y, lam, counters = project_raw(z, alpha, beta, eq_tol=eq_tol)
        outer = counters.pop("iterations")
        cert = kkt_residual(problem, y, lam)
        report = SolveReport(
            method="project",
            objective=problem.value(y),
            iterations=outer,
            inner_solves=counters.pop("inner_solves"),
            wall_time=time.perf_counter() - t0,
            termination="finite",
            n=problem.n,
            breakpoint_count=outer,
            counters=counters,
        )
        return y, cert, report

    cfg = DualConfig(eq_tol=eq_tol, validate=validate)
    cert, report = run_dual(problem, cfg)
    report.method = "project"
    return cert.y, cert, report
