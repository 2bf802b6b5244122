"""Finite dual method for separable minimization under ascending constraints.

The method inspects the prefix gaps of the unconstrained minimizers, extracts
the breakpoint subsequence where those gaps reach running maxima, and assigns
one multiplier per breakpoint in a single backward pass.  Each pass step
either balances its own block (Case 1) or merges forward into later blocks
(Case 2) after a binary search for the first balanceable extension.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericalError, UnsupportedProblemError
from .model import (
    AscendingProblem,
    KktCertificate,
    LastConstraint,
    SeparableObjective,
    SolveReport,
)
from .projection import rho_comparison_charge, build_rho, solve_rho_root
from .rootfind import smallest_root_nonincreasing

Array = np.ndarray


@dataclass(frozen=True)
class DualConfig:
    """Tunables for the dual method.

    eq_tol: residual tolerance of the inner block equations.
    degenerate_tol: slack added to the >= 0 comparisons (exact by default).
    validate: re-check the working optimality conditions every outer
        iteration and the monotone update direction in Case 2 (slow).
    validate_tol: tolerance for those checks.
    """

    eq_tol: float = 1.5e-8
    degenerate_tol: float = 0.0
    validate: bool = False
    validate_tol: float = 1e-5


@dataclass
class BreakpointSet:
    """Prefix gaps d and the breakpoint subsequence w (1-based indices)."""

    d: Array
    w: Array

    @property
    def L(self) -> int:
        return int(self.w.size)


@dataclass
class DualState:
    """Backward-pass state: multipliers per breakpoint, current position j.

    Positions t > j of lam_w hold finalized values; positions <= j are zero
    until assigned.
    """

    lam_w: Array
    j: int


def compute_breakpoints(ybar: Array, alpha: Array) -> BreakpointSet:
    """Gaps d_k = sum_{i<=k}(ybar_i - alpha_i) and their running-max indices.

    w_1 is the first k with d_k >= 0 and each later w extends the running
    maximum (ties included).  Comparisons are exact.
    """
    ybar = np.asarray(ybar, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    d = np.cumsum(ybar) - np.cumsum(alpha)
    w: list[int] = []
    for k in range(d.size):
        if not w:
            if d[k] >= 0.0:
                w.append(k + 1)
        elif d[k] >= d[w[-1] - 1]:
            w.append(k + 1)
    return BreakpointSet(d=d, w=np.array(w, dtype=np.int64))


def _suffix_sums(lam_w: Array) -> Array:
    """suf[t] = sum of lam_w[t-1:]) for t in 1..L+1 (1-based), suf[L+1]=0."""
    return np.concatenate((np.cumsum(lam_w[::-1])[::-1], [0.0]))


def solve_block_equation(
    objective: SeparableObjective,
    block: tuple[int, int],
    shift: float,
    alpha: Array,
    *,
    eq_tol: float = 1.5e-8,
    counters: Optional[dict] = None,
) -> float:
    """Solve sum_{s in block} H_s(-shift - xi) = sum alpha_s for xi >= 0.

    `block` is (lo, hi] in 1-based indices.  The left side is non-increasing
    in xi, and the caller guarantees it is >= 0 at xi = 0.  Unit-quadratic
    pieces take the exact piecewise-linear route; everything else brackets by
    doubling and bisects to eq_tol, returning the smallest root of a flat
    segment.
    """
    lo, hi = block
    target = float(np.sum(alpha[lo:hi]))
    centers = objective.quad_centers
    if centers is not None:
        rho = build_rho(
            centers[lo:hi],
            objective.h_arr[lo:hi] / 2.0 + centers[lo:hi],  # beta from h = 2(b-c)
            target,
            shift,
        )
        xi = solve_rho_root(rho, counters=counters)
        if counters is not None:
            counters["inner_solves"] = counters.get("inner_solves", 0) + 1
        return xi

    def residual(xi: float) -> float:
        return float(np.sum(objective.h_values(-shift - xi, lo, hi))) - target

    xi = smallest_root_nonincreasing(residual, eq_tol)
    if counters is not None:
        counters["inner_solves"] = counters.get("inner_solves", 0) + 1
    return xi


def find_r_star(
    objective: SeparableObjective,
    state: DualState,
    breaks: BreakpointSet,
    alpha: Array,
    prefix_alpha: Array,
    *,
    degenerate_tol: float = 0.0,
    counters: Optional[dict] = None,
) -> Optional[int]:
    """Smallest r in [j+1, L] whose extended block sum is nonnegative.

    The predicate at r sums H_s over (w_{j-1}, w_r] at the shift excluding
    multipliers up to w_r.  Only positions with a currently positive
    multiplier are candidates: a zeroed position lies strictly inside some
    block solved jointly with its right neighbours, its prefix there is
    already slack, and the loop invariants rule it out as the first
    qualifier.  Along positive positions the predicate is monotone (each
    step right adds block sums that are exactly balanced and relaxes the
    shift), so a binary search over them returns the minimum.  The result
    is still verified against the previous candidate; on failure the scan
    falls back to linear.  Returns None when no candidate qualifies.
    """
    j, L, w = state.j, breaks.L, breaks.w
    w_prev = int(w[j - 2]) if j >= 2 else 0
    suf = _suffix_sums(state.lam_w)  # suf[r] = sum of lam_w over positions > r

    def pred(r: int) -> bool:
        shift = float(suf[r])
        stop = int(w[r - 1])
        hs = objective.h_values(-shift, w_prev, stop)
        val = float(np.sum(hs)) - (prefix_alpha[stop] - prefix_alpha[w_prev])
        if counters is not None:
            counters["rstar_probes"] = counters.get("rstar_probes", 0) + 1
        return val >= -degenerate_tol

    cands = [r for r in range(j + 1, L + 1) if state.lam_w[r - 1] > 0.0]
    if not cands or not pred(cands[-1]):
        return None
    lo, hi = 0, len(cands) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if pred(cands[mid]):
            hi = mid
        else:
            lo = mid + 1
    if lo == 0 or not pred(cands[lo - 1]):
        return cands[lo]
    if counters is not None:
        counters["rstar_fallbacks"] = counters.get("rstar_fallbacks", 0) + 1
    for r in cands:
        if pred(r):
            return r
    return None


def _materialize(objective: SeparableObjective, lam: Array):
    """Primal point and bound multipliers implied by prefix multipliers."""
    x = -np.cumsum(lam[::-1])[::-1]
    u = np.clip(x, objective.l_arr, objective.h_arr)
    y = objective.h_values(x)
    eta = np.maximum(u - x, 0.0)
    delta = np.maximum(x - u, 0.0)
    return y, eta, delta, x


def _validate_tail(
    problem: AscendingProblem,
    state: DualState,
    breaks: BreakpointSet,
    tol: float,
) -> None:
    """Debug-mode loop invariant: the tail beyond the current block start
    satisfies the working optimality conditions (bound complementarity,
    tail-prefix feasibility, multiplier complementarity)."""
    obj = problem.objective
    n = problem.n
    j, w = state.j, breaks.w
    w_prev = int(w[j - 2]) if j >= 2 else 0
    lam = np.zeros(n)
    lam[breaks.w - 1] = state.lam_w
    y, eta, delta, _ = _materialize(obj, lam)
    ybar = obj.ubar_arr
    if np.any(y > ybar + tol * (1.0 + np.abs(ybar))):
        raise NumericalError("validate: primal exceeded unconstrained minimizers")
    t = slice(w_prev, n)
    if np.any(np.abs(y[t] * eta[t]) > tol * (1.0 + np.abs(eta[t]))):
        raise NumericalError("validate: lower-bound complementarity failed")
    fin = np.isfinite(problem.beta[t])
    gap_up = (problem.beta[t] - y[t])[fin] * delta[t][fin]
    if np.any(np.abs(gap_up) > tol * (1.0 + delta[t][fin])):
        raise NumericalError("validate: upper-bound complementarity failed")
    if np.any(delta[t][~fin] > tol):
        raise NumericalError("validate: upper multiplier on an unbounded variable")
    rhs = problem.prefix_alpha[w_prev + 1 :] - problem.prefix_alpha[w_prev]
    gaps = np.cumsum(y[t]) - rhs
    if np.any(gaps > tol * (1.0 + np.abs(rhs))):
        raise NumericalError("validate: tail prefix constraint violated")
    active = lam[t] > tol
    if np.any(np.abs(gaps[active]) > tol * (1.0 + np.abs(rhs[active]))):
        raise NumericalError("validate: multiplier complementarity failed")


def run_dual(
    problem: AscendingProblem, cfg: Optional[DualConfig] = None
) -> tuple[KktCertificate, SolveReport]:
    """Solve an inequality-form separable instance by the backward dual pass.

    Returns a certificate carrying the primal point, all multipliers and the
    residuals, plus a report with iteration/equation counts.  The outer loop
    runs exactly once per breakpoint, so report.iterations equals the
    breakpoint count.
    """
    from .oracles import kkt_residual  # local import to avoid a cycle

    cfg = cfg or DualConfig()
    if not problem.is_separable:
        raise UnsupportedProblemError("the dual method needs a separable objective")
    if problem.last_constraint is not LastConstraint.INEQUALITY:
        raise UnsupportedProblemError(
            "equality flavor is unsupported here; eliminate it first"
        )
    t0 = time.perf_counter()
    obj = problem.objective
    alpha = problem.alpha
    A = problem.prefix_alpha
    n = problem.n
    counters: dict = {
        "inner_solves": 0,
        "case1": 0,
        "case2": 0,
        "notfound_branch": 0,
        "comparisons": 0,
        "rstar_probes": 0,
        "rstar_fallbacks": 0,
    }

    ybar = obj.ubar_arr
    breaks = compute_breakpoints(ybar, alpha)
    L = breaks.L
    state = DualState(lam_w=np.zeros(L), j=L)
    outer = 0

    for j in range(L, 0, -1):
        state.j = j
        outer += 1
        w = breaks.w
        w_prev = int(w[j - 2]) if j >= 2 else 0
        w_cur = int(w[j - 1])
        suf = _suffix_sums(state.lam_w)
        shift = float(suf[j])  # sum of multipliers strictly after position j
        hs = obj.h_values(-shift, w_prev, w_cur)
        val = float(np.sum(hs)) - (A[w_cur] - A[w_prev])
        if val >= -cfg.degenerate_tol:
            counters["case1"] += 1
            xi = solve_block_equation(
                obj, (w_prev, w_cur), shift, alpha,
                eq_tol=cfg.eq_tol, counters=counters,
            )
            state.lam_w[j - 1] = xi
        else:
            counters["case2"] += 1
            r = find_r_star(
                obj, state, breaks, alpha, A,
                degenerate_tol=cfg.degenerate_tol, counters=counters,
            )
            if r is None:
                # no viable merge target: the running-max breakpoint rule
                # keeps zero-shift block values nonnegative in exact
                # arithmetic, so a deficit at rounding scale is a tie that
                # roots at zero; anything larger is a genuine failure
                if val >= -1e-10 * (1.0 + A[w_cur] + A[w_prev]):
                    state.lam_w[j - 1] = 0.0
                else:
                    counters["notfound_branch"] += 1
                    state.lam_w[j - 1 :] = 0.0
            else:
                lam_tilde = state.lam_w[r - 1]
                if not lam_tilde > 0.0:
                    raise NumericalError(
                        "merge target multiplier is not positive (got %r)" % lam_tilde
                    )
                old = state.lam_w.copy() if cfg.validate else None
                shift_r = float(suf[r]) if r < L else 0.0
                xi = solve_block_equation(
                    obj, (w_prev, int(w[r - 1])), shift_r, alpha,
                    eq_tol=cfg.eq_tol, counters=counters,
                )
                state.lam_w[j - 1 : r - 1] = 0.0
                state.lam_w[r - 1] = xi
                if cfg.validate and old is not None:
                    slack = cfg.validate_tol * (1.0 + np.abs(old))
                    if np.any(state.lam_w > old + slack):
                        raise NumericalError("validate: multiplier update not monotone")
        if cfg.validate:
            _validate_tail(problem, state, breaks, cfg.validate_tol)

    lam = np.zeros(n)
    if L:
        lam[breaks.w - 1] = state.lam_w
    y, _, _, _ = _materialize(obj, lam)
    if np.any(y > ybar + 1e-10 * (1.0 + np.abs(ybar))):
        raise NumericalError("primal point exceeded the unconstrained minimizers")
    cert = kkt_residual(problem, y, lam)
    report = SolveReport(
        method="dual",
        objective=obj.value(y),
        iterations=outer,
        inner_solves=counters["inner_solves"],
        wall_time=time.perf_counter() - t0,
        termination="finite",
        n=n,
        breakpoint_count=L,
        counters=counters,
    )
    return cert, report
