"""Independent correctness anchors.

kkt_residual grades any (y, lambda) pair against the optimality system;
active_set_oracle solves tiny instances exactly by enumerating which prefix
constraints bind; ps_solve is a reference method that repeatedly finds the
lowest common derivative level at which some leading block balances and
fixes that block.  None of these share code paths with the dual method
beyond the problem model, so agreement is meaningful evidence.
"""

from __future__ import annotations

import time
from itertools import combinations
from typing import Optional

import numpy as np

from .errors import InputValidationError, NumericalError, UnsupportedProblemError
from .model import (
    AscendingProblem,
    KktCertificate,
    LastConstraint,
    SolveReport,
)
from .rootfind import MAX_DOUBLINGS, invert_increasing

Array = np.ndarray


def _completion(objective, lam: Array):
    """Bound multipliers implied by the prefix multipliers.

    x_i is minus the suffix sum of lambda; clamping x to the derivative
    range [l, h] yields u, and the positive parts of u - x and x - u are
    the lower and upper bound multipliers.
    """
    x = -np.cumsum(lam[::-1])[::-1]
    u = np.clip(x, objective.l_arr, objective.h_arr)
    eta = np.maximum(u - x, 0.0)
    delta = np.maximum(x - u, 0.0)
    return x, u, eta, delta


def kkt_residual(problem: AscendingProblem, y: Array, lam: Array) -> KktCertificate:
    """Grade (y, lambda) against the optimality system of the problem.

    Residual conventions, chosen so a double-precision solve of a
    well-scaled instance can actually reach zero:

    * stationarity: raw ∞-norm of gradient(y) - x - eta + delta;
    * feasibility: bound violations raw, prefix violations divided by
      1 + |prefix target| (equality flavor grades the last gap two-sided);
    * complementarity: each product is graded with both factors relativized,
      multiplier/(1 + multiplier) times gap/(1 + scale); negative multiplier
      entries enter raw.
    """
    obj = problem.objective
    if not problem.is_separable:
        raise UnsupportedProblemError("kkt_residual needs a separable objective")
    y = np.asarray(y, dtype=float)
    lam = np.asarray(lam, dtype=float)
    n = problem.n
    if y.shape != (n,) or lam.shape != (n,):
        raise InputValidationError("y and lambda must both have length n")

    x, u, eta, delta = _completion(obj, lam)
    grad = obj.gradient(y)
    stationarity = float(np.max(np.abs(grad - x - eta + delta)))

    A = problem.prefix_alpha[1:]
    prefix = np.cumsum(y)
    gaps = prefix - A
    scaled_gaps = np.abs(gaps) / (1.0 + np.abs(A))
    feas_terms = [np.max(np.maximum(-y, 0.0))]
    fin = np.isfinite(problem.beta)
    if np.any(fin):
        feas_terms.append(np.max(np.maximum(y[fin] - problem.beta[fin], 0.0)))
    pos_gaps = np.maximum(gaps, 0.0) / (1.0 + np.abs(A))
    if problem.last_constraint is LastConstraint.EQUALITY:
        pos_gaps[-1] = scaled_gaps[-1]
    feas_terms.append(np.max(pos_gaps))
    feasibility = float(max(feas_terms))

    def rel(m: Array) -> Array:
        return m / (1.0 + np.abs(m))

    neg_lam = np.maximum(-lam, 0.0)
    lam_gap = rel(lam) * scaled_gaps
    if problem.last_constraint is LastConstraint.EQUALITY:
        neg_lam[-1] = 0.0  # equality multiplier is free-signed
        lam_gap[-1] = 0.0  # and carries no slackness requirement
    comp_terms = [
        np.max(lam_gap),
        np.max(rel(eta) * np.abs(y)),
        np.max(neg_lam),
    ]
    if np.any(fin):
        comp_terms.append(
            np.max(
                rel(delta[fin]) * np.abs(problem.beta[fin] - y[fin])
                / (1.0 + problem.beta[fin])
            )
        )
    comp_terms.append(np.max(np.where(fin, 0.0, delta)))
    complementarity = float(max(comp_terms))

    return KktCertificate(
        y=y,
        lam=lam,
        eta=eta,
        delta=delta,
        stationarity_residual=stationarity,
        feasibility_residual=feasibility,
        complementarity_residual=complementarity,
    )


def _solve_segment(
    problem: AscendingProblem, a: int, b: int, target: float
) -> Optional[Array]:
    """Equal-level fill of positions [a, b) summing to target, or None.

    At an optimum every maximal run between binding prefixes shares one
    derivative level tau, with y = H(tau) on the run.  The sum is increasing
    in tau, so the level is a scalar inversion.
    """
    obj = problem.objective
    if target < 0.0:
        return None
    if target == 0.0:
        return np.zeros(b - a)
    cap = float(np.sum(problem.beta[a:b]))
    if np.isfinite(cap) and target > cap * (1.0 + 1e-12) + 1e-12:
        return None
    lo = float(np.min(obj.l_arr[a:b]))
    hi = float(np.max(obj.h_arr[a:b]))

    def seg_sum(tau: float) -> float:
        return float(np.sum(obj.h_values(tau, a, b)))

    tau = invert_increasing(seg_sum, target, lo, hi, tol=1e-12, expand=True)
    return obj.h_values(tau, a, b)


def active_set_oracle(
    problem: AscendingProblem, *, feas_tol: float = 1e-9
) -> tuple[Array, dict]:
    """Exact solution of a tiny instance by binding-pattern enumeration.

    Tries every subset of prefix constraints as the binding set: the subset
    splits 1..n into equal-level runs with pinned sums, the trailing run
    stays at the unconstrained minimizers.  Each assembled candidate is kept
    only if feasible; the best objective wins.  The true binding set is
    among the patterns, so the winner is the global optimum up to the scalar
    root tolerance.
    """
    from .model import check_feasibility

    if not problem.is_separable:
        raise UnsupportedProblemError("the oracle needs a separable objective")
    n = problem.n
    if n > 6:
        raise InputValidationError("active_set_oracle is limited to n <= 6")
    A = problem.prefix_alpha
    ubar = problem.objective.ubar_arr

    segment_cache: dict[tuple[int, int], Optional[Array]] = {}

    def segment(a: int, b: int) -> Optional[Array]:
        key = (a, b)
        if key not in segment_cache:
            segment_cache[key] = _solve_segment(problem, a, b, float(A[b] - A[a]))
        return segment_cache[key]

    need_last = problem.last_constraint is LastConstraint.EQUALITY
    best_y: Optional[Array] = None
    best_val = np.inf
    best_pattern: tuple[int, ...] = ()
    candidates = list(range(1, n + 1))
    for size in range(n + 1):
        for pattern in combinations(candidates, size):
            if need_last and (not pattern or pattern[-1] != n):
                continue
            y = np.empty(n)
            start = 0
            ok = True
            for k in pattern:
                seg = segment(start, k)
                if seg is None:
                    ok = False
                    break
                y[start:k] = seg
                start = k
            if not ok:
                continue
            y[start:] = ubar[start:]
            check = check_feasibility(problem, y, tol=feas_tol)
            if not check.feasible:
                continue
            val = problem.value(y)
            if val < best_val:
                best_val = float(val)
                best_y = y
                best_pattern = pattern
    if best_y is None:
        raise NumericalError("no binding pattern produced a feasible point")
    return best_y, {"objective": best_val, "binding_prefixes": best_pattern}


def ps_solve(
    problem: AscendingProblem, *, level_tol: float = 1e-12
) -> tuple[KktCertificate, SolveReport]:
    """Reference solver: raise a common derivative level until some leading
    block of the unfixed suffix balances, fix that block, repeat.

    Per round, with p variables already fixed, the candidate equations
    sum_{i=p+1..l} H_i(theta) = A_l - A_p share the scalar theta; their
    pointwise maximum surplus is increasing in theta, so one bisection finds
    the lowest level at which the first candidate balances.  A level of zero
    means the whole suffix is slack and finishes at the unconstrained
    minimizers.  Fixes at least one variable per round, so at most n rounds.
    """
    if not problem.is_separable:
        raise UnsupportedProblemError("ps_solve needs a separable objective")
    if problem.last_constraint is not LastConstraint.INEQUALITY:
        raise UnsupportedProblemError(
            "equality flavor is unsupported here; eliminate it first"
        )
    t0 = time.perf_counter()
    obj = problem.objective
    n = problem.n
    A = problem.prefix_alpha
    y = np.empty(n)
    counters = {"phi_evals": 0, "bisections": 0}
    levels: list[tuple[int, float]] = []  # (block end, level)
    p = 0
    rounds = 0
    while p < n:
        rounds += 1
        targets = A[p + 1 :] - A[p]

        def surplus(tau: float) -> Array:
            counters["phi_evals"] += 1
            return np.cumsum(obj.h_values(tau, p, n)) - targets

        c0 = surplus(0.0)
        if np.max(c0) <= 0.0:
            y[p:] = obj.h_values(0.0, p, n)
            levels.append((n, 0.0))
            p = n
            break
        counters["bisections"] += 1
        # bracket: double downward until the max surplus goes nonpositive
        lo = -1.0
        k = 0
        while np.max(surplus(lo)) > 0.0:
            k += 1
            if k > MAX_DOUBLINGS:
                raise NumericalError("level bracket expansion failed")
            lo *= 2.0
        hi = 0.0
        # keep max(surplus(lo)) <= 0 < max(surplus(hi)); lo ends at the
        # largest level solving the first balancing equation
        while hi - lo > level_tol * max(1.0, abs(lo)):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if np.max(surplus(mid)) > 0.0:
                hi = mid
            else:
                lo = mid
        c = surplus(lo)
        qualify = np.nonzero(c >= -1e-8 * (1.0 + np.abs(targets)))[0]
        end = int(qualify[0]) + p + 1 if qualify.size else int(np.argmax(c)) + p + 1
        y[p:end] = obj.h_values(lo, p, end)
        levels.append((end, lo))
        p = end

    lam = np.zeros(n)
    for t, (end, level) in enumerate(levels):
        nxt = levels[t + 1][1] if t + 1 < len(levels) else 0.0
        lam[end - 1] = nxt - level
    cert = kkt_residual(problem, y, lam)
    report = SolveReport(
        method="ps",
        objective=problem.value(y),
        iterations=rounds,
        inner_solves=counters["bisections"],
        wall_time=time.perf_counter() - t0,
        termination="finite",
        n=n,
        breakpoint_count=None,
        counters=counters,
    )
    return cert, report
