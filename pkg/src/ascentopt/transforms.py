"""Problem-form reductions.

The solvers natively handle the ascending inequality form.  Everything else
reduces to it here: descending (covering-style) instances flip through the
substitution z = beta - y, non-monotone prefix targets tighten to their
suffix minima, and a trailing equality is eliminated by substituting the
last variable, leaving a general-objective instance for the gradient
solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (
    InfeasibleProblemError,
    InputValidationError,
    UnsupportedProblemError,
)
from .model import (
    AscendingProblem,
    GeneralObjective,
    LastConstraint,
    ScalarConvexPiece,
    SeparableObjective,
    piece_from_functions,
)

Array = np.ndarray


@dataclass(frozen=True)
class P2Problem:
    """Descending-form instance: minimize G(y) subject to
    sum_{i<=k} y_i >= sum_{i<=k} alpha_i (last one optionally an equality)
    and 0 <= y <= beta.
    """

    alpha: Array
    beta: Array
    objective: SeparableObjective
    last_constraint: LastConstraint = LastConstraint.INEQUALITY

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        if alpha.ndim != 1 or alpha.size == 0:
            raise InputValidationError("alpha must be a nonempty 1-d array")
        if beta.shape != alpha.shape:
            raise InputValidationError("beta must match alpha in shape")
        if not np.all(np.isfinite(alpha)):
            raise InputValidationError("alpha must be finite")
        if np.any(beta <= 0.0):
            raise InputValidationError("beta entries must be positive")
        if len(self.objective.pieces) != alpha.size:
            raise InputValidationError("objective piece count must equal n")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def n(self) -> int:
        return int(self.alpha.size)


def monotonize_gamma(gamma: Array) -> Array:
    """Tighten prefix targets to their suffix minima.

    Prefix sums of a nonnegative vector are non-decreasing, so the target at
    k can be replaced by min over l >= k of the targets without changing the
    feasible set.  The result is non-decreasing and pointwise <= the input.
    """
    gamma = np.asarray(gamma, dtype=float)
    return np.minimum.accumulate(gamma[::-1])[::-1]


def _flip_piece(p: ScalarConvexPiece, bound: float) -> ScalarConvexPiece:
    """Piece for z |-> f(bound - z) on [0, bound]."""

    def d(yv: float) -> float:
        try:
            return float(p.deriv(yv))
        except ZeroDivisionError:
            return math.inf

    lo = -d(bound)
    hi = -d(0.0)
    center = None
    if p.quad_center is not None:
        center = bound - p.quad_center
    return piece_from_functions(
        lambda z: p.eval(bound - z),
        lambda z: -d(bound - z),
        lambda u: bound - p.deriv_inv(-u),
        beta=bound,
        l=lo,
        h=hi,
        quad_center=center,
    )


def p2_to_p1(
    p2: P2Problem, surrogate_bound: Optional[float] = None
) -> tuple[AscendingProblem, Callable[[Array], Array]]:
    """Flip a descending instance into the ascending form.

    Substituting z = beta - y turns covering constraints into prefix caps
    with targets gamma_k = sum_{i<=k}(beta_i - alpha_i), monotonized before
    use.  Infinite bounds are replaced by surrogate_bound (the substitution
    needs finite beta); strict convexity makes any sufficiently large value
    equivalent.  Returns the flipped instance and the map recovering y.
    """
    beta_used = np.asarray(p2.beta, dtype=float).copy()
    infinite = ~np.isfinite(beta_used)
    if np.any(infinite):
        if surrogate_bound is None or not math.isfinite(surrogate_bound):
            raise InputValidationError(
                "infinite beta requires a finite surrogate_bound"
            )
        beta_used[infinite] = float(surrogate_bound)

    gamma = monotonize_gamma(np.cumsum(beta_used - p2.alpha))
    if gamma[0] < 0.0:
        raise InfeasibleProblemError(
            "prefix target %r is negative after tightening" % gamma[0]
        )
    alpha_new = np.diff(gamma, prepend=0.0)

    src = p2.objective
    pieces = tuple(
        _flip_piece(p, float(b)) for p, b in zip(src.pieces, beta_used)
    )
    ev = dv = iv = None
    if src.eval_vec is not None:
        ev = lambda vals, idx: src.eval_vec(beta_used[idx] - vals, idx)
    if src.deriv_vec is not None:
        dv = lambda vals, idx: -src.deriv_vec(beta_used[idx] - vals, idx)
    if src.deriv_inv_vec is not None:
        iv = lambda u, idx: beta_used[idx] - src.deriv_inv_vec(-u, idx)
    objective = SeparableObjective(
        pieces=pieces, eval_vec=ev, deriv_vec=dv, deriv_inv_vec=iv
    )
    problem = AscendingProblem(
        alpha=alpha_new,
        beta=beta_used,
        objective=objective,
        last_constraint=p2.last_constraint,
    )

    def inverse(z: Array) -> Array:
        return beta_used - np.asarray(z, dtype=float)

    return problem, inverse


def relax_equality(problem: AscendingProblem) -> AscendingProblem:
    """Replace a trailing equality by an inequality.

    Valid whenever the objective is decreasing in each coordinate over the
    feasible box, which makes the total-sum constraint bind at the optimum
    anyway; the caller asserts that property.
    """
    if problem.last_constraint is not LastConstraint.EQUALITY:
        return problem
    return AscendingProblem(
        alpha=problem.alpha,
        beta=problem.beta,
        objective=problem.objective,
        last_constraint=LastConstraint.INEQUALITY,
    )


def _estimate_penalty(problem: AscendingProblem, seed: int, samples: int = 64) -> float:
    """1 + largest finite gradient magnitude over a sampled feasibility box."""
    rng = np.random.default_rng(seed)
    total = float(problem.prefix_alpha[-1])
    highs = np.minimum(problem.beta, total)
    highs = np.where(np.isfinite(highs), highs, total)
    worst = 0.0
    for _ in range(samples):
        y = rng.uniform(0.0, 1.0, problem.n) * highs
        try:
            g = problem.gradient(y)
        except (ZeroDivisionError, ValueError, OverflowError):
            continue
        g = np.asarray(g, dtype=float)
        finite = np.isfinite(g)
        if np.any(finite):
            worst = max(worst, float(np.max(np.abs(g[finite]))))
    return 1.0 + worst


def eliminate_equality(
    problem: AscendingProblem,
    *,
    penalty: Optional[float] = None,
    hinge_width: float = 1e-6,
    seed: int = 0,
) -> tuple[AscendingProblem, Callable[[Array], Array]]:
    """Drop a trailing equality by substituting the last variable.

    y_n = A_n - sum of the rest; its nonnegativity is implied by the k=n-1
    prefix cap, and a finite beta_n re-enters the objective as a one-sided
    penalty M * (y_n - beta_n)^+, smoothed by a quadratic hinge of width
    hinge_width so gradients stay defined.  The reduced instance has a
    general (non-separable) objective and n-1 variables; the returned map
    appends the eliminated coordinate.
    """
    if problem.last_constraint is not LastConstraint.EQUALITY:
        raise UnsupportedProblemError("eliminate_equality needs an equality flavor")
    n = problem.n
    if n < 2:
        raise UnsupportedProblemError("elimination needs at least two variables")
    total = float(problem.prefix_alpha[-1])
    cap = float(np.sum(problem.beta))
    if total > cap:
        raise InfeasibleProblemError(
            "total %r exceeds the bound sum %r" % (total, cap)
        )
    beta_last = float(problem.beta[-1])
    M = 0.0
    if math.isfinite(beta_last):
        M = float(penalty) if penalty is not None else _estimate_penalty(problem, seed)
    w = float(hinge_width)
    src = problem

    def hinge(s: float) -> float:
        if s <= 0.0:
            return 0.0
        if s >= w:
            return s - 0.5 * w
        return s * s / (2.0 * w)

    def hinge_slope(s: float) -> float:
        return min(max(s / w, 0.0), 1.0)

    def full(yv: Array) -> Array:
        yv = np.asarray(yv, dtype=float)
        return np.concatenate((yv, [total - float(np.sum(yv))]))

    def value(yv: Array) -> float:
        y = full(yv)
        val = float(src.value(y))
        if M:
            val += M * hinge(y[-1] - beta_last)
        return val

    def gradient(yv: Array) -> Array:
        y = full(yv)
        g = np.asarray(src.gradient(y), dtype=float)
        out = g[:-1] - g[-1]
        if M:
            out = out - M * hinge_slope(y[-1] - beta_last)
        return out

    reduced = AscendingProblem(
        alpha=problem.alpha[:-1].copy(),
        beta=problem.beta[:-1].copy(),
        objective=GeneralObjective(eval=value, gradient=gradient),
        last_constraint=LastConstraint.INEQUALITY,
    )
    return reduced, full
