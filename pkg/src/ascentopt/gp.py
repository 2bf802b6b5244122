"""Gradient projection solver.

Works for any strictly convex objective with gradient access, separable or
not: iterate x <- project(x - mu * grad F(x)).  Projections reuse the exact
quadratic path, so every iterate is feasible.  Termination is self
contained: a separable instance can grade its own iterates through the
multipliers the projection returns, everything else falls back to stall
detection and the iteration cap.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import InputValidationError, NumericalError, UnsupportedProblemError
from .model import AscendingProblem, LastConstraint, SolveReport
from .projection import project_raw

Array = np.ndarray


@dataclass(frozen=True)
class DiminishingInvSqrt:
    """mu_i = 1/sqrt(i); no parameters."""


@dataclass(frozen=True)
class FixedStep:
    mu: float

    def __post_init__(self) -> None:
        if not self.mu > 0.0:
            raise ValueError("step size must be positive")


@dataclass(frozen=True)
class Armijo:
    """Backtracking along the projection arc.

    A trial step projects x - t * grad; the candidate is accepted when the
    objective drops by at least c1 times the first-order model decrease.
    Accepted steps seed the next trial (doubled), so the rule adapts in both
    directions.
    """

    shrink: float = 0.5
    c1: float = 1e-4
    grow: float = 2.0
    max_backtracks: int = 60

    def __post_init__(self) -> None:
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if not 0.0 < self.c1 < 1.0:
            raise ValueError("c1 must lie in (0, 1)")
        if self.grow < 1.0:
            raise ValueError("grow must be >= 1")


StepRule = Union[DiminishingInvSqrt, FixedStep, Armijo]


@dataclass
class GpConfig:
    """Tunables for the gradient projection loop.

    reference_objective, when set, stops the run as soon as the objective
    comes within reference_margin of it; meant for controlled comparisons
    against a trusted optimum, not as a default stop.  grad_cap clips
    gradient entries (and replaces infinities) so barrier-style objectives
    cannot fling an iterate to infinity.
    """

    step_rule: StepRule = field(default_factory=DiminishingInvSqrt)
    max_iter: int = 5000
    obj_tol: float = 1e-12
    kkt_tol: float = 1.5e-8
    stall_window: int = 50
    reference_objective: Optional[float] = None
    reference_margin: float = 1.5e-8
    grad_cap: float = 1e8
    eq_tol: float = 1.5e-8


def _capped_gradient(problem: AscendingProblem, x: Array, cap: float) -> Array:
    g = np.asarray(problem.gradient(x), dtype=float)
    g = np.where(np.isnan(g), 0.0, g)
    return np.clip(g, -cap, cap)


def gp_step(
    x: Array, problem: AscendingProblem, mu: float, *, grad_cap: float = 1e8
) -> Array:
    """One projected-gradient step from a feasible point."""
    x = np.asarray(x, dtype=float)
    if mu == 0.0:
        return x.copy()
    g = _capped_gradient(problem, x, grad_cap)
    y, _, _ = project_raw(x - mu * g, problem.alpha, problem.beta)
    return y


def _finite_at(problem: AscendingProblem, x: Array, cap: float) -> bool:
    try:
        val = problem.value(x)
    except (ZeroDivisionError, ValueError, OverflowError):
        return False
    if not math.isfinite(float(val)):
        return False
    try:
        g = np.asarray(problem.gradient(x), dtype=float)
    except (ZeroDivisionError, ValueError, OverflowError):
        return False
    return bool(np.all(np.isfinite(np.clip(g, -cap, cap))))


def _starting_point(problem: AscendingProblem, x0: Optional[Array], cfg: GpConfig) -> Array:
    """Feasible start with finite objective and gradient.

    Projects the supplied point (zeros by default).  Barrier-style
    objectives can be infinite there, so the repair ladder projects scaled
    copies of the unconstrained minimizers until the objective is finite.
    """
    if x0 is None:
        x = np.zeros(problem.n)
    else:
        x = np.asarray(x0, dtype=float)
        if x.shape != (problem.n,):
            raise InputValidationError("x0 must have length n")
    x, _, _ = project_raw(x, problem.alpha, problem.beta, eq_tol=cfg.eq_tol)
    if _finite_at(problem, x, cfg.grad_cap):
        return x
    if not problem.is_separable:
        raise NumericalError("objective is not finite at the starting point")
    scale = 1.0
    ubar = problem.objective.ubar_arr
    seed = np.where(np.isfinite(ubar), ubar, 1.0)
    for _ in range(60):
        x, _, _ = project_raw(scale * seed, problem.alpha, problem.beta, eq_tol=cfg.eq_tol)
        if _finite_at(problem, x, cfg.grad_cap):
            return x
        scale *= 0.5
    raise NumericalError("could not find a starting point with finite objective")


def solve_gp(
    problem: AscendingProblem,
    cfg: Optional[GpConfig] = None,
    x0: Optional[Array] = None,
    callback: Optional[Callable[[int, float, float], None]] = None,
) -> tuple[Array, SolveReport]:
    """Run gradient projection and return the best iterate found.

    Stops on, in priority order: the reference objective (when configured),
    a kkt_tol-accurate optimality certificate (separable objectives only,
    graded through the projection's multipliers), a stall of the objective
    over stall_window iterations, or max_iter.  The report's counters track
    projections, objective and gradient evaluations, and Armijo backtracks.
    """
    cfg = cfg or GpConfig()
    if problem.last_constraint is not LastConstraint.INEQUALITY:
        raise UnsupportedProblemError(
            "equality flavor is unsupported here; eliminate it first"
        )
    t0 = time.perf_counter()
    alpha, beta = problem.alpha, problem.beta
    prefix_alpha = problem.prefix_alpha[1:]
    counters = {"projections": 0, "f_evals": 0, "grad_evals": 0, "backtracks": 0}

    def do_project(w: Array):
        counters["projections"] += 1
        return project_raw(w, alpha, beta, eq_tol=cfg.eq_tol)

    def objective(v: Array) -> float:
        counters["f_evals"] += 1
        return float(problem.value(v))

    x = _starting_point(problem, x0, cfg)
    fx = objective(x)
    best_x, best_f = x.copy(), fx
    history = [fx]
    termination = "max_iter"
    iterations = 0
    armijo_t = 1.0
    separable = problem.is_separable
    residual = math.nan

    for k in range(1, cfg.max_iter + 1):
        iterations = k
        counters["grad_evals"] += 1
        g = _capped_gradient(problem, x, cfg.grad_cap)

        rule = cfg.step_rule
        if isinstance(rule, Armijo):
            t = armijo_t * rule.grow
            accepted = False
            for _ in range(rule.max_backtracks):
                cand, lam, _ = do_project(x - t * g)
                f_cand = objective(cand)
                model = float(np.dot(g, x - cand))
                if f_cand <= fx - rule.c1 * model and math.isfinite(f_cand):
                    accepted = True
                    break
                counters["backtracks"] += 1
                t *= rule.shrink
            if not accepted:
                termination = "stall"
                break
            armijo_t = t
            mu = t
        else:
            mu = rule.mu if isinstance(rule, FixedStep) else 1.0 / math.sqrt(k)
            cand, lam, _ = do_project(x - mu * g)
            f_cand = objective(cand)

        x, fx = cand, f_cand
        if fx < best_f and math.isfinite(fx):
            best_x, best_f = x.copy(), fx

        gaps = np.cumsum(x) - prefix_alpha
        if np.any(gaps > 1e-7 * (1.0 + np.abs(prefix_alpha))):
            raise NumericalError("iterate left the feasible set")

        if separable and mu > 0.0:
            from .oracles import kkt_residual  # local import to avoid a cycle

            cert = kkt_residual(problem, x, lam / (2.0 * mu))
            residual = cert.max_residual
            if residual <= cfg.kkt_tol:
                termination = "kkt"
                if callback is not None:
                    callback(k, fx, residual)
                break

        if callback is not None:
            callback(k, fx, residual)

        if (
            cfg.reference_objective is not None
            and fx <= cfg.reference_objective + cfg.reference_margin
        ):
            termination = "reference"
            break

        history.append(fx)
        if len(history) > cfg.stall_window:
            history.pop(0)
            drop = history[0] - min(history)
            if drop <= cfg.obj_tol * (1.0 + abs(history[0])):
                termination = "stall"
                break

    report = SolveReport(
        method="gp",
        objective=best_f,
        iterations=iterations,
        inner_solves=counters["projections"],
        wall_time=time.perf_counter() - t0,
        termination=termination,
        n=problem.n,
        breakpoint_count=None,
        counters=counters,
    )
    return best_x, report
