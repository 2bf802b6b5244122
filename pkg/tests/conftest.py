"""Shared helpers for the test suite."""

import numpy as np

from ascentopt.model import AscendingProblem, check_feasibility


def random_feasible_point(problem: AscendingProblem, rng: np.random.Generator) -> np.ndarray:
    """Sample a feasible point by capping a box draw left to right.

    Draws inside the box, then trims each coordinate so no prefix sum
    exceeds its target.  Equality flavor is not supported here.
    """
    n = problem.n
    prefix_alpha = problem.prefix_alpha[1:]
    cap = np.where(np.isfinite(problem.beta), problem.beta, 1.0 + 2.0 * problem.alpha)
    y = rng.uniform(0.0, 1.0, n) * cap
    running = 0.0
    for i in range(n):
        room = prefix_alpha[i] - running
        if y[i] > room:
            y[i] = max(room, 0.0)
        running += y[i]
    check = check_feasibility(problem, y)
    assert check.feasible, f"sampler produced an infeasible point at {check.where}"
    return y


def finite_objective(problem: AscendingProblem, y: np.ndarray) -> float:
    val = problem.value(y)
    return val if np.isfinite(val) else np.inf
