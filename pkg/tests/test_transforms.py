"""Tests for the problem-form reductions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ascentopt.dual import DualConfig, run_dual
from ascentopt.errors import (
    InfeasibleProblemError,
    InputValidationError,
    UnsupportedProblemError,
)
from ascentopt.gp import Armijo, GpConfig, solve_gp
from ascentopt.model import (
    AscendingProblem,
    LastConstraint,
    SeparableObjective,
    quadratic_piece,
)
from ascentopt.oracles import active_set_oracle
from ascentopt.projection import quadratic_objective
from ascentopt.transforms import (
    P2Problem,
    eliminate_equality,
    monotonize_gamma,
    p2_to_p1,
    relax_equality,
)


def covering_feasible_point(p2: P2Problem, rng: np.random.Generator) -> np.ndarray:
    """Random point with box bounds and all covering prefixes satisfied.

    Works left to right; the lower bound at i accounts for how much the
    remaining coordinates can still contribute at their caps.
    """
    n = p2.n
    A = np.cumsum(p2.alpha)
    suffix_cap = np.concatenate((np.cumsum(p2.beta[::-1])[::-1], [0.0]))
    y = np.empty(n)
    sofar = 0.0
    for i in range(n):
        lo = 0.0
        for k in range(i, n):
            need = A[k] - sofar - (suffix_cap[i + 1] - suffix_cap[k + 1])
            lo = max(lo, need)
        y[i] = rng.uniform(min(lo, p2.beta[i]), p2.beta[i])
        y[i] = max(y[i], lo)
        sofar += y[i]
    assert np.all(np.cumsum(y) >= A - 1e-9)
    return y


def quad_p2(centers, alpha, beta, last=LastConstraint.INEQUALITY) -> P2Problem:
    centers = np.asarray(centers, dtype=float)
    beta = np.asarray(beta, dtype=float)
    pieces = tuple(quadratic_piece(c, b) for c, b in zip(centers, beta))
    return P2Problem(np.asarray(alpha, float), beta,
                     SeparableObjective(pieces=pieces), last_constraint=last)


class TestMonotonize:
    def test_dip_is_tightened(self):
        np.testing.assert_allclose(monotonize_gamma(np.array([3.0, 1.0, 2.0])), [1.0, 1.0, 2.0])

    def test_monotone_input_unchanged(self):
        g = np.array([0.5, 1.0, 4.0])
        np.testing.assert_allclose(monotonize_gamma(g), g)

    @settings(max_examples=200, deadline=None)
    @given(hnp.arrays(np.float64, st.integers(1, 12),
                      elements=st.floats(-100, 100, allow_nan=False)))
    def test_properties(self, gamma):
        out = monotonize_gamma(gamma)
        assert np.all(np.diff(out) >= 0.0)
        assert np.all(out <= gamma)
        np.testing.assert_array_equal(monotonize_gamma(out), out)


class TestP2Validation:
    def test_shape_and_sign_checks(self):
        obj = SeparableObjective(pieces=(quadratic_piece(0.0, 1.0),))
        with pytest.raises(InputValidationError):
            P2Problem(np.array([]), np.array([]), obj)
        with pytest.raises(InputValidationError):
            P2Problem(np.array([1.0, 1.0]), np.array([1.0]), obj)
        with pytest.raises(InputValidationError):
            P2Problem(np.array([1.0]), np.array([0.0]), obj)
        with pytest.raises(InputValidationError):
            P2Problem(np.array([1.0, 1.0]), np.array([1.0, 1.0]), obj)


class TestFlip:
    def test_worked_example(self):
        p2 = quad_p2([0.0, 0.0], alpha=[1.0, 1.0], beta=[2.0, 2.0])
        flipped, back = p2_to_p1(p2)
        assert flipped.objective.quad_centers is not None  # fast path survives
        cert, _ = run_dual(flipped)
        y = back(cert.y)
        np.testing.assert_allclose(y, [1.0, 1.0], atol=1e-9)

    def test_targets_are_monotonized(self):
        p2 = quad_p2([0.0, 0.0, 0.0], alpha=[0.0, 2.0, 0.0], beta=[1.0, 1.0, 1.0])
        flipped, back = p2_to_p1(p2)
        np.testing.assert_allclose(np.cumsum(flipped.alpha), [0.0, 0.0, 1.0])
        cert, _ = run_dual(flipped)
        y = back(cert.y)
        # the covering constraint at k=2 forces the first two coordinates up
        np.testing.assert_allclose(y[:2], [1.0, 1.0], atol=1e-9)

    def test_infeasible_covering_is_detected(self):
        p2 = quad_p2([0.0, 0.0], alpha=[2.0, 0.0], beta=[1.0, 1.0])
        with pytest.raises(InfeasibleProblemError):
            p2_to_p1(p2)

    def test_infinite_bound_needs_surrogate(self):
        p2 = quad_p2([1.0, 1.0], alpha=[1.0, 1.0], beta=[np.inf, 2.0])
        with pytest.raises(InputValidationError, match="surrogate"):
            p2_to_p1(p2)

    def test_surrogate_choice_does_not_move_the_solution(self):
        p2 = quad_p2([1.0, 0.5], alpha=[1.0, 1.0], beta=[np.inf, 2.0])
        ys = []
        for bound in (50.0, 500.0):
            flipped, back = p2_to_p1(p2, surrogate_bound=bound)
            cert, _ = run_dual(flipped)
            ys.append(back(cert.y))
        np.testing.assert_allclose(ys[0], ys[1], atol=1e-6)

    def test_flip_against_sampled_feasible_points(self):
        rng = np.random.default_rng(41)
        for s in range(10):
            n = int(rng.integers(2, 6))
            beta = rng.uniform(0.5, 2.0, n)
            # keep the covering system feasible: targets below the caps
            alpha = rng.uniform(0.0, 1.0, n) * beta * 0.9
            centers = rng.uniform(-0.5, 1.0, n)
            p2 = quad_p2(centers, alpha, beta)
            flipped, back = p2_to_p1(p2)
            cert, _ = run_dual(flipped, DualConfig(eq_tol=1e-11))
            y = back(cert.y)
            val = p2.objective.value(y)
            assert np.all(y >= -1e-9) and np.all(y <= beta + 1e-9)
            for _ in range(200):
                probe = covering_feasible_point(p2, rng)
                assert val <= p2.objective.value(probe) + 1e-8

    def test_flipped_value_tracks_the_original(self):
        p2 = quad_p2([0.3, 0.8, 0.1], alpha=[0.5, 0.5, 0.5], beta=[1.0, 1.5, 2.0])
        flipped, back = p2_to_p1(p2)
        rng = np.random.default_rng(1)
        for _ in range(20):
            z = rng.uniform(0.0, 1.0, 3) * np.asarray(flipped.beta)
            assert flipped.value(z) == pytest.approx(p2.objective.value(back(z)), rel=1e-12)


class TestRelaxEquality:
    def test_inequality_passthrough(self):
        p = AscendingProblem(
            np.array([1.0]), np.array([np.inf]),
            SeparableObjective(pieces=(quadratic_piece(0.0),)),
        )
        assert relax_equality(p) is p

    def test_relaxation_is_exact_for_decreasing_objectives(self):
        # centers far above the reachable range keep every gradient negative
        alpha = np.array([1.0, 1.0])
        beta = np.full(2, np.inf)
        obj = quadratic_objective(np.array([5.0, 5.0]), beta)
        eq = AscendingProblem(alpha, beta, obj, last_constraint=LastConstraint.EQUALITY)
        relaxed = relax_equality(eq)
        assert relaxed.last_constraint is LastConstraint.INEQUALITY
        cert, _ = run_dual(relaxed)
        assert float(np.sum(cert.y)) == pytest.approx(2.0, abs=1e-9)
        y_star, info = active_set_oracle(eq)
        assert obj.value(cert.y) == pytest.approx(info["objective"], abs=1e-8)


class TestEliminateEquality:
    def test_requires_equality_flavor(self):
        p = AscendingProblem(
            np.array([1.0, 1.0]), np.full(2, np.inf),
            quadratic_objective(np.zeros(2), np.full(2, np.inf)),
        )
        with pytest.raises(UnsupportedProblemError):
            eliminate_equality(p)

    def test_requires_two_variables(self):
        p = AscendingProblem(
            np.array([1.0]), np.array([np.inf]),
            SeparableObjective(pieces=(quadratic_piece(0.0),)),
            last_constraint=LastConstraint.EQUALITY,
        )
        with pytest.raises(UnsupportedProblemError):
            eliminate_equality(p)

    def test_detects_infeasible_total(self):
        p = AscendingProblem(
            np.array([2.0, 2.0]), np.array([1.0, 1.0]),
            quadratic_objective(np.zeros(2), np.array([1.0, 1.0])),
            last_constraint=LastConstraint.EQUALITY,
        )
        with pytest.raises(InfeasibleProblemError):
            eliminate_equality(p)

    def test_reconstruction_map(self):
        beta = np.full(3, np.inf)
        p = AscendingProblem(
            np.array([1.0, 1.0, 1.0]), beta,
            quadratic_objective(np.zeros(3), beta),
            last_constraint=LastConstraint.EQUALITY,
        )
        reduced, full = eliminate_equality(p)
        assert reduced.n == 2
        assert not reduced.is_separable
        y = full(np.array([0.5, 1.0]))
        np.testing.assert_allclose(y, [0.5, 1.0, 1.5])
        assert float(np.sum(y)) == pytest.approx(3.0)

    def test_matches_oracle_on_small_equality_instances(self):
        rng = np.random.default_rng(51)
        for s in range(8):
            n = int(rng.integers(2, 6))
            alpha = rng.uniform(0.2, 1.0, n)
            beta = np.full(n, np.inf)
            centers = rng.uniform(-0.5, 1.5, n)
            p = AscendingProblem(
                alpha, beta, quadratic_objective(centers, beta),
                last_constraint=LastConstraint.EQUALITY,
            )
            y_star, info = active_set_oracle(p)
            reduced, full = eliminate_equality(p)
            x, rep = solve_gp(reduced, GpConfig(step_rule=Armijo(), max_iter=20000))
            y = full(x)
            assert float(np.sum(y)) == pytest.approx(float(np.sum(alpha)), abs=1e-9)
            assert p.value(y) == pytest.approx(info["objective"], abs=1e-6)

    def test_penalty_keeps_the_eliminated_coordinate_bounded(self):
        alpha = np.array([1.6, 0.4])
        beta = np.array([np.inf, 0.5])
        p = AscendingProblem(
            alpha, beta, quadratic_objective(np.zeros(2), beta),
            last_constraint=LastConstraint.EQUALITY,
        )
        reduced, full = eliminate_equality(p)
        x, _ = solve_gp(reduced, GpConfig(step_rule=Armijo(), max_iter=20000))
        y = full(x)
        assert y[-1] <= 0.5 + 1e-5
        np.testing.assert_allclose(y, [1.5, 0.5], atol=1e-4)

    def test_explicit_penalty_overrides_the_estimate(self):
        alpha = np.array([1.6, 0.4])
        beta = np.array([np.inf, 0.5])
        p = AscendingProblem(
            alpha, beta, quadratic_objective(np.zeros(2), beta),
            last_constraint=LastConstraint.EQUALITY,
        )
        reduced, full = eliminate_equality(p, penalty=50.0)
        x, _ = solve_gp(reduced, GpConfig(step_rule=Armijo(), max_iter=20000))
        assert full(x)[-1] <= 0.5 + 1e-4
