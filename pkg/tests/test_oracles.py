"""Tests for the correctness anchors: residual grader, enumerator, reference solver."""

import numpy as np
import pytest

from ascentopt.dual import DualConfig, run_dual
from ascentopt.errors import InputValidationError, UnsupportedProblemError
from ascentopt.model import (
    AscendingProblem,
    GeneralObjective,
    LastConstraint,
    check_feasibility,
)
from ascentopt.oracles import active_set_oracle, kkt_residual, ps_solve
from ascentopt.projection import quadratic_objective
from ascentopt.testbed import gen_tp1, gen_tp2, gen_tp3, random_separable

from conftest import random_feasible_point


def quad_problem(z, alpha, beta=None, last=LastConstraint.INEQUALITY):
    z = np.asarray(z, dtype=float)
    if beta is None:
        beta = np.full(z.shape, np.inf)
    beta = np.asarray(beta, dtype=float)
    return AscendingProblem(np.asarray(alpha, float), beta,
                            quadratic_objective(z, beta), last_constraint=last)


class TestKktResidual:
    def test_zero_at_a_hand_checked_optimum(self):
        p = quad_problem([0.0, 2.0], [1.0, 0.0])
        cert = kkt_residual(p, np.array([0.0, 1.0]), np.array([0.0, 2.0]))
        assert cert.max_residual < 1e-12
        np.testing.assert_allclose(cert.eta, [2.0, 0.0])
        np.testing.assert_allclose(cert.delta, [0.0, 0.0])

    def test_stationarity_catches_a_wrong_primal(self):
        p = quad_problem([0.0, 2.0], [1.0, 0.0])
        cert = kkt_residual(p, np.array([0.0, 0.9]), np.array([0.0, 2.0]))
        assert cert.stationarity_residual == pytest.approx(0.2)

    def test_feasibility_residuals(self):
        p = quad_problem([0.0, 0.0], [1.0, 0.0], beta=[1.0, 1.0])
        cert = kkt_residual(p, np.array([-0.1, 0.0]), np.zeros(2))
        assert cert.feasibility_residual == pytest.approx(0.1)  # raw bound violation
        cert = kkt_residual(p, np.array([0.8, 0.4]), np.zeros(2))
        # prefix gap 0.2 at k=2, scaled by 1 + |A_2| = 2
        assert cert.feasibility_residual == pytest.approx(0.2 / 2.0)

    def test_negative_multiplier_enters_raw(self):
        p = quad_problem([1.0], [2.0])
        cert = kkt_residual(p, np.array([1.0]), np.array([-0.5]))
        assert cert.complementarity_residual >= 0.5

    def test_positive_multiplier_on_slack_prefix(self):
        # center 2 keeps x = -3 inside [l, h], so no bound multiplier appears
        p = quad_problem([2.0], [2.0])
        cert = kkt_residual(p, np.array([1.0]), np.array([3.0]))
        # rel(3) * |1 - 2| / (1 + 2) = 0.75 / 3
        assert cert.complementarity_residual == pytest.approx(0.25)
        assert cert.stationarity_residual == pytest.approx(1.0)

    def test_equality_frees_the_last_multiplier(self):
        p = quad_problem([3.0, 3.0], [1.0, 0.5], last=LastConstraint.EQUALITY)
        y = np.array([1.0, 0.5])
        cert_eq = kkt_residual(p, y, np.array([0.0, -4.0]))
        # the sign and slackness checks skip the last multiplier
        assert cert_eq.complementarity_residual < 1e-12
        p_ineq = quad_problem([3.0, 3.0], [1.0, 0.5])
        cert_ineq = kkt_residual(p_ineq, y, np.array([0.0, -4.0]))
        assert cert_ineq.complementarity_residual >= 4.0

    def test_equality_grades_underfill_as_infeasible(self):
        p = quad_problem([0.0, 0.0], [1.0, 1.0], last=LastConstraint.EQUALITY)
        cert = kkt_residual(p, np.array([0.5, 0.5]), np.zeros(2))
        assert cert.feasibility_residual == pytest.approx(1.0 / 3.0)

    def test_shape_validation(self):
        p = quad_problem([1.0, 1.0], [1.0, 1.0])
        with pytest.raises(InputValidationError):
            kkt_residual(p, np.zeros(3), np.zeros(2))
        with pytest.raises(InputValidationError):
            kkt_residual(p, np.zeros(2), np.zeros(1))

    def test_needs_a_separable_objective(self):
        gen = GeneralObjective(eval=lambda y: 0.0, gradient=lambda y: np.zeros(1))
        p = AscendingProblem(np.array([1.0]), np.array([np.inf]), gen)
        with pytest.raises(UnsupportedProblemError):
            kkt_residual(p, np.zeros(1), np.zeros(1))


class TestActiveSetOracle:
    def test_size_limit(self):
        p = quad_problem(np.zeros(7), np.ones(7))
        with pytest.raises(InputValidationError, match="n <= 6"):
            active_set_oracle(p)

    def test_known_projection(self):
        p = quad_problem([1.25, 3.0], [1.0, 1.0])
        y, info = active_set_oracle(p)
        np.testing.assert_allclose(y, [0.125, 1.875], atol=1e-9)
        assert info["binding_prefixes"] == (2,)

    def test_slack_instance_binds_nothing(self):
        p = quad_problem([0.2, 0.3], [1.0, 1.0])
        y, info = active_set_oracle(p)
        np.testing.assert_allclose(y, [0.2, 0.3], atol=1e-12)
        assert info["binding_prefixes"] == ()

    def test_optimality_against_sampled_feasible_points(self):
        rng = np.random.default_rng(61)
        for s in range(12):
            n = int(rng.integers(1, 7))
            problem = random_separable(n, 400 + s)
            y, info = active_set_oracle(problem)
            assert check_feasibility(problem, y).feasible
            for _ in range(300):
                probe = random_feasible_point(problem, rng)
                val = problem.value(probe)
                if np.isfinite(val):
                    assert info["objective"] <= val + 1e-8

    def test_equality_flavor_requires_final_binding(self):
        p = quad_problem([0.0, 0.0], [0.6, 0.6], last=LastConstraint.EQUALITY)
        y, info = active_set_oracle(p)
        assert info["binding_prefixes"][-1] == 2
        assert float(np.sum(y)) == pytest.approx(1.2, abs=1e-9)
        np.testing.assert_allclose(y, [0.6, 0.6], atol=1e-9)


class TestPsSolve:
    def test_worked_example_matches_the_dual_method(self):
        p = quad_problem([1.25, 3.0], [1.0, 1.0])
        cert, rep = ps_solve(p)
        np.testing.assert_allclose(cert.y, [0.125, 1.875], atol=1e-9)
        np.testing.assert_allclose(cert.lam, [0.0, 2.25], atol=1e-9)
        assert rep.method == "ps"
        assert rep.iterations == 1

    def test_slack_suffix_finishes_at_minimizers(self):
        p = quad_problem([0.2, 0.3], [1.0, 1.0])
        cert, rep = ps_solve(p)
        np.testing.assert_allclose(cert.y, [0.2, 0.3], atol=1e-12)
        np.testing.assert_allclose(cert.lam, [0.0, 0.0])

    def test_agrees_with_dual_on_every_family(self):
        for gen in (gen_tp1, gen_tp2, gen_tp3):
            for seed in range(3):
                p = gen(30, seed)
                cert_ps, rep_ps = ps_solve(p)
                cert_d, rep_d = run_dual(p)
                rel = abs(rep_ps.objective - rep_d.objective) / (1.0 + abs(rep_d.objective))
                assert rel < 1e-8, (gen.__name__, seed)
                assert cert_ps.max_residual < 1e-6
                assert np.all(cert_ps.lam >= -1e-10)

    def test_agrees_with_oracle_on_small_instances(self):
        for seed in range(10):
            problem = random_separable(int(np.random.default_rng(seed).integers(1, 7)),
                                       700 + seed)
            y_star, info = active_set_oracle(problem)
            cert, _ = ps_solve(problem)
            assert problem.value(cert.y) <= info["objective"] + 1e-7

    def test_rounds_never_exceed_n(self):
        for seed in range(5):
            p = random_separable(25, 800 + seed)
            _, rep = ps_solve(p)
            assert rep.iterations <= 25

    def test_rejections(self):
        gen = GeneralObjective(eval=lambda y: 0.0, gradient=lambda y: np.zeros(1))
        p = AscendingProblem(np.array([1.0]), np.array([np.inf]), gen)
        with pytest.raises(UnsupportedProblemError):
            ps_solve(p)
        q = quad_problem([1.0], [1.0], last=LastConstraint.EQUALITY)
        with pytest.raises(UnsupportedProblemError, match="equality"):
            ps_solve(q)
