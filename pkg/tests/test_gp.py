"""Tests for the gradient projection solver."""

import numpy as np
import pytest

from ascentopt.errors import InputValidationError, UnsupportedProblemError
from ascentopt.gp import Armijo, DiminishingInvSqrt, FixedStep, GpConfig, gp_step, solve_gp
from ascentopt.model import (
    AscendingProblem,
    GeneralObjective,
    LastConstraint,
    check_feasibility,
    quadratic_piece,
    SeparableObjective,
)
from ascentopt.dual import DualConfig, run_dual
from ascentopt.projection import project, quadratic_objective
from ascentopt.testbed import gen_tp1, gen_tp2, gen_tp3


def quad_problem(z, alpha, beta=None):
    z = np.asarray(z, dtype=float)
    if beta is None:
        beta = np.full(z.shape, np.inf)
    return AscendingProblem(np.asarray(alpha, float), beta, quadratic_objective(z, beta))


class TestStepRules:
    def test_fixed_step_must_be_positive(self):
        with pytest.raises(ValueError):
            FixedStep(0.0)
        with pytest.raises(ValueError):
            FixedStep(-1.0)

    def test_armijo_parameter_validation(self):
        with pytest.raises(ValueError):
            Armijo(shrink=1.0)
        with pytest.raises(ValueError):
            Armijo(c1=0.0)
        with pytest.raises(ValueError):
            Armijo(grow=0.5)

    def test_gp_step_zero_mu_is_a_fresh_copy(self):
        p = quad_problem([1.0, 1.0], [0.4, 0.4])
        x = np.array([0.2, 0.2])
        out = gp_step(x, p, 0.0)
        np.testing.assert_array_equal(out, x)
        assert out is not x

    def test_gp_step_stays_feasible(self):
        rng = np.random.default_rng(5)
        p = quad_problem(rng.normal(1.0, 1.0, 10), rng.uniform(0.0, 0.5, 10))
        x = np.zeros(10)
        for mu in (0.1, 0.5, 2.0):
            x = gp_step(x, p, mu)
            assert check_feasibility(p, x).feasible


class TestConvergence:
    def test_quadratic_with_armijo_reaches_the_projection(self):
        rng = np.random.default_rng(7)
        z = rng.normal(0.5, 1.0, 15)
        alpha = rng.uniform(0.0, 0.8, 15)
        p = quad_problem(z, alpha)
        y_ref, _, _ = project(z, alpha)
        x, rep = solve_gp(p, GpConfig(step_rule=Armijo()))
        assert rep.termination == "kkt"
        np.testing.assert_allclose(x, y_ref, atol=1e-6)

    def test_diminishing_steps_reach_a_reference_objective(self):
        p = gen_tp1(20, 3)
        cert, ref = run_dual(p)
        cfg = GpConfig(
            step_rule=DiminishingInvSqrt(),
            max_iter=20000,
            reference_objective=ref.objective,
            reference_margin=1e-6 * (1.0 + abs(ref.objective)),
        )
        x, rep = solve_gp(p, cfg)
        assert rep.termination == "reference"
        assert p.value(x) <= ref.objective + 1e-5 * (1.0 + abs(ref.objective))

    def test_fixed_step_on_a_well_conditioned_quadratic(self):
        z = np.array([2.0, 1.0, 3.0])
        alpha = np.array([1.0, 0.5, 0.5])
        p = quad_problem(z, alpha)
        y_ref, _, _ = project(z, alpha)
        x, rep = solve_gp(p, GpConfig(step_rule=FixedStep(0.25), max_iter=2000))
        np.testing.assert_allclose(x, y_ref, atol=1e-6)

    def test_starting_at_the_optimum_terminates_immediately(self):
        p = gen_tp3(30, 2)
        cert, _ = run_dual(p)
        x, rep = solve_gp(p, GpConfig(step_rule=Armijo()), x0=cert.y)
        assert rep.termination == "kkt"
        assert rep.iterations <= 5
        assert np.max(np.abs(x - cert.y)) < 1e-6

    def test_matches_dual_on_each_family(self):
        for gen in (gen_tp1, gen_tp2, gen_tp3):
            p = gen(40, 9)
            _, ref = run_dual(p)
            x, rep = solve_gp(p, GpConfig(step_rule=Armijo(), max_iter=20000))
            rel = abs(rep.objective - ref.objective) / (1.0 + abs(ref.objective))
            assert rel < 1e-6, gen.__name__

    def test_armijo_objective_is_monotone(self):
        p = gen_tp1(25, 4)
        seen = []
        solve_gp(p, GpConfig(step_rule=Armijo()), callback=lambda k, f, r: seen.append(f))
        assert len(seen) > 1
        diffs = np.diff(np.array(seen))
        assert np.all(diffs <= 1e-12)

    def test_barrier_objective_repairs_the_infinite_start(self):
        # the default start (origin) has an infinite objective here
        p = gen_tp2(15, 6)
        x, rep = solve_gp(p, GpConfig(step_rule=Armijo(), max_iter=20000))
        assert np.all(x > 0.0)
        assert np.isfinite(rep.objective)
        _, ref = run_dual(p)
        rel = abs(rep.objective - ref.objective) / (1.0 + abs(ref.objective))
        assert rel < 1e-6

    def test_general_objective_runs_without_certificates(self):
        rng = np.random.default_rng(17)
        z = rng.normal(0.5, 1.0, 8)
        alpha = rng.uniform(0.0, 0.8, 8)
        obj = GeneralObjective(
            eval=lambda y: float(np.sum((y - z) ** 2)),
            gradient=lambda y: 2.0 * (y - z),
        )
        p = AscendingProblem(alpha, np.full(8, np.inf), obj)
        y_ref, _, _ = project(z, alpha)
        x, rep = solve_gp(p, GpConfig(step_rule=Armijo(), max_iter=5000))
        assert rep.termination in ("stall", "max_iter")
        np.testing.assert_allclose(x, y_ref, atol=1e-5)


class TestRejectionsAndReporting:
    def test_bad_x0_shape(self):
        p = quad_problem([1.0, 1.0], [0.5, 0.5])
        with pytest.raises(InputValidationError):
            solve_gp(p, x0=np.zeros(3))

    def test_equality_flavor_is_rejected(self):
        p = AscendingProblem(
            np.array([1.0]),
            np.array([np.inf]),
            SeparableObjective(pieces=(quadratic_piece(0.5),)),
            last_constraint=LastConstraint.EQUALITY,
        )
        with pytest.raises(UnsupportedProblemError, match="equality"):
            solve_gp(p)

    def test_report_counters(self):
        p = gen_tp1(20, 8)
        x, rep = solve_gp(p, GpConfig(step_rule=Armijo()))
        assert rep.method == "gp"
        assert rep.breakpoint_count is None
        cs = rep.counters
        assert cs["projections"] >= rep.iterations
        assert cs["f_evals"] >= rep.iterations
        assert cs["grad_evals"] == rep.iterations
        assert cs["backtracks"] >= 0
        assert rep.inner_solves == cs["projections"]

    def test_callback_sees_every_iteration(self):
        p = gen_tp3(10, 5)
        ks = []
        solve_gp(p, GpConfig(step_rule=Armijo()), callback=lambda k, f, r: ks.append(k))
        assert ks == list(range(1, len(ks) + 1))
