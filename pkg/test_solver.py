import numpy as np
import pytest

import functions.solver as solver_module
from exceptions import NumericalError
from functions.energy import EnergyFunctional, residual_norm
from functions.grid import apply_stiffness, h1_norm, make_grid
from functions.nonlinearity import make_nonlinearity
from functions.solver import (SobolevMetric, check_jacobian, cerami_diagnostics, find_endpoint, mountain_pass,
                              refine_newton)
from models.grid import RadialFunction
from schema.run_config import SolverSection


@pytest.fixture(scope="module")
def power_solution(power_nl, small_grid, riesz_op):
    opts = SolverSection(path_nodes=11, max_iter=300, tol=1e-8, tol_path=1e-3, newton_max_iter=40, workers=2)
    return mountain_pass(power_nl, 0.5, small_grid, opts, op=riesz_op)


# =================== ENDPOINT ===================

def test_endpoint_has_negative_energy(power_nl, small_grid, riesz_op):
    e, t0 = find_endpoint(power_nl, 0.5, small_grid, op=riesz_op, workers=2)
    assert t0 > 0.0
    assert EnergyFunctional(power_nl, riesz_op, 0.5).value(e.values) < 0.0
    assert float(e.values.max()) == pytest.approx(t0)


# =================== MOUNTAIN PASS ===================

def test_power_mountain_pass_converges(power_solution, power_nl, riesz_op):
    result = power_solution
    assert result.converged, result.message
    assert result.positivity_flag
    assert result.c_level > 0.0
    assert result.residual <= 1e-8
    assert result.energy.total == pytest.approx(result.c_level)
    assert residual_norm(result.u_star, power_nl, riesz_op) <= 1e-8


def test_path_maximum_never_rises(power_solution):
    levels = np.asarray(power_solution.path_levels)
    assert levels.size > 0
    assert np.all(np.diff(levels) <= 1e-12)
    assert power_solution.c_level <= levels[0] + 1e-12


def test_solution_decays(power_solution):
    u = power_solution.u_star
    r = u.grid.nodes
    assert u.values[0] == pytest.approx(u.values.max())
    assert abs(u.values[r > 10.0]).max() < 1e-3 * u.values.max()


def test_warm_start_skips_the_path(power_nl, small_grid, riesz_op, power_solution, fast_solver):
    again = mountain_pass(power_nl, 0.5, small_grid, fast_solver, op=riesz_op, warm_start=power_solution.u_star)
    assert again.message == "warm start"
    assert again.iterations == 0
    assert again.c_level == pytest.approx(power_solution.c_level, rel=1e-8)


def test_level_does_not_depend_on_endpoint_scale(power_nl, small_grid, riesz_op, power_solution):
    opts = SolverSection(path_nodes=11, max_iter=300, tol=1e-8, tol_path=1e-3, newton_max_iter=40, workers=2,
                         endpoint_scale=2.0)
    stretched = mountain_pass(power_nl, 0.5, small_grid, opts, op=riesz_op)
    assert stretched.converged, stretched.message
    assert stretched.c_level == pytest.approx(power_solution.c_level, abs=1e-6)


def test_iteration_cap_returns_a_diagnostic_result(power_nl, small_grid, riesz_op):
    opts = SolverSection(path_nodes=11, max_iter=2, newton=False, workers=2)
    result = mountain_pass(power_nl, 0.5, small_grid, opts, op=riesz_op)
    assert not result.converged
    assert result.iterations == 2
    assert result.residual > opts.tol
    assert "iteration cap" in result.message
    assert len(result.path_levels) == 2


def test_cerami_bounds_at_critical_point(power_nl, riesz_op, power_solution):
    diag = cerami_diagnostics(power_solution.u_star, power_nl, 0.5, op=riesz_op)
    assert diag.check("tau_norm_bound").passed
    assert diag.check("h_norm_bound").passed
    assert diag.check("quotient_bound").passed
    assert abs(diag.values["nehari_gap"]) < 1e-6
    assert abs(diag.values["q_test_pairing"]) < 1e-6
    assert diag.level == pytest.approx(power_solution.c_level)
    # pure power: ||u||^2 = q (G * F) F, so 2c = (1 - 1/q) ||u||^2
    assert 2.0 * diag.level == pytest.approx(2.0 / 3.0 * diag.norm_sq, rel=1e-6)


def test_cerami_flags_a_scaled_state(power_nl, riesz_op, power_solution):
    diag = cerami_diagnostics(power_solution.u_star * 10.0, power_nl, 0.5, op=riesz_op)
    assert not diag.passed
    assert not diag.check("tau_norm_bound").passed
    assert diag.values["energy_lower_bound_gap"] < 0.0


def test_cerami_bounds_hold_at_zero(power_nl, riesz_op):
    diag = cerami_diagnostics(RadialFunction(riesz_op.grid, np.zeros(riesz_op.n)), power_nl, 0.5, op=riesz_op)
    assert diag.passed
    assert diag.level == 0.0


def test_cerami_builds_operator_with_given_workers(monkeypatch, power_nl, riesz_op, power_solution):
    seen = []

    def recording_build(grid, spec, workers=None, **kwargs):
        seen.append(workers)
        return riesz_op

    monkeypatch.setattr(solver_module, "build_operator", recording_build)
    diag = cerami_diagnostics(power_solution.u_star, power_nl, 0.5, workers=3)
    assert seen == [3]
    assert diag.check("tau_norm_bound").passed


# =================== NEWTON ===================

def test_newton_accepts_a_converged_state(power_nl, riesz_op, power_solution, fast_solver):
    u, residual, its = refine_newton(power_solution.u_star, power_nl, 0.5, fast_solver, op=riesz_op)
    assert its == 0
    assert residual <= 1e-8
    np.testing.assert_array_equal(u.values, power_solution.u_star.values)


def test_newton_converges_quadratically_from_a_perturbation(power_nl, riesz_op, power_solution):
    rng = np.random.default_rng(41)
    u_star = power_solution.u_star
    r = u_star.grid.nodes
    c1, c2 = rng.normal(size=2)
    shift = 1e-3 * float(u_star.values.max()) * (c1 * np.exp(-r * r) + c2 * np.exp(-r * r / 4.0))
    start = RadialFunction(u_star.grid, u_star.values + shift)
    r0 = residual_norm(start, power_nl, riesz_op)
    residuals = [r0]
    for steps in (1, 2):
        opts = SolverSection(tol=1e-15, newton_max_iter=steps, workers=2)
        _, residual, its = refine_newton(start, power_nl, 0.5, opts, op=riesz_op)
        assert its == steps
        residuals.append(residual)
    r0, r1, r2 = residuals
    assert r1 < 0.1 * r0
    assert r2 < 0.1 * r1
    # the contraction factor shrinks with the residual
    assert r2 / r1 < r1 / r0


def test_check_jacobian_rejects_wrong_matrix(power_nl, riesz_op, power_solution):
    functional = EnergyFunctional(power_nl, riesz_op, 0.5)
    u = power_solution.u_star.values
    jac = functional.hessian(u)
    assert check_jacobian(functional, u, jac) <= 1e-5
    with pytest.raises(NumericalError):
        check_jacobian(functional, u, 1.5 * jac)


def test_sobolev_metric_inverts_stiffness(small_grid, rng):
    metric = SobolevMetric(small_grid)
    v = rng.normal(size=small_grid.n)
    np.testing.assert_allclose(metric.solve(apply_stiffness(v, small_grid)), v, rtol=1e-8, atol=1e-8)


@pytest.fixture(scope="module")
def exp_solution(exp_nl):
    grid = make_grid(400, 20.0, 1.03, 0.25)
    opts = SolverSection(path_nodes=15, max_iter=400, workers=2)
    return mountain_pass(exp_nl, 0.5, grid, opts)


@pytest.mark.slow
def test_exp_critical_mountain_pass(exp_solution):
    result = exp_solution
    assert result.converged, result.message
    assert result.positivity_flag
    assert result.c_level > 0.0
    assert h1_norm(result.u_star) > 0.0


@pytest.mark.slow
def test_exp_critical_cerami_bounds(exp_nl, exp_solution):
    diag = cerami_diagnostics(exp_solution.u_star, exp_nl, 0.5, level=exp_solution.c_level, workers=2)
    assert diag.check("tau_norm_bound").passed
    assert diag.check("h_norm_bound").passed
    assert diag.check("quotient_bound").passed
    assert abs(diag.values["nehari_gap"]) < 1e-6


@pytest.mark.slow
def test_power_four_mountain_pass_on_fine_grid():
    nl = make_nonlinearity("power", q=4.0, domain_max=50.0)
    grid = make_grid(2048, 40.0, 1.01, 0.25)
    opts = SolverSection(path_nodes=21, workers=4)
    result = mountain_pass(nl, 0.5, grid, opts)
    assert result.converged, result.message
    assert result.residual <= 1e-8
    assert result.u_star.values.min() >= -1e-10 * result.u_star.values.max()
    assert result.c_level > 0.0

    diag = cerami_diagnostics(result.u_star, nl, 0.5, level=result.c_level, workers=4)
    assert diag.passed
    assert diag.check("tau_norm_bound").value <= 2.0 * result.c_level + 1e-6
    assert diag.check("h_norm_bound").value <= 2.0 * result.c_level + 1e-6
    # pure power: 2c = (1 - 1/q) ||u||^2
    assert 2.0 * diag.level == pytest.approx(0.75 * diag.norm_sq, rel=1e-6)
