import numpy as np
import pytest

from exceptions import ConfigurationError, NonlinearityRangeError
from functions.energy import (EnergyFunctional, ar_growth_profile, energy_alpha, energy_log, gradient_alpha,
                              log_term, mountain_pass_ring, residual_norm)
from functions.grid import h1_norm, sample
from functions.kernel import build_operator, galpha_operator, make_spec
from functions.solver import bump_profile, check_jacobian
from models.grid import RadialFunction


def _gauss(grid, amplitude=0.3):
    return sample(grid, lambda r: amplitude * np.exp(-r * r))


def test_energy_of_zero(exp_nl, riesz_op):
    zero = RadialFunction(riesz_op.grid, np.zeros(riesz_op.n))
    parts = energy_alpha(zero, exp_nl, riesz_op, 0.5)
    assert parts.total == 0.0
    assert residual_norm(zero, exp_nl, riesz_op) == 0.0


def test_breakdown_forms_agree(exp_nl, riesz_op):
    u = _gauss(riesz_op.grid)
    parts = energy_alpha(u, exp_nl, riesz_op, 0.5)
    assert parts.split_gap() < 1e-12
    assert parts.quadratic == pytest.approx(0.5 * h1_norm(u) ** 2, rel=1e-12)
    assert parts.total == pytest.approx(EnergyFunctional(exp_nl, riesz_op, 0.5).value(u.values), rel=1e-12)


def test_riesz_and_galpha_operators_give_same_energy(exp_nl, riesz_op):
    u = _gauss(riesz_op.grid)
    direct = EnergyFunctional(exp_nl, riesz_op, 0.5).value(u.values)
    shifted = EnergyFunctional(exp_nl, galpha_operator(riesz_op)).value(u.values)
    assert direct == pytest.approx(shifted, rel=1e-10)


def test_alpha_must_match_operator(exp_nl, riesz_op):
    with pytest.raises(ConfigurationError):
        EnergyFunctional(exp_nl, riesz_op, 0.25)


def test_negative_part_is_ignored(exp_nl, riesz_op):
    u = _gauss(riesz_op.grid)
    functional = EnergyFunctional(exp_nl, riesz_op, 0.5)
    mixed = u.values.copy()
    mixed[riesz_op.grid.nodes > 2.0] = -0.1
    big_f, _, _ = functional.local(mixed)
    assert np.all(big_f[riesz_op.grid.nodes > 2.0] == 0.0)


def test_gradient_matches_directional_differences(exp_nl, riesz_op, rng):
    functional = EnergyFunctional(exp_nl, riesz_op, 0.5)
    u = _gauss(riesz_op.grid, 0.4).values
    v = (1.0 + 0.5 * rng.random(u.size)) * np.exp(-riesz_op.grid.nodes)
    grad = functional.gradient(u)
    slopes = []
    for h in (1e-2, 3e-3, 1e-3):
        fd = (functional.value(u + h * v) - functional.value(u - h * v)) / (2.0 * h)
        slopes.append(abs(fd - grad @ v) / abs(grad @ v))
    # second-order convergence of the central difference
    assert slopes[-1] < 1e-4
    assert slopes[-1] < slopes[0]


@pytest.fixture(scope="module")
def quarter_op(small_grid):
    return build_operator(small_grid, make_spec("riesz", 0.25), workers=2)


# amplitude ranges of u and v per family, sized so truncation dominates rounding at h = 1e-5
TAYLOR_SCALES = {"exp_critical": ((0.25, 0.35), (0.5, 1.0)), "power": ((0.8, 1.2), (2.0, 3.0))}


@pytest.mark.parametrize("family", sorted(TAYLOR_SCALES))
def test_central_difference_error_is_second_order(family, quarter_op, exp_nl, power_nl):
    nl = exp_nl if family == "exp_critical" else power_nl
    functional = EnergyFunctional(nl, quarter_op, 0.25)
    r = quarter_op.grid.nodes
    rng = np.random.default_rng(97)
    (a_lo, a_hi), (b_lo, b_hi) = TAYLOR_SCALES[family]
    steps = np.logspace(-2.0, -5.0, 7)
    for _ in range(5):
        width = rng.uniform(0.6, 0.9)
        u = rng.uniform(a_lo, a_hi) * np.exp(-(r / width) ** 2)
        # v decays faster than u, so u - h v stays positive
        v = rng.uniform(b_lo, b_hi) * np.exp(-(r / (width * rng.uniform(0.6, 0.9))) ** 2)
        exact = float(functional.gradient(u) @ v)
        errors = [abs((functional.value(u + h * v) - functional.value(u - h * v)) / (2.0 * h) - exact)
                  for h in steps]
        slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.1), errors


def test_representer_is_weighted_gradient(exp_nl, riesz_op):
    u = _gauss(riesz_op.grid)
    rep = gradient_alpha(u, exp_nl, riesz_op, 0.5)
    grad = EnergyFunctional(exp_nl, riesz_op, 0.5).gradient(u.values)
    np.testing.assert_allclose(rep.values * riesz_op.grid.weights, grad, rtol=1e-12, atol=1e-14)


def test_hessian_matches_finite_differences(power_nl, riesz_op):
    functional = EnergyFunctional(power_nl, riesz_op, 0.5)
    u = _gauss(riesz_op.grid, 0.8).values
    gap = check_jacobian(functional, u, functional.hessian(u))
    assert gap <= 1e-5


def test_hessian_is_symmetric(exp_nl, riesz_op):
    functional = EnergyFunctional(exp_nl, riesz_op, 0.5)
    jac = functional.hessian(_gauss(riesz_op.grid).values)
    np.testing.assert_allclose(jac, jac.T, rtol=1e-10, atol=1e-12)


def test_range_error_reports_location(exp_nl, riesz_op):
    values = np.zeros(riesz_op.n)
    values[5] = 9.0
    with pytest.raises(NonlinearityRangeError) as info:
        EnergyFunctional(exp_nl, riesz_op, 0.5).value(values)
    assert info.value.location == pytest.approx(riesz_op.grid.nodes[5])


# =================== LOG KERNEL ===================

def test_energy_log_needs_log_operator(exp_nl, riesz_op):
    with pytest.raises(ConfigurationError):
        energy_log(_gauss(riesz_op.grid), exp_nl, riesz_op)


def test_log_energy_split(exp_nl, log_op):
    u = _gauss(log_op.grid)
    total = energy_log(u, exp_nl, log_op)
    assert total == pytest.approx(0.5 * h1_norm(u) ** 2 - log_term(u, exp_nl, log_op), rel=1e-12)


def test_approximate_energy_tends_to_log_energy(exp_nl, small_grid, log_op):
    u = _gauss(small_grid)
    target = energy_log(u, exp_nl, log_op)
    gaps = []
    for alpha in (0.2, 0.05, 0.01):
        op = build_operator(small_grid, make_spec("riesz", alpha), workers=2)
        gaps.append(target - energy_alpha(u, exp_nl, op, alpha).total)
    # G_alpha exceeds ln(1/s) and decreases to it as alpha -> 0
    assert all(g > 0 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]


# =================== GEOMETRY CHECKS ===================

def test_energy_positive_on_small_sphere(exp_nl, riesz_op):
    ring = mountain_pass_ring(exp_nl, riesz_op, 0.5, radius=0.05, samples=16, seed=3)
    assert ring.passed
    assert 0.0 < ring.value <= ring.details["quarter_norm_sq"] * 2.0


def test_bump_reaches_negative_energy(exp_nl, riesz_op):
    e0 = bump_profile(riesz_op.grid)
    functional = EnergyFunctional(exp_nl, riesz_op, 0.5)
    levels = [functional.value(t * e0.values) for t in np.linspace(0.0, 1.5, 31)]
    assert levels[0] == 0.0
    assert levels[1] > 0.0
    assert min(levels) < 0.0


def test_ar_growth_profile(exp_nl, riesz_op):
    e0 = bump_profile(riesz_op.grid)
    result = ar_growth_profile(exp_nl, e0, np.linspace(1.0, 1.6, 25))
    assert result.passed
    assert result.details["tau"] == exp_nl.tau


def test_bump_profile_shape(small_grid):
    e0 = bump_profile(small_grid)
    r = small_grid.nodes
    assert np.all(e0.values[r <= 0.125] == 1.0)
    assert np.all(e0.values[r >= 0.25] == 0.0)
    assert np.all(np.diff(e0.values) <= 0.0)
    assert h1_norm(e0) > 0.0
