from types import SimpleNamespace

import numpy as np
import pytest

from config import settings
from exceptions import ConfigurationError
from functions.continuation import (admissible_alpha, cauchy_check, geometric_schedule, kernel_swap_gap,
                                    level_window, log_residual, run_continuation, tail_kernel_bound_check,
                                    trace_verdicts, validate_schedule)
from functions.grid import make_grid, sample
from functions.kernel import make_spec
from functions.solver import mountain_pass
from models.grid import RadialFunction
from models.solver import ContinuationStep, ContinuationTrace
from operator_cache import OperatorStore, resolve_cache_dir
from schema.run_config import ContinuationSection, SolverSection
from utils.config_parser import parse_text


# =================== SCHEDULES ===================

def test_geometric_schedule():
    assert geometric_schedule(0.5, 4) == [0.5, 0.25, 0.125, 0.0625]
    assert validate_schedule(geometric_schedule(0.5, 4)) == [0.5, 0.25, 0.125, 0.0625]


@pytest.mark.parametrize("schedule", [[], [0.5, 0.5], [0.2, 0.4], [1.5, 0.5], [0.5, 0.0]])
def test_invalid_schedules(schedule):
    with pytest.raises(ConfigurationError):
        validate_schedule(schedule)


def test_admissible_alpha():
    assert admissible_alpha(1.05) == pytest.approx(0.063492, abs=1e-6)
    with pytest.raises(ConfigurationError):
        admissible_alpha(1.0)


# =================== KERNEL TAIL ===================

def test_tail_kernel_bounds_inside_interval():
    result = tail_kernel_bound_check(0.02)
    assert result.passed
    assert result.details["far_max_excess"] <= 1e-14
    assert 0.0 < result.details["C_near"] < np.inf


def test_tail_kernel_outside_interval():
    result = tail_kernel_bound_check(0.1)
    assert not result.passed
    assert "outside" in result.details["status"]


def test_tail_kernel_with_state(small_grid, exp_nl):
    u = sample(small_grid, lambda r: 0.3 * np.exp(-r * r))
    result = tail_kernel_bound_check(0.02, u=u, nl=exp_nl)
    assert result.passed
    assert result.details["riesz_potential_tail"] < result.details["riesz_potential_sup"]


def test_tail_kernel_without_finite_kappa_is_not_assessed(small_grid, exp_nl):
    u = sample(small_grid, lambda r: 0.3 * np.exp(-r * r))
    result = tail_kernel_bound_check(0.02, omega=5.0, u=u, nl=exp_nl)
    assert result.details["kappa"] > 1.0
    assert result.details["riesz_potential_status"].startswith("not assessable")
    assert "riesz_potential_sup" not in result.details
    assert result.passed


def test_omega_is_capped_in_config():
    with pytest.raises(ConfigurationError) as info:
        parse_text("continuation.omega = 5")
    assert "continuation.omega" in info.value.detail


# =================== RESIDUALS ===================

def test_log_residual_of_zero(exp_nl, log_op):
    zero = RadialFunction(log_op.grid, np.zeros(log_op.n))
    assert log_residual(zero, exp_nl, log_op) == 0.0


def test_log_residual_needs_log_operator(exp_nl, riesz_op):
    with pytest.raises(ConfigurationError):
        log_residual(RadialFunction(riesz_op.grid, np.zeros(riesz_op.n)), exp_nl, riesz_op)


def test_kernel_swap_gap_bounds_residual_change(exp_nl, riesz_op, log_op):
    u = sample(riesz_op.grid, lambda r: 0.4 * np.exp(-r * r))
    gap = kernel_swap_gap(u, exp_nl, riesz_op, log_op)
    assert gap["log_residual"] == pytest.approx(log_residual(u, exp_nl, log_op))
    assert abs(gap["galpha_residual"] - gap["log_residual"]) <= gap["kernel_term"] * (1.0 + 1e-10)
    assert gap["kernel_term"] > 0.0


# =================== DRIVER ===================

@pytest.fixture(scope="module")
def store():
    return OperatorStore(workers=2)


def test_single_entry_continuation_is_a_plain_solve(power_nl, small_grid, store, fast_solver):
    trace = run_continuation(power_nl, small_grid, [0.5], opts=fast_solver, store=store)
    plain = mountain_pass(power_nl, 0.5, small_grid, fast_solver, op=store.get(small_grid, make_spec("riesz", 0.5)))
    assert trace.completed
    assert len(trace.steps) == 1
    assert trace.steps[0].dh1 is None
    assert trace.steps[0].result.c_level == pytest.approx(plain.c_level, rel=1e-8)
    assert trace.steps[0].decay_rate is None


def test_two_step_continuation(power_nl, small_grid, store, fast_solver):
    trace = run_continuation(power_nl, small_grid, [0.5, 0.25], opts=fast_solver, store=store)
    assert trace.completed, trace.failure
    assert trace.failure == ""
    assert trace.steps[1].dh1 > 0.0
    assert np.isfinite(trace.steps[1].log_residual)
    assert len(trace.levels()) == 2
    # the log operator is built once, one riesz operator per alpha
    assert store.builds <= 3


def test_decay_recorded_for_small_alpha(power_nl, small_grid, store, fast_solver):
    cont = ContinuationSection(decay_alpha_max=0.3, r_fit=3.0)
    trace = run_continuation(power_nl, small_grid, [0.25], opts=fast_solver, cont=cont, store=store)
    step = trace.steps[0]
    assert step.decay_rate is not None
    assert step.decay_rate > 0.45


# =================== TRACE VERDICTS ===================

def _fake_trace(increments, levels):
    steps = []
    for k, (dh1, level) in enumerate(zip([None] + list(increments), levels)):
        result = SimpleNamespace(c_level=level)
        steps.append(ContinuationStep(alpha=0.5 ** (k + 1), result=result, dh1=dh1, log_residual=1e-4,
                                      energy_log=level, norm=1.0, decay_rate=0.9, decay_passed=True))
    trace = ContinuationTrace(schedule=[s.alpha for s in steps], steps=steps)
    trace.completed = True
    return trace


def test_cauchy_check_on_decreasing_increments():
    trace = _fake_trace([5.0, 4.0, 3.0, 2.0, 1.0, 0.5], [0.3] * 7)
    result = cauchy_check(trace, burn_in=3)
    assert result.passed
    assert result.details["checked"] == [2.0, 1.0, 0.5]


def test_cauchy_check_flags_growth():
    trace = _fake_trace([1.0, 1.0, 1.0, 0.2, 0.5, 0.1], [0.3] * 7)
    assert not cauchy_check(trace, burn_in=3).passed


def test_cauchy_check_with_few_steps():
    result = cauchy_check(_fake_trace([1.0], [0.3, 0.3]), burn_in=3)
    assert result.passed
    assert "too few" in result.details["status"]


def test_level_window():
    assert level_window(_fake_trace([1.0, 0.5], [0.2, 0.25, 0.3])).passed
    assert not level_window(_fake_trace([1.0], [0.2, 0.6])).passed
    assert not level_window(ContinuationTrace(schedule=[0.5])).passed


def test_trace_verdicts_names():
    trace = _fake_trace([0.4, 0.2, 0.1, 0.05, 0.02], [0.2] * 6)
    verdicts = {v.name: v for v in trace_verdicts(trace)}
    assert set(verdicts) == {"completed", "cauchy", "level_window", "log_residual", "uniform_decay"}
    assert all(v.passed for v in verdicts.values())


# =================== OPERATOR STORE ===================

def test_memory_store_reuses_operators(small_grid):
    store = OperatorStore(workers=2)
    first = store.get(small_grid, make_spec("log"))
    again = store.get(small_grid, make_spec("log"))
    assert first is again
    assert (store.builds, store.hits) == (1, 1)
    assert store.path_for(small_grid, make_spec("log")) is None


def test_disk_store_roundtrip(tmp_path):
    grid = make_grid(80, 4.0, 1.05, 0.25)
    spec = make_spec("riesz", 0.3)
    writer = OperatorStore(str(tmp_path), workers=2)
    built = writer.get(grid, spec)
    assert writer.path_for(grid, spec).exists()

    reader = OperatorStore(str(tmp_path), workers=2)
    loaded = reader.get(grid, spec)
    assert (reader.builds, reader.hits) == (0, 1)
    np.testing.assert_array_equal(loaded.averages, built.averages)


def test_disk_store_rebuilds_for_another_grid(tmp_path):
    spec = make_spec("log")
    a = make_grid(80, 4.0, 1.05, 0.25)
    b = make_grid(80, 4.0, 1.05, 0.5)
    OperatorStore(str(tmp_path), workers=2).get(a, spec)
    store = OperatorStore(str(tmp_path), workers=2)
    assert store.path_for(a, spec) == store.path_for(b, spec)
    op = store.get(b, spec)
    assert store.builds == 1
    assert op.grid is b


def test_cache_environment_override(tmp_path, monkeypatch):
    assert resolve_cache_dir("") is None
    assert resolve_cache_dir("cache").name == "cache"
    monkeypatch.setattr(settings, "CHOQUARD_CACHE", str(tmp_path / "env"))
    assert resolve_cache_dir("cache") == tmp_path / "env"


# =================== FULL RUN ===================

@pytest.mark.slow
def test_exp_critical_continuation_reaches_small_alpha(exp_nl):
    grid = make_grid(400, 20.0, 1.03, 0.25)
    opts = SolverSection(path_nodes=15, max_iter=400, workers=2)
    trace = run_continuation(exp_nl, grid, geometric_schedule(0.5, 7), opts=opts, store=OperatorStore(workers=2))
    assert trace.completed, trace.failure
    assert trace.steps[-1].alpha <= 0.02
    verdicts = {v.name: v for v in trace_verdicts(trace)}
    assert verdicts["cauchy"].passed, verdicts["cauchy"].details
    assert len(verdicts["cauchy"].details["checked"]) >= 2
    assert verdicts["level_window"].passed, verdicts["level_window"].details
    assert verdicts["uniform_decay"].passed, verdicts["uniform_decay"].details
