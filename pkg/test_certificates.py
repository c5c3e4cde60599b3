import math

import numpy as np
import pytest

from exceptions import ConfigurationError
from functions.certificates import (RADIAL_CONSTANT, case2_threshold, decay_certificate, delta_n, hls_certificate,
                                    hls_quotient, level_certificate, moser_grid, moser_norm_closed,
                                    moser_norm_report, moser_w, psi_n, psi_threshold, radial_bound_check,
                                    t_n_squared)
from functions.grid import h1_norm, make_grid, sample
from functions.kernel import build_operator, make_spec
from functions.nonlinearity import f4_threshold, make_nonlinearity
from models.moser import MoserConfig


# =================== MOSER FUNCTIONS ===================

def test_delta_and_closed_norm_for_n_10():
    cfg = MoserConfig(10, 0.2)
    assert delta_n(10) == pytest.approx(0.1024883, abs=1e-7)
    assert moser_norm_closed(cfg) == pytest.approx(1.0040995, abs=1e-7)
    assert cfg.peak == pytest.approx(0.60537, abs=1e-5)


def test_moser_config_validation():
    with pytest.raises(ConfigurationError):
        MoserConfig(1)
    with pytest.raises(ConfigurationError):
        MoserConfig(10, 0.25)


def test_moser_profile_shape():
    cfg = MoserConfig(50, 0.2)
    w = moser_w(cfg, moser_grid(cfg))
    r = w.grid.nodes
    assert w.values[0] == pytest.approx(cfg.peak)
    assert np.all(w.values[r >= 0.2] == 0.0)
    assert np.any(np.isclose(r, cfg.inner_radius, rtol=0, atol=1e-15))
    assert np.all(np.diff(w.values) <= 1e-15)


@pytest.mark.parametrize("n", [10, 100, 1000])
def test_quadrature_norm_matches_closed_form(n):
    cfg = MoserConfig(n, 0.2)
    w = moser_w(cfg, make_grid(20000, 1.0, 1.01, 0.25))
    assert h1_norm(w) ** 2 == pytest.approx(moser_norm_closed(cfg), rel=1e-4)


def test_norm_report_passes():
    report = moser_norm_report([10, 100])
    assert report.passed
    assert set(report.details) == {"10", "100"}


def test_coarse_grid_is_refused():
    with pytest.raises(ConfigurationError):
        moser_w(MoserConfig(10, 0.2), make_grid(50, 1.0))


# =================== LEVEL ESTIMATE ===================

def test_t_n_squared_formula():
    cfg = MoserConfig(100, 0.2)
    expected = 1.0 + (math.log(1.0 + 0.04 * delta_n(100)) - math.log(4.0)) / (4.0 * math.log(100.0))
    assert t_n_squared(cfg) == pytest.approx(expected, rel=1e-14)
    # t_n maximizes psi_n
    t_n = math.sqrt(expected)
    assert psi_n(t_n, cfg) >= max(psi_n(t_n - 1e-3, cfg), psi_n(t_n + 1e-3, cfg))


def test_psi_is_vectorized():
    cfg = MoserConfig(20, 0.2)
    t = np.array([0.8, 1.0, 1.2])
    np.testing.assert_allclose(psi_n(t, cfg), [psi_n(x, cfg) for x in t])
    assert psi_n(1.0, cfg) == pytest.approx(moser_norm_closed(cfg) / 2.0 - 1.0 / (2.0 * math.log(20.0)))


def test_thresholds():
    assert psi_threshold(0.2, n_max=1000) == 2
    assert case2_threshold() == 2


@pytest.fixture(scope="module")
def moser_setup():
    cfg = MoserConfig(50, 0.2)
    grid = moser_grid(cfg)
    return cfg, build_operator(grid, make_spec("riesz", 0.1), workers=2)


def test_level_certificate_below_half(moser_setup, exp_nl):
    cfg, op = moser_setup
    cert = level_certificate(cfg, exp_nl, 0.1, op)
    assert cert.levels[0] == 0.0
    assert cert.verdict_majorant
    assert cert.verdict_psi
    assert cert.verdict_level, cert.max_level
    assert cert.passed
    assert cert.threshold == pytest.approx(f4_threshold(0.2))
    assert cert.epsilon == pytest.approx(0.5 * (exp_nl.beta - cert.threshold))
    assert cert.t_eps == pytest.approx((exp_nl.beta - cert.epsilon) ** 0.25, rel=1e-2)
    assert cert.truncated_at is None


@pytest.mark.parametrize("alpha", [0.5, 0.1, 0.02])
def test_level_certificate_along_the_schedule(alpha, exp_nl):
    cfg = MoserConfig(50, 0.2)
    op = build_operator(moser_grid(cfg), make_spec("riesz", alpha), workers=2)
    cert = level_certificate(cfg, exp_nl, alpha, op)
    assert cert.passed, cert.notes
    assert cert.max_level < 0.5
    assert math.sqrt(0.5) <= cert.t_n <= math.sqrt(2.0)
    assert cert.psi_at_t_n < 0.5


def test_level_certificate_psi_only_on_the_middle_range(moser_setup, exp_nl):
    cfg, op = moser_setup
    cert = level_certificate(cfg, exp_nl, 0.1, op, t_mesh=np.array([0.5, 1.0, 1.6]))
    assert cert.psi_values[0] is None
    assert cert.psi_values[1] == pytest.approx(psi_n(1.0, cfg))
    assert cert.psi_values[2] is None


def test_level_certificate_needs_large_beta(moser_setup):
    cfg, op = moser_setup
    with pytest.raises(ConfigurationError):
        level_certificate(cfg, make_nonlinearity("exp_critical", beta=5.0), 0.1, op)


def test_level_certificate_needs_kink_nodes(exp_nl):
    cfg = MoserConfig(2, 0.2)
    op = build_operator(make_grid(300, 1.0, 1.03, 0.25), make_spec("riesz", 0.1), workers=2)
    with pytest.raises(ConfigurationError) as info:
        level_certificate(cfg, exp_nl, 0.1, op)
    assert "kink" in info.value.detail


# =================== DECAY ===================

@pytest.fixture(scope="module")
def wide_grid():
    return make_grid(4000, 30.0, 1.01, 0.25)


def test_radial_bound_of_exponential(wide_grid):
    u = sample(wide_grid, lambda r: np.exp(-r))
    result = radial_bound_check(u)
    # sup over r >= 1 of e^-r sqrt(r) sits at r = 1; ||u|| = sqrt(pi)
    assert result.value == pytest.approx(math.exp(-1.0) / math.sqrt(math.pi), rel=1e-2)
    assert result.details["within_constant"]
    assert result.details["constant"] == RADIAL_CONSTANT


def test_radial_bound_needs_nonzero(wide_grid):
    with pytest.raises(ConfigurationError):
        radial_bound_check(sample(wide_grid, lambda r: 0.0 * r))


def test_exponential_tail_passes(wide_grid, exp_nl):
    result = decay_certificate(sample(wide_grid, lambda r: 2.0 * np.exp(-r)), 6.0, nl=exp_nl)
    assert result.passed
    assert result.value == pytest.approx(1.0, rel=1e-6)
    assert result.details["M_fit"] == pytest.approx(2.0, rel=1e-6)
    assert 0.0 < result.details["linear_tail_from"] < 6.0


def test_slow_tail_fails(wide_grid):
    result = decay_certificate(sample(wide_grid, lambda r: np.exp(-r / 4.0)), 6.0)
    assert not result.passed
    assert result.value == pytest.approx(0.25, rel=1e-6)


def test_negative_tail_is_not_applicable(wide_grid):
    result = decay_certificate(sample(wide_grid, lambda r: -np.exp(-r)), 6.0)
    assert not result.passed
    assert result.details["status"].startswith("not applicable")


def test_decay_window_must_fit(wide_grid):
    with pytest.raises(ConfigurationError):
        decay_certificate(sample(wide_grid, lambda r: np.exp(-r)), 15.0)


# =================== HLS ===================

def test_hls_quotients_respect_the_bound(riesz_op):
    result = hls_certificate(0.5, trials=20, seed=7, op=riesz_op)
    assert result.passed
    assert result.seed == 7
    assert len(result.details["quotients"]) == 20
    assert max(result.details["quotients"]) <= result.details["sharp_constant"] * (1.0 + 1e-3)


def test_hls_refuses_alpha_one():
    with pytest.raises(ConfigurationError):
        hls_certificate(1.0, trials=2)


def test_hls_quotient_of_zero(riesz_op):
    g = np.zeros(riesz_op.n)
    assert hls_quotient(riesz_op, g, np.ones(riesz_op.n)) == 0.0
