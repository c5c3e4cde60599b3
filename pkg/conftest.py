import numpy as np
import pytest

from config import settings
from functions.grid import make_grid
from functions.kernel import build_operator, make_spec
from functions.nonlinearity import make_nonlinearity
from schema.run_config import SolverSection


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Logs and operator cache go to the test's temporary directory"""
    monkeypatch.setattr(settings, "LOG_DIR", str(tmp_path / "logs"))
    monkeypatch.setattr(settings, "CHOQUARD_CACHE", "")
    monkeypatch.setattr(settings, "LOG_COLORS", "false")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(240, 12.0, 1.03, 0.25)


@pytest.fixture(scope="session")
def exp_nl():
    return make_nonlinearity("exp_critical")


@pytest.fixture(scope="session")
def power_nl():
    return make_nonlinearity("power", q=3.0, domain_max=50.0)


@pytest.fixture(scope="session")
def riesz_op(small_grid):
    return build_operator(small_grid, make_spec("riesz", 0.5), workers=2)


@pytest.fixture(scope="session")
def log_op(small_grid):
    return build_operator(small_grid, make_spec("log"), workers=2)


@pytest.fixture
def fast_solver():
    return SolverSection(path_nodes=11, max_iter=300, tol=1e-8, tol_path=1e-3, newton_max_iter=40, workers=2)
