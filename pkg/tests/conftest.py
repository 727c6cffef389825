from pathlib import Path

import pytest

from utils.plasma.config import PlasmaConfig
from utils.plasma.distributions import normalize_quasi_neutral
from utils.plasma.stationary import StationaryGrid, solve_stationary_potential

EXAMPLES_DIR = Path(__file__).resolve().parents[1] / "data" / "examples"


@pytest.fixture(scope="session")
def examples_dir():
    return EXAMPLES_DIR


@pytest.fixture(scope="session")
def warm_config():
    return PlasmaConfig(u_infty=-2.0, theta_infty=0.25, r=0.5, sigma=0.1, phi_b=0.1)


@pytest.fixture(scope="session")
def warm_end_state(warm_config):
    return normalize_quasi_neutral(warm_config)


@pytest.fixture(scope="session")
def warm_stationary(warm_end_state):
    return solve_stationary_potential(warm_end_state, grid_spec=StationaryGrid(n_phi=160, n_x=401))


@pytest.fixture(scope="session")
def cold_power_law_config():
    # sup B lies between 2 and 5 for these parameters
    return PlasmaConfig(
        u_infty=-2.0, theta_infty=0.01, r=0.5, sigma=0.1, phi_b=1.0,
        electron_model="power_law", electron_exponent=0.1,
    )


@pytest.fixture(scope="session")
def fast_drift_end_state():
    return normalize_quasi_neutral(PlasmaConfig(u_infty=-8.0, theta_infty=1.0, r=1.5, sigma=0.25, phi_b=0.5))
