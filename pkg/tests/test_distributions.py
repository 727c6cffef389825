import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from utils.plasma.config import PlasmaConfig
from utils.plasma.distributions import (
    EndState,
    asp1_margin,
    bohm_integral,
    cutoff_psi,
    cutoff_psi_derivative,
    eta,
    mu_infty,
    normalize_quasi_neutral,
    off_diagonals,
    smooth_step,
    theory_constants,
    total_mass,
)
from utils.plasma.errors import InvalidConfig


@settings(max_examples=50)
@given(a=st.floats(min_value=-1.0, max_value=2.0), b=st.floats(min_value=-1.0, max_value=2.0))
def test_smooth_step_is_monotone_and_bounded(a, b):
    lo, hi = min(a, b), max(a, b)
    assert 0.0 <= smooth_step(lo) <= smooth_step(hi) <= 1.0


def test_cutoff_limits():
    r, sigma = 0.5, 0.1
    assert cutoff_psi(-0.5, r, sigma) == 0.0
    assert cutoff_psi(0.3, r, sigma) == 0.0
    assert cutoff_psi(-0.6, r, sigma) == 1.0
    assert cutoff_psi(-3.0, r, sigma) == 1.0
    assert cutoff_psi(-0.55, r, sigma) == pytest.approx(0.5)
    xi = np.linspace(-0.8, 0.0, 161)
    assert np.all(np.diff(cutoff_psi(xi, r, sigma)) <= 0)


def test_cutoff_derivative_matches_differences():
    r, sigma, h = 0.5, 0.1, 1e-7
    for xi in (-0.58, -0.55, -0.52):
        fd = (cutoff_psi(xi + h, r, sigma) - cutoff_psi(xi - h, r, sigma)) / (2 * h)
        assert cutoff_psi_derivative(xi, r, sigma) == pytest.approx(fd, rel=1e-5)


def test_cutoff_needs_positive_parameters():
    with pytest.raises(InvalidConfig):
        cutoff_psi(-1.0, 0.0, 0.1)


def test_end_state_has_unit_density(warm_end_state):
    assert total_mass(warm_end_state) == pytest.approx(1.0, abs=1e-9)
    assert warm_end_state.integrate(np.ones_like) == pytest.approx(1.0, abs=1e-8)
    assert warm_end_state.rho_infty > 1.0


def test_end_state_vanishes_at_and_above_the_cutoff(warm_end_state):
    xi = np.array([-0.5, -0.3, 0.0, 1.0])
    np.testing.assert_array_equal(warm_end_state.f_infty(xi), 0.0)


def test_f_infty_derivative_matches_differences(warm_end_state):
    h = 1e-6
    xi = np.array([-2.5, -2.0, -1.0, -0.58, -0.55, -0.52])
    fd = (warm_end_state.f_infty(xi + h) - warm_end_state.f_infty(xi - h)) / (2 * h)
    np.testing.assert_allclose(warm_end_state.f_infty_derivative(xi), fd, rtol=1e-5, atol=1e-8)


def test_distant_cutoff_leaves_rho_at_one(fast_drift_end_state):
    assert fast_drift_end_state.rho_infty == pytest.approx(1.0, abs=1e-8)


def test_cold_bohm_integral_is_one_over_u_squared():
    end_state = normalize_quasi_neutral(PlasmaConfig(u_infty=-2.0, theta_infty=1e-5, r=0.5, sigma=0.1))
    assert bohm_integral(end_state) == pytest.approx(0.25, rel=1e-3)


def test_bohm_integral_needs_a_gap_at_zero():
    config = PlasmaConfig(u_infty=-0.1, theta_infty=1.0, r=0.5, sigma=0.1, cutoff=False)
    with pytest.raises(InvalidConfig):
        bohm_integral(normalize_quasi_neutral(config))


def test_mu_log_space_matches_direct_evaluation(warm_end_state):
    assert mu_infty(warm_end_state) == pytest.approx(mu_infty(warm_end_state, log_space=False), rel=1e-6)
    assert mu_infty(warm_end_state) > 0


def test_mu_is_finite_for_cold_plasmas():
    end_state = normalize_quasi_neutral(PlasmaConfig(u_infty=-2.0, theta_infty=1e-3, r=0.5, sigma=0.1))
    mu = mu_infty(end_state)
    assert math.isfinite(mu) and mu >= 0


def test_mu_falls_as_the_drift_speeds_up():
    values = [
        mu_infty(normalize_quasi_neutral(PlasmaConfig(u_infty=u, theta_infty=1.0, r=0.5, sigma=0.1)))
        for u in (-2.0, -3.0, -4.0)
    ]
    assert values[0] > values[1] > values[2] > 0


def test_mu_vanishes_without_cutoff():
    config = PlasmaConfig(u_infty=-2.0, theta_infty=1.0, r=0.5, sigma=0.1, cutoff=False)
    assert mu_infty(normalize_quasi_neutral(config)) == 0.0


@pytest.mark.parametrize("beta, expected", [(1.0, 1.0), (0.5, 0.25 / 1.75), (0.1, 0.01 / 1.99)])
def test_eta(beta, expected):
    assert eta(beta) == pytest.approx(expected)


@pytest.mark.parametrize("beta", [0.0, -0.5, 1.5])
def test_eta_rejects_out_of_range(beta):
    with pytest.raises(InvalidConfig):
        eta(beta)


def test_off_diagonals_domain():
    with pytest.raises(InvalidConfig):
        off_diagonals(-2.0, 1.0, 1.0, 0.0, 0.5, 1.0, 0.5)
    with pytest.raises(InvalidConfig):
        off_diagonals(-2.0, 1.0, 1.0, 0.0, 1.0, 1.0, 0.25)


def test_margin_without_mu_is_explicit():
    beta, r, epsilon = 0.5, 1.5, 0.25
    e = eta(beta)
    expected = 8.0 - (1 + e) ** 2 / (r - 2 * epsilon)
    assert asp1_margin(-8.0, 1.0, 1.0, 0.0, beta, r, epsilon) == pytest.approx(expected)


def test_theory_constants_for_a_fast_drift(fast_drift_end_state):
    constants = theory_constants(fast_drift_end_state, beta=0.5, epsilon=0.25)
    assert constants.bohm_integral < 1
    assert constants.asp1_margin > 0
    assert constants.mu_infty < 1e-3


def test_tabulated_end_state():
    config = PlasmaConfig(u_infty=-2.0, theta_infty=1.0, r=0.5, sigma=0.1)
    xi = np.linspace(-3.0, -1.0, 201)
    end_state = EndState.from_table(config, xi, np.full_like(xi, 0.5))
    assert total_mass(end_state) == pytest.approx(1.0)
    assert bohm_integral(end_state) == pytest.approx(0.5 * (1.0 - 1.0 / 3.0), rel=1e-3)
    assert end_state.f_infty(0.0) == 0.0
    with pytest.raises(InvalidConfig):
        EndState.from_table(config, xi[::-1], np.ones_like(xi))
    with pytest.raises(InvalidConfig):
        mu_infty(end_state)
