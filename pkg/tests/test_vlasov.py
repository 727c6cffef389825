import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from utils.plasma.config import EvolveSpec
from utils.plasma.errors import InvalidConfig, VelocityGridClipped
from utils.plasma.vlasov import (
    PhaseSpaceField,
    advect_v,
    advect_x,
    boundary_fluxes,
    charge_density,
    discretize_stationary,
    evolve,
    phase_space_grid,
    resolve_dt,
    step,
    total_mass,
    track_support,
    velocity_bounds,
)


def _gaussian_field(nx=64, nv=33, periodic=True, x_max=8.0, v_max=4.0):
    x = np.linspace(0.0, x_max, nx, endpoint=not periodic)
    xi1 = np.linspace(-v_max, v_max, nv)
    g = np.exp(-((x[:, None] - x_max / 2) ** 2)) * np.exp(-(xi1[None, :] ** 2))
    return PhaseSpaceField(x=x, xi1=xi1, g=g, periodic=periodic)


def test_field_shape_is_checked():
    with pytest.raises(InvalidConfig):
        PhaseSpaceField(x=np.linspace(0, 1, 8), xi1=np.linspace(-1, 1, 8), g=np.zeros((8, 7)))


def test_velocity_bounds_cover_the_accelerated_beam(warm_end_state):
    v_min, v_max = velocity_bounds(warm_end_state, phi_b=0.0)
    assert v_min == pytest.approx(-2.0 - 10 * 0.5 - 1.0)
    assert v_max == 3.0
    v_min_wall, _ = velocity_bounds(warm_end_state, phi_b=2.0)
    assert v_min_wall < v_min
    assert velocity_bounds(warm_end_state, 0.0, r2=1.5)[1] == 4.0


def test_phase_space_grid(warm_stationary):
    x, xi1 = phase_space_grid(warm_stationary, EvolveSpec(nx=32, nv=16))
    assert x[0] == 0.0 and x[-1] == pytest.approx(warm_stationary.x_max)
    assert xi1.size == 16
    xp, _ = phase_space_grid(warm_stationary, EvolveSpec(nx=32, nv=16, boundary="periodic", x_max=10.0))
    assert xp[-1] < 10.0 and xp[1] - xp[0] == pytest.approx(10.0 / 32)
    with pytest.raises(InvalidConfig):
        phase_space_grid(warm_stationary, EvolveSpec(v_min=1.0, v_max=0.0))


def test_zero_step_is_identity():
    field = _gaussian_field(periodic=False)
    np.testing.assert_allclose(advect_x(field, 0.0).g[1:-1], field.g[1:-1], atol=1e-14)
    np.testing.assert_allclose(advect_v(field, np.zeros_like(field.x), 0.3).g, field.g)


@settings(max_examples=20, deadline=None)
@given(k=st.integers(min_value=-5, max_value=5))
def test_periodic_whole_cell_shifts_are_exact(k):
    field = _gaussian_field()
    dt = k * field.dx / 2.0
    moved = advect_x(field, dt)
    for j, v in enumerate(field.xi1):
        cells = v * dt / field.dx
        if abs(cells - round(cells)) < 1e-12:
            np.testing.assert_allclose(moved.g[:, j], np.roll(field.g[:, j], int(round(cells))), atol=1e-12)


def test_periodic_advection_conserves_the_sum():
    field = _gaussian_field()
    moved = advect_x(field, 0.37)
    assert np.sum(moved.g) == pytest.approx(np.sum(field.g), rel=1e-3)
    assert moved.t == pytest.approx(0.37)


def test_velocity_shift_by_whole_cells_is_exact():
    field = _gaussian_field()
    E = np.full_like(field.x, 2.0 * field.dv)
    moved = advect_v(field, E, 1.0)
    np.testing.assert_allclose(moved.g[:, 2:], field.g[:, :-2], atol=1e-14)
    np.testing.assert_array_equal(moved.g[:, :2], 0.0)


def test_clipped_mass_warns():
    field = _gaussian_field()
    field.g[:, -1] = 1.0
    with pytest.warns(VelocityGridClipped):
        advect_v(field, np.ones_like(field.x), 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        advect_v(field, np.zeros_like(field.x), 0.1)


def test_wall_absorbs_and_never_emits():
    field = _gaussian_field(periodic=False)
    out = advect_x(field, 0.5)
    np.testing.assert_array_equal(out.g[0, field.xi1 > 0], 0.0)
    np.testing.assert_array_equal(out.g[-1, field.xi1 < 0], 0.0)
    for _ in range(40):
        out = advect_x(out, 0.5)
    moving = np.abs(field.xi1) >= 0.5
    assert np.max(np.abs(out.g[:, moving])) < 1e-8


def test_far_boundary_injects_the_end_state(warm_end_state):
    x = np.linspace(0.0, 10.0, 41)
    xi1 = np.linspace(-4.0, 2.0, 61)
    field = PhaseSpaceField(x=x, xi1=xi1, g=np.zeros((41, 61)))
    out = advect_x(field, 0.2, warm_end_state)
    incoming = xi1 < 0
    np.testing.assert_allclose(out.g[-1, incoming], warm_end_state.f_infty(xi1[incoming]))
    assert np.all(out.g[:20] == 0.0)


def test_free_streaming_reverses():
    field = _gaussian_field(nx=128, nv=65)
    frozen = 0.3 * np.sin(2 * math.pi * field.x / field.period)
    forward = step(field, None, 0.05, frozen_field=frozen)
    back = step(forward, None, -0.05, frozen_field=frozen)
    assert np.max(np.abs(back.g - field.g)) < 1e-3
    assert back.t == pytest.approx(0.0, abs=1e-15)


def test_zero_state_stays_zero():
    x = np.linspace(0.0, 5.0, 16)
    xi1 = np.linspace(-3.0, 3.0, 16)
    field = PhaseSpaceField(x=x, xi1=xi1, g=np.zeros((16, 16)))
    out = step(field, None, 0.1, frozen_field=np.zeros_like(x))
    np.testing.assert_array_equal(out.g, 0.0)


def test_boundary_fluxes_of_a_flat_slab():
    x = np.linspace(0.0, 1.0, 11)
    xi1 = np.linspace(-1.0, 1.0, 201)
    field = PhaseSpaceField(x=x, xi1=xi1, g=np.ones((11, 201)))
    fluxes = boundary_fluxes(field)
    assert fluxes.wall_outflux == pytest.approx(0.5)
    assert fluxes.far_influx == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(charge_density(field), 2.0)
    assert total_mass(field) == pytest.approx(2.0)


def test_resolve_dt():
    field = _gaussian_field()
    spec = EvolveSpec(cfl=0.5)
    assert resolve_dt(field, spec) == pytest.approx(0.5 * field.dx / 4.0)
    E = np.full_like(field.x, 100.0)
    assert resolve_dt(field, spec, E) == pytest.approx(0.5 * field.dv / 100.0)
    assert resolve_dt(field, EvolveSpec(dt=0.01)) == 0.01
    with pytest.raises(InvalidConfig):
        resolve_dt(field, EvolveSpec(dt=10.0))


def test_given_dt_must_respect_the_velocity_courant_limit():
    field = _gaussian_field(nx=16, nv=81)
    E = np.full_like(field.x, 50.0)
    dt = 0.05
    assert dt * 4.0 / field.dx < 0.9
    assert dt * 50.0 / field.dv > 0.9
    with pytest.raises(InvalidConfig):
        resolve_dt(field, EvolveSpec(dt=dt), E)
    safe = 0.9 * field.dv / 50.0
    assert resolve_dt(field, EvolveSpec(dt=safe), E) == safe


def test_support_tracking():
    field = _gaussian_field(periodic=False)
    assert track_support(field, field.g).empty
    reference = field.g.copy()
    perturbed = field.copy()
    perturbed.g[10:20, 5:9] += 1e-3
    box = track_support(perturbed, reference, band=(field.xi1[6], field.xi1[12]), corner_radius=100.0)
    assert not box.empty
    assert box.xi_min == field.xi1[5] and box.xi_max == field.xi1[8]
    assert box.band_occupied
    assert box.corner_mass == pytest.approx(40 * 1e-3 * field.dx * field.dv)
    with pytest.raises(InvalidConfig):
        track_support(perturbed, reference, threshold=0.0)


def test_evolve_yields_snapshots():
    field = _gaussian_field()
    spec = EvolveSpec(t_end=1.0, snapshot_every=3, boundary="periodic")
    states = list(evolve(field, None, spec, reference=field, frozen_field=np.zeros_like(field.x), dt=0.1))
    assert [s.k for s in states] == [0, 3, 6, 9, 10]
    assert states[-1].field.t == pytest.approx(1.0)
    assert states[0].field.t == 0.0
    np.testing.assert_allclose(states[-1].field.g, states[-1].reference.g)


def test_discretized_stationary_state(warm_stationary):
    x, xi1 = phase_space_grid(warm_stationary, EvolveSpec(nx=64, nv=128))
    g = discretize_stationary(warm_stationary, x, xi1)
    np.testing.assert_array_equal(g[:, xi1 >= 0], 0.0)
    rho = charge_density(PhaseSpaceField(x=x, xi1=xi1, g=g))
    np.testing.assert_allclose(rho, warm_stationary.ion_density_profile(x), rtol=2e-2)


def _l2(g, x, xi1):
    return math.sqrt(float(integrate.trapezoid(integrate.trapezoid(g**2, xi1, axis=1), x)))


def _stationary_run(stationary, nx, nv, t_end):
    """Largest deviation from g^s over the run, the accumulated one-step error, and the final state."""
    spec = EvolveSpec(nx=nx, nv=nv, t_end=t_end, snapshot_every=10)
    x, xi1 = phase_space_grid(stationary, spec)
    g_s = discretize_stationary(stationary, x, xi1)
    field = PhaseSpaceField(x=x, xi1=xi1, g=g_s, phi=np.asarray(stationary.potential_at(x), dtype=float))
    dt = resolve_dt(field, spec, stationary.field_at(x))
    n_steps = math.ceil(t_end / dt)
    dt = t_end / n_steps
    floor = n_steps * _l2(step(field, stationary, dt).g - g_s, x, xi1)
    deviation = 0.0
    for state in evolve(field, stationary, spec, dt=dt):
        deviation = max(deviation, _l2(state.field.g - g_s, x, xi1))
    return deviation, floor, field, state


@pytest.mark.slow
def test_stationary_state_stays_at_the_discretization_floor(warm_stationary):
    coarse_dev, coarse_floor, _, _ = _stationary_run(warm_stationary, 128, 96, 5.0)
    fine_dev, fine_floor, field, last = _stationary_run(warm_stationary, 256, 192, 5.0)
    assert coarse_dev < 3 * coarse_floor
    assert fine_dev < 3 * fine_floor
    assert 2.5 < coarse_floor / fine_floor < 6.0
    mass0 = total_mass(field)
    drift = total_mass(last.field) - mass0 - last.flux_integral
    assert abs(drift) < 1e-4 * mass0


def test_transport_keeps_the_field_nonnegative():
    field = _gaussian_field(periodic=False)
    frozen = -0.5 * np.ones_like(field.x)
    for _ in range(10):
        field = step(field, None, 0.1, frozen_field=frozen)
    assert np.min(field.g) >= -1e-12 * np.max(field.g)
