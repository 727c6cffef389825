"""
Semi-Lagrangian evolution of the reduced ion distribution g(t, x, xi1).

g is the xi'-marginal of F. The transport is split into an x-advection
and a xi1-advection (by the field dPhi/dx), both done by tracing
characteristics back one step and interpolating with a monotone cubic
(PchipInterpolator). The wall at x = 0 absorbs ions and never emits them;
at x_max the incoming half of phase space is pinned to F_inf.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from utils.plasma.errors import InvalidConfig, VelocityGridClipped
from utils.plasma.poisson import solve_full_potential
from utils.plasma.stationary import reconstruct_from_potential

logger = logging.getLogger(__name__)

CLIP_TOLERANCE = 1e-12
GHOST = 3


@dataclass(eq=False)
class PhaseSpaceField:
    """
    g on a uniform (x, xi1) grid.

    Attributes:
        x: Uniform x nodes. For periodic boxes the right end is excluded.
        xi1: Uniform velocity nodes.
        g: Values, shape (len(x), len(xi1)).
        t: Time stamp.
        phi: Potential of the last Poisson solve, reused as Newton guess.
        periodic: True for the periodic test box.
    """

    x: np.ndarray
    xi1: np.ndarray
    g: np.ndarray
    t: float = 0.0
    phi: Optional[np.ndarray] = field(default=None, repr=False)
    periodic: bool = False

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float)
        if self.g.shape != (self.x.size, self.xi1.size):
            raise InvalidConfig(f"g has shape {self.g.shape}, grid is {(self.x.size, self.xi1.size)}")

    @property
    def dx(self):
        return float(self.x[1] - self.x[0])

    @property
    def dv(self):
        return float(self.xi1[1] - self.xi1[0])

    @property
    def period(self):
        return self.x.size * self.dx

    def copy(self):
        return replace(self, g=self.g.copy(), phi=None if self.phi is None else self.phi.copy())


def velocity_bounds(end_state, phi_b, r2=None):
    """
    Velocity range for a run.

    The lower end is u - 10 sqrt(theta) - 1, extended to cover ions accelerated
    through the full wall potential; the upper end is max(2 R2 + 1, 3).
    """
    cfg = end_state.config
    slowest = abs(cfg.u_infty) + 10.0 * math.sqrt(cfg.theta_infty)
    v_min = -math.sqrt(slowest**2 + 2.0 * phi_b) - 1.0
    v_max = max(2.0 * r2 + 1.0, 3.0) if r2 is not None else 3.0
    return v_min, v_max


def phase_space_grid(stationary, spec, r2=None):
    """
    Resolve the (x, xi1) grid of a run from an EvolveSpec.

    Returns:
        tuple: (x, xi1) arrays.
    """
    lo, hi = velocity_bounds(stationary.end_state, stationary.phi_b, r2)
    v_min = spec.v_min if spec.v_min is not None else lo
    v_max = spec.v_max if spec.v_max is not None else hi
    if not v_max > v_min:
        raise InvalidConfig(f"velocity range [{v_min}, {v_max}] is empty")
    x_max = spec.x_max if spec.x_max is not None else stationary.x_max
    if spec.boundary == "periodic":
        x = np.linspace(0.0, x_max, spec.nx, endpoint=False)
    else:
        x = np.linspace(0.0, x_max, spec.nx)
    return x, np.linspace(v_min, v_max, spec.nv)


def discretize_stationary(stationary, x, xi1):
    """Sample g^s = F_inf(-sqrt(xi1^2 - 2 Phi^s(x))) on a grid."""
    phi = np.asarray(stationary.potential_at(x), dtype=float)
    return reconstruct_from_potential(stationary.end_state, phi[:, None], xi1[None, :])


def resolve_dt(field, spec, electric_field=None):
    """
    dt from the CFL limit on both sub-advections, or the one in spec after checking it.

    Raises:
        InvalidConfig: if a given dt breaks the CFL limit of either sub-advection.
    """
    vmax = float(np.max(np.abs(field.xi1)))
    limit = spec.cfl * field.dx / vmax
    if electric_field is not None:
        emax = float(np.max(np.abs(electric_field)))
        if emax > 0:
            limit = min(limit, spec.cfl * field.dv / emax)
    if spec.dt is None:
        return limit
    if spec.dt > limit * (1 + 1e-12):
        raise InvalidConfig(f"dt = {spec.dt} breaks the CFL limit {spec.cfl} (largest stable dt {limit:.4g})")
    return spec.dt


def _pin_boundaries(field, end_state):
    if field.periodic:
        return
    field.g[0, field.xi1 > 0] = 0.0
    incoming = field.xi1 < 0
    if end_state is not None:
        field.g[-1, incoming] = end_state.f_infty(field.xi1[incoming])


def advect_x(field, dt, end_state=None):
    """
    g(x, xi1) <- g(x - xi1 dt, xi1).

    Departure points left of the wall take 0. Departure points beyond
    x_max take F_inf(xi1) (0 if no end state is given). Periodic boxes wrap.

    Args:
        field (PhaseSpaceField): Field to advance; not modified.
        dt (float): Time step, may be negative.
        end_state (EndState): Supplies the far-field inflow.

    Returns:
        PhaseSpaceField: The advected field.
    """
    out = field.copy()
    x = field.x
    if field.periodic:
        L = field.period
        xe = np.concatenate([x[-GHOST:] - L, x, x[:GHOST] + L])
        ge = np.concatenate([field.g[-GHOST:], field.g, field.g[:GHOST]], axis=0)
        for j, v in enumerate(field.xi1):
            dep = np.mod(x - v * dt, L)
            out.g[:, j] = PchipInterpolator(xe, ge[:, j])(dep)
        out.t = field.t + dt
        return out
    inflow = end_state.f_infty(field.xi1) if end_state is not None else np.zeros_like(field.xi1)
    for j, v in enumerate(field.xi1):
        dep = x - v * dt
        col = PchipInterpolator(x, field.g[:, j], extrapolate=False)(np.clip(dep, x[0], x[-1]))
        col[dep < x[0]] = 0.0
        col[dep > x[-1]] = inflow[j]
        out.g[:, j] = col
    _pin_boundaries(out, end_state)
    out.t = field.t + dt
    return out


def edge_mass(field):
    """Mass sitting in the first and last velocity cells."""
    edges = np.abs(field.g[:, 0]) + np.abs(field.g[:, -1])
    return float(np.sum(edges)) * field.dx * field.dv


def advect_v(field, electric_field, dt):
    """
    g(x, xi1) <- g(x, xi1 - E(x) dt) per x row; departures outside the grid take 0.

    Warns with VelocityGridClipped when the edge cells carry mass above
    1e-12 of the total, since that mass is lost at the grid boundary.
    """
    E = np.asarray(electric_field, dtype=float)
    if E.shape != field.x.shape:
        raise InvalidConfig("electric field must be sampled on the x grid")
    total = total_mass(field)
    clipped = edge_mass(field)
    if clipped > CLIP_TOLERANCE * max(total, 1e-300) and np.any(E != 0):
        message = f"velocity grid clips mass {clipped:.3e} (total {total:.3e}) at t = {field.t:.4g}"
        logger.warning(message)
        warnings.warn(message, VelocityGridClipped, stacklevel=2)
    out = field.copy()
    v = field.xi1
    for i, e in enumerate(E):
        if e == 0:
            continue
        dep = v - e * dt
        row = PchipInterpolator(v, field.g[i], extrapolate=False)(np.clip(dep, v[0], v[-1]))
        row[(dep < v[0]) | (dep > v[-1])] = 0.0
        out.g[i] = row
    return out


def charge_density(field):
    """rho(x) = int g dxi1."""
    return integrate.trapezoid(field.g, field.xi1, axis=1)


def total_mass(field):
    return float(integrate.trapezoid(charge_density(field), field.x))


@dataclass(frozen=True)
class BoundaryFluxes:
    """wall_outflux leaves through x = 0; far_influx is the net inflow through x_max."""

    wall_outflux: float
    far_influx: float


def boundary_fluxes(field):
    v = field.xi1
    wall = -integrate.trapezoid(np.minimum(v, 0.0) * field.g[0], v)
    far = -integrate.trapezoid(v * field.g[-1], v)
    return BoundaryFluxes(wall_outflux=float(wall), far_influx=float(far))


def self_consistent_field(field, stationary, phi_b=None):
    """Solve the full Poisson problem for the current charge density; returns (Phi, dPhi/dx)."""
    cfg = stationary.end_state.config
    phi_b = stationary.phi_b if phi_b is None else phi_b
    result = solve_full_potential(
        field.x, charge_density(field), stationary.electron_model, phi_b, initial_guess=field.phi,
        electron_exponent=cfg.electron_exponent,
    )
    return result.phi, np.gradient(result.phi, field.x, edge_order=2)


def step(field, stationary, dt, frozen_field=None):
    """
    One Strang step: half x-advection, Poisson solve, full xi1-advection, half x-advection.

    Args:
        field (PhaseSpaceField): Current state.
        stationary (StationarySolution): Supplies the end state, phi_b and electron model.
        dt (float): Time step.
        frozen_field (np.ndarray): If given, used as dPhi/dx instead of solving Poisson.

    Returns:
        PhaseSpaceField: State at t + dt, with phi set when Poisson was solved.

    Raises:
        NewtonDiverged: if the Poisson solve fails.
    """
    end_state = stationary.end_state if stationary is not None else None
    half = advect_x(field, dt / 2, end_state)
    if frozen_field is None:
        phi, E = self_consistent_field(half, stationary)
        half.phi = phi
    else:
        E = np.asarray(frozen_field, dtype=float)
    moved = advect_v(half, E, dt)
    out = advect_x(moved, dt / 2, end_state)
    out.phi = half.phi
    return out


@dataclass(frozen=True)
class SupportBox:
    """
    Where |g - g_ref| exceeds threshold * max |g - g_ref|.

    xi_min / xi_max are nan for an empty support. band_mass is the perturbation
    mass inside the band (band_lo, band_hi); corner_mass is the mass in
    x^2 + xi1^2 < s^2.
    """

    empty: bool
    xi_min: float
    xi_max: float
    band_occupied: bool = False
    band_mass: float = 0.0
    corner_mass: float = 0.0


def track_support(field, reference, threshold=1e-6, band=None, corner_radius=0.0):
    """
    Extreme occupied velocities of the perturbation field.g - reference.

    Args:
        field (PhaseSpaceField): Perturbed state.
        reference (np.ndarray): Unperturbed g on the same grid.
        threshold (float): Occupancy level relative to the perturbation maximum.
        band (tuple): Optional (lo, hi) velocity band whose occupancy is reported.
        corner_radius (float): Radius of the reported corner around (0, 0).

    Returns:
        SupportBox: The occupancy report.
    """
    if not threshold > 0:
        raise InvalidConfig("support threshold must be positive")
    p = np.abs(field.g - reference)
    peak = float(np.max(p)) if p.size else 0.0
    if peak == 0:
        return SupportBox(empty=True, xi_min=math.nan, xi_max=math.nan)
    occupied = p > threshold * peak
    cols = np.nonzero(np.any(occupied, axis=0))[0]
    cell = field.dx * field.dv
    band_occupied, band_mass = False, 0.0
    if band is not None:
        in_band = (field.xi1 > band[0]) & (field.xi1 < band[1])
        band_occupied = bool(np.any(occupied[:, in_band]))
        band_mass = float(np.sum(p[:, in_band])) * cell
    corner_mass = 0.0
    if corner_radius > 0:
        corner = field.x[:, None] ** 2 + field.xi1[None, :] ** 2 < corner_radius**2
        corner_mass = float(np.sum(p[corner])) * cell
    return SupportBox(
        empty=False,
        xi_min=float(field.xi1[cols[0]]),
        xi_max=float(field.xi1[cols[-1]]),
        band_occupied=band_occupied,
        band_mass=band_mass,
        corner_mass=corner_mass,
    )


@dataclass
class EvolveState:
    """
    What the evolution loop reports at a snapshot.

    Attributes:
        k: Step index.
        field: Perturbed state.
        reference: Unperturbed state advanced alongside, or None.
        fluxes: Boundary fluxes at this time.
        flux_integral: int_0^t (far_influx - wall_outflux) dt by the trapezoid rule.
    """

    k: int
    field: PhaseSpaceField
    reference: Optional[PhaseSpaceField]
    fluxes: BoundaryFluxes
    flux_integral: float


def evolve(initial, stationary, spec, reference=None, frozen_field=None, dt=None):
    """
    Advance a field to spec.t_end, yielding an EvolveState every snapshot_every steps.

    A reference (unperturbed) field, if given, is advanced with its own
    Poisson solves so that field.g - reference.g isolates the perturbation
    from the discretization drift of the stationary state.

    Yields:
        EvolveState: At step 0, every snapshot_every steps, and at the last step.
    """
    field = initial.copy()
    ref = reference.copy() if reference is not None else None
    if dt is None:
        E0 = None
        if frozen_field is not None:
            E0 = frozen_field
        elif stationary is not None and stationary.phi_b > 0:
            E0 = stationary.field_at(field.x)
        dt = resolve_dt(field, spec, E0)
    n_steps = max(1, int(math.ceil(spec.t_end / dt - 1e-9)))
    dt = spec.t_end / n_steps
    logger.info("Evolving %d steps of dt=%.4g on a %dx%d grid", n_steps, dt, field.x.size, field.xi1.size)
    fluxes = boundary_fluxes(field)
    flux_integral = 0.0
    yield EvolveState(0, field, ref, fluxes, flux_integral)
    for k in range(1, n_steps + 1):
        field = step(field, stationary, dt, frozen_field)
        if ref is not None:
            ref = step(ref, stationary, dt, frozen_field)
        new_fluxes = boundary_fluxes(field)
        net_old = fluxes.far_influx - fluxes.wall_outflux
        net_new = new_fluxes.far_influx - new_fluxes.wall_outflux
        flux_integral += 0.5 * dt * (net_old + net_new)
        fluxes = new_fluxes
        if k % spec.snapshot_every == 0 or k == n_steps:
            logger.debug("Step %d of %d, t=%.4g", k, n_steps, field.t)
            yield EvolveState(k, field, ref, fluxes, flux_integral)
