"""
Stationary sheath: Sagdeev potential, the solvability set B, the potential
Phi^s from its first integral and the closed-form ion distribution F^s.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import pandas as pd
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from utils.plasma.distributions import adaptive_quad, bohm_integral, cutoff_psi_derivative
from utils.plasma.electrons import get_electron_model
from utils.plasma.errors import BohmViolated, InvalidConfig, NotSolvable

logger = logging.getLogger(__name__)

FAR_FIELD_DECAY = 1e-10
CHUNK = 256


def _velocity_sums(end_state, phi):
    """Return J(phi) = int F/(sqrt(xi^2+2phi)+|xi|)^2 and n_i(phi) for an array of phi."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    nodes, weights = end_state.velocity_rule
    wf = weights * end_state.f_infty(nodes)
    a = np.abs(nodes)
    j_out = np.empty_like(phi)
    n_out = np.empty_like(phi)
    for start in range(0, phi.size, CHUNK):
        block = phi[start:start + CHUNK, None]
        root = np.sqrt(nodes[None, :] ** 2 + 2.0 * block)
        j_out[start:start + CHUNK] = np.sum(wf / (root + a) ** 2, axis=1)
        n_out[start:start + CHUNK] = np.sum(wf * a / root, axis=1)
    return j_out, n_out


def ion_density(phi, end_state):
    """
    Ion density n_i(phi) = int F_inf(xi1) (-xi1) / sqrt(xi1^2 + 2 phi) by adaptive quadrature.

    Args:
        phi (float): Potential, nonnegative.
        end_state (EndState): The end state.

    Returns:
        float: n_i(phi).
    """
    if not phi >= 0:
        raise InvalidConfig(f"ion density needs phi >= 0, got {phi}")
    if end_state.table is not None:
        tx, tv = end_state.table
        return float(integrate.trapezoid(tv * np.abs(tx) / np.sqrt(tx**2 + 2 * phi), tx))
    lo, hi = end_state.window
    cfg = end_state.config
    points = [cfg.u_infty, -cfg.r - cfg.sigma]
    return adaptive_quad(
        lambda xi: end_state.f_infty(xi) * (-xi) / math.sqrt(xi * xi + 2 * phi), lo, hi, points, what="ion density"
    )


def ion_density_profile(phi, end_state):
    """Vectorized n_i over an array of potentials, with the fixed velocity rule."""
    return _velocity_sums(end_state, phi)[1].reshape(np.shape(phi))


@dataclass(frozen=True, eq=False)
class SagdeevPotential:
    """
    V(phi) = int_0^phi (n_i - n_e), tabulated on [0, phi_max].

    The inner velocity integral is done in closed form; V is evaluated as
    (phi - N_e(phi)) - 2 phi^2 J(phi), which keeps V ~ (1 - K) phi^2 / 2
    accurate near zero.
    """

    end_state: object
    electron_model: object
    phi: np.ndarray
    values: np.ndarray
    derivative: np.ndarray
    bohm: float

    def value(self, phi):
        phi_arr = np.asarray(phi, dtype=float)
        j, _ = _velocity_sums(self.end_state, phi_arr)
        out = self.electron_model.excess(phi_arr.ravel()) - 2.0 * phi_arr.ravel() ** 2 * j
        return float(out[0]) if phi_arr.ndim == 0 else out.reshape(phi_arr.shape)

    def slope(self, phi):
        phi_arr = np.asarray(phi, dtype=float)
        _, n_i = _velocity_sums(self.end_state, phi_arr)
        out = n_i - self.electron_model.density(phi_arr.ravel())
        return float(out[0]) if phi_arr.ndim == 0 else out.reshape(phi_arr.shape)

    @property
    def curvature_at_zero(self):
        """V''(0) = 1 - 4 J(0) = 1 - K."""
        j0, _ = _velocity_sums(self.end_state, 0.0)
        return 1.0 - 4.0 * float(j0[0])


def sagdeev(end_state, electron_model=None, phi_max=1.0, n_phi=801):
    """
    Tabulate the Sagdeev potential.

    Raises:
        BohmViolated: if K >= 1, where V''(0) <= 0 and no sheath can be built.
    """
    if not phi_max > 0:
        raise InvalidConfig(f"phi_max must be positive, got {phi_max}")
    cfg = end_state.config
    model = get_electron_model(electron_model or cfg.electron_model, cfg.electron_exponent)
    K = bohm_integral(end_state)
    if K >= 1:
        raise BohmViolated(K)
    phi = np.linspace(0.0, phi_max, n_phi)
    j, n_i = _velocity_sums(end_state, phi)
    values = model.excess(phi) - 2.0 * phi**2 * j
    values[0] = 0.0
    return SagdeevPotential(
        end_state=end_state,
        electron_model=model,
        phi=phi,
        values=values,
        derivative=n_i - model.density(phi),
        bohm=K,
    )


def sup_B(potential):
    """
    First positive zero of V, located by scan and bisection to 1e-10.

    Returns math.inf when V stays positive on the whole table (sup B exceeds
    phi_max), and 0 when V is not positive at the first table node.
    """
    values = potential.values
    if values[1] <= 0:
        return 0.0
    nonpositive = np.nonzero(values[1:] <= 0)[0]
    if nonpositive.size == 0:
        return math.inf
    k = int(nonpositive[0]) + 1
    a, b = float(potential.phi[k - 1]), float(potential.phi[k])
    if potential.value(b) >= 0:
        return b
    root = brentq(potential.value, a, b, xtol=1e-10)
    logger.info("sup B located at %.10g", root)
    return root


@dataclass(frozen=True)
class StationaryGrid:
    """
    Resolution of the stationary construction.

    n_phi log-spaced potential nodes carry the exact x(Phi) quadrature down
    to tail_fraction * phi_b; below that the exponential tail takes over. The
    output grid has n_x nodes from 0 to x_max, geometrically stretched.
    """

    n_phi: int = 400
    tail_fraction: float = 1e-3
    n_x: int = 801
    stretch: float = 3.0
    x_max: Optional[float] = None
    phi_max: float = 1.0


def graded_grid(x_max, n, stretch):
    t = np.linspace(0.0, 1.0, n)
    if stretch <= 0:
        return x_max * t
    return x_max * np.expm1(stretch * t) / math.expm1(stretch)


@dataclass(frozen=True, eq=False)
class StationarySolution:
    """
    Phi^s on a graded grid plus what is needed to evaluate it anywhere.

    Attributes:
        x: Graded spatial grid, clustered near the wall.
        phi_s: Phi^s on x, decreasing from phi_b.
        dphi_s: d Phi^s / dx on x, negative.
        sup_B: First zero of V, math.inf if beyond the table.
        decay_rate_est: Rate fitted to log Phi^s over the quadrature tail.
        end_state: The end state.
        phi_b: Wall potential.
        decay_rate: sqrt(1 - K).
    """

    x: np.ndarray
    phi_s: np.ndarray
    dphi_s: np.ndarray
    sup_B: float
    decay_rate_est: float
    end_state: object
    phi_b: float
    decay_rate: float
    potential: Optional[SagdeevPotential] = None
    x_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)
    phi_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def electron_model(self):
        cfg = self.end_state.config
        return self.potential.electron_model if self.potential else get_electron_model(cfg.electron_model, cfg.electron_exponent)

    @property
    def x_max(self):
        return float(self.x[-1])

    @property
    def tail_start(self):
        return float(self.x_nodes[-1]) if self.x_nodes.size else 0.0

    @cached_property
    def sheath_spline(self):
        slopes = -np.sqrt(2.0 * np.maximum(self.potential.value(self.phi_nodes), 0.0))
        return CubicHermiteSpline(self.x_nodes, self.phi_nodes, slopes)

    def _invert(self, x, guess):
        """Phi with x(Phi) = x, from the exact integral between neighbouring nodes."""
        k = int(np.searchsorted(self.x_nodes, x, side="right")) - 1
        k = min(max(k, 0), self.x_nodes.size - 2)
        x_k, phi_k, phi_next = self.x_nodes[k], self.phi_nodes[k], self.phi_nodes[k + 1]

        def rate(p):
            return 1.0 / math.sqrt(2.0 * self.potential.value(p))

        def mismatch(p):
            return x_k + adaptive_quad(rate, p, phi_k, what="x(Phi)") - x

        phi = min(max(guess, phi_next), phi_k)
        for _ in range(6):
            step = mismatch(phi) / rate(phi)
            phi = phi + step
            if not phi_next <= phi <= phi_k:
                break
            if abs(step) <= 1e-14 * max(phi, 1e-300):
                return phi
        else:
            return phi
        return brentq(mismatch, phi_next, phi_k, xtol=1e-16, rtol=1e-14)

    def potential_at(self, x):
        """Phi^s at arbitrary x, exact up to quadrature tolerance."""
        x_arr = np.asarray(x, dtype=float)
        flat = np.clip(x_arr.ravel(), 0.0, None)
        out = np.zeros_like(flat)
        if self.phi_b == 0:
            return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)
        tail = flat >= self.tail_start
        out[tail] = self.phi_nodes[-1] * np.exp(-self.decay_rate * (flat[tail] - self.tail_start))
        if np.any(~tail):
            spline = self.sheath_spline
            for i in np.nonzero(~tail)[0]:
                out[i] = self._invert(flat[i], float(spline(flat[i])))
        return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)

    def field_at(self, x, phi=None):
        """d Phi^s / dx at x, consistent with potential_at."""
        x_arr = np.asarray(x, dtype=float)
        phi = self.potential_at(x_arr) if phi is None else np.asarray(phi, dtype=float)
        if self.phi_b == 0:
            return np.zeros_like(phi) if x_arr.ndim else 0.0
        flat_x = np.clip(x_arr.ravel(), 0.0, None)
        flat_phi = np.asarray(phi, dtype=float).ravel()
        out = -self.decay_rate * flat_phi
        sheath = flat_x < self.tail_start
        if np.any(sheath):
            out[sheath] = -np.sqrt(2.0 * np.maximum(self.potential.value(flat_phi[sheath]), 0.0))
        return float(out[0]) if x_arr.ndim == 0 else out.reshape(x_arr.shape)

    def ion_density_profile(self, x=None):
        phi = self.phi_s if x is None else self.potential_at(x)
        return ion_density_profile(phi, self.end_state)

    def electron_density_profile(self, x=None):
        phi = self.phi_s if x is None else self.potential_at(x)
        return self.electron_model.density(phi)


def far_field_extent(decay_rate):
    """x_max such that exp(-c x_max) < 1e-10."""
    return math.log(1.0 / FAR_FIELD_DECAY) / decay_rate


def solve_stationary_potential(end_state, phi_b=None, grid_spec=None):
    """
    Build Phi^s from d Phi/dx = -sqrt(2 V(Phi)) and x(Phi) = int_Phi^phi_b dphi / sqrt(2 V).

    Args:
        end_state (EndState): Normalized end state.
        phi_b (float): Wall potential; defaults to the config value.
        grid_spec (StationaryGrid): Resolution.

    Returns:
        StationarySolution: The sheath.

    Raises:
        NotSolvable: reason "BohmViolated" if K >= 1, "PhiBTooLarge" if phi_b >= sup B.
    """
    grid = grid_spec or StationaryGrid()
    cfg = end_state.config
    phi_b = cfg.phi_b if phi_b is None else float(phi_b)
    if phi_b < 0:
        raise InvalidConfig("phi_b must be nonnegative")
    try:
        potential = sagdeev(end_state, cfg.electron_model, phi_max=max(grid.phi_max, 1.5 * phi_b))
    except BohmViolated as e:
        raise NotSolvable("BohmViolated", str(e)) from e
    c = math.sqrt(1.0 - potential.bohm)
    x_max = grid.x_max or far_field_extent(c)
    x = graded_grid(x_max, grid.n_x, grid.stretch)
    bar = sup_B(potential)

    if phi_b == 0:
        zeros = np.zeros_like(x)
        return StationarySolution(
            x=x, phi_s=zeros, dphi_s=zeros.copy(), sup_B=bar, decay_rate_est=c, end_state=end_state,
            phi_b=0.0, decay_rate=c, potential=potential,
        )
    if not phi_b < bar:
        raise NotSolvable("PhiBTooLarge", f"phi_b = {phi_b:.6g} is not below sup B = {bar:.6g}")

    phi_nodes = np.geomspace(phi_b, grid.tail_fraction * phi_b, grid.n_phi)

    def rate(p):
        return 1.0 / math.sqrt(2.0 * potential.value(p))

    steps = [adaptive_quad(rate, lo, hi, what="x(Phi)") for lo, hi in zip(phi_nodes[1:], phi_nodes[:-1])]
    x_nodes = np.concatenate([[0.0], np.cumsum(steps)])
    if x_nodes[-1] >= x_max:
        raise InvalidConfig(f"x_max = {x_max:.4g} does not reach past the sheath (tail starts at {x_nodes[-1]:.4g})")

    fit = (phi_nodes <= 0.05 * phi_b)
    slope, _ = np.polyfit(x_nodes[fit], np.log(phi_nodes[fit]), 1)

    solution = StationarySolution(
        x=x, phi_s=np.zeros_like(x), dphi_s=np.zeros_like(x), sup_B=bar, decay_rate_est=-float(slope),
        end_state=end_state, phi_b=phi_b, decay_rate=c, potential=potential,
        x_nodes=x_nodes, phi_nodes=phi_nodes,
    )
    tail = x >= x_nodes[-1]
    phi_s = np.empty_like(x)
    phi_s[tail] = phi_nodes[-1] * np.exp(-c * (x[tail] - x_nodes[-1]))
    phi_s[~tail] = solution.sheath_spline(x[~tail])
    phi_s[0] = phi_b
    solution.phi_s[:] = phi_s
    solution.dphi_s[:] = solution.field_at(x, phi_s)
    logger.info(
        "Stationary sheath built: phi_b=%g K=%.6g c=%.6g c_fit=%.6g tail from x=%.4g, x_max=%.4g",
        phi_b, potential.bohm, c, solution.decay_rate_est, x_nodes[-1], x_max,
    )
    return solution


def reconstruct_from_potential(end_state, phi, xi1):
    """F^s given Phi^s values: F_inf(-sqrt(xi1^2 - 2 Phi)) on xi1 < 0, xi1^2 > 2 Phi."""
    phi, xi1 = np.broadcast_arrays(np.asarray(phi, dtype=float), np.asarray(xi1, dtype=float))
    arg = xi1**2 - 2.0 * phi
    mask = (xi1 < 0) & (arg > 0)
    out = np.zeros(np.shape(xi1))
    out[mask] = end_state.f_infty(-np.sqrt(arg[mask]))
    return out


def reconstruct_fs(stationary, x, xi1):
    """F^s(x, xi1); x and xi1 broadcast against each other."""
    phi = stationary.potential_at(x)
    out = reconstruct_from_potential(stationary.end_state, phi, xi1)
    return float(out) if out.ndim == 0 else out


def _scaled_velocity_derivative(end_state, phi, xi):
    """d F^s / d xi1 divided by M^{1/2}(xi1), evaluated in log space."""
    cfg = end_state.config
    out = np.zeros_like(xi)
    arg = xi**2 - 2.0 * phi
    mask = (xi < 0) & (arg > 0)
    w = -np.sqrt(arg[mask])
    psi = end_state.psi(w)
    if cfg.cutoff:
        dpsi = cutoff_psi_derivative(w, cfg.r, cfg.sigma)
    else:
        dpsi = 0.0
    shape = -(w - cfg.u_infty) / cfg.theta_infty * psi + dpsi
    log_ratio = end_state.log_maxwellian(w) - 0.5 * end_state.log_maxwellian(xi[mask])
    out[mask] = np.exp(log_ratio) * shape * xi[mask] / w
    return out


def check_fs_estimates(stationary, sample_x=None, n_xi=4001):
    """
    Report the stationary defect estimates at sample positions.

    Columns: the defect norm ||d_xi (F^s - F_inf) / M^{1/2}||, its x-derivative,
    the velocity-gradient norm of d_xi F^s / M^{1/2}, and the ratios of the
    first two to Phi^s and |d Phi^s / dx|. Constants are reported, not asserted.

    Returns:
        pd.DataFrame: One row per sample position.
    """
    end_state = stationary.end_state
    lo, hi = end_state.window
    xi = np.linspace(lo, hi, n_xi)
    if sample_x is None:
        sample_x = np.linspace(0.0, min(stationary.x_max, 10.0), 11)
    sample_x = np.asarray(sample_x, dtype=float)
    phis = np.atleast_1d(stationary.potential_at(sample_x))
    fields = np.atleast_1d(stationary.field_at(sample_x, phis))
    reference = _scaled_velocity_derivative(end_state, 0.0, xi)
    rows = []
    for x0, phi, dphi in zip(sample_x, phis, fields):
        a = _scaled_velocity_derivative(end_state, phi, xi)
        defect = math.sqrt(integrate.trapezoid((a - reference) ** 2, xi))
        h = 1e-6 * max(stationary.phi_b, 1e-12)
        da = (_scaled_velocity_derivative(end_state, phi + h, xi) - _scaled_velocity_derivative(end_state, max(phi - h, 0.0), xi)) / (
            phi + h - max(phi - h, 0.0)
        )
        defect_x = math.sqrt(integrate.trapezoid((da * dphi) ** 2, xi))
        fs1 = math.sqrt(integrate.trapezoid(np.gradient(a, xi) ** 2, xi))
        rows.append({
            "x": float(x0),
            "phi_s": float(phi),
            "defect": defect,
            "defect_x": defect_x,
            "fs1": fs1,
            "defect_ratio": defect / phi if phi > 0 else 0.0,
            "defect_x_ratio": defect_x / abs(dphi) if dphi != 0 else 0.0,
        })
    return pd.DataFrame(rows)
