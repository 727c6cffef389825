"""
End-state ion distribution F_inf = M_inf * psi and its velocity moments.

All velocity integrals are reduced to the xi1 direction: the transverse
Gaussian integrates to one, so F_inf is handled through its xi1-marginal.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from utils.plasma.config import PlasmaConfig
from utils.plasma.errors import InvalidConfig, QuadratureFailure

logger = logging.getLogger(__name__)

WINDOW_WIDTHS = 12.0
QUAD_RTOL = 1e-12
GL_ORDER = 16


def _bump(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(s):
    """C-infinity transition t(s) = E(s) / (E(s) + E(1 - s)), E(s) = exp(-1/s), clipped to [0, 1]."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    a = _bump(s)
    b = _bump(1.0 - s)
    return a / (a + b)


def smooth_step_derivative(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    si = s[inside]
    a = np.exp(-1.0 / si)
    b = np.exp(-1.0 / (1.0 - si))
    out[inside] = (a * b * (1.0 / si**2 + 1.0 / (1.0 - si) ** 2)) / (a + b) ** 2
    return out


def _scalar_or_array(value, like):
    return float(value) if np.ndim(like) == 0 else value


def cutoff_psi(xi1, r, sigma):
    """
    Velocity cutoff psi(xi1).

    Zero for xi1 >= -r, one for xi1 <= -r - sigma and a smooth monotone
    transition in between.
    """
    if not (r > 0 and sigma > 0):
        raise InvalidConfig(f"cutoff needs r > 0 and sigma > 0, got r={r}, sigma={sigma}")
    s = (-r - np.asarray(xi1, dtype=float)) / sigma
    return _scalar_or_array(smooth_step(s), xi1)


def cutoff_psi_derivative(xi1, r, sigma):
    s = (-r - np.asarray(xi1, dtype=float)) / sigma
    return _scalar_or_array(-smooth_step_derivative(s) / sigma, xi1)


def adaptive_quad(func, lo, hi, points=(), rtol=QUAD_RTOL, what="integral"):
    """
    Adaptive Gauss-Kronrod quadrature of func over [lo, hi].

    Raises:
        QuadratureFailure: if QUADPACK flags the result and its error estimate
            exceeds 1e-9 relative, or the value is not finite.
    """
    if hi <= lo:
        return 0.0
    inner = sorted({float(p) for p in points if lo < p < hi})
    result = integrate.quad(
        func, lo, hi, points=inner or None, epsabs=0.0, epsrel=rtol, limit=400, full_output=1
    )
    value, abserr = result[0], result[1]
    if not math.isfinite(value):
        raise QuadratureFailure(f"{what}: non-finite value on [{lo:.6g}, {hi:.6g}]")
    if len(result) > 3 and abserr > max(1e-9 * abs(value), 1e-300):
        raise QuadratureFailure(f"{what}: {result[3]} (value {value:.6g}, error {abserr:.3g})")
    return value


@dataclass(frozen=True, eq=False)
class EndState:
    """
    Quasi-neutral end state F_inf = rho_inf * M_hat * psi.

    Attributes:
        config: Plasma parameters.
        rho_infty: Normalization making the total density one.
        xi1: Sample nodes of the marginal over the integration window.
        f_infty_values: F_inf marginal at xi1.
        table: Optional (xi1, values) replacing the analytic marginal.
    """

    config: PlasmaConfig
    rho_infty: float
    xi1: np.ndarray
    f_infty_values: np.ndarray
    table: Optional[tuple] = field(default=None, repr=False)

    @classmethod
    def from_table(cls, config, xi1, values):
        """Test hook: an end state given by a raw table, linear in between, zero outside."""
        xi1 = np.asarray(xi1, dtype=float)
        values = np.asarray(values, dtype=float)
        if xi1.ndim != 1 or xi1.shape != values.shape or np.any(np.diff(xi1) <= 0):
            raise InvalidConfig("table needs strictly increasing xi1 and matching values")
        if np.any(values < 0):
            raise InvalidConfig("tabulated end state must be nonnegative")
        return cls(config=config, rho_infty=1.0, xi1=xi1, f_infty_values=values, table=(xi1, values))

    @property
    def u(self):
        return self.config.u_infty

    @property
    def theta(self):
        return self.config.theta_infty

    @property
    def window(self):
        return velocity_window(self.config) if self.table is None else (float(self.xi1[0]), float(self.xi1[-1]))

    def log_maxwellian(self, xi1):
        xi1 = np.asarray(xi1, dtype=float)
        return (
            math.log(self.rho_infty)
            - 0.5 * math.log(2 * math.pi * self.theta)
            - (xi1 - self.u) ** 2 / (2 * self.theta)
        )

    def maxwellian(self, xi1):
        """xi1-marginal of M_inf, including rho_inf."""
        return _scalar_or_array(np.exp(self.log_maxwellian(xi1)), xi1)

    def psi(self, xi1):
        if not self.config.cutoff:
            return _scalar_or_array(np.ones_like(np.asarray(xi1, dtype=float)), xi1)
        return cutoff_psi(xi1, self.config.r, self.config.sigma)

    def f_infty(self, xi1):
        """F_inf marginal at arbitrary xi1."""
        if self.table is not None:
            tx, tv = self.table
            return _scalar_or_array(np.interp(xi1, tx, tv, left=0.0, right=0.0), xi1)
        return _scalar_or_array(self.maxwellian(xi1) * self.psi(xi1), xi1)

    def f_infty_derivative(self, xi1):
        xi1 = np.asarray(xi1, dtype=float)
        if self.table is not None:
            h = 1e-6
            return (self.f_infty(xi1 + h) - self.f_infty(xi1 - h)) / (2 * h)
        m = self.maxwellian(xi1)
        dm = -(xi1 - self.u) / self.theta * m
        if not self.config.cutoff:
            return _scalar_or_array(dm, xi1)
        psi = cutoff_psi(xi1, self.config.r, self.config.sigma)
        dpsi = cutoff_psi_derivative(xi1, self.config.r, self.config.sigma)
        return _scalar_or_array(dm * psi + m * dpsi, xi1)

    @cached_property
    def velocity_rule(self):
        """
        Fixed composite rule (nodes, weights) over the window, used wherever
        F_inf moments are needed for many potentials at once.
        """
        if self.table is not None:
            tx, _ = self.table
            w = np.zeros_like(tx)
            dx = np.diff(tx)
            w[:-1] += dx / 2
            w[1:] += dx / 2
            return tx, w
        return composite_gauss_legendre(self.config)

    def integrate(self, func):
        """int func(xi1) F_inf(xi1) dxi1 with the fixed rule."""
        nodes, weights = self.velocity_rule
        return np.sum(weights * func(nodes) * self.f_infty(nodes))


def velocity_window(config):
    """Integration window [u - 12 sqrt(theta), min(-r, u + 12 sqrt(theta))]."""
    width = WINDOW_WIDTHS * math.sqrt(config.theta_infty)
    lo = config.u_infty - width
    hi = config.u_infty + width
    if config.cutoff:
        hi = min(hi, -config.r)
    return lo, hi


def _breakpoints(config):
    lo, hi = velocity_window(config)
    points = [config.u_infty]
    if config.cutoff:
        points.append(-config.r - config.sigma)
    return [p for p in points if lo < p < hi]


def composite_gauss_legendre(config, panels_per_width=8, order=GL_ORDER):
    lo, hi = velocity_window(config)
    edges = [lo, *sorted(_breakpoints(config)), hi]
    scale = math.sqrt(config.theta_infty)
    base_x, base_w = leggauss(order)
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        panels = int(min(256, max(8, math.ceil(panels_per_width * (b - a) / scale))))
        cuts = np.linspace(a, b, panels + 1)
        half = np.diff(cuts) / 2
        mid = (cuts[:-1] + cuts[1:]) / 2
        nodes.append((mid[:, None] + half[:, None] * base_x[None, :]).ravel())
        weights.append((half[:, None] * base_w[None, :]).ravel())
    return np.concatenate(nodes), np.concatenate(weights)


def _unit_density_mass(config):
    u, theta = config.u_infty, config.theta_infty
    lo, hi = velocity_window(config)
    norm = 1.0 / math.sqrt(2 * math.pi * theta)

    def integrand(xi):
        return norm * math.exp(-((xi - u) ** 2) / (2 * theta)) * float(cutoff_psi(xi, config.r, config.sigma))

    return adaptive_quad(integrand, lo, hi, _breakpoints(config), what="cutoff Maxwellian mass")


def normalize_quasi_neutral(config, n_nodes=2001):
    """
    Build the end state with rho_inf chosen so that int F_inf = 1.

    Args:
        config (PlasmaConfig): Problem parameters.
        n_nodes (int): Number of sample nodes stored on the end state.

    Returns:
        EndState: The normalized end state.
    """
    if config.cutoff and not abs(config.u_infty) > config.r + 2 * config.sigma:
        raise InvalidConfig("|u_infty| must exceed r + 2 sigma")
    if config.cutoff:
        mass = _unit_density_mass(config)
        if not mass > 0:
            raise QuadratureFailure("cutoff Maxwellian has no mass in the integration window")
        rho = 1.0 / mass
    else:
        rho = 1.0
    lo, hi = velocity_window(config)
    xi1 = np.linspace(lo, hi, n_nodes)
    state = EndState(config=config, rho_infty=rho, xi1=xi1, f_infty_values=np.zeros(0))
    values = np.asarray(state.f_infty(xi1))
    state = EndState(config=config, rho_infty=rho, xi1=xi1, f_infty_values=values)
    logger.info("End state normalized: u=%g theta=%g r=%g sigma=%g rho_inf=%.12g", config.u_infty, config.theta_infty, config.r, config.sigma, rho)
    return state


def _moment(end_state, weight, what):
    if end_state.table is not None:
        tx, tv = end_state.table
        return float(integrate.trapezoid(weight(tx) * tv, tx))
    lo, hi = end_state.window
    return adaptive_quad(
        lambda xi: weight(xi) * end_state.f_infty(xi), lo, hi, _breakpoints(end_state.config), what=what
    )


def total_mass(end_state):
    return _moment(end_state, lambda xi: np.ones_like(np.asarray(xi, dtype=float)), "total mass")


def bohm_integral(end_state):
    """K = int xi1^-2 F_inf; the Bohm criterion holds iff K < 1."""
    lo, hi = end_state.window
    if lo < 0 < hi or hi == 0:
        raise InvalidConfig("end state must vanish near xi1 = 0 for the Bohm integral")
    return _moment(end_state, lambda xi: 1.0 / np.asarray(xi, dtype=float) ** 2, "Bohm integral")


def _defect_log_integrand(end_state, xi):
    cfg = end_state.config
    psi = cutoff_psi(xi, cfg.r, cfg.sigma)
    dpsi = cutoff_psi_derivative(xi, cfg.r, cfg.sigma)
    h = (xi - cfg.u_infty) * (1.0 - psi) / cfg.theta_infty + dpsi
    with np.errstate(divide="ignore"):
        return end_state.log_maxwellian(xi) + 2.0 * np.log(np.abs(h))


def mu_infty(end_state, log_space=True):
    """
    Weighted L2 norm of d/dxi1 (M psi - M) / M^{1/2} over xi1 < 0.

    The integrand simplifies to M * h^2 with h = (xi1 - u)(1 - psi)/theta + psi',
    which is integrated as exp(L - L_max) and rescaled, so cold plasmas do not
    overflow. log_space=False evaluates the quotient literally.
    """
    cfg = end_state.config
    if not cfg.cutoff:
        return 0.0
    if end_state.table is not None:
        raise InvalidConfig("mu_infty is defined for the cut-off Maxwellian only")
    lo, hi = -cfg.r - cfg.sigma, 0.0
    points = (-cfg.r,)
    if not log_space:
        def direct(xi):
            m = end_state.maxwellian(xi)
            dm = -(xi - cfg.u_infty) / cfg.theta_infty * m
            psi = cutoff_psi(xi, cfg.r, cfg.sigma)
            dpsi = cutoff_psi_derivative(xi, cfg.r, cfg.sigma)
            return (dm * (psi - 1.0) + m * dpsi) ** 2 / m

        return math.sqrt(adaptive_quad(direct, lo, hi, points, what="mu_infty (direct)"))

    samples = np.linspace(lo, hi, 4001)
    log_values = _defect_log_integrand(end_state, samples)
    l_max = float(np.max(log_values))
    if not math.isfinite(l_max):
        return 0.0

    def shifted(xi):
        return math.exp(float(_defect_log_integrand(end_state, xi)) - l_max)

    scaled = adaptive_quad(shifted, lo, hi, points, what="mu_infty")
    log_mu = 0.5 * (l_max + math.log(scaled)) if scaled > 0 else -math.inf
    return math.exp(log_mu) if log_mu > -745 else 0.0


def eta(beta):
    """eta(beta) = beta^2 / (2 - beta^2), defined for 0 < beta <= 1."""
    if not 0 < beta <= 1:
        raise InvalidConfig(f"beta must lie in (0, 1), got {beta}")
    return beta**2 / (2.0 - beta**2)


def off_diagonals(u_infty, theta_infty, rho_infty, mu, beta, r, epsilon):
    """Entries d1, d2 of the dissipation quadratic form."""
    if not 0 < beta < 1:
        raise InvalidConfig(f"beta must lie in (0, 1), got {beta}")
    if not 0 < epsilon < r / 2:
        raise InvalidConfig(f"epsilon must lie in (0, r/2), got epsilon={epsilon}, r={r}")
    e = eta(beta)
    gap = math.sqrt(r - 2 * epsilon)
    d1 = (math.sqrt(rho_infty / theta_infty) * math.sqrt(1 + e) + mu / beta) * math.sqrt(1 + e) / gap
    d2 = math.sqrt(1 + beta**2 * (1 + e) ** 2) * mu / (beta * gap)
    return d1, d2


def asp1_margin(u_infty, theta_infty, rho_infty, mu, beta, r, epsilon):
    """|u|/theta - d1^2 - d2^2; positive iff the stability condition holds."""
    d1, d2 = off_diagonals(u_infty, theta_infty, rho_infty, mu, beta, r, epsilon)
    return abs(u_infty) / theta_infty - d1**2 - d2**2


@dataclass(frozen=True)
class TheoryConstants:
    mu_infty: float
    eta_beta: float
    bohm_integral: float
    asp1_margin: float


def theory_constants(end_state, beta, epsilon):
    cfg = end_state.config
    mu = mu_infty(end_state)
    return TheoryConstants(
        mu_infty=mu,
        eta_beta=eta(beta),
        bohm_integral=bohm_integral(end_state),
        asp1_margin=asp1_margin(cfg.u_infty, cfg.theta_infty, end_state.rho_infty, mu, beta, cfg.r, epsilon),
    )
