"""
Functionals of a perturbed run: the weighted perturbation f, its moments,
weighted Sobolev norms, the energy, the stability budget of the parameters,
the constant selection scans and rate fits.

The reduced field g carries the xi1 dependence only. The full perturbation is
f(x, xi1) * m_perp(xi')^{1/2} with m_perp the transverse Gaussian of
temperature theta, so every L2 norm equals its reduced counterpart and the
transverse gradient adds ||f||^2 / (2 theta) to the squared H1 norm.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from utils.plasma.distributions import (
    bohm_integral,
    mu_infty,
    normalize_quasi_neutral,
    off_diagonals,
)
from utils.plasma.errors import (
    DegenerateSeries,
    InvalidConfig,
    NotFound,
    QuadratureFailure,
    WeightOverflow,
)

logger = logging.getLogger(__name__)

LOG_HUGE = 700.0
BETA_GRID = tuple(round(0.1 * k, 1) for k in range(1, 10))


def perturbation_f(g, reference, end_state, xi1):
    """
    f = M^{-1/2} (g - g_ref), evaluated in log space.

    Cells where both g and g_ref are below 1e-300 are set to 0.

    Raises:
        WeightOverflow: if a nonzero difference sits where M^{-1/2} overflows.
    """
    g = np.asarray(getattr(g, "g", g), dtype=float)
    reference = np.asarray(getattr(reference, "g", reference), dtype=float)
    diff = g - reference
    half_log_m = 0.5 * end_state.log_maxwellian(np.asarray(xi1, dtype=float))[None, :]
    live = (np.abs(diff) > 0) & ((np.abs(g) >= 1e-300) | (np.abs(reference) >= 1e-300))
    exponent = np.full(diff.shape, -np.inf)
    exponent[live] = np.log(np.abs(diff[live])) - np.broadcast_to(half_log_m, diff.shape)[live]
    if np.any(exponent > LOG_HUGE):
        worst = float(np.max(exponent))
        raise WeightOverflow(f"perturbation where the Gaussian weight underflows (log|f| = {worst:.1f})")
    return np.sign(diff) * np.exp(exponent)


def embed_perturbation(f, end_state, xi1):
    """M^{1/2} f, the inverse of perturbation_f."""
    return np.asarray(f) * np.exp(0.5 * end_state.log_maxwellian(np.asarray(xi1, dtype=float)))[None, :]


@dataclass(frozen=True)
class Moments:
    n: np.ndarray
    m: np.ndarray


def moments(f, end_state, xi1):
    """n = int M^{1/2} f dxi1 and m = int xi1 M^{1/2} f dxi1."""
    weighted = embed_perturbation(f, end_state, xi1)
    return Moments(
        n=integrate.trapezoid(weighted, xi1, axis=1),
        m=integrate.trapezoid(weighted * xi1[None, :], xi1, axis=1),
    )


def _sq_norm(values, x, xi1, beta):
    inner = integrate.trapezoid(np.asarray(values) ** 2, xi1, axis=1)
    return float(integrate.trapezoid(np.exp(beta * x) * inner, x))


def _sq_norm_x(values, x, beta):
    return float(integrate.trapezoid(np.exp(beta * x) * np.asarray(values) ** 2, x))


@dataclass(frozen=True)
class WeightedNorms:
    """
    Weighted norms of one snapshot, all with the weight e^{beta x / 2}.

    h1 includes the x, xi1 and analytic transverse derivatives. dissipation
    and dissipation_h1 restrict to xi1 < 0 and carry the factor |xi1|^{1/2}.
    """

    beta: float
    l2: float
    dx_l2: float
    dxi_l2: float
    transverse_l2: float
    h1: float
    dissipation: float
    dissipation_h1: float


def weighted_h1(f, x, xi1, beta, theta_infty):
    """
    Weighted L2/H1 norms of f on a grid (derivatives by 2nd-order differences).

    Args:
        f (np.ndarray): Weighted perturbation, shape (len(x), len(xi1)).
        beta (float): Weight exponent, 0 <= beta < 1.
        theta_infty (float): Temperature of the transverse Gaussian.
    """
    if not 0 <= beta < 1:
        raise InvalidConfig(f"beta must lie in [0, 1), got {beta}")
    f = np.asarray(f, dtype=float)
    fx = np.gradient(f, x, axis=0, edge_order=2)
    fv = np.gradient(f, xi1, axis=1, edge_order=2)
    l2 = _sq_norm(f, x, xi1, beta)
    dx = _sq_norm(fx, x, xi1, beta)
    dv = _sq_norm(fv, x, xi1, beta)
    transverse = l2 / (2.0 * theta_infty)
    outgoing = np.sqrt(np.abs(np.minimum(xi1, 0.0)))[None, :]
    diss = _sq_norm(outgoing * f, x, xi1, beta)
    diss_grad = diss + _sq_norm(outgoing * fx, x, xi1, beta) + _sq_norm(outgoing * fv, x, xi1, beta) + diss / (2.0 * theta_infty)
    return WeightedNorms(
        beta=beta,
        l2=math.sqrt(l2),
        dx_l2=math.sqrt(dx),
        dxi_l2=math.sqrt(dv),
        transverse_l2=math.sqrt(transverse),
        h1=math.sqrt(l2 + dx + dv + transverse),
        dissipation=math.sqrt(diss),
        dissipation_h1=math.sqrt(diss_grad),
    )


def energy_functional(f, n, x, xi1, theta_infty, beta, coefficient=1.0):
    """
    E = ||w f||^2 + ||w d_x f||^2 + ||w n||^2 / theta + coefficient * ||w grad_xi f||^2, w = e^{beta x / 2}.

    grad_xi includes the transverse directions.
    """
    f = np.asarray(f, dtype=float)
    fx = np.gradient(f, x, axis=0, edge_order=2)
    fv = np.gradient(f, xi1, axis=1, edge_order=2)
    l2 = _sq_norm(f, x, xi1, beta)
    grad_xi = _sq_norm(fv, x, xi1, beta) + l2 / (2.0 * theta_infty)
    return l2 + _sq_norm(fx, x, xi1, beta) + _sq_norm_x(n, x, beta) / theta_infty + coefficient * grad_xi


@dataclass(frozen=True)
class MomentBound:
    k: int
    alpha: float
    flux_lhs: float
    flux_rhs: float
    density_lhs: float
    density_rhs: float

    @property
    def holds(self):
        return self.flux_lhs <= self.flux_rhs * (1 + 1e-12) and self.density_lhs <= self.density_rhs * (1 + 1e-12)


def moment_bounds(f, x, xi1, end_state, alpha, k=0):
    """
    Both sides of ||w d^k(m - u n)||^2 <= rho theta ||w d^k f||^2 and ||w d^k n||^2 <= rho ||w d^k f||^2.

    The right-hand sides use the discrete Gaussian moments of the velocity
    grid, so the inequalities hold exactly at the discrete level.
    """
    f = np.asarray(f, dtype=float)
    if k == 1:
        f = np.gradient(f, x, axis=0, edge_order=2)
    elif k != 0:
        raise InvalidConfig("k must be 0 or 1")
    mom = moments(f, end_state, xi1)
    m_weight = np.exp(end_state.log_maxwellian(xi1))
    rho = float(integrate.trapezoid(m_weight, xi1))
    rho_theta = float(integrate.trapezoid((xi1 - end_state.u) ** 2 * m_weight, xi1))
    f_sq = _sq_norm(f, x, xi1, alpha)
    return MomentBound(
        k=k,
        alpha=alpha,
        flux_lhs=_sq_norm_x(mom.m - end_state.u * mom.n, x, alpha),
        flux_rhs=rho_theta * f_sq,
        density_lhs=_sq_norm_x(mom.n, x, alpha),
        density_rhs=rho * f_sq,
    )


@dataclass(frozen=True)
class StabilityBudget:
    """
    The dissipation form D = [[1, 0, -d1], [0, 1, -d2], [-d1, -d2, |u|/theta]].

    asp1_lhs = |u|/theta - d1^2 - d2^2 is its determinant.
    """

    d1: float
    d2: float
    D: np.ndarray
    asp1_lhs: float
    minors: tuple
    positive_definite: bool
    mu_infty: float = 0.0
    rho_infty: float = 1.0
    beta: float = 0.5
    epsilon: float = 0.25


def stability_budget(u_infty, theta_infty, rho_infty, mu, beta, r, epsilon):
    """Assemble the stability budget from raw parameters, without quadrature."""
    d1, d2 = off_diagonals(u_infty, theta_infty, rho_infty, mu, beta, r, epsilon)
    D = np.array([[1.0, 0.0, -d1], [0.0, 1.0, -d2], [-d1, -d2, abs(u_infty) / theta_infty]])
    minors = (1.0, 1.0, float(np.linalg.det(D)))
    lhs = abs(u_infty) / theta_infty - d1**2 - d2**2
    return StabilityBudget(
        d1=d1,
        d2=d2,
        D=D,
        asp1_lhs=lhs,
        minors=minors,
        positive_definite=all(m > 0 for m in minors),
        mu_infty=mu,
        rho_infty=rho_infty,
        beta=beta,
        epsilon=epsilon,
    )


def check_asp1(end_state, beta, epsilon, r=None):
    """
    Evaluate the stability condition for a normalized end state.

    Args:
        end_state (EndState): Supplies u, theta, rho_inf and mu_inf.
        beta (float): Weight exponent in (0, 1).
        epsilon (float): Support margin in (0, r/2).
        r (float): Cutoff edge; defaults to the config value.

    Raises:
        InvalidConfig: for beta or epsilon out of range.
    """
    cfg = end_state.config
    r = cfg.r if r is None else r
    mu = mu_infty(end_state)
    return stability_budget(cfg.u_infty, cfg.theta_infty, end_state.rho_infty, mu, beta, r, epsilon)


@dataclass(frozen=True)
class ConstantsChoice:
    mode: str
    beta: float
    u_infty: float
    theta_infty: float
    margin: float
    bohm_integral: float
    rho_infty: float
    mu_infty: float

    def to_dict(self):
        return dict(self.__dict__)


def _candidate(config):
    end_state = normalize_quasi_neutral(config)
    return end_state, bohm_integral(end_state), mu_infty(end_state)


def select_constants(mode, config, epsilon, theta_floor=1e-8, max_doublings=16):
    """
    Scan for parameters satisfying the stability condition.

    mode "i": fixed u with |u| > 1 and r - 2 epsilon >= 1; theta is halved from 1
    down to theta_floor and beta scanned over 0.1 .. 0.9 at each theta.
    mode "ii": fixed theta, beta = 1/2; |u| is doubled from 1 up to 2^max_doublings.
    The first candidate with a positive margin and K < 1 wins.

    Returns:
        ConstantsChoice: The selected constants.

    Raises:
        InvalidConfig: if the preconditions of the mode fail.
        NotFound: if the scan ends without success, with the best margin seen.
    """
    if mode not in ("i", "ii"):
        raise InvalidConfig(f"mode must be 'i' or 'ii', got {mode!r}")
    if not 0 < epsilon < config.r / 2:
        raise InvalidConfig("epsilon must lie in (0, r/2)")
    best = -math.inf
    if mode == "i":
        if not abs(config.u_infty) > 1:
            raise InvalidConfig(f"condition (i) needs |u_infty| > 1, got {config.u_infty}")
        if not config.r - 2 * epsilon >= 1:
            raise InvalidConfig(f"condition (i) needs r - 2 epsilon >= 1, got {config.r - 2 * epsilon}")
        candidates = []
        theta = 1.0
        while theta >= theta_floor:
            candidates.append(config.replace(theta_infty=theta))
            theta /= 2
        betas = BETA_GRID
    else:
        candidates = []
        for k in range(max_doublings + 1):
            try:
                candidates.append(config.replace(u_infty=-(2.0**k)))
            except InvalidConfig:
                logger.debug("Skipping |u| = %g: invalid with the cutoff", 2.0**k)
        betas = (0.5,)
    for cand in candidates:
        try:
            end_state, K, mu = _candidate(cand)
        except (InvalidConfig, QuadratureFailure) as e:
            logger.debug("Skipping candidate theta=%g u=%g: %s", cand.theta_infty, cand.u_infty, e)
            continue
        for beta in betas:
            budget = stability_budget(cand.u_infty, cand.theta_infty, end_state.rho_infty, mu, beta, cand.r, epsilon)
            best = max(best, budget.asp1_lhs)
            if budget.asp1_lhs > 0 and K < 1:
                logger.info(
                    "Constants found (mode %s): beta=%g theta=%g u=%g margin=%.4g",
                    mode, beta, cand.theta_infty, cand.u_infty, budget.asp1_lhs,
                )
                return ConstantsChoice(
                    mode=mode,
                    beta=beta,
                    u_infty=cand.u_infty,
                    theta_infty=cand.theta_infty,
                    margin=budget.asp1_lhs,
                    bohm_integral=K,
                    rho_infty=end_state.rho_infty,
                    mu_infty=mu,
                )
    raise NotFound(best, f"no constants satisfy the stability condition in mode {mode} (best margin {best:.4g})")


@dataclass(frozen=True)
class RateFit:
    gamma: float
    slope: float
    intercept: float
    r_squared: float
    n_points: int


def fit_rate(t, values, window=(0.2, 0.8), growth=False):
    """
    Least-squares slope of log(values) against t over a fraction of the time span.

    gamma = -2 slope for decay and 2 slope for growth, matching e^{-gamma t / 2}.

    Raises:
        DegenerateSeries: if the window has fewer than 2 points or a value is not positive and finite.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    t0, t1 = float(t[0]), float(t[-1])
    lo, hi = t0 + window[0] * (t1 - t0), t0 + window[1] * (t1 - t0)
    mask = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    if mask.sum() < 2:
        raise DegenerateSeries(f"fit window [{lo:.4g}, {hi:.4g}] holds {int(mask.sum())} points")
    if mask.sum() < 4:
        logger.warning("Fit window holds only %d points", int(mask.sum()))
    y = values[mask]
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise DegenerateSeries("series has zero, negative or non-finite values in the fit window")
    log_y = np.log(y)
    slope, intercept = np.polyfit(t[mask], log_y, 1)
    residual = log_y - (slope * t[mask] + intercept)
    total = np.sum((log_y - log_y.mean()) ** 2)
    r_squared = 1.0 - float(np.sum(residual**2)) / float(total) if total > 1e-300 else 1.0
    gamma = 2.0 * slope if growth else -2.0 * slope
    return RateFit(gamma=float(gamma), slope=float(slope), intercept=float(intercept), r_squared=r_squared, n_points=int(mask.sum()))

