"""
Nonlinear Poisson problems on a truncated half-line.

Both the full equation Phi'' = rho - n_e(Phi) and its perturbation form
phi'' = n - (n_e(Phi^s + phi) - n_e(Phi^s)) are written as

    u'' = s(x) - (n_e(b + u) - n_e(b)),   u(0) = left, u(x_max) = right

with background b and source s, and solved by damped Newton on the
three-point second difference.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded

from utils.plasma.distributions import eta
from utils.plasma.electrons import get_electron_model
from utils.plasma.errors import BarrierViolated, InvalidConfig, NewtonDiverged
from utils.plasma.stationary import ion_density_profile

logger = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
MIN_DAMPING = 1.0 / 1024


@dataclass(frozen=True, eq=False)
class EllipticProblem:
    """
    One two-point boundary value problem.

    Attributes:
        x: Strictly increasing grid, x[0] = 0.
        phi_s: Background potential at x.
        electron_model: Tag or ElectronModel.
        source: Source density n at x.
        left: Dirichlet value at x[0].
        right: Dirichlet value at x[-1].
    """

    x: np.ndarray
    phi_s: np.ndarray
    electron_model: object
    source: np.ndarray
    left: float = 0.0
    right: float = 0.0
    electron_exponent: float = field(default=0.25, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 3 or np.any(np.diff(x) <= 0):
            raise InvalidConfig("elliptic grid must be strictly increasing with at least 3 nodes")
        if not (math.isfinite(self.left) and math.isfinite(self.right)):
            raise InvalidConfig("boundary data must be finite")
        for name in ("phi_s", "source"):
            values = np.asarray(getattr(self, name), dtype=float)
            if values.shape != x.shape or not np.all(np.isfinite(values)):
                raise InvalidConfig(f"{name} must be finite and match the grid")
            object.__setattr__(self, name, values)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "electron_model", get_electron_model(self.electron_model, self.electron_exponent))


@dataclass
class NewtonResult:
    phi: np.ndarray
    residuals: list
    iterations: int


def _bands(x):
    hm = x[1:-1] - x[:-2]
    hp = x[2:] - x[1:-1]
    lower = 2.0 / (hm * (hm + hp))
    upper = 2.0 / (hp * (hm + hp))
    diag = -2.0 / (hm * hp)
    return lower, diag, upper


def second_difference(u, x):
    """Three-point u'' at interior nodes of a possibly nonuniform grid."""
    lower, diag, upper = _bands(x)
    return lower * u[:-2] + diag * u[1:-1] + upper * u[2:]


def _residual(u, problem, bands):
    lower, diag, upper = bands
    model = problem.electron_model
    bg = problem.phi_s[1:-1]
    d2 = lower * u[:-2] + diag * u[1:-1] + upper * u[2:]
    return d2 - problem.source[1:-1] + model.density(bg + u[1:-1]) - model.density(bg)


def solve_perturbation_potential(problem, initial_guess=None, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """
    Damped Newton for phi'' = n - (n_e(Phi^s + phi) - n_e(Phi^s)).

    Args:
        problem (EllipticProblem): The boundary value problem.
        initial_guess (np.ndarray): Starting iterate; zero by default.
        tol (float): Sup-norm residual at which the iteration stops.
        max_iter (int): Newton iteration cap.

    Returns:
        NewtonResult: Solution and the residual history.

    Raises:
        NewtonDiverged: if the line search stalls or the cap is reached.
    """
    bands = _bands(problem.x)
    lower, diag, upper = bands
    model = problem.electron_model
    u = np.zeros_like(problem.x) if initial_guess is None else np.array(initial_guess, dtype=float)
    u[0], u[-1] = problem.left, problem.right
    residuals = []
    res = _residual(u, problem, bands)
    r = float(np.max(np.abs(res)))
    for it in range(max_iter + 1):
        residuals.append(r)
        if not math.isfinite(r):
            raise NewtonDiverged(r, it)
        if r < tol:
            logger.debug("Newton converged in %d iterations, residual %.3e", it, r)
            return NewtonResult(phi=u, residuals=residuals, iterations=it)
        if it == max_iter:
            break
        ab = np.zeros((3, u.size - 2))
        ab[0, 1:] = upper[:-1]
        ab[1] = diag + model.derivative(problem.phi_s[1:-1] + u[1:-1])
        ab[2, :-1] = lower[1:]
        step = solve_banded((1, 1), ab, -res)
        damping = 1.0
        while True:
            trial = u.copy()
            trial[1:-1] += damping * step
            trial_res = _residual(trial, problem, bands)
            trial_r = float(np.max(np.abs(trial_res)))
            if math.isfinite(trial_r) and trial_r <= (1.0 - 1e-4 * damping) * r:
                break
            damping /= 2
            if damping < MIN_DAMPING:
                raise NewtonDiverged(r, it)
        logger.debug("Newton iteration %d: residual %.3e, damping %g", it + 1, trial_r, damping)
        u, res, r = trial, trial_res, trial_r
    raise NewtonDiverged(r, max_iter)


def solve_full_potential(x, density, electron_model, phi_b, initial_guess=None, electron_exponent=0.25):
    """Phi'' = rho - n_e(Phi) with Phi(0) = phi_b and Phi(x_max) = 0."""
    density = np.asarray(density, dtype=float)
    problem = EllipticProblem(
        x=x,
        phi_s=np.zeros_like(density),
        electron_model=electron_model,
        source=density - 1.0,
        left=float(phi_b),
        right=0.0,
        electron_exponent=electron_exponent,
    )
    return solve_perturbation_potential(problem, initial_guess=initial_guess)


def weighted_l2(values, x, beta):
    """||e^{beta x / 2} v||_{L2} by the trapezoid rule."""
    return math.sqrt(integrate.trapezoid(np.exp(beta * x) * np.asarray(values) ** 2, x))


@dataclass(frozen=True)
class BoundsReport:
    sup_phi: float
    inf_phi: float
    upper_barrier: float
    lower_barrier: float
    holds: bool


def potential_bounds_check(phi, stationary, problem, atol=1e-8, raise_on_violation=True):
    """
    Compare Phi = Phi^s + phi against the maximum-principle barriers.

    M1 = max(phi_b, n_e^{-1}(inf(rho^s + n))) and
    M2 = max(phi_b, -n_e^{-1}(sup(rho^s + n))), with rho^s the stationary
    ion density at the problem's nodes.

    Raises:
        BarrierViolated: if sup Phi > M1 or inf Phi < -M2 (beyond atol).
    """
    phi = getattr(phi, "phi", phi)
    model = problem.electron_model
    rho = ion_density_profile(problem.phi_s, stationary.end_state) + problem.source
    upper = max(stationary.phi_b, float(model.inverse(np.min(rho))))
    lower = -max(stationary.phi_b, -float(model.inverse(np.max(rho))))
    total = problem.phi_s + phi
    report = BoundsReport(
        sup_phi=float(np.max(total)),
        inf_phi=float(np.min(total)),
        upper_barrier=upper,
        lower_barrier=lower,
        holds=bool(np.max(total) <= upper + atol and np.min(total) >= lower - atol),
    )
    if not report.holds and raise_on_violation:
        raise BarrierViolated(
            f"potential range [{report.inf_phi:.6g}, {report.sup_phi:.6g}] "
            f"outside barriers [{lower:.6g}, {upper:.6g}]"
        )
    return report


@dataclass(frozen=True)
class EllipticReport:
    """
    Weighted norms of a perturbation solve and the margins of the two
    weighted elliptic inequalities.

    slack_first / slack_second are (lhs - main term) / ||e^{bx/2} n||^2; the
    inequalities hold when they do not exceed slack_constant * (phi_b + ||n||_H1).
    """

    beta: float
    eta: float
    phi_l2: float
    dphi_l2: float
    ddphi_l2: float
    source_l2: float
    source_h1: float
    h3_ratio: float
    slack_first: float
    slack_second: float
    allowed_slack: float
    holds: bool


def elliptic_estimates_check(phi, problem, beta, phi_b=0.0, slack_constant=10.0):
    """Evaluate the weighted estimates for a solved perturbation potential."""
    phi = np.asarray(getattr(phi, "phi", phi), dtype=float)
    x = problem.x
    n = problem.source
    e = eta(beta)
    dphi = np.gradient(phi, x, edge_order=2)
    ddphi = np.gradient(dphi, x, edge_order=2)
    phi_l2 = weighted_l2(phi, x, beta)
    dphi_l2 = weighted_l2(dphi, x, beta)
    ddphi_l2 = weighted_l2(ddphi, x, beta)
    n_l2 = weighted_l2(n, x, beta)
    n_h1 = math.sqrt(weighted_l2(n, x, 0.0) ** 2 + weighted_l2(np.gradient(n, x, edge_order=2), x, 0.0) ** 2)
    dddphi = np.gradient(ddphi, x, edge_order=2)
    h3 = math.sqrt(sum(weighted_l2(v, x, 0.0) ** 2 for v in (phi, dphi, ddphi, dddphi)))
    if n_l2 == 0:
        return EllipticReport(beta, e, phi_l2, dphi_l2, ddphi_l2, 0.0, n_h1, 0.0, 0.0, 0.0, 0.0, True)
    slack_first = (phi_l2**2 + 2 * (1 + e) * dphi_l2**2 - (1 + e) ** 2 * n_l2**2) / n_l2**2
    slack_second = (ddphi_l2**2 - (1 + beta**2 * (1 + e) ** 2) * n_l2**2) / n_l2**2
    allowed = slack_constant * (phi_b + n_h1)
    return EllipticReport(
        beta=beta,
        eta=e,
        phi_l2=phi_l2,
        dphi_l2=dphi_l2,
        ddphi_l2=ddphi_l2,
        source_l2=n_l2,
        source_h1=n_h1,
        h3_ratio=h3 / n_h1 if n_h1 > 0 else 0.0,
        slack_first=slack_first,
        slack_second=slack_second,
        allowed_slack=allowed,
        holds=bool(slack_first <= allowed and slack_second <= allowed),
    )
