"""
End-to-end reproductions: stability and instability runs, Bohm-criterion
scans and the solvability transition.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy import integrate

from utils.extractors.data_flatten import (
    flatten_series_row,
    get_flattened_scan,
    get_flattened_series,
    write_run_dir,
)
from utils.plasma.diagnostics import (
    check_asp1,
    embed_perturbation,
    energy_functional,
    fit_rate,
    moments,
    perturbation_f,
    weighted_h1,
)
from utils.plasma.distributions import bohm_integral, normalize_quasi_neutral
from utils.plasma.errors import (
    DegenerateSeries,
    InvalidConfig,
    NewtonDiverged,
    SheathKitError,
    WeightOverflow,
)
from utils.plasma.stationary import sagdeev, solve_stationary_potential, sup_B
from utils.plasma.vlasov import (
    PhaseSpaceField,
    discretize_stationary,
    evolve,
    phase_space_grid,
    total_mass,
    track_support,
)

logger = logging.getLogger(__name__)

PASS_R_SQUARED = 0.95


def bump(s, lo, hi):
    """(1 - tau^2)^3 on [lo, hi], tau running over [-1, 1]; zero outside."""
    tau = (2.0 * np.asarray(s, dtype=float) - (lo + hi)) / (hi - lo)
    return np.where(np.abs(tau) < 1.0, (1.0 - tau**2) ** 3, 0.0)


@dataclass
class InitialData:
    field: PhaseSpaceField
    reference: PhaseSpaceField
    g0: np.ndarray


def build_initial_field(stationary, spec, x, xi1, delta=None):
    """
    g = g^s + delta M^{1/2} g0 with g0 = b(x) b(xi1) normalized to unit weighted H1 norm.

    The reference field is g^s alone. Both carry Phi^s as the first Newton guess.
    """
    pert = spec.evolve.perturbation
    delta = pert.delta if delta is None else delta
    end_state = stationary.end_state
    g_s = discretize_stationary(stationary, x, xi1)
    g0 = bump(x, pert.x_lo, pert.x_hi)[:, None] * bump(xi1, pert.xi_lo, pert.xi_hi)[None, :]
    norm = weighted_h1(g0, x, xi1, spec.beta, end_state.theta).h1
    if norm == 0:
        raise InvalidConfig("perturbation box does not meet the phase-space grid")
    g0 = g0 / norm
    phi0 = np.asarray(stationary.potential_at(x), dtype=float)
    periodic = spec.evolve.boundary == "periodic"
    reference = PhaseSpaceField(x=x, xi1=xi1, g=g_s, phi=phi0.copy(), periodic=periodic)
    perturbed = PhaseSpaceField(
        x=x, xi1=xi1, g=g_s + delta * embed_perturbation(g0, end_state, xi1), phi=phi0.copy(), periodic=periodic,
    )
    return InitialData(field=perturbed, reference=reference, g0=g0)


@dataclass
class RunReport:
    """
    Outcome of one time-dependent run.

    verdict is what lands in verdict.json; series is the diagnostics DataFrame.
    """

    experiment: str
    verdict: dict
    series: pd.DataFrame
    manifest: dict
    snapshots: list = field(default_factory=list, repr=False)
    fit: Optional[object] = None
    run_dir: Optional[Path] = None


def prepare_sheath(spec, grid_spec=None):
    """Normalize the end state and build the stationary sheath for a spec."""
    if spec.plasma is None:
        raise InvalidConfig("experiment needs plasma parameters")
    end_state = normalize_quasi_neutral(spec.plasma)
    return solve_stationary_potential(end_state, grid_spec=grid_spec)


def _manifest(spec, stationary, x, xi1, dt=None):
    return {
        "spec": spec.to_dict(),
        "grid": {
            "nx": int(x.size),
            "nv": int(xi1.size),
            "x_max": float(x[-1]),
            "v_min": float(xi1[0]),
            "v_max": float(xi1[-1]),
            "dt": dt,
        },
        "stationary": {
            "rho_infty": stationary.end_state.rho_infty,
            "bohm_integral": stationary.potential.bohm if stationary.potential else None,
            "sup_B": stationary.sup_B,
            "decay_rate": stationary.decay_rate,
            "phi_b": stationary.phi_b,
        },
    }


def _snapshot(state):
    f = state.field
    return {"k": state.k, "t": f.t, "x": f.x, "xi1": f.xi1, "phi": f.phi, "g": f.g.copy()}


def _diagnose(state, stationary, spec, mass0, band=None):
    """One series row for an EvolveState."""
    end_state = stationary.end_state
    fld = state.field
    f = perturbation_f(fld, state.reference, end_state, fld.xi1)
    norms = weighted_h1(f, fld.x, fld.xi1, spec.beta, end_state.theta)
    n = moments(f, end_state, fld.xi1).n
    n_l2 = math.sqrt(float(integrate.trapezoid(np.exp(spec.beta * fld.x) * n**2, fld.x)))
    energy = energy_functional(f, n, fld.x, fld.xi1, end_state.theta, spec.beta, spec.energy_coefficient)
    support = track_support(fld, state.reference.g, spec.support_threshold, band=band, corner_radius=spec.corner_radius)
    mass = total_mass(fld)
    drift = (mass - mass0 - state.flux_integral) / mass0 if mass0 > 0 else 0.0
    return flatten_series_row(fld.t, norms, n_l2, energy, support, state.fluxes, mass, drift)


def _run_series(spec, stationary, initial, dt=None, band=None, stop_at=None):
    """
    Drive evolve() and collect rows and snapshots.

    stop_at, if given, ends the run once h1_weighted reaches it. A Newton
    failure or a weight overflow ends the run and is reported as the stop reason.
    """
    rows, snapshots = [], []
    mass0 = total_mass(initial.field)
    stop_reason = "t_end"
    try:
        for state in evolve(initial.field, stationary, spec.evolve, reference=initial.reference, dt=dt):
            rows.append(_diagnose(state, stationary, spec, mass0, band))
            snapshots.append(_snapshot(state))
            if stop_at is not None and rows[-1]["h1_weighted"] >= stop_at:
                stop_reason = "escaped"
                logger.info("Escape threshold %.4g reached at t=%.4g", stop_at, state.field.t)
                break
    except NewtonDiverged as e:
        if stop_at is None:
            raise
        stop_reason = "saturated"
        logger.info("Nonlinear saturation reached: %s", e)
    except WeightOverflow as e:
        if stop_at is None:
            raise
        stop_reason = "weight_overflow"
        logger.warning("Run stopped: %s", e)
    return get_flattened_series(rows), snapshots, stop_reason


def _fit(series, spec, growth):
    try:
        return fit_rate(series["t"].to_numpy(), series["h1_weighted"].to_numpy(), spec.fit_window, growth=growth)
    except DegenerateSeries as e:
        logger.warning("Rate fit failed: %s", e)
        return None


def _finish(report, output_dir):
    if output_dir is None:
        return report
    run_dir = Path(output_dir)
    report.run_dir = write_run_dir(run_dir, report.manifest, report.series, report.verdict, report.snapshots)
    return report


def run_stability(spec, stationary=None, output_dir=None, delta=None, dt=None):
    """
    Evolve a perturbation supported in xi1 <= -r + epsilon and check its decay.

    PASS iff the fitted decay rate is positive with R^2 > 0.95 and the
    perturbation support never passes -r + 2 epsilon + 2 dv.

    Returns:
        RunReport: verdict, series and snapshots.
    """
    stationary = stationary or prepare_sheath(spec)
    end_state = stationary.end_state
    budget = check_asp1(end_state, spec.beta, spec.epsilon)
    if not budget.positive_definite:
        logger.warning("Stability condition fails for this run (margin %.4g)", budget.asp1_lhs)
    x, xi1 = phase_space_grid(stationary, spec.evolve)
    initial = build_initial_field(stationary, spec, x, xi1, delta)
    logger.info("Stability run: delta=%g beta=%g epsilon=%g", spec.evolve.perturbation.delta if delta is None else delta, spec.beta, spec.epsilon)
    series, snapshots, _ = _run_series(spec, stationary, initial, dt=dt)
    dv = float(xi1[1] - xi1[0])
    bound = -end_state.config.r + 2 * spec.epsilon + 2 * dv
    supp_max = series["supp_max_xi"].dropna()
    support_ok = bool(supp_max.empty or supp_max.max() <= bound)
    fit = _fit(series, spec, growth=False)
    passed = bool(fit is not None and fit.gamma > 0 and fit.r_squared > PASS_R_SQUARED and support_ok)
    verdict = {
        "experiment": "stability",
        "verdict": "PASS" if passed else "FAIL",
        "gamma_fit": fit.gamma if fit else None,
        "r_squared": fit.r_squared if fit else None,
        "slope": fit.slope if fit else None,
        "intercept": fit.intercept if fit else None,
        "support_bound": bound,
        "support_max": float(supp_max.max()) if not supp_max.empty else None,
        "support_ok": support_ok,
        "asp1_margin": budget.asp1_lhs,
        "max_mass_drift": float(series["mass_drift"].abs().max()) if not series.empty else 0.0,
    }
    logger.info("Stability verdict: %s (gamma=%s)", verdict["verdict"], verdict["gamma_fit"])
    report = RunReport("stability", verdict, series, _manifest(spec, stationary, x, xi1, dt), snapshots, fit)
    return _finish(report, output_dir)


def escape_time(series, threshold):
    """First t where h1_weighted reaches threshold, log-linearly interpolated; inf if never."""
    t = series["t"].to_numpy()
    h = series["h1_weighted"].to_numpy()
    above = np.nonzero(h >= threshold)[0]
    if above.size == 0:
        return math.inf
    k = int(above[0])
    if k == 0:
        return float(t[0])
    lo, hi = math.log(h[k - 1]), math.log(h[k])
    if hi == lo:
        return float(t[k])
    return float(t[k - 1] + (math.log(threshold) - lo) / (hi - lo) * (t[k] - t[k - 1]))


def _instability_series(spec, stationary, x, xi1, delta, threshold, dt):
    initial = build_initial_field(stationary, spec, x, xi1, delta)
    band = (-stationary.end_state.config.r / 2, spec.r1 / 2)
    return _run_series(spec, stationary, initial, dt=dt, band=band, stop_at=threshold)


def run_instability(spec, stationary=None, output_dir=None, dt=None):
    """
    Evolve a perturbation supported in R1 <= xi1 <= R2 until its weighted norm escapes.

    The escape threshold is escape_amplification times the initial norm of this run.
    A companion run at delta * escape_check_ratio, measured against the same
    threshold, must escape later.
    """
    stationary = stationary or prepare_sheath(spec)
    x, xi1 = phase_space_grid(stationary, spec.evolve, r2=spec.r2)
    delta = spec.evolve.perturbation.delta
    threshold = spec.escape_amplification * delta
    logger.info("Instability run: delta=%g threshold=%.4g band=[%g, %g]", delta, threshold, spec.r1, spec.r2)
    series, snapshots, stop = _instability_series(spec, stationary, x, xi1, delta, threshold, dt)
    T = escape_time(series, threshold) if delta > 0 else math.inf
    companion_T = None
    if spec.escape_check_ratio is not None and delta > 0:
        companion, _, _ = _instability_series(spec, stationary, x, xi1, delta * spec.escape_check_ratio, threshold, dt)
        companion_T = escape_time(companion, threshold)
    dv = float(xi1[1] - xi1[0])
    bound = 2 * spec.r2 + 2 * dv
    supp_max = series["supp_max_xi"].dropna()
    band_empty = not bool(series["band_occupied"].any()) if not series.empty else True
    support_ok = bool(supp_max.empty or supp_max.max() <= bound)
    fit = _fit(series, spec, growth=True)
    ordered = companion_T is None or companion_T > T
    passed = bool(
        fit is not None and fit.gamma > 0 and fit.r_squared > PASS_R_SQUARED and band_empty and support_ok and ordered
    )
    verdict = {
        "experiment": "instability",
        "verdict": "PASS" if passed else "FAIL",
        "gamma_fit": fit.gamma if fit else None,
        "r_squared": fit.r_squared if fit else None,
        "slope": fit.slope if fit else None,
        "intercept": fit.intercept if fit else None,
        "escape_threshold": threshold,
        "escape_time": T,
        "companion_escape_time": companion_T,
        "stop_reason": stop,
        "band": [-stationary.end_state.config.r / 2, spec.r1 / 2],
        "band_empty": band_empty,
        "support_bound": bound,
        "support_ok": support_ok,
    }
    logger.info("Instability verdict: %s (T=%s, companion T=%s)", verdict["verdict"], T, companion_T)
    report = RunReport("instability", verdict, series, _manifest(spec, stationary, x, xi1, dt), snapshots, fit)
    return _finish(report, output_dir)


def bohm_row(config, phi_max=None):
    """K, sup B and the solvability verdict for one configuration."""
    row = {"u_infty": config.u_infty, "phi_b": config.phi_b, "K": math.nan, "sup_B": math.nan,
           "solvable": False, "verdict": "", "error": None, "message": None}
    end_state = normalize_quasi_neutral(config)
    K = bohm_integral(end_state)
    row["K"] = K
    if K >= 1:
        row["verdict"] = "no stationary solution (Bohm violated)"
        return row
    potential = sagdeev(end_state, phi_max=phi_max or max(4.0, 4.0 * config.phi_b))
    bar = sup_B(potential)
    row["sup_B"] = bar
    row["solvable"] = bool(config.phi_b < bar)
    row["verdict"] = "solvable" if row["solvable"] else "no stationary solution (phi_b >= sup B)"
    return row


def _safe_row(base, u, phi_max):
    try:
        return bohm_row(base.replace(u_infty=float(u)), phi_max)
    except SheathKitError as e:
        logger.warning("Scan row u=%g failed: %s", u, e)
        return {"u_infty": float(u), "phi_b": base.phi_b, "K": math.nan, "sup_B": math.nan, "solvable": False,
                "verdict": "error", "error": type(e).__name__, "message": str(e)}


def run_bohm_scan(base, u_values, phi_max=None, max_workers=4):
    """
    One row per drift velocity: K, sup B and solvability at base.phi_b.

    Rows that raise are recorded with error and message columns. Rows come
    back in the order of u_values whatever the pool does.

    Returns:
        pd.DataFrame: The scan table.
    """
    if len(u_values) == 0:
        raise InvalidConfig("bohm scan needs at least one u value")
    row_for = partial(_safe_row, base, phi_max=phi_max)
    if max_workers == 1:
        rows = [row_for(u) for u in u_values]
    else:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(row_for, u_values))
    logger.info("Bohm scan finished: %d rows, %d solvable", len(rows), sum(r["solvable"] for r in rows))
    return get_flattened_scan(rows)


def find_bohm_transition(base, u_lo, u_hi, tol=1e-4, phi_max=None):
    """
    Bisect the drift velocity where solvability at base.phi_b switches.

    Raises:
        InvalidConfig: if both ends share the same verdict.
    """
    def solvable(u):
        return _safe_row(base, u, phi_max)["solvable"]

    s_lo, s_hi = solvable(u_lo), solvable(u_hi)
    if s_lo == s_hi:
        raise InvalidConfig(f"no solvability change between u={u_lo} and u={u_hi}")
    while abs(u_hi - u_lo) > tol:
        mid = 0.5 * (u_lo + u_hi)
        if solvable(mid) == s_lo:
            u_lo = mid
        else:
            u_hi = mid
    u_star = 0.5 * (u_lo + u_hi)
    logger.info("Bohm transition at u=%.6f (phi_b=%g)", u_star, base.phi_b)
    return u_star


def run_stationary(spec, grid_spec=None):
    """Build only the stationary sheath; NotSolvable propagates."""
    stationary = prepare_sheath(spec, grid_spec)
    logger.info("Stationary sheath: sup B=%.6g decay rate=%.6g", stationary.sup_B, stationary.decay_rate)
    return stationary


def run_experiment(spec, output_dir=None):
    """Dispatch on spec.experiment."""
    if spec.experiment == "stability":
        return run_stability(spec, output_dir=output_dir)
    if spec.experiment == "instability":
        return run_instability(spec, output_dir=output_dir)
    if spec.experiment == "bohm_scan":
        return run_bohm_scan(spec.plasma, spec.u_values)
    if spec.experiment == "stationary_only":
        return run_stationary(spec)
    raise InvalidConfig(f"unknown experiment {spec.experiment!r}")
