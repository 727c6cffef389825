import json
import logging
import math
import platform
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

logger = logging.getLogger(__name__)

SERIES_FIRST_COLS = [
    "t",
    "l2_weighted",
    "h1_weighted",
    "n_l2_weighted",
    "energy",
    "supp_min_xi",
    "supp_max_xi",
    "boundary_outflux",
    "mass_total",
]

SCAN_FIRST_COLS = ["u_infty", "K", "sup_B", "phi_b", "solvable", "verdict", "error", "message"]


def _finite_or_none(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


# Extract and reshape data
def flatten_series_row(t, norms, n_l2, energy, support, fluxes, mass, mass_drift):
    base = {
        "t": t,
        "l2_weighted": norms.l2,
        "h1_weighted": norms.h1,
        "n_l2_weighted": n_l2,
        "energy": energy,
        "supp_min_xi": support.xi_min,
        "supp_max_xi": support.xi_max,
        "boundary_outflux": fluxes.wall_outflux,
        "mass_total": mass,
        # Extra columns
        "far_influx": fluxes.far_influx,
        "mass_drift": mass_drift,
        "dissipation": norms.dissipation,
        "band_occupied": support.band_occupied,
        "band_mass": support.band_mass,
        "corner_mass": support.corner_mass,
    }
    return base


def get_flattened_series(rows):
    """
    Diagnostics rows as a DataFrame with the standard columns first.

    Args:
        rows (list): Dicts from flatten_series_row.

    Returns:
        pd.DataFrame: One row per snapshot.
    """
    series_df = pd.DataFrame(rows)
    if series_df.empty:
        return pd.DataFrame(columns=SERIES_FIRST_COLS)
    remaining_cols = [col for col in series_df.columns if col not in SERIES_FIRST_COLS]
    return series_df[SERIES_FIRST_COLS + remaining_cols].reset_index(drop=True)


def get_flattened_scan(rows):
    scan_df = pd.DataFrame(rows)
    for col in SCAN_FIRST_COLS:
        if col not in scan_df.columns:
            scan_df[col] = None
    remaining_cols = [col for col in scan_df.columns if col not in SCAN_FIRST_COLS]
    return scan_df[SCAN_FIRST_COLS + remaining_cols].reset_index(drop=True)


def get_flattened_stationary(stationary):
    """Phi^s, its field and both densities on the stationary grid."""
    return pd.DataFrame({
        "x": stationary.x,
        "phi_s": stationary.phi_s,
        "dphi_s": stationary.dphi_s,
        "ion_density": stationary.ion_density_profile(),
        "electron_density": stationary.electron_density_profile(),
    })


def get_flattened_sagdeev(potential):
    return pd.DataFrame({"phi": potential.phi, "V": potential.values, "dV": potential.derivative})


def package_versions():
    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "pandas": pd.__version__,
    }


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return to_jsonable(obj.item())
    return _finite_or_none(obj)


def write_json(path, data):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(to_jsonable(data), f, indent=2, sort_keys=True)


def write_snapshot(path, t, x, xi1, phi, g):
    np.savez(path, t=np.float64(t), x=x, xi1=xi1, phi=np.zeros_like(x) if phi is None else phi, g=np.ascontiguousarray(g))


def write_run_dir(out_dir, manifest, series_df, verdict, snapshots=()):
    """
    Write manifest.json, series.csv, snapshots/snapshot_<k>.npz and verdict.json.

    Args:
        out_dir (str | Path): Run directory, created if needed.
        manifest (dict): Resolved config, grids and versions.
        series_df (pd.DataFrame): Diagnostics series.
        verdict (dict): Run verdict.
        snapshots (iterable): Dicts with k, t, x, xi1, phi, g.

    Returns:
        Path: The run directory.
    """
    out_dir = Path(out_dir)
    (out_dir / "snapshots").mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "manifest.json", {**manifest, "versions": package_versions()})
    series_df.to_csv(out_dir / "series.csv", index=False)
    for snap in snapshots:
        write_snapshot(out_dir / "snapshots" / f"snapshot_{snap['k']}.npz", snap["t"], snap["x"], snap["xi1"], snap["phi"], snap["g"])
    write_json(out_dir / "verdict.json", verdict)
    logger.info("Run written to %s", out_dir)
    return out_dir
