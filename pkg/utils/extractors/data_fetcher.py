# utils/extractors/data_fetcher.py
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path

import numpy as np
import pandas as pd

from utils.plasma.config import experiment_spec_from_dict, plasma_config_from_dict
from utils.plasma.errors import InvalidConfig

logger = logging.getLogger(__name__)


def fetch_json(path):
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def fetch_config_dict(path):
    """
    Read a JSON or TOML config file, chosen by suffix.

    Raises:
        InvalidConfig: for a missing file, an unknown suffix or a parse error.
    """
    path = Path(path)
    if not path.is_file():
        raise InvalidConfig(f"config file not found: {path}")
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        if path.suffix == ".json":
            return fetch_json(path)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise InvalidConfig(f"cannot parse {path}: {e}") from e
    raise InvalidConfig(f"config must be .json or .toml, got {path.suffix!r}")


def fetch_plasma_config(path):
    return plasma_config_from_dict(fetch_config_dict(path))


def fetch_experiment_spec(path, extra_path=None, experiment=None):
    """
    Read an experiment spec.

    Args:
        path (str | Path): Config with the plasma keys and optional tables.
        extra_path (str | Path): Second file whose tables are merged key by key over the first.
        experiment (str): Overrides [experiment].experiment when given.
    """
    data = fetch_config_dict(path)
    if extra_path is not None:
        for key, value in fetch_config_dict(extra_path).items():
            data[key] = {**data.get(key, {}), **value} if isinstance(value, dict) else value
    if experiment is not None:
        data["experiment"] = {**data.get("experiment", {}), "experiment": experiment}
    logger.info("Loaded experiment spec from %s", path)
    return experiment_spec_from_dict(data)


def fetch_run_dir(run_dir):
    """
    Read a finished run directory.

    Returns:
        dict: manifest, verdict (dicts), series (DataFrame or None) and the sorted snapshot paths.
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / "manifest.json"
    if not manifest_path.is_file():
        raise InvalidConfig(f"{run_dir} is not a run directory (no manifest.json)")
    verdict_path = run_dir / "verdict.json"
    series_path = run_dir / "series.csv"
    snapshots = sorted((run_dir / "snapshots").glob("snapshot_*.npz"), key=lambda p: int(p.stem.split("_")[-1]))
    return {
        "manifest": fetch_json(manifest_path),
        "verdict": fetch_json(verdict_path) if verdict_path.is_file() else {},
        "series": pd.read_csv(series_path) if series_path.is_file() else None,
        "snapshots": snapshots,
    }


def fetch_snapshot(path):
    """A snapshot as a dict of arrays: t, x, xi1, phi, g."""
    with np.load(path) as data:
        return {key: data[key] for key in data.files}


def fetch_table_csv(path):
    return pd.read_csv(path)


def list_run_dirs(root):
    root = Path(root)
    if not root.is_dir():
        return []
    return sorted(p for p in root.iterdir() if (p / "manifest.json").is_file())
