import json
import math

import numpy as np
import pandas as pd
import pytest

from utils.extractors.data_fetcher import (
    fetch_config_dict,
    fetch_experiment_spec,
    fetch_run_dir,
    fetch_snapshot,
    fetch_table_csv,
    list_run_dirs,
)
from utils.extractors.data_flatten import (
    SCAN_FIRST_COLS,
    SERIES_FIRST_COLS,
    flatten_series_row,
    get_flattened_sagdeev,
    get_flattened_scan,
    get_flattened_series,
    get_flattened_stationary,
    to_jsonable,
    write_run_dir,
)
from utils.plasma.diagnostics import WeightedNorms
from utils.plasma.errors import InvalidConfig
from utils.plasma.vlasov import BoundaryFluxes, SupportBox


def test_fetch_config_dict_by_suffix(tmp_path):
    (tmp_path / "a.toml").write_text('u_infty = -2.0\n[evolve]\nnx = 64\n')
    (tmp_path / "a.json").write_text(json.dumps({"u_infty": -2.0}))
    assert fetch_config_dict(tmp_path / "a.toml") == {"u_infty": -2.0, "evolve": {"nx": 64}}
    assert fetch_config_dict(tmp_path / "a.json") == {"u_infty": -2.0}


@pytest.mark.parametrize(
    "name, text",
    [("missing.toml", None), ("bad.toml", "u_infty = "), ("bad.json", "{"), ("config.yaml", "u_infty: -2")],
)
def test_fetch_config_dict_errors(tmp_path, name, text):
    path = tmp_path / name
    if text is not None:
        path.write_text(text)
    with pytest.raises(InvalidConfig):
        fetch_config_dict(path)


def test_fetch_experiment_spec_merges_extra_tables(examples_dir, tmp_path):
    extra = tmp_path / "coarse.toml"
    extra.write_text("[evolve]\nnx = 64\n\n[experiment]\nbeta = 0.4\n")
    spec = fetch_experiment_spec(examples_dir / "stability.toml", extra)
    assert spec.experiment == "stability"
    assert spec.evolve.nx == 64
    assert spec.evolve.nv == 256
    assert spec.beta == 0.4
    assert spec.epsilon == 0.25
    assert spec.evolve.perturbation.delta == 1e-3
    only = fetch_experiment_spec(examples_dir / "stability.toml", experiment="stationary_only")
    assert only.experiment == "stationary_only"
    assert only.plasma.u_infty == -8.0


def _row(t):
    norms = WeightedNorms(0.5, 1.0, 0.1, 0.2, 0.3, 1.1, 0.4, 0.5)
    support = SupportBox(empty=False, xi_min=-3.0, xi_max=-1.5)
    return flatten_series_row(t, norms, 0.01, 2.0, support, BoundaryFluxes(0.2, 0.1), 1.0, 0.0)


def test_series_columns_come_first():
    df = get_flattened_series([_row(0.0), _row(0.5)])
    assert list(df.columns[: len(SERIES_FIRST_COLS)]) == SERIES_FIRST_COLS
    assert df["h1_weighted"].tolist() == [1.1, 1.1]
    assert "mass_drift" in df.columns
    assert list(get_flattened_series([]).columns) == SERIES_FIRST_COLS


def test_scan_columns_are_filled():
    df = get_flattened_scan([{"u_infty": -2.0, "K": 0.3, "extra": 1}])
    assert list(df.columns) == SCAN_FIRST_COLS + ["extra"]
    assert df.loc[0, "error"] is None


def test_to_jsonable():
    data = {"a": np.float64(1.5), "b": np.array([1.0, math.nan]), "c": (np.int64(2), math.inf), 3: np.bool_(True)}
    assert to_jsonable(data) == {"a": 1.5, "b": [1.0, None], "c": [2, None], "3": True}


def test_run_dir_round_trip(tmp_path):
    x = np.linspace(0.0, 1.0, 4)
    xi1 = np.linspace(-1.0, 1.0, 3)
    snapshots = [
        {"k": k, "t": 0.1 * k, "x": x, "xi1": xi1, "phi": None if k == 0 else x, "g": np.full((4, 3), float(k))}
        for k in (0, 2, 10)
    ]
    series = get_flattened_series([_row(0.0), _row(0.1)])
    out = write_run_dir(tmp_path / "demo", {"spec": {"beta": 0.5}}, series, {"verdict": "PASS"}, snapshots)
    run = fetch_run_dir(out)
    assert run["verdict"] == {"verdict": "PASS"}
    assert run["manifest"]["spec"] == {"beta": 0.5}
    pd.testing.assert_frame_equal(run["series"], series, check_dtype=False)
    assert [p.name for p in run["snapshots"]] == ["snapshot_0.npz", "snapshot_2.npz", "snapshot_10.npz"]
    snap = fetch_snapshot(run["snapshots"][-1])
    assert float(snap["t"]) == pytest.approx(1.0)
    np.testing.assert_array_equal(snap["g"], 10.0)
    np.testing.assert_array_equal(fetch_snapshot(run["snapshots"][0])["phi"], 0.0)
    assert list_run_dirs(tmp_path) == [out]
    assert list_run_dirs(tmp_path / "nowhere") == []


def test_fetch_run_dir_needs_a_manifest(tmp_path):
    with pytest.raises(InvalidConfig):
        fetch_run_dir(tmp_path)


def test_stationary_tables(warm_stationary, tmp_path):
    profile = get_flattened_stationary(warm_stationary)
    assert list(profile.columns) == ["x", "phi_s", "dphi_s", "ion_density", "electron_density"]
    assert len(profile) == warm_stationary.x.size
    assert profile["ion_density"].iloc[-1] == pytest.approx(1.0, rel=1e-7)
    sagdeev_df = get_flattened_sagdeev(warm_stationary.potential)
    assert list(sagdeev_df.columns) == ["phi", "V", "dV"]
    profile.to_csv(tmp_path / "profile.csv", index=False)
    assert fetch_table_csv(tmp_path / "profile.csv").shape == profile.shape
