import json

import pandas as pd
import pytest

from utils.cli import build_parser, main

WARM = 'u_infty = -2.0\ntheta_infty = 0.25\nr = 0.5\nsigma = 0.1\nphi_b = 0.1\n'


def _json_out(capsys):
    return json.loads(capsys.readouterr().out)


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_stationary_writes_profile_and_sagdeev(examples_dir, tmp_path, capsys):
    out = tmp_path / "stationary.csv"
    assert main(["stationary", "--config", str(examples_dir / "stationary.toml"), "--out", str(out)]) == 0
    summary = _json_out(capsys)
    assert summary["solvable"] is True
    assert summary["bohm_integral"] < 1
    profile = pd.read_csv(out)
    assert list(profile.columns) == ["x", "phi_s", "dphi_s", "ion_density", "electron_density"]
    assert profile["phi_s"].iloc[0] == pytest.approx(1.0)
    assert (tmp_path / "stationary_sagdeev.csv").is_file()


def test_stationary_reports_unsolvable_configs(tmp_path, capsys):
    config = tmp_path / "high.toml"
    config.write_text(
        'u_infty = -2.0\ntheta_infty = 0.01\nr = 0.5\nsigma = 0.1\nphi_b = 5.0\n'
        'electron_model = "power_law"\nelectron_exponent = 0.1\n'
    )
    assert main(["stationary", "--config", str(config)]) == 0
    summary = _json_out(capsys)
    assert summary["solvable"] is False
    assert summary["reason"] == "PhiBTooLarge"
    assert main(["check-elliptic", "--config", str(config)]) == 2


def test_configuration_errors_exit_with_one(examples_dir, tmp_path):
    assert main(["stationary", "--config", str(tmp_path / "missing.toml")]) == 1
    # r = 0.5 leaves no room for the default epsilon of a stability run
    assert main(["stability", "--config", str(examples_dir / "stationary.toml"), "--out-dir", str(tmp_path)]) == 1


def test_select_constants(tmp_path, capsys):
    config = tmp_path / "fast.toml"
    config.write_text('u_infty = -4.0\ntheta_infty = 1.0\nr = 1.5\nsigma = 0.25\n')
    assert main(["select-constants", "--config", str(config), "--mode", "ii"]) == 0
    choice = _json_out(capsys)
    assert choice["mode"] == "ii"
    assert choice["margin"] > 0


def test_bohm_scan_writes_a_table(tmp_path, capsys):
    config = tmp_path / "scan.json"
    config.write_text(json.dumps({
        "u_infty": -2.0, "theta_infty": 0.01, "r": 0.5, "sigma": 0.1, "phi_b": 2.0,
        "electron_model": "power_law", "electron_exponent": 0.1,
        "experiment": {"u_values": [-2.0, -1.5]},
    }))
    out = tmp_path / "scan.csv"
    assert main(["bohm-scan", "--config", str(config), "--out", str(out), "--workers", "1", "--transition"]) == 0
    summary = _json_out(capsys)
    assert summary["rows"] == 2 and summary["solvable"] == 1
    assert -2.0 < summary["transition_u"] < -1.5
    assert pd.read_csv(out)["solvable"].tolist() == [True, False]


def test_check_elliptic(tmp_path, capsys):
    config = tmp_path / "warm.toml"
    config.write_text(WARM)
    assert main(["check-elliptic", "--config", str(config), "--beta", "0.5"]) == 0
    report = _json_out(capsys)
    assert report["bounds"]["holds"] is True
    assert report["elliptic"]["beta"] == 0.5
    assert report["residual"] < 1e-10
