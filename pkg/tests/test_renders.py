import math

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from utils.renders.graph_renders import (
    plot_bohm_scan,
    plot_norm_series,
    plot_phase_space,
    plot_potential_profile,
    plot_sagdeev,
)
from utils.renders.text_renders import format_value, verdict_markdown


def test_format_value():
    assert format_value(None) == "n/a"
    assert format_value(math.inf) == "∞"
    assert format_value(0.123456) == "0.1235"
    assert format_value(True) == "True"


def test_verdict_markdown():
    text = verdict_markdown({"experiment": "stability", "verdict": "PASS", "gamma_fit": 0.5, "support_ok": True})
    assert text.splitlines()[0] == "✅ **stability: PASS**"
    assert "- **gamma_fit**: 0.5" in text
    assert verdict_markdown({}) == "_No verdict recorded_"
    assert verdict_markdown({"verdict": "FAIL"}).startswith("❌")


def test_norm_series_figure_draws_the_fit():
    t = np.linspace(0.0, 1.0, 5)
    series = pd.DataFrame({"t": t, "h1_weighted": np.exp(-t)})
    fig = plot_norm_series(series, {"gamma_fit": 2.0, "slope": -1.0, "intercept": 0.0})
    assert isinstance(fig, go.Figure)
    assert len(fig.data) == 2
    np.testing.assert_allclose(fig.data[1].y, np.exp(-t))
    assert len(plot_norm_series(series, {"gamma_fit": None}).data) == 1


def test_profile_and_sagdeev_figures():
    profile = pd.DataFrame({"x": [0.0, 1.0], "phi_s": [1.0, 0.5], "ion_density": [0.9, 0.95], "electron_density": [0.4, 0.6]})
    assert len(plot_potential_profile(profile).data) == 3
    sagdeev_df = pd.DataFrame({"phi": [0.0, 1.0], "V": [0.0, 0.1]})
    assert len(plot_sagdeev(sagdeev_df, sup_b=math.inf, phi_b=0.5).data) == 1


def test_phase_space_figure():
    snapshot = {"t": np.float64(0.5), "x": np.arange(3.0), "xi1": np.arange(2.0), "g": np.ones((3, 2))}
    fig = plot_phase_space(snapshot, reference=np.ones((3, 2)))
    np.testing.assert_array_equal(np.asarray(fig.data[0].z), 0.0)
    assert fig.layout.title.text == "Phase space at t = 0.5"


def test_bohm_scan_figure():
    scan = pd.DataFrame({
        "u_infty": [-3.0, -0.9],
        "K": [0.1, 1.2],
        "sup_B": [math.inf, math.nan],
        "verdict": ["solvable", "no stationary solution (Bohm violated)"],
    })
    fig = plot_bohm_scan(scan)
    assert list(fig.data[1].marker.color) == ["green", "red"]
