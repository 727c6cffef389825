import numpy as np
import pandas as pd
import plotly.graph_objects as go
import streamlit as st

VERDICT_COLORS = {
    "solvable": "green",
    "no stationary solution (Bohm violated)": "red",
    "no stationary solution (phi_b >= sup B)": "orange",
    "error": "grey",
}


def plot_potential_profile(profile_df):
    """Phi^s and the two densities against x."""
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=profile_df["x"], y=profile_df["phi_s"], mode="lines", name="Φˢ"))
    for col, label in (("ion_density", "ion density"), ("electron_density", "electron density")):
        if col in profile_df.columns:
            fig.add_trace(go.Scatter(x=profile_df["x"], y=profile_df[col], mode="lines", name=label, yaxis="y2"))
    fig.update_layout(
        title="Stationary sheath",
        xaxis_title="x",
        yaxis=dict(title="potential"),
        yaxis2=dict(title="density", overlaying="y", side="right"),
        height=400,
    )
    return fig


def plot_sagdeev(sagdeev_df, sup_b=None, phi_b=None):
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=sagdeev_df["phi"], y=sagdeev_df["V"], mode="lines", name="V(φ)"))
    fig.add_hline(y=0, line=dict(color="grey", dash="dot"))
    if sup_b is not None and np.isfinite(sup_b):
        fig.add_vline(x=sup_b, line=dict(color="red", dash="dash"), annotation_text="sup B")
    if phi_b is not None:
        fig.add_vline(x=phi_b, line=dict(color="goldenrod", dash="dot"), annotation_text="Φ_b")
    fig.update_layout(title="Sagdeev potential", xaxis_title="φ", yaxis_title="V", height=350)
    return fig


def plot_phase_space(snapshot, reference=None):
    """Heat map of g, or of g - reference when a reference array is given."""
    values = snapshot["g"] if reference is None else snapshot["g"] - reference
    fig = go.Figure(go.Heatmap(
        x=snapshot["x"],
        y=snapshot["xi1"],
        z=np.asarray(values).T,
        colorscale="RdBu" if reference is not None else "Viridis",
        colorbar=dict(title="g" if reference is None else "g - gˢ"),
    ))
    fig.update_layout(
        title=f"Phase space at t = {float(snapshot['t']):.3g}",
        xaxis_title="x",
        yaxis_title="ξ₁",
        height=450,
    )
    return fig


def plot_norm_series(series_df, fit=None, column="h1_weighted"):
    """Norm series on a log axis with the fitted exponential over its window."""
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=series_df["t"], y=series_df[column], mode="lines+markers", name=column))
    if fit is not None and fit.get("gamma_fit") is not None and fit.get("intercept") is not None:
        t = series_df["t"].to_numpy()
        slope = fit.get("slope")
        fig.add_trace(go.Scatter(
            x=t,
            y=np.exp(fit["intercept"] + slope * t),
            mode="lines",
            line=dict(dash="dash", color="red"),
            name=f"fit, γ = {fit['gamma_fit']:.3g}",
        ))
    fig.update_layout(title="Weighted norm", xaxis_title="t", yaxis_type="log", height=400)
    return fig


def plot_bohm_scan(scan_df):
    """K and sup B against u_infty, coloured by verdict."""
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=scan_df["u_infty"], y=scan_df["K"], mode="lines+markers", name="K"))
    colors = [VERDICT_COLORS.get(v, "grey") for v in scan_df["verdict"]]
    sup_b = pd.to_numeric(scan_df["sup_B"], errors="coerce").replace([np.inf], np.nan)
    fig.add_trace(go.Scatter(
        x=scan_df["u_infty"], y=sup_b, mode="markers", marker=dict(color=colors, size=10), name="sup B", yaxis="y2",
    ))
    fig.add_hline(y=1, line=dict(color="grey", dash="dot"))
    fig.update_layout(
        title="Bohm criterion scan",
        xaxis_title="u∞",
        yaxis=dict(title="K"),
        yaxis2=dict(title="sup B", overlaying="y", side="right"),
        height=400,
    )
    return fig


def render_norm_series(series_df, verdict):
    fig = plot_norm_series(series_df, verdict)
    st.subheader("Weighted norm history")
    st.plotly_chart(fig, use_container_width=True)


def render_phase_space(snapshot, reference=None):
    st.plotly_chart(plot_phase_space(snapshot, reference), use_container_width=True)
