import streamlit as st

from utils.extractors.data_fetcher import fetch_run_dir, fetch_snapshot, list_run_dirs
from utils.page_components import add_common_page_elements, select_runs_root
from utils.plasma.errors import InvalidConfig
from utils.renders.graph_renders import render_norm_series, render_phase_space
from utils.renders.text_renders import render_verdict


@st.cache_data(show_spinner=False)
def get_run(run_dir):
    return fetch_run_dir(run_dir)


@st.cache_data(show_spinner=False)
def get_snapshot(path):
    return fetch_snapshot(path)


sidebar_container = add_common_page_elements()
st.title("Run Reports")

runs_root = select_runs_root(sidebar_container)
run_dirs = list_run_dirs(runs_root)
if not run_dirs:
    st.warning(f"No run directories under `{runs_root}`.")
    st.stop()

selected = st.selectbox("Run", run_dirs, format_func=lambda p: p.name)
try:
    run = get_run(str(selected))
except InvalidConfig as e:
    st.error(str(e))
    st.stop()

render_verdict(run["verdict"])

series = run["series"]
if series is None or series.empty:
    st.warning("This run has no diagnostics series.")
else:
    render_norm_series(series, run["verdict"])
    with st.expander("Series table"):
        st.dataframe(series, use_container_width=True)

snapshots = run["snapshots"]
if snapshots:
    k = st.slider("Snapshot", 0, len(snapshots) - 1, len(snapshots) - 1)
    snapshot = get_snapshot(str(snapshots[k]))
    show_difference = st.checkbox("Subtract the first snapshot", value=True)
    reference = get_snapshot(str(snapshots[0]))["g"] if show_difference else None
    render_phase_space(snapshot, reference)

with st.expander("Manifest"):
    st.json(run["manifest"], expanded=False)
