from pathlib import Path

import streamlit as st

from utils.extractors.data_fetcher import fetch_table_csv
from utils.extractors.data_flatten import SCAN_FIRST_COLS
from utils.page_components import add_common_page_elements
from utils.renders.graph_renders import plot_bohm_scan


@st.cache_data(show_spinner=False)
def get_scan(path):
    return fetch_table_csv(path)


sidebar_container = add_common_page_elements()
st.title("Bohm Criterion Scan")

with sidebar_container:
    scan_path = Path(st.text_input("Scan CSV", value="runs/bohm_scan.csv"))

if not scan_path.is_file():
    st.warning(f"`{scan_path}` does not exist yet.")
    st.stop()

scan = get_scan(str(scan_path))
missing = set(SCAN_FIRST_COLS) - set(scan.columns)
if missing:
    st.error(f"`{scan_path}` is not a scan table (missing {sorted(missing)}).")
    st.stop()

col1, col2, col3 = st.columns(3)
col1.metric("Rows", len(scan))
col2.metric("Solvable", int(scan["solvable"].sum()))
col3.metric("Errors", int(scan["error"].notna().sum()))

st.plotly_chart(plot_bohm_scan(scan), use_container_width=True)
st.dataframe(scan, use_container_width=True)
