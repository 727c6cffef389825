from pathlib import Path

import streamlit as st

from utils.extractors.data_fetcher import fetch_table_csv
from utils.page_components import add_common_page_elements
from utils.renders.graph_renders import plot_potential_profile, plot_sagdeev


@st.cache_data(show_spinner=False)
def get_table(path):
    return fetch_table_csv(path)


sidebar_container = add_common_page_elements()
st.title("Stationary Profile")
st.caption("Reads the CSV written by `sheathkit.py stationary --out <file>` and its `_sagdeev` companion.")

with sidebar_container:
    profile_path = Path(st.text_input("Profile CSV", value="runs/stationary.csv"))

if not profile_path.is_file():
    st.warning(f"`{profile_path}` does not exist yet.")
    st.stop()

profile = get_table(str(profile_path))
missing = {"x", "phi_s"} - set(profile.columns)
if missing:
    st.error(f"`{profile_path}` is not a stationary profile (missing {sorted(missing)}).")
    st.stop()

col1, col2 = st.columns(2)
col1.metric("Φ_b", f"{profile['phi_s'].iloc[0]:.4g}")
col2.metric("x_max", f"{profile['x'].iloc[-1]:.4g}")
st.plotly_chart(plot_potential_profile(profile), use_container_width=True)

sagdeev_path = profile_path.with_name(profile_path.stem + "_sagdeev.csv")
if sagdeev_path.is_file():
    st.plotly_chart(plot_sagdeev(get_table(str(sagdeev_path)), phi_b=float(profile["phi_s"].iloc[0])), use_container_width=True)
else:
    st.warning("No Sagdeev table next to the profile.")
