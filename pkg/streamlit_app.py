"""
Entrypoint for streamlit app.
Runs top to bottom every time the user interacts with the app (other than imports and cached functions).

pip install -r requirements.txt
streamlit run streamlit_app.py
"""

import streamlit as st

from utils.page_components import add_common_page_elements

sidebar_container = add_common_page_elements()

displaytext = """## Kinetic Sheath Reports"""

st.markdown(displaytext)

displaytext = (
    """This viewer reads finished runs written by `sheathkit.py`. It does not start or steer runs. \n\n"""
    """**Run Reports** shows the verdict, manifest and norm history of a stability or instability run. \n\n"""
    """**Stationary Profile** plots the potential, densities and Sagdeev curve of a `stationary` export. \n\n"""
    """**Bohm Scan** tabulates K, sup B and the solvability verdict over drift velocities. \n\n"""
)

st.markdown(displaytext)

st.code(
    "python sheathkit.py stability --config data/examples/stability.toml --out-dir runs\n"
    "python sheathkit.py stationary --config data/examples/stationary.toml --out runs/stationary.csv\n"
    "python sheathkit.py bohm-scan --config data/examples/bohm_scan.json --out runs/bohm_scan.csv",
    language="bash",
)
