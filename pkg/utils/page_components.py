"""
Page components for pages/*.py
"""

from pathlib import Path

import streamlit as st

THEME_CSS = Path("theme/theme.css")
DEFAULT_RUNS_ROOT = "runs"


def insert_local_css():
    """
    Injects the local CSS file into the app, if there is one.
    """
    if not THEME_CSS.is_file():
        return
    css = THEME_CSS.read_text()
    st.markdown(f"<style>{css}</style>", unsafe_allow_html=True)


def set_page_config():
    """
    Sets the page configuration for the app.
    """
    st.set_page_config(
        layout="wide",
        page_title="Sheath Reports",
        initial_sidebar_state="expanded",
    )


def add_page_selector():
    st.page_link("streamlit_app.py", label="Home")
    st.page_link("pages/run_reports.py", label="Run Reports")
    st.page_link("pages/stationary_profile.py", label="Stationary Profile")
    st.page_link("pages/bohm_scan.py", label="Bohm Scan")


def add_common_page_elements():
    """
    Sets page config, injects local CSS and adds the page selector.
    Returns a container that MUST be used instead of st.sidebar in the rest of the app.

    Returns:
        sidebar_container: A container in the sidebar to hold all other sidebar elements.
    """
    # Set page config must be the first st. function called
    set_page_config()
    insert_local_css()

    st.sidebar.markdown("Select a page:")

    page_selector_container = st.sidebar.container()
    sidebar_container = st.sidebar.container()

    with page_selector_container:
        add_page_selector()

    return sidebar_container


def select_runs_root(sidebar_container):
    with sidebar_container:
        return st.text_input("Runs directory", value=DEFAULT_RUNS_ROOT)
