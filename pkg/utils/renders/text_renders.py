import math

import streamlit as st


def format_value(value):
    if value is None:
        return "n/a"
    if isinstance(value, float):
        if math.isinf(value):
            return "∞"
        return f"{value:.4g}"
    return str(value)


def verdict_markdown(verdict):
    """A run verdict as a markdown bullet list, verdict first."""
    if not verdict:
        return "_No verdict recorded_"
    head = verdict.get("verdict", "n/a")
    badge = "✅" if head == "PASS" else "❌"
    lines = [f"{badge} **{verdict.get('experiment', 'run')}: {head}**", ""]
    for key in sorted(k for k in verdict if k not in ("verdict", "experiment")):
        lines.append(f"- **{key}**: {format_value(verdict[key])}")
    return "\n".join(lines)


def render_verdict(verdict):
    st.markdown(verdict_markdown(verdict))
