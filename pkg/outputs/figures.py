# outputs/figures.py
"""
Plotly figure specifications for the CSV datasets.

Figures are returned as ``go.Figure`` objects and written as JSON with
``write_figure``; nothing is rendered here.
"""
from pathlib import Path

import numpy as np
import pandas as pd
import plotly.graph_objects as go

BRANCH_COLORS = {"plus": "#e74c3c", "minus": "#3498db"}


def spectrum_figure(frame: pd.DataFrame) -> go.Figure:
    """Eigenvalues in the complex plane, one trace per branch."""
    fig = go.Figure()
    for branch, color in BRANCH_COLORS.items():
        sel = frame[frame["branch"] == branch]
        fig.add_trace(go.Scatter(
            x=sel["re"],
            y=sel["im"],
            mode="markers",
            name=f"lambda {branch}",
            text=[f"k={k}" for k in sel["k"]],
            marker=dict(color=color, size=6),
        ))
    fig.add_vline(x=-1.0, line_dash="dash", line_color="gray", opacity=0.5)
    fig.update_layout(
        title="Spectrum of the moving-frame operator",
        xaxis_title="Re lambda",
        yaxis_title="Im lambda",
        height=500,
        hovermode="closest",
    )
    return fig


def control_figure(frame: pd.DataFrame) -> go.Figure:
    """Real part of h(t) per phase, as written by ``tables.phases_frame``."""
    fig = go.Figure()
    for phase, sel in frame.groupby("phase", sort=False):
        fig.add_trace(go.Scatter(
            x=sel["t"],
            y=sel["h_re"],
            mode="lines",
            name=str(phase),
            line=dict(width=2),
        ))
    fig.add_hline(y=0, line_dash="dash", line_color="gray", opacity=0.5)
    fig.update_layout(
        title="Null control h(t)",
        xaxis_title="t",
        yaxis_title="h",
        height=400,
        hovermode="x unified",
    )
    return fig


def family_norm_figure(norms: pd.DataFrame) -> go.Figure:
    """log10 ||psi|| against |k| for the hyperbolic and parabolic functions."""
    fig = go.Figure()
    for label, color in BRANCH_COLORS.items():
        sel = norms[norms["label"] == label]
        fig.add_trace(go.Scatter(
            x=np.abs(sel["k"]),
            y=np.log10(sel["norm"].clip(lower=1e-300)),
            mode="markers",
            name=f"psi {label}",
            marker=dict(color=color, size=7),
        ))
    fig.update_layout(
        title="Biorthogonal family norms",
        xaxis_title="|k|",
        yaxis_title="log10 ||psi||",
        height=400,
    )
    return fig


def write_figure(path, fig: go.Figure) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(fig.to_json(), encoding="utf-8")
    return path
