"""Tables behind each figure, computed from the closed-form model."""

from __future__ import annotations

from typing import Any, Callable

import numpy as np

from ..analytic import (
    ConstraintMode,
    PipelineParams,
    equal_info_peak,
    equal_info_quality_curve,
    expected_hire_quality,
    female_share_hires,
)
from .config import Key

NONE, EQUAL = ConstraintMode.NONE, ConstraintMode.EQUAL_SELECTION

FIGURE_KEYS = {
    "p_a": Key("float", 0.3, "female share of applicants"),
    "shortlist_rate": Key("float", 0.15, "fraction of applicants shortlisted"),
    "finalist_rate": Key("float", 0.2, "fraction of the shortlist hired"),
    "tau_h_rule": Key("str", "fixed", "fixed | refit"),
    "theta_grid": Key("floats", tuple(np.round(np.arange(0, 0.951, 0.05), 2)), "theta values"),
    "delta_grid": Key("floats", tuple(np.round(np.arange(-0.2, 0.201, 0.05), 2)), "delta values"),
    "delta_theta": Key("float", 0.4, "theta used by ph-vs-delta and ph-vs-alpha"),
    "thetaS": Key("float", 0.5, "corr(Q, Q^S) for eqh-vs-theta"),
    "thetaH": Key("float", 0.5, "corr(Q, Q^H) for eqh-vs-theta"),
    "info_thetaH": Key("floats", (0.3, 0.5, 0.7), "thetaH values for equal-info"),
    "info_H0": Key("float", 0.5, "conditional entropy level for equal-info"),
    "info_points": Key("int", 21, "points per equal-info curve"),
    "alpha_grid": Key("floats", tuple(np.round(np.arange(0, 0.501, 0.05), 2)), "alpha values"),
    "alpha_levels": Key("floats", (0.0, 0.25, 0.5), "alpha values for ph-vs-theta-by-alpha"),
}


def _base(cfg: dict[str, Any], **kw) -> PipelineParams:
    return PipelineParams(
        p_a=cfg["p_a"], shortlist_rate=cfg["shortlist_rate"], finalist_rate=cfg["finalist_rate"], **kw
    )


def _ph(params: PipelineParams, mode, cfg) -> float:
    return female_share_hires(params, mode, cfg["tau_h_rule"]).p_h


def ph_vs_theta(cfg):
    header = ("theta", "p_h_constrained", "p_h_unconstrained")
    rows = []
    for t in cfg["theta_grid"]:
        p = _base(cfg, theta=t)
        rows.append((t, _ph(p, EQUAL, cfg), _ph(p, NONE, cfg)))
    return header, rows


def ph_vs_delta(cfg):
    header = ("delta", "p_h_constrained", "p_h_unconstrained")
    rows = []
    for d in cfg["delta_grid"]:
        p = _base(cfg, theta=cfg["delta_theta"], delta=d)
        rows.append((d, _ph(p, EQUAL, cfg), _ph(p, NONE, cfg)))
    return header, rows


def eqh_vs_theta(cfg):
    header = ("theta", "eqh_constrained", "eqh_unconstrained")
    rows = []
    for t in cfg["theta_grid"]:
        p = _base(cfg, theta=t, thetaS=cfg["thetaS"], thetaH=cfg["thetaH"])
        rows.append(
            (
                t,
                expected_hire_quality(p, EQUAL, cfg["tau_h_rule"]),
                expected_hire_quality(p, NONE, cfg["tau_h_rule"]),
            )
        )
    return header, rows


def equal_info(cfg):
    header = ("thetaH", "theta", "thetaS", "eqh_constrained", "note")
    rows = []
    base = _base(cfg, theta=0.0)
    for tH in cfg["info_thetaH"]:
        peak_theta, _ = equal_info_peak(tH, cfg["info_H0"])
        grid = np.linspace(0.0, peak_theta, cfg["info_points"])
        for pt in equal_info_quality_curve(tH, cfg["info_H0"], grid, base, mode=EQUAL):
            rows.append((tH, float(pt.theta), pt.thetaS, pt.quality, pt.reason))
    return header, rows


def ph_vs_alpha(cfg):
    header = ("alpha", "p_h_constrained", "p_h_unconstrained")
    rows = []
    for a in cfg["alpha_grid"]:
        p = _base(cfg, theta=cfg["delta_theta"], alpha=a)
        rows.append((a, _ph(p, EQUAL, cfg), _ph(p, NONE, cfg)))
    return header, rows


def ph_vs_theta_by_alpha(cfg):
    header = ("alpha", "theta", "p_h_constrained", "p_h_unconstrained")
    rows = []
    for a in cfg["alpha_levels"]:
        for t in cfg["theta_grid"]:
            p = _base(cfg, theta=t, alpha=a)
            rows.append((a, t, _ph(p, EQUAL, cfg), _ph(p, NONE, cfg)))
    return header, rows


FIGURES: dict[str, Callable] = {
    "ph-vs-theta": ph_vs_theta,
    "ph-vs-delta": ph_vs_delta,
    "eqh-vs-theta": eqh_vs_theta,
    "equal-info": equal_info,
    "ph-vs-alpha": ph_vs_alpha,
    "ph-vs-theta-by-alpha": ph_vs_theta_by_alpha,
}

# x column and, for multi-curve figures, the column that splits curves
PLOT_LAYOUT = {
    "ph-vs-theta": ("theta", None),
    "ph-vs-delta": ("delta", None),
    "eqh-vs-theta": ("theta", None),
    "equal-info": ("theta", "thetaH"),
    "ph-vs-alpha": ("alpha", None),
    "ph-vs-theta-by-alpha": ("theta", "alpha"),
}

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_chart(title: str, header, rows, x_col: str, group_col: str | None) -> str:
    """Bare line chart; one polyline per numeric column (and group)."""
    ix = header.index(x_col)
    gi = header.index(group_col) if group_col else None
    y_cols = [
        i for i, h in enumerate(header)
        if i not in (ix, gi) and all(isinstance(r[i], (int, float)) or r[i] is None for r in rows)
    ]
    series = []
    groups = sorted({r[gi] for r in rows}) if gi is not None else [None]
    for g in groups:
        sub = [r for r in rows if gi is None or r[gi] == g]
        for i in y_cols:
            pts = [(float(r[ix]), float(r[i])) for r in sub if r[i] is not None]
            label = header[i] if g is None else f"{header[i]} ({group_col}={g})"
            if pts:
                series.append((label, pts))
    W, H, pad = 640, 420, 56
    xs = [x for _, p in series for x, _ in p] or [0.0, 1.0]
    ys = [y for _, p in series for _, y in p] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1
    y0, y1 = min(ys), max(ys) if max(ys) > min(ys) else min(ys) + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (W - 2 * pad)

    def sy(y):
        return H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<text x="{W / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" fill="none" stroke="#444"/>',
        f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle">{x_col}</text>',
        f'<text x="{pad}" y="{H - pad + 14}" text-anchor="middle">{x0:.3g}</text>',
        f'<text x="{W - pad}" y="{H - pad + 14}" text-anchor="middle">{x1:.3g}</text>',
        f'<text x="{pad - 4}" y="{H - pad}" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end">{y1:.3g}</text>',
    ]
    for k, (label, pts) in enumerate(series):
        color = _COLORS[k % len(_COLORS)]
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
        out.append(f'<text x="{pad + 8}" y="{pad + 16 + 14 * k}" fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
