"""Large-population pipeline simulation used to check the closed forms.

Thresholds are taken from the simulated sample itself (order statistics),
never from the analytic module, so the check stays independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..analytic import ConstraintMode, PipelineParams, TauHRule
from .pool import draw_scores


@dataclass(frozen=True)
class PipelineEstimate:
    p_a: float
    p_s: float
    p_h: float
    quality: float
    p_s_se: float
    p_h_se: float
    quality_se: float
    n_hired: int


def _top_mask(x: np.ndarray, count: int) -> np.ndarray:
    if count <= 0:
        return np.zeros(x.size, dtype=bool)
    if count >= x.size:
        return np.ones(x.size, dtype=bool)
    cut = np.partition(x, x.size - count)[x.size - count]
    return x >= cut


def _hire_mask(qH: np.ndarray, shortlisted: np.ndarray, count: int) -> tuple[np.ndarray, float]:
    mask = np.zeros(qH.size, dtype=bool)
    idx = np.flatnonzero(shortlisted)
    sel = _top_mask(qH[idx], count)
    mask[idx[sel]] = True
    return mask, float(qH[idx[sel]].min())


def simulate_pipeline(
    params: PipelineParams,
    mode: ConstraintMode,
    n: int,
    rng: np.random.Generator,
    tau_h_rule: TauHRule = TauHRule.FIXED,
) -> PipelineEstimate:
    """Push ``n`` applicants through screen and hire; report shares and quality."""
    mode = ConstraintMode(mode)
    female = rng.random(n) < params.p_a
    q, qS, qH = draw_scores(params, female, rng)
    n_short = int(round(params.shortlist_rate * n))
    n_hire = int(round(params.shortlist_rate * params.finalist_rate * n))

    blind = _top_mask(qS, n_short)
    blind_hire, tauH = _hire_mask(qH, blind, n_hire)
    if mode is ConstraintMode.NONE:
        short, hired = blind, blind_hire
    else:
        short = np.zeros(n, dtype=bool)
        for g in (female, ~female):
            idx = np.flatnonzero(g)
            short[idx[_top_mask(qS[idx], n_short // 2)]] = True
        if TauHRule(tau_h_rule) is TauHRule.FIXED:
            hired = short & (qH >= tauH)
        else:
            hired, _ = _hire_mask(qH, short, n_hire)

    ns, nh = int(short.sum()), int(hired.sum())
    p_s = float(female[short].mean())
    p_h = float(female[hired].mean())
    qh = q[hired]
    return PipelineEstimate(
        p_a=float(female.mean()),
        p_s=p_s,
        p_h=p_h,
        quality=float(qh.mean()),
        p_s_se=float(np.sqrt(p_s * (1 - p_s) / ns)),
        p_h_se=float(np.sqrt(p_h * (1 - p_h) / nh)),
        quality_se=float(qh.std(ddof=1) / np.sqrt(nh)),
        n_hired=nh,
    )
