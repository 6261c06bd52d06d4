"""Closed-form model of the screen-then-hire pipeline.

Men have scores (Q, Q^S, Q^H) ~ N(0, Sigma(thetaS, thetaH, theta)); women are
shifted by (alpha, alpha + betaS, alpha + betaH) and use the correlation
triple (thetaS - deltaS, thetaH - deltaH, theta - delta).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from . import numkern as nk
from .errors import (
    DegenerateError,
    DomainError,
    FeasibilityError,
    HireDivError,
    ModelError,
    NoSolutionError,
)

BISECT_TOL = 1e-12
_BRACKET = (-nk.INF_CLIP, nk.INF_CLIP)


class ConstraintMode(str, enum.Enum):
    NONE = "none"
    EQUAL_SELECTION = "equal_selection"


class TauHRule(str, enum.Enum):
    """How the hiring threshold is set under a screening constraint.

    ``FIXED`` keeps tau^H at the value that yields the target hire mass with
    gender-blind screening. ``REFIT`` re-solves it per mode so that the hire
    mass is always ``shortlist_rate * finalist_rate`` (what an agent hiring a
    fixed number of finalists does).
    """

    FIXED = "fixed"
    REFIT = "refit"


@dataclass(frozen=True)
class PipelineParams:
    theta: float
    thetaS: float = 0.5
    thetaH: float = 0.5
    delta: float = 0.0
    deltaS: float = 0.0
    deltaH: float = 0.0
    alpha: float = 0.0
    betaS: float = 0.0
    betaH: float = 0.0
    p_a: float = 0.3
    shortlist_rate: float = 0.15
    finalist_rate: float = 0.2

    def __post_init__(self):
        for name in ("theta", "thetaS", "thetaH"):
            v = getattr(self, name)
            if not (0.0 <= v < 1.0):
                raise DomainError(f"{name} must lie in [0, 1), got {v}")
        if not 0.0 < self.p_a < 1.0:
            raise DomainError(f"p_a must lie in (0, 1), got {self.p_a}")
        if not 0.0 < self.shortlist_rate < 1.0:
            raise DomainError(f"shortlist_rate must lie in (0, 1), got {self.shortlist_rate}")
        if not 0.0 < self.finalist_rate <= 1.0:
            raise DomainError(f"finalist_rate must lie in (0, 1], got {self.finalist_rate}")
        for name in ("delta", "deltaS", "deltaH", "alpha", "betaS", "betaH"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        nk.check_psd(*self.corr("m"))
        fS, fH, f = self.corr("f")
        if abs(f) >= 1.0:
            raise ModelError(f"female score correlation theta - delta = {f} is degenerate")
        nk.check_psd(fS, fH, f)

    def corr(self, group: str) -> tuple[float, float, float]:
        """(thetaS, thetaH, theta) for ``group`` in {"m", "f"}."""
        if group == "m":
            return self.thetaS, self.thetaH, self.theta
        return self.thetaS - self.deltaS, self.thetaH - self.deltaH, self.theta - self.delta

    def means(self, group: str) -> tuple[float, float, float]:
        """Mean of (Q, Q^S, Q^H) for ``group``."""
        if group == "m":
            return 0.0, 0.0, 0.0
        return self.alpha, self.alpha + self.betaS, self.alpha + self.betaH

    def share(self, group: str) -> float:
        return self.p_a if group == "f" else 1.0 - self.p_a

    def with_(self, **changes) -> "PipelineParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class ShareReport:
    p_a: float
    p_s: float
    p_h: float
    tauS_m: float = math.nan
    tauS_f: float = math.nan
    tauH: float = math.nan


@dataclass(frozen=True)
class Thresholds:
    tauS_m: float
    tauS_f: float
    tauH: float


def _bisect(g: Callable[[float], float], lo: float, hi: float, tol: float = BISECT_TOL) -> float:
    """Root of a monotone function on [lo, hi]; stops when |g| <= tol."""
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if np.sign(glo) == np.sign(ghi):
        raise NoSolutionError("mass equation has no root in the search bracket")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol or hi - lo <= 1e-15 * max(1.0, abs(mid)):
            return mid
        if np.sign(gm) == np.sign(glo):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def equal_selection_thresholds(p_a: float, shortlist_rate: float) -> tuple[float, float]:
    """Gender-specific screen cutoffs that give each gender half of the shortlist.

    Returns ``(tau_m, tau_f)`` for standard-normal screening scores.
    """
    if not 0.0 < p_a < 1.0 or not 0.0 < shortlist_rate < 1.0:
        raise DomainError("p_a and shortlist_rate must lie in (0, 1)")
    pass_f = shortlist_rate / (2.0 * p_a)
    pass_m = shortlist_rate / (2.0 * (1.0 - p_a))
    for group, prob in (("f", pass_f), ("m", pass_m)):
        if prob >= 1.0:
            raise FeasibilityError(
                f"group {group!r} cannot fill half the shortlist: required pass "
                f"probability {prob:.4g} >= 1",
                group=group,
            )
    return nk.norm_quantile(1.0 - pass_m), nk.norm_quantile(1.0 - pass_f)


def group_hire_prob(tauS_g, tauH, theta_g, mean_shift=0.0) -> float:
    """P(Q^S > tauS_g, Q^H > tauH) for one group.

    ``mean_shift`` is either a common shift of both scores or a pair
    ``(shift_S, shift_H)``.
    """
    shiftS, shiftH = (mean_shift, mean_shift) if np.ndim(mean_shift) == 0 else mean_shift
    return nk.bvn_tail(tauS_g - shiftS, tauH - shiftH, theta_g)


def _screen_pass(params: PipelineParams, group: str, tauS: float) -> float:
    return nk.norm_sf(tauS - params.means(group)[1])


def _hire_probs(params: PipelineParams, tauS_m: float, tauS_f: float, tauH: float):
    _, muS, muH = params.means("f")
    probs = nk.bvn_tail(
        np.array([tauS_m, tauS_f - muS]),
        np.array([tauH, tauH - muH]),
        np.array([params.corr("m")[2], params.corr("f")[2]]),
    )
    return float(probs[0]), float(probs[1])


def _hire_mass(params: PipelineParams, tauS_m: float, tauS_f: float, tauH: float) -> float:
    m, f = _hire_probs(params, tauS_m, tauS_f, tauH)
    return params.p_a * f + (1.0 - params.p_a) * m


def screen_thresholds(params: PipelineParams, mode: ConstraintMode) -> tuple[float, float]:
    """``(tauS_m, tauS_f)`` for the requested screening mode."""
    mode = ConstraintMode(mode)
    if mode is ConstraintMode.EQUAL_SELECTION:
        tau_m, tau_f = equal_selection_thresholds(params.p_a, params.shortlist_rate)
        return tau_m, tau_f + params.means("f")[1]

    def excess(t):
        return (
            params.p_a * _screen_pass(params, "f", t)
            + (1.0 - params.p_a) * _screen_pass(params, "m", t)
            - params.shortlist_rate
        )

    tau = _bisect(excess, *_BRACKET)
    return tau, tau


def hire_threshold(params: PipelineParams, tauS_m: float, tauS_f: float) -> float:
    """tau^H giving a hire mass of ``shortlist_rate * finalist_rate``."""
    target = params.shortlist_rate * params.finalist_rate
    if params.finalist_rate >= 1.0:
        return -nk.INF_CLIP
    return _bisect(lambda t: _hire_mass(params, tauS_m, tauS_f, t) - target, *_BRACKET)


def pipeline_thresholds(
    params: PipelineParams, mode: ConstraintMode, tau_h_rule: TauHRule = TauHRule.FIXED
) -> Thresholds:
    mode = ConstraintMode(mode)
    tau_m, tau_f = screen_thresholds(params, mode)
    if TauHRule(tau_h_rule) is TauHRule.FIXED and mode is not ConstraintMode.NONE:
        tauH = hire_threshold(params, *screen_thresholds(params, ConstraintMode.NONE))
    else:
        tauH = hire_threshold(params, tau_m, tau_f)
    return Thresholds(tau_m, tau_f, tauH)


def _female_share(p_a: float, rate_f: float, rate_m: float) -> float:
    if rate_f == rate_m:
        # identical pass rates leave the mix unchanged; skip the rounding
        return p_a
    n_f = p_a * rate_f
    n_m = (1.0 - p_a) * rate_m
    if n_f + n_m <= 0.0:
        raise DegenerateError("selected mass is zero")
    return n_f / (n_f + n_m)


def female_share_hires(
    params: PipelineParams,
    mode: ConstraintMode = ConstraintMode.EQUAL_SELECTION,
    tau_h_rule: TauHRule = TauHRule.FIXED,
) -> ShareReport:
    """Female shares of the shortlist and of hires."""
    th = pipeline_thresholds(params, mode, tau_h_rule)
    pass_f = _screen_pass(params, "f", th.tauS_f)
    pass_m = _screen_pass(params, "m", th.tauS_m)
    hire_m, hire_f = _hire_probs(params, th.tauS_m, th.tauS_f, th.tauH)
    if params.p_a * hire_f + (1.0 - params.p_a) * hire_m <= 0.0:
        raise DegenerateError("hire mass is zero")
    return ShareReport(
        p_a=params.p_a,
        p_s=_female_share(params.p_a, pass_f, pass_m),
        p_h=_female_share(params.p_a, hire_f, hire_m),
        tauS_m=th.tauS_m,
        tauS_f=th.tauS_f,
        tauH=th.tauH,
    )


def group_hire_quality(params: PipelineParams, group: str, tauS: float, tauH: float) -> float:
    """E[Q | hired] within one group, undoing the group's mean shift."""
    muQ, muS, muH = params.means(group)
    tS, tH, t = params.corr(group)
    return muQ + nk.truncated_mean_q(tS, tH, t, tauS - muS, tauH - muH)


def expected_hire_quality(
    params: PipelineParams,
    mode: ConstraintMode = ConstraintMode.EQUAL_SELECTION,
    tau_h_rule: TauHRule = TauHRule.FIXED,
) -> float:
    """Mean true quality of hires, weighting each gender by its hire share."""
    rep = female_share_hires(params, mode, tau_h_rule)
    e_f = group_hire_quality(params, "f", rep.tauS_f, rep.tauH)
    e_m = group_hire_quality(params, "m", rep.tauS_m, rep.tauH)
    return rep.p_h * e_f + (1.0 - rep.p_h) * e_m


# -- information trade-off ---------------------------------------------------

_DET_FLOOR = 1e-14


def conditional_entropy(theta: float, thetaS: float, thetaH: float) -> float:
    """H(Q | Q^S, Q^H) in nats."""
    if not abs(theta) < 1.0:
        raise DomainError("theta must lie in (-1, 1)")
    det = float(np.linalg.det(nk.corr_matrix(thetaS, thetaH, theta)))
    if det <= _DET_FLOOR:
        raise DegenerateError(
            f"scores determine Q exactly or are inconsistent (det={det:.3g})"
        )
    return 0.5 * math.log(2.0 * math.e * math.pi * det / (1.0 - theta * theta))


def _info_constant(H0: float) -> float:
    return math.exp(2.0 * H0) / (2.0 * math.e * math.pi)


def equal_info_thetaS(theta: float, thetaH: float, H0: float, branch: str = "plus") -> float:
    """thetaS that keeps H(Q | Q^S, Q^H) = H0 at the given (theta, thetaH)."""
    if branch not in ("plus", "minus"):
        raise DomainError(f"branch must be 'plus' or 'minus', got {branch!r}")
    if not abs(theta) < 1.0:
        raise DomainError("theta must lie in (-1, 1)")
    disc = (1.0 - theta * theta) * (1.0 - thetaH * thetaH - _info_constant(H0))
    if disc < 0.0:
        if disc < -1e-15:
            raise NoSolutionError(
                f"no thetaS reaches H0={H0} at theta={theta}, thetaH={thetaH}"
            )
        disc = 0.0
    root = math.sqrt(disc)
    out = theta * thetaH + (root if branch == "plus" else -root)
    if not 0.0 <= out < 1.0:
        raise DomainError(f"equal-information thetaS={out:.6g} lies outside [0, 1)")
    return out


def equal_info_peak(thetaH: float, H0: float) -> tuple[float, float]:
    """(theta, thetaS) where the plus branch of the equal-information curve peaks."""
    c2 = 1.0 - thetaH * thetaH - _info_constant(H0)
    if c2 < 0.0:
        raise NoSolutionError(f"H0={H0} is unreachable with thetaH={thetaH}")
    r = math.sqrt(thetaH * thetaH + c2)
    if r == 0.0:
        return 0.0, 0.0
    return thetaH / r, r


@dataclass(frozen=True)
class CurvePoint:
    theta: float
    thetaS: float | None
    quality: float | None
    reason: str = ""


def equal_info_quality_curve(
    thetaH: float,
    H0: float,
    theta_grid: Sequence[float],
    params: PipelineParams,
    branch: str = "plus",
    mode: ConstraintMode = ConstraintMode.EQUAL_SELECTION,
) -> list[CurvePoint]:
    """Expected hire quality along equal-information (theta, thetaS) pairs.

    Grid points without a valid thetaS (or with an infeasible model) are kept
    with ``thetaS``/``quality`` set to None and a reason.
    """
    out = []
    for theta in theta_grid:
        try:
            tS = equal_info_thetaS(theta, thetaH, H0, branch)
            p = params.with_(theta=theta, thetaS=tS, thetaH=thetaH)
            out.append(CurvePoint(theta, tS, expected_hire_quality(p, mode)))
        except HireDivError as exc:
            out.append(CurvePoint(theta, None, None, str(exc)))
    return out


# -- counterfactual ----------------------------------------------------------


@dataclass(frozen=True)
class SkipRecord:
    job_id: str
    reason: str


def counterfactual_job(
    estimate,
    mode: ConstraintMode,
    *,
    assume_delta_zero: bool = False,
    tau_h_rule: TauHRule = TauHRule.FIXED,
) -> ShareReport | SkipRecord:
    """Impute one job's estimates into the closed-form model.

    ``estimate`` is a :class:`hirediv.estimate.JobEstimate`. Stage rates come
    from the observed shortlist and finalist counts.
    """
    jid = str(estimate.job_id)
    if estimate.n_applicants <= 0 or estimate.shortlist_size <= 0:
        return SkipRecord(jid, "empty shortlist")
    if estimate.shortlist_size >= estimate.n_applicants:
        return SkipRecord(jid, "shortlist contains every applicant")
    if estimate.finalist_size <= 0:
        return SkipRecord(jid, "no finalists")
    if estimate.theta_hat is None or not 0.0 <= estimate.theta_hat < 1.0:
        return SkipRecord(jid, f"theta_hat={estimate.theta_hat} outside [0, 1)")
    delta = 0.0
    if not assume_delta_zero and estimate.delta_hat is not None:
        delta = estimate.delta_hat
    try:
        params = PipelineParams(
            theta=estimate.theta_hat,
            thetaS=0.0,
            thetaH=0.0,
            delta=delta,
            p_a=estimate.p_a,
            shortlist_rate=estimate.shortlist_size / estimate.n_applicants,
            finalist_rate=min(1.0, estimate.finalist_size / estimate.shortlist_size),
        )
        return female_share_hires(params, mode, tau_h_rule)
    except HireDivError as exc:
        return SkipRecord(jid, str(exc))


def aggregate_shares(reports: Sequence[ShareReport], weights: Sequence[float]) -> ShareReport:
    """Weighted mean of share reports (weights are applicant counts)."""
    if len(reports) == 0:
        raise DomainError("nothing to aggregate")
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(reports),) or (w < 0).any() or w.sum() <= 0:
        raise DomainError("weights must be nonnegative with a positive sum")
    w = w / w.sum()
    return ShareReport(
        p_a=float(np.dot(w, [r.p_a for r in reports])),
        p_s=float(np.dot(w, [r.p_s for r in reports])),
        p_h=float(np.dot(w, [r.p_h for r in reports])),
    )
