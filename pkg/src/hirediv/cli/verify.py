"""Self-checks run by ``hirediv verify``.

Each check returns a :class:`Check`; the command fails if any check fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import numkern as nk
from ..analytic import (
    ConstraintMode,
    PipelineParams,
    TauHRule,
    expected_hire_quality,
    female_share_hires,
)
from ..errors import ModelError
from ..estimate import PROPOSITION_TERMS, ols_fit, proposition_design
from ..sim.montecarlo import simulate_pipeline
from ..sim.rng import make_rng
from .config import Key

VERIFY_KEYS = {
    "p_a": Key("float", 0.3, "female share for the proposition grids"),
    "mc_draws": Key("int", 2_000_000, "applicants in the Monte Carlo agreement check"),
    "mc_theta": Key("float", 0.434, "theta for the Monte Carlo agreement check"),
    "mc_z": Key("float", 3.0, "allowed |z| for Monte Carlo agreement"),
    "reg_jobs": Key("int", 240, "simulated jobs in the proposition regression"),
    "reg_job_size": Key("int", 20_000, "applicants per simulated job"),
    "reg_p_a": Key("floats", (0.1, 0.5), "uniform range of p_a across jobs"),
    "reg_theta": Key("floats", (0.0, 0.9), "uniform range of theta across jobs"),
    "reg_delta": Key("floats", (-0.1, 0.1), "uniform range of delta across jobs"),
    "reg_min_t": Key("float", 2.0, "required |t| for the sign checks"),
}

NONE, EQUAL = ConstraintMode.NONE, ConstraintMode.EQUAL_SELECTION
REG_STREAM = 10


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _strictly_decreasing(v) -> bool:
    return bool(np.all(np.diff(np.asarray(v, dtype=float)) < 0))


def check_identities() -> list[Check]:
    rho = np.round(np.arange(-0.9, 0.91, 0.1), 10)
    arc = float(np.max(np.abs(nk.bvn_cdf(0.0, 0.0, rho) - (0.25 + np.arcsin(rho) / (2 * math.pi)))))
    pts = np.linspace(-2.0, 2.0, 5)
    a, b, r = np.meshgrid(pts, pts, np.linspace(-0.8, 0.8, 5), indexing="ij")
    h = 1e-5
    fd = (nk.bvn_cdf(a, b, r + h) - nk.bvn_cdf(a, b, r - h)) / (2 * h)
    plack = float(np.max(np.abs(fd - nk.bvn_pdf(a, b, r))))
    dual = float(np.max(np.abs(nk.bvn_tail(a, b, r) - nk.bvn_cdf(-a, -b, r))))
    return [
        Check("arcsine identity", arc <= 1e-10, f"max error {arc:.2e}"),
        Check("Plackett derivative", plack <= 1e-6, f"max error {plack:.2e}"),
        Check("tail/CDF duality", dual == 0.0, f"max error {dual:.2e}"),
    ]


THETA_MAX = 0.95


def _eqh(theta, thetaS, thetaH, p_a):
    """E[Q_h] under equal selection, or None where the model is not PSD."""
    try:
        return expected_hire_quality(PipelineParams(theta=theta, thetaS=thetaS, thetaH=thetaH, p_a=p_a))
    except ModelError:
        return None


def check_propositions(p_a: float) -> list[Check]:
    thetas = np.round(np.arange(0, 0.951, 0.05), 2)
    ph = [female_share_hires(PipelineParams(theta=t, p_a=p_a)).p_h for t in thetas]
    out = [
        Check(
            "p_h falls with theta under equal selection",
            _strictly_decreasing(ph) and abs(ph[0] - 0.5) <= 1e-9,
            f"p_h(0)={ph[0]:.10f}, p_h({thetas[-1]})={ph[-1]:.5f}",
        )
    ]
    deltas = np.round(np.arange(-0.2, 0.201, 0.05), 2)
    for mode in (NONE, EQUAL):
        v = [female_share_hires(PipelineParams(theta=0.4, delta=d, p_a=p_a), mode).p_h for d in deltas]
        out.append(
            Check(f"p_h falls with delta ({mode.value})", _strictly_decreasing(v), f"{v[0]:.4f} -> {v[-1]:.4f}")
        )
    for tS, tH in ((0.3, 0.5), (0.5, 0.5), (0.5, 0.7)):
        grid = np.linspace(0.0, min(tS / tH, THETA_MAX), 11)
        q = [_eqh(t, tS, tH, p_a) for t in grid]
        wide = [v for v in (_eqh(t, tS, tH, p_a) for t in np.arange(0.05, THETA_MAX + 1e-9, 0.05)) if v is not None]
        out.append(
            Check(
                f"E[Q_h] falls with theta (thetaS={tS}, thetaH={tH})",
                None not in q and _strictly_decreasing(q) and all(v < q[0] for v in wide),
                f"{q[0]:.4f} -> {q[-1]:.4f}; max over theta>0 {max(wide):.4f}",
            )
        )
    return out


def check_monte_carlo(cfg, seed: int) -> list[Check]:
    out = []
    params = PipelineParams(theta=cfg["mc_theta"], p_a=cfg["p_a"])
    for i, mode in enumerate((NONE, EQUAL)):
        est = simulate_pipeline(params, mode, cfg["mc_draws"], make_rng(seed, REG_STREAM, 1, i), TauHRule.REFIT)
        ana = female_share_hires(params, mode, TauHRule.REFIT).p_h
        z = (est.p_h - ana) / est.p_h_se
        out.append(
            Check(
                f"Monte Carlo p_h agrees ({mode.value})",
                abs(z) <= cfg["mc_z"],
                f"analytic {ana:.4f}, simulated {est.p_h:.4f}, z={z:+.2f}",
            )
        )
    return out


def proposition_regression(cfg, seed: int):
    """Simulate jobs, then fit p_h on (1, p_a, theta, theta^2, delta, delta^2) per mode."""
    rng = make_rng(seed, REG_STREAM, 0)
    n = cfg["reg_jobs"]
    p_a = rng.uniform(*cfg["reg_p_a"], n)
    theta = rng.uniform(*cfg["reg_theta"], n)
    delta = np.minimum(rng.uniform(*cfg["reg_delta"], n), theta)
    design = proposition_design(p_a, theta, delta)
    fits = {}
    for mode in (NONE, EQUAL):
        ph = np.empty(n)
        for j in range(n):
            params = PipelineParams(theta=theta[j], thetaS=0.0, thetaH=0.0, delta=delta[j], p_a=p_a[j])
            job_rng = make_rng(seed, REG_STREAM, 2, j)
            ph[j] = simulate_pipeline(params, mode, cfg["reg_job_size"], job_rng).p_h
        fits[mode] = ols_fit(design, ph)
    return fits


def check_regression(cfg, seed: int) -> tuple[list[Check], dict]:
    fits = proposition_regression(cfg, seed)
    t_min = cfg["reg_min_t"]
    it, idl = PROPOSITION_TERMS.index("theta"), PROPOSITION_TERMS.index("delta")
    out = []
    coef, se, _ = fits[EQUAL]
    t = coef[it] / se[it]
    out.append(Check("regression: theta slope < 0 (equal_selection)", bool(t < -t_min), f"beta={coef[it]:+.4f}, t={t:+.2f}"))
    for mode in (NONE, EQUAL):
        coef, se, _ = fits[mode]
        t = coef[idl] / se[idl]
        out.append(Check(f"regression: delta slope < 0 ({mode.value})", bool(t < -t_min), f"beta={coef[idl]:+.4f}, t={t:+.2f}"))
    return out, fits


def run_all(cfg, seed: int):
    checks = check_identities() + check_propositions(cfg["p_a"]) + check_monte_carlo(cfg, seed)
    reg_checks, fits = check_regression(cfg, seed)
    return checks + reg_checks, fits
