"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Thresholds, grids and sample sizes are the ones the criteria state. A failing
criterion is reported as failing; see the decisions ledger for analysis.
"""

import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from hirediv import numkern as nk
from hirediv.analytic import (
    ConstraintMode,
    PipelineParams,
    TauHRule,
    conditional_entropy,
    equal_info_peak,
    equal_info_quality_curve,
    equal_info_thetaS,
    expected_hire_quality,
    female_share_hires,
)
from hirediv.cli import main
from hirediv.cli.output import read_csv
from hirediv.errors import DomainError, ModelError
from hirediv.estimate import spearman, spearman_of_gaussian
from hirediv.sim import make_rng, simulate_pipeline

NONE, EQUAL = ConstraintMode.NONE, ConstraintMode.EQUAL_SELECTION
MC_DRAWS = 10**7
P_A = 0.3

pytestmark = pytest.mark.acceptance


def decreasing(v) -> bool:
    return bool(np.all(np.diff(np.asarray(v, dtype=float)) < 0))


def table(path):
    return read_csv(path)[1]


# -- 1 -------------------------------------------------------------------------------


def test_criterion_01_numerics_identities(criterion):
    t0 = time.perf_counter()
    rho = np.round(np.arange(-0.9, 0.91, 0.1), 10)
    arc = np.max(np.abs(nk.bvn_cdf(0.0, 0.0, rho) - (0.25 + np.arcsin(rho) / (2 * math.pi))))
    pts = np.linspace(-2.0, 2.0, 9)
    a, b, r = np.meshgrid(pts, pts, np.linspace(-0.8, 0.8, 9), indexing="ij")
    h = 1e-5
    fd = (nk.bvn_cdf(a, b, r + h) - nk.bvn_cdf(a, b, r - h)) / (2 * h)
    plack = np.max(np.abs(fd - nk.bvn_pdf(a, b, r)))
    rng = np.random.default_rng(1)
    ta, tb = rng.normal(0, 2, (2, 500))
    tr = rng.uniform(-0.99, 0.99, 500)
    dual = np.max(np.abs(nk.bvn_tail(ta, tb, tr) - nk.bvn_cdf(-ta, -tb, tr)))
    passed = arc <= 1e-10 and plack <= 1e-6 and dual == 0.0
    detail = f"arcsine err {arc:.1e} (<=1e-10), Plackett err {plack:.1e} (<=1e-6), duality err {dual:.1e} (==0)"
    assert criterion(1, "numerics identities", passed, detail, time.perf_counter() - t0, 5)


# -- 2 -------------------------------------------------------------------------------


def test_criterion_02_share_of_hires_falls_with_theta(criterion):
    t0 = time.perf_counter()
    thetas = np.round(np.arange(0, 0.951, 0.05), 2)
    ph = [female_share_hires(PipelineParams(theta=t, p_a=P_A)).p_h for t in thetas]
    worst_z, mc_end = 0.0, None
    for i, t in enumerate(thetas):
        params = PipelineParams(theta=t, p_a=P_A)
        est = simulate_pipeline(params, EQUAL, MC_DRAWS, make_rng(2, i), TauHRule.REFIT)
        ana = female_share_hires(params, EQUAL, TauHRule.REFIT).p_h
        worst_z = max(worst_z, abs(est.p_h - ana) / est.p_h_se)
        if t == 0.95:
            mc_end = est.p_h
    passed = (
        decreasing(ph)
        and abs(ph[0] - 0.5) <= 1e-9
        and abs(ph[-1] - mc_end) <= 0.02
        and worst_z <= 3.0
    )
    detail = (
        f"strictly decreasing={decreasing(ph)}, p_h(0)={ph[0]:.12f}, "
        f"p_h(0.95)={ph[-1]:.4f} vs MC {mc_end:.4f}, max |z| over 20 points {worst_z:.2f}"
    )
    assert criterion(2, "p_h falls with theta", passed, detail, time.perf_counter() - t0, 120)


# -- 3 -------------------------------------------------------------------------------


def test_criterion_03_share_of_hires_falls_with_delta(criterion):
    t0 = time.perf_counter()
    deltas = np.round(np.arange(-0.2, 0.201, 0.05), 2)
    ok, parts = True, []
    for mode in (NONE, EQUAL):
        ana, mc, worst_z = [], [], 0.0
        for d in deltas:
            params = PipelineParams(theta=0.4, delta=d, p_a=P_A)
            # same stream across delta: common random numbers for the MC monotonicity check
            est = simulate_pipeline(params, mode, MC_DRAWS, make_rng(3, int(mode is EQUAL)), TauHRule.REFIT)
            a = female_share_hires(params, mode, TauHRule.REFIT).p_h
            ana.append(female_share_hires(params, mode).p_h)
            mc.append(est.p_h)
            worst_z = max(worst_z, abs(est.p_h - a) / est.p_h_se)
        good = decreasing(ana) and decreasing(mc) and worst_z <= 3.0
        ok &= good
        parts.append(
            f"{mode.value}: analytic decreasing={decreasing(ana)}, MC decreasing={decreasing(mc)}, max |z| {worst_z:.2f}"
        )
    assert criterion(3, "p_h falls with delta", ok, "; ".join(parts), time.perf_counter() - t0, 120)


# -- 4 -------------------------------------------------------------------------------


def _eqh(theta, tS, tH, mode):
    try:
        return expected_hire_quality(PipelineParams(theta=theta, thetaS=tS, thetaH=tH, p_a=P_A), mode)
    except ModelError:
        return None


def test_criterion_04_quality_falls_with_theta(criterion):
    t0 = time.perf_counter()
    ok, parts = True, []
    grid = np.round(np.arange(0, 0.951, 0.05), 2)
    for tS, tH in ((0.3, 0.5), (0.5, 0.5), (0.5, 0.7)):
        for mode in (EQUAL, NONE):
            upto = [_eqh(t, tS, tH, mode) for t in np.linspace(0.0, min(tS / tH, 0.95), 21)]
            wide = [v for v in (_eqh(t, tS, tH, mode) for t in grid) if v is not None]
            good = None not in upto and decreasing(upto) and max(wide) == wide[0] and grid[0] == 0.0
            ok &= good
            if not good:
                parts.append(f"({tS},{tH},{mode.value}) fails")
    fd_err = 0.0
    for tS, tH, t, a, b in [(0.5, 0.5, 0.3, 1.0, 0.5), (0.3, 0.5, 0.1, 0.0, 0.0), (0.5, 0.7, 0.6, -0.5, 1.2)]:
        h = 1e-5
        fd = (nk.truncated_mean_q(tS, tH, t + h, a, b) - nk.truncated_mean_q(tS, tH, t - h, a, b)) / (2 * h)
        fd_err = max(fd_err, abs(nk.dE_dtheta(tS, tH, t, a, b) - fd))
    ok &= fd_err <= 1e-6
    detail = (
        "E[Q_h] strictly decreasing on [0, thetaS/thetaH] and maximal at theta=0 for all three cells, both modes"
        if not parts
        else "; ".join(parts)
    )
    detail += f"; boxed derivative vs FD err {fd_err:.1e} (<=1e-6)"
    assert criterion(4, "quality falls with theta", ok, detail, time.perf_counter() - t0, 60)


# -- 5 -------------------------------------------------------------------------------


def _rejection_mean(tS, tH, t, a, b, rng, draws=MC_DRAWS, chunk=10**6):
    L = np.linalg.cholesky(nk.corr_matrix(tS, tH, t))
    s = ss = 0.0
    kept = 0
    for _ in range(draws // chunk):
        z = rng.standard_normal((chunk, 3)) @ L.T
        q = z[(z[:, 1] > a) & (z[:, 2] > b), 0]
        s += q.sum()
        ss += (q * q).sum()
        kept += q.size
    mean = s / kept
    return mean, math.sqrt((ss / kept - mean * mean) / kept)


def test_criterion_05_tallis_formula(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    points = []
    while len(points) < 5:
        tS, tH, t = rng.uniform(-0.8, 0.8, 3)
        if np.linalg.eigvalsh(nk.corr_matrix(tS, tH, t)).min() > 0.05:
            points.append((tS, tH, t, *rng.uniform(-1.0, 1.0, 2)))
    worst_z = 0.0
    for p in points:
        mean, se = _rejection_mean(*p, rng)
        worst_z = max(worst_z, abs(nk.truncated_mean_q(*p) - mean) / se)
    mills = lambda x: stats.norm.pdf(x) / stats.norm.sf(x)
    closed = max(
        abs(nk.truncated_mean_q(tS, tH, 0.0, a, b) - (tS * mills(a) + tH * mills(b)))
        for tS, tH, a, b in [(0.5, 0.5, 0.3, -0.2), (0.2, 0.7, 1.5, 1.0), (0.6, 0.3, -1.0, 2.0), (-0.4, 0.5, 0.0, 0.8)]
    )
    passed = worst_z <= 3.0 and closed <= 1e-10
    detail = f"max |z| vs 1e7-draw rejection oracle at 5 points {worst_z:.2f}; theta=0 closed form err {closed:.1e}"
    assert criterion(5, "Tallis truncated mean", passed, detail, time.perf_counter() - t0, 180)


# -- 6 -------------------------------------------------------------------------------


def test_criterion_06_equal_information_curve(criterion):
    t0 = time.perf_counter()
    H0 = 0.5
    round_trip = 0.0
    parts, ok = [], True
    base = PipelineParams(theta=0.0, p_a=P_A)
    for tH in (0.3, 0.5, 0.7):
        peak, _ = equal_info_peak(tH, H0)
        for branch in ("plus", "minus"):
            for t in np.linspace(0.0, 0.95, 39):
                try:
                    tS = equal_info_thetaS(t, tH, H0, branch)
                except DomainError:
                    continue
                round_trip = max(round_trip, abs(conditional_entropy(t, tS, tH) - H0))
        q = [p.quality for p in equal_info_quality_curve(tH, H0, np.linspace(0.0, peak, 30), base)]
        rise = float(np.max(np.diff(q))) if None not in q else float("inf")
        good = rise <= 1e-12
        ok &= good
        parts.append(f"thetaH={tH}: largest step {rise:+.2e} on [0, {peak:.3f}]")
    ok &= round_trip <= 1e-9
    detail = f"round-trip err {round_trip:.1e}; " + "; ".join(parts)
    assert criterion(6, "equal-information curve", ok, detail, time.perf_counter() - t0, 60)


# -- 7 -------------------------------------------------------------------------------


def test_criterion_07_estimation_recovery(criterion, tmp_path):
    t0 = time.perf_counter()
    assert main(["synth", "--set", "n=100000", "--set", "theta=0.434", "--set", "delta=-0.007", "--out", str(tmp_path / "s")]) == 0
    assert main(["estimate", str(tmp_path / "s" / "applicants.csv"), "--out", str(tmp_path / "e")]) == 0
    (agg,) = table(tmp_path / "e" / "aggregate.csv")
    theta_bar, delta_bar = float(agg["theta_bar"]), float(agg["delta_bar"])
    rng = np.random.default_rng(7)
    ident = 0.0
    for rho in (0.1, 0.434, 0.8):
        x = rng.standard_normal(100_000)
        y = rho * x + math.sqrt(1 - rho * rho) * rng.standard_normal(100_000)
        sample = stats.spearmanr(x, y).statistic
        ident = max(ident, abs(sample - spearman_of_gaussian(rho)), abs(spearman(x, y) - sample))
    passed = abs(theta_bar - 0.434) <= 0.02 and abs(delta_bar + 0.007) <= 0.03 and ident <= 0.01
    detail = (
        f"theta_bar={theta_bar:.4f} (0.434+-0.02), delta_bar={delta_bar:+.4f} (-0.007+-0.03) over "
        f"{agg['jobs']} jobs x 1e5; Spearman identity err {ident:.4f} (<=0.01)"
    )
    assert criterion(7, "estimation recovery", passed, detail, time.perf_counter() - t0, 120)


# -- 8 -------------------------------------------------------------------------------


def test_criterion_08_benchmark_ordering(criterion, tmp_path):
    t0 = time.perf_counter()
    argv = [
        "simulate",
        "--set", "p_a=0.3",
        "--set", "k=40",
        "--set", "m=4",
        "--set", "n=500",
        "--set", "replications=500",
        "--set", "thetaS_grid=0.3,0.6",
        "--set", "thetaH_grid=0.3,0.6",
        "--out", str(tmp_path),
    ]
    assert main(argv) == 0
    rows = table(tmp_path / "benchmark.csv")
    cells = sorted({(float(r["thetaS"]), float(r["thetaH"])) for r in rows})
    assert len(cells) == 4 and len(rows) == 28
    order_ok, lines = True, []
    for cell in cells:
        mine = {r["policy"]: r for r in rows if (float(r["thetaS"]), float(r["thetaH"])) == cell}
        best = max(mine, key=lambda p: float(mine[p]["p_h"]))
        order_ok &= best == "complementary_equal_selection"
        lines.append(f"{cell}: top={best} ({float(mine[best]['p_h']):.4f})")
    low = {r["policy"]: r for r in rows if (float(r["thetaS"]), float(r["thetaH"])) == cells[0]}
    comp = float(low["complementary_equal_selection"]["eqh"])
    es = low["equal_selection"]
    lo, hi = float(es["eqh_lo"]), float(es["eqh_hi"])
    quality_ok = lo <= comp <= hi
    detail = (
        "; ".join(lines)
        + f"; at {cells[0]} complementary E[Q_h]={comp:.4f} vs equal_selection CI [{lo:.4f}, {hi:.4f}]"
        + f" (ordering {'ok' if order_ok else 'violated'}, quality {'ok' if quality_ok else 'outside CI'})"
    )
    assert criterion(8, "benchmark ordering", order_ok and quality_ok, detail, time.perf_counter() - t0, 600)


# -- 9 -------------------------------------------------------------------------------


def test_criterion_09_counterfactual_table_shape(criterion, tmp_path):
    t0 = time.perf_counter()
    synth = ["synth", "--set", "jobs=3", "--set", "n=100000", "--set", "p_a=0.2,0.3,0.4", "--out", str(tmp_path / "s")]
    assert main(synth) == 0
    est = ["estimate", str(tmp_path / "s" / "applicants.csv"), "--counterfactual", "--assume-delta-zero"]
    assert main([*est, "--out", str(tmp_path / "e")]) == 0
    rows = table(tmp_path / "e" / "counterfactual.csv")
    none = [r for r in rows if r["mode"] == "none"]
    eq = [r for r in rows if r["mode"] == "equal_selection"]
    none_ok = len(none) == 4 and all(r["p_a"] == r["p_s"] == r["p_h"] for r in none)
    eq_ok = len(eq) == 4 and all(
        float(r["p_s"]) == 0.5 and float(r["p_a"]) < float(r["p_h"]) < 0.5 for r in eq
    )
    detail = (
        f"unconstrained rows p_a=p_s=p_h exactly: {none_ok}; constrained rows p_s=0.50 and p_a<p_h<0.5: {eq_ok}; "
        + ", ".join(f"{r['job_id']} p_h={float(r['p_h']):.4f}" for r in eq)
    )
    assert criterion(9, "counterfactual table shape", none_ok and eq_ok, detail, time.perf_counter() - t0, 60)


# -- 10 ------------------------------------------------------------------------------


def test_criterion_10_proposition_regression(criterion, tmp_path):
    t0 = time.perf_counter()
    code = main(["verify", "--out", str(tmp_path)])
    tags, rows = read_csv(tmp_path / "regression.csv")
    jobs = json.loads((tmp_path / "verify.meta.json").read_text())["config"]["reg_jobs"]
    coef = {(r["mode"], r["term"]): (float(r["coef"]), float(r["t"])) for r in rows}
    bt = coef[("equal_selection", "theta")]
    bd_none = coef[("none", "delta")]
    bd_eq = coef[("equal_selection", "delta")]
    passed = jobs >= 200 and bt[0] < 0 and bd_none[0] < 0 and bd_eq[0] < 0 and min(abs(bt[1]), abs(bd_none[1]), abs(bd_eq[1])) > 2
    detail = (
        f"{jobs} jobs; beta_theta(equal_selection)={bt[0]:+.4f} (t={bt[1]:+.2f}), "
        f"beta_delta(none)={bd_none[0]:+.4f} (t={bd_none[1]:+.2f}), "
        f"beta_delta(equal_selection)={bd_eq[0]:+.4f} (t={bd_eq[1]:+.2f}); verify exit {code}"
    )
    assert criterion(10, "proposition regression", passed, detail, time.perf_counter() - t0, 180)


# -- 11 ------------------------------------------------------------------------------


def _run_cli(args, out: Path, threads: int):
    env = dict(os.environ)
    for var in ("HIREDIV_THREADS", "OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        env[var] = str(threads)
    proc = subprocess.run(
        [sys.executable, "-m", "hirediv", *args, "--out", str(out)], env=env, capture_output=True, text=True
    )
    return proc.returncode


def _snapshot(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.is_file()}


def test_criterion_11_determinism(criterion, tmp_path):
    t0 = time.perf_counter()
    synth_file = tmp_path / "synth-src" / "applicants.csv"
    assert _run_cli(["synth", "--set", "jobs=2", "--set", "n=20000"], synth_file.parent, 1) == 0
    commands = {
        "figures": ["figures", "--figure", "all", "--svg"],
        "simulate": ["simulate", "--set", "replications=60", "--seed", "11"],
        "synth": ["synth", "--set", "jobs=2", "--set", "n=20000", "--seed", "11"],
        "estimate": ["estimate", str(synth_file), "--counterfactual"],
        "verify": ["verify", "--seed", "11"],
    }
    mismatched, files = [], 0
    for name, args in commands.items():
        snaps = []
        for run, threads in enumerate((1, 4)):
            out = tmp_path / f"{name}-{run}"
            code = _run_cli(args, out, threads)
            snaps.append((code, _snapshot(out)))
        files += len(snaps[0][1])
        if any(s != snaps[0] for s in snaps[1:]) or not snaps[0][1]:
            mismatched.append(name)
    passed = not mismatched
    detail = (
        f"{len(commands)} commands run at 1 and 4 threads, {files} files compared"
        + (f"; differing: {', '.join(mismatched)}" if mismatched else "; all byte-identical")
    )
    assert criterion(11, "determinism", passed, detail, time.perf_counter() - t0, 60)
