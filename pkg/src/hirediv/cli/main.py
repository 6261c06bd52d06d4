"""``hirediv`` command line.

Commands: figures, simulate, estimate, synth, verify. Every command takes
``--seed``, ``--out``, ``--config FILE`` and repeated ``--set key=value``
overrides; ``hirediv <command> --show-config`` prints the resolved config in
the file format. Exit codes: 0 ok, 2 usage, 3 input, 4 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from collections import OrderedDict
from pathlib import Path
from typing import Any

import numpy as np

from ..analytic import ConstraintMode, PipelineParams, SkipRecord, aggregate_shares, counterfactual_job
from ..errors import HireDivError, SchemaError
from ..estimate import (
    PROPOSITION_TERMS,
    ApplicantTable,
    JobEstimate,
    aggregate_estimates,
    estimate_job,
    synthetic_job,
)
from ..sim.benchmark import BenchmarkConfig, run_benchmark
from ..sim.policies import ALL_POLICIES, MATCHING_RULES, Policy
from ..sim.rng import make_rng
from . import config as C
from .figures import FIGURE_KEYS, FIGURES, PLOT_LAYOUT, svg_chart
from .output import LockError, RunOutput, locked_dir, parse_magic
from .verify import VERIFY_KEYS, run_all

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_VERIFY = 0, 2, 3, 4

SIMULATE_KEYS = {
    "theta": C.Key("float", 0.434, "corr(Q^S, Q^H) of the simulated scores"),
    "p_a": C.Key("float", 0.3, "female share of applicants"),
    "n": C.Key("int", 500, "applicants per pool"),
    "k": C.Key("int", 40, "shortlist size"),
    "m": C.Key("int", 4, "hires per pool"),
    "replications": C.Key("int", 500, "pools per grid cell"),
    "thetaS_grid": C.Key("floats", (0.3, 0.6), "corr(Q, Q^S) values"),
    "thetaH_grid": C.Key("floats", (0.3, 0.6), "corr(Q, Q^H) values"),
    "policies": C.Key("strs", tuple(p.value for p in ALL_POLICIES), "policies to run"),
    "tolerance": C.Key("float", 0.01, "parity gap tolerance"),
    "candidate_pool_multiplier": C.Key("float", 2.0, "reserve size for min-gap policies"),
    "matching": C.Key("str", "swap", "min-gap matching rule: " + " | ".join(MATCHING_RULES)),
    "label_noise": C.Key("float", 0.8, "corr of the historical label score with q^S"),
    "label_rate": C.Key("float", 0.15, "positive rate of historical labels"),
    "semi_synthetic": C.Key("bool", True, "draw Q with sample-exact correlations"),
    "resamples": C.Key("int", 2000, "bootstrap resamples"),
    "level": C.Key("float", 0.95, "confidence level"),
}

ESTIMATE_KEYS = {
    "min_group": C.Key("int", 10, "minimum applicants per gender for delta_hat"),
    "method": C.Key("str", "spearman", "spearman | pearson"),
    "ipw": C.Key("bool", False, "weight by inverse screening propensity"),
    "ipw_floor": C.Key("float", 0.01, "propensity floor for IPW"),
    "finalist_rate": C.Key("float", 0.2, "finalist share of the shortlist when no finalist column"),
    "counterfactual": C.Key("bool", False, "write counterfactual shares for p_a < 0.5 jobs"),
    "assume_delta_zero": C.Key("bool", False, "impute delta = 0 in the counterfactual"),
    "tau_h_rule": C.Key("str", "fixed", "fixed | refit"),
}

SYNTH_KEYS = {
    "jobs": C.Key("int", 5, "number of jobs"),
    "n": C.Key("int", 100_000, "applicants per job"),
    "p_a": C.Key("floats", (0.3,), "female share per job (cycled)"),
    "theta": C.Key("float", 0.434, "men's corr(Q^S, Q^H)"),
    "delta": C.Key("float", -0.007, "men minus women correlation"),
    "shortlist_rate": C.Key("float", 0.15, "shortlisted share"),
    "finalist_rate": C.Key("float", 0.2, "finalist share of the shortlist"),
}

SCHEMAS = {
    "figures": FIGURE_KEYS,
    "simulate": SIMULATE_KEYS,
    "estimate": ESTIMATE_KEYS,
    "synth": SYNTH_KEYS,
    "verify": VERIFY_KEYS,
}

INPUT_COLUMNS = ("job_id", "applicant_id", "gender", "p_screen", "p_hire", "shortlisted")
OPTIONAL_COLUMNS = ("finalist",)


# -- input ---------------------------------------------------------------------


def _prob(text: str, name: str, line: int, optional: bool = False) -> float:
    text = text.strip()
    if text == "":
        if optional:
            return float("nan")
        raise SchemaError(f"{name} is empty", line)
    try:
        v = float(text)
    except ValueError:
        raise SchemaError(f"{name}={text!r} is not a number", line) from None
    if not 0.0 <= v <= 1.0:
        raise SchemaError(f"{name}={v} outside [0, 1]", line)
    return v


def _flag(text: str, name: str, line: int) -> bool:
    t = text.strip()
    if t not in ("0", "1"):
        raise SchemaError(f"{name} must be 0 or 1, got {t!r}", line)
    return t == "1"


def read_applicants(path: str | Path) -> list[ApplicantTable]:
    """Parse the applicant-score CSV into one table per job (input order)."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        offset = 0
        first = fh.readline()
        if parse_magic(first) is not None:
            offset = 1
        else:
            fh.seek(0)
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("file is empty; expected a header row", 1 + offset) from None
        header = [h.strip() for h in header]
        missing = [c for c in INPUT_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing columns: {', '.join(missing)}", 1 + offset)
        extra = [c for c in header if c not in INPUT_COLUMNS + OPTIONAL_COLUMNS]
        if extra:
            raise SchemaError(f"unknown columns: {', '.join(extra)}", 1 + offset)
        col = {c: header.index(c) for c in header}
        has_fin = "finalist" in col
        jobs: OrderedDict[str, dict[str, list]] = OrderedDict()
        seen: set[tuple[str, str]] = set()
        for row in reader:
            line = reader.line_num + offset
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(f"expected {len(header)} fields, got {len(row)}", line)
            jid = row[col["job_id"]].strip()
            aid = row[col["applicant_id"]].strip()
            if not jid or not aid:
                raise SchemaError("job_id and applicant_id are required", line)
            if (jid, aid) in seen:
                raise SchemaError(f"duplicate applicant {aid!r} in job {jid!r}", line)
            seen.add((jid, aid))
            g = row[col["gender"]].strip()
            if g not in ("m", "f"):
                raise SchemaError(f"gender must be 'm' or 'f', got {g!r}", line)
            ps = _prob(row[col["p_screen"]], "p_screen", line)
            ph = _prob(row[col["p_hire"]], "p_hire", line, optional=True)
            sl = _flag(row[col["shortlisted"]], "shortlisted", line)
            if sl and ph != ph:
                raise SchemaError("p_hire is required for shortlisted applicants", line)
            fin = _flag(row[col["finalist"]], "finalist", line) if has_fin else False
            j = jobs.setdefault(jid, {"f": [], "ps": [], "ph": [], "sl": [], "fin": []})
            j["f"].append(g == "f")
            j["ps"].append(ps)
            j["ph"].append(ph)
            j["sl"].append(sl)
            j["fin"].append(fin)
    if not jobs:
        raise SchemaError("no applicant rows", 2 + offset)
    return [
        ApplicantTable(
            job_id=jid,
            female=np.array(j["f"], dtype=bool),
            p_screen=np.array(j["ps"], dtype=float),
            p_hire=np.array(j["ph"], dtype=float),
            shortlisted=np.array(j["sl"], dtype=bool),
            finalist=np.array(j["fin"], dtype=bool) if has_fin else None,
        )
        for jid, j in jobs.items()
    ]


def write_applicants(tables: list[ApplicantTable]) -> bytes:
    rows = [INPUT_COLUMNS + OPTIONAL_COLUMNS]
    for t in tables:
        for i in range(len(t)):
            ph = t.p_hire[i]
            rows.append(
                (
                    t.job_id,
                    f"{t.job_id}-{i}",
                    "f" if t.female[i] else "m",
                    format(t.p_screen[i], ".17g"),
                    "" if ph != ph else format(ph, ".17g"),
                    "1" if t.shortlisted[i] else "0",
                    "1" if t.finalist is not None and t.finalist[i] else "0",
                )
            )
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue().encode("utf-8")


# -- commands ------------------------------------------------------------------


def cmd_figures(args, cfg, out: RunOutput) -> int:
    ids = list(FIGURES) if "all" in args.figure else list(dict.fromkeys(args.figure))
    for fid in ids:
        header, rows = FIGURES[fid](cfg)
        out.write_csv(f"{fid}.csv", fid, header, rows)
        if args.svg:
            x_col, group = PLOT_LAYOUT[fid]
            out.write_text(f"{fid}.svg", f"{fid}-svg", svg_chart(fid, header, rows, x_col, group))
    return EXIT_OK


def cmd_simulate(args, cfg, out: RunOutput) -> int:
    unknown = [p for p in cfg["policies"] if p not in {k.value for k in ALL_POLICIES}]
    if unknown:
        raise C.ConfigError(f"unknown policies: {', '.join(unknown)}")
    if cfg["matching"] not in MATCHING_RULES:
        raise C.ConfigError(f"matching must be one of {MATCHING_RULES}")
    policies = tuple(
        Policy(p, cfg["tolerance"], cfg["candidate_pool_multiplier"], cfg["matching"]) for p in cfg["policies"]
    )
    try:
        base = PipelineParams(theta=cfg["theta"], p_a=cfg["p_a"], shortlist_rate=cfg["label_rate"])
    except HireDivError as exc:
        raise C.ConfigError(str(exc)) from exc
    bcfg = BenchmarkConfig(
        base=base,
        n=cfg["n"],
        k=cfg["k"],
        m=cfg["m"],
        replications=cfg["replications"],
        seed=args.seed,
        policies=policies,
        label_noise=cfg["label_noise"],
        semi_synthetic=cfg["semi_synthetic"],
        resamples=cfg["resamples"],
        level=cfg["level"],
    )
    grid = [(s, h) for s in cfg["thetaS_grid"] for h in cfg["thetaH_grid"]]
    try:
        reports = run_benchmark(bcfg, grid)
    except HireDivError as exc:
        raise C.ConfigError(str(exc)) from exc

    rows, skipped = [], []
    for rep in reports:
        if rep.skipped:
            skipped.append((rep.thetaS, rep.thetaH, rep.skipped))
            continue
        for name, r in rep.results.items():
            rows.append(
                (
                    rep.thetaS, rep.thetaH, name, rep.p_a, r.p_s, r.p_h, r.p_h_ci[0], r.p_h_ci[1],
                    r.quality, r.quality_ci[0], r.quality_ci[1], r.unsatisfied, rep.replications, rep.seed,
                )
            )
    out.write_csv(
        "benchmark.csv",
        "benchmark",
        ("thetaS", "thetaH", "policy", "p_a", "p_s", "p_h", "p_h_lo", "p_h_hi",
         "eqh", "eqh_lo", "eqh_hi", "unsatisfied", "replications", "seed"),
        rows,
    )
    summary = []
    for p in policies:
        mine = [r for r in rows if r[2] == p.name]
        if mine:
            summary.append(
                (p.name, len(mine), *(float(np.mean([r[i] for r in mine])) for i in (3, 4, 5, 8)))
            )
    out.write_csv("summary.csv", "benchmark-summary", ("policy", "cells", "p_a", "p_s", "p_h", "eqh"), summary)
    out.write_csv("skipped.csv", "skipped-cells", ("thetaS", "thetaH", "reason"), skipped)
    if not rows:
        print("error: every grid cell was skipped", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_estimate(args, cfg, out: RunOutput) -> int:
    if cfg["method"] not in ("spearman", "pearson"):
        raise C.ConfigError("method must be spearman or pearson")
    tables = read_applicants(args.input)
    estimates: list[JobEstimate] = []
    skipped = []
    for t in tables:
        r = estimate_job(t, cfg["min_group"], cfg["method"], cfg["ipw"], cfg["ipw_floor"], cfg["finalist_rate"])
        if isinstance(r, SkipRecord):
            skipped.append((r.job_id, "estimate", r.reason))
        else:
            estimates.append(r)
    out.write_csv(
        "jobs.csv",
        "job-estimates",
        ("job_id", "theta_hat", "delta_hat", "p_a", "n_applicants", "shortlist_size", "finalist_size"),
        [(e.job_id, e.theta_hat, e.delta_hat, e.p_a, e.n_applicants, e.shortlist_size, e.finalist_size) for e in estimates],
    )
    agg = []
    if estimates:
        theta_bar, delta_bar = aggregate_estimates(estimates)
        agg.append((theta_bar, delta_bar, len(estimates), sum(e.n_applicants for e in estimates)))
    out.write_csv("aggregate.csv", "job-aggregate", ("theta_bar", "delta_bar", "jobs", "applicants"), agg)

    if cfg["counterfactual"]:
        cf_rows = []
        for mode in (ConstraintMode.NONE, ConstraintMode.EQUAL_SELECTION):
            reps, weights = [], []
            for e in estimates:
                if not e.p_a < 0.5:
                    continue
                r = counterfactual_job(
                    e, mode, assume_delta_zero=cfg["assume_delta_zero"], tau_h_rule=cfg["tau_h_rule"]
                )
                if isinstance(r, SkipRecord):
                    skipped.append((r.job_id, f"counterfactual:{mode.value}", r.reason))
                    continue
                reps.append(r)
                weights.append(e.n_applicants)
                cf_rows.append((e.job_id, mode.value, r.p_a, r.p_s, r.p_h))
            if reps:
                a = aggregate_shares(reps, weights)
                cf_rows.append(("ALL", mode.value, a.p_a, a.p_s, a.p_h))
        out.write_csv("counterfactual.csv", "counterfactual", ("job_id", "mode", "p_a", "p_s", "p_h"), cf_rows)
    out.write_csv("skipped.csv", "skipped-jobs", ("job_id", "stage", "reason"), skipped)
    if not estimates:
        print("error: no job could be estimated", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_synth(args, cfg, out: RunOutput) -> int:
    tables = []
    shares = cfg["p_a"] or (0.3,)
    for j in range(cfg["jobs"]):
        rng = make_rng(args.seed, 20, j)
        tables.append(
            synthetic_job(
                f"job{j:03d}", cfg["n"], shares[j % len(shares)], cfg["theta"], cfg["delta"], rng,
                cfg["shortlist_rate"], cfg["finalist_rate"],
            )
        )
    out.write_bytes("applicants.csv", "applicant-scores", write_applicants(tables))
    return EXIT_OK


def cmd_verify(args, cfg, out: RunOutput) -> int:
    checks, fits = run_all(cfg, args.seed)
    out.write_csv("verify.csv", "verify", ("check", "passed", "detail"), [(c.name, c.passed, c.detail) for c in checks])
    reg_rows = []
    for mode, (coef, se, r2) in fits.items():
        for term, b, s in zip(PROPOSITION_TERMS, coef, se):
            reg_rows.append((mode.value, term, float(b), float(s), float(b / s), r2))
    out.write_csv("regression.csv", "regression", ("mode", "term", "coef", "se", "t", "r_squared"), reg_rows)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}")
    if failed:
        print(f"{len(failed)} check(s) failed: " + "; ".join(c.name for c in failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


COMMANDS = {
    "figures": cmd_figures,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "synth": cmd_synth,
    "verify": cmd_verify,
}


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hirediv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="master random seed (default 0)")
        p.add_argument("--out", default="out", help="output directory (default ./out)")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--show-config", action="store_true", help="print the resolved config and exit")

    p = sub.add_parser("figures", help="analytic curves as CSV (and optional SVG)")
    common(p)
    p.add_argument("--figure", action="append", choices=[*FIGURES, "all"], default=None, help="figure id (repeatable)")
    p.add_argument("--svg", action="store_true", help="also write simple SVG line charts")

    p = sub.add_parser("simulate", help="agent-based policy benchmark")
    common(p)

    p = sub.add_parser("estimate", help="per-job theta/delta estimates from an applicant CSV")
    common(p)
    p.add_argument("input", help="applicant-score CSV")
    p.add_argument("--counterfactual", action="store_true", default=None, help="add counterfactual shares")
    p.add_argument("--assume-delta-zero", action="store_true", default=None, help="impute delta = 0")
    p.add_argument("--method", choices=("spearman", "pearson"), default=None)
    p.add_argument("--ipw", action="store_true", default=None, help="inverse-propensity weighting")

    p = sub.add_parser("synth", help="write a synthetic applicant-score CSV")
    common(p)

    p = sub.add_parser("verify", help="run the self-check suites")
    common(p)
    return parser


def _resolve_config(args) -> dict[str, Any]:
    schema = SCHEMAS[args.command]
    raw: dict[str, str] = {}
    if args.config:
        raw.update(C.load_file(args.config))
    raw.update(C.parse_lines(args.set, source="--set"))
    cfg = C.resolve(schema, raw)
    for flag in ("counterfactual", "assume_delta_zero", "method", "ipw"):
        v = getattr(args, flag, None)
        if v is not None:
            cfg[flag] = v
    if args.command == "estimate":
        cfg["input"] = str(args.input)
        try:
            cfg["input_sha256"] = hashlib.sha256(Path(args.input).read_bytes()).hexdigest()
        except OSError as exc:
            raise SchemaError(f"cannot open {args.input}: {exc.strerror}") from exc
    if args.command == "figures":
        cfg["figures"] = tuple(sorted(set(args.figure or ["all"])))
        args.figure = args.figure or ["all"]
        cfg["svg"] = bool(args.svg)
    if cfg.get("tau_h_rule", "fixed") not in ("fixed", "refit"):
        raise C.ConfigError("tau_h_rule must be fixed or refit")
    return cfg


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve_config(args)
        if args.show_config:
            schema = SCHEMAS[args.command]
            sys.stdout.write(C.render(schema, {k: cfg[k] for k in schema}))
            return EXIT_OK
        chash = C.config_hash(args.command, cfg, args.seed)
        with locked_dir(args.out) as out_dir:
            out = RunOutput(out_dir, args.command, cfg, chash, args.seed)
            code = COMMANDS[args.command](args, cfg, out)
            out.write_meta()
        return code
    except (C.ConfigError, LockError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except HireDivError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
