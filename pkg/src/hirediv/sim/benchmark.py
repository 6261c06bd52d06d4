"""Agent-based benchmark of shortlisting policies across a (thetaS, thetaH) grid."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..analytic import PipelineParams
from ..errors import DomainError, HireDivError
from .policies import ALL_POLICIES, Policy, hire, shortlist
from .pool import PoolSpec, gen_pool, gen_true_quality
from .rng import BOOT_STREAM, POOL_STREAM, TRUTH_STREAM, make_rng

THREADS_ENV = "HIREDIV_THREADS"


def bootstrap_ci(samples, level: float = 0.95, resamples: int = 2000, seed: int = 0):
    """Percentile bootstrap interval for the mean."""
    x = np.asarray(samples, dtype=float)
    if not 0.0 < level < 1.0:
        raise DomainError("level must lie in (0, 1)")
    if x.ndim != 1 or x.size < 2:
        raise DomainError("bootstrap needs at least two samples")
    if np.all(x == x[0]):
        return float(x[0]), float(x[0])
    rng = make_rng(seed, BOOT_STREAM)
    means = x[rng.integers(0, x.size, size=(resamples, x.size))].mean(axis=1)
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    mean = float(x.mean())
    # a percentile interval can miss the sample mean for tiny samples
    return float(min(lo, mean)), float(max(hi, mean))


@dataclass(frozen=True)
class PolicyResult:
    policy: str
    p_h: float
    p_h_ci: tuple[float, float]
    quality: float
    quality_ci: tuple[float, float]
    p_s: float
    p_h_se: float
    quality_se: float
    unsatisfied: int = 0


@dataclass
class BenchmarkReport:
    thetaS: float
    thetaH: float
    replications: int
    seed: int
    results: dict[str, PolicyResult] = field(default_factory=dict)
    skipped: str = ""
    p_a: float = float("nan")


@dataclass(frozen=True)
class BenchmarkConfig:
    base: PipelineParams
    n: int = 500
    k: int = 40
    m: int = 4
    replications: int = 500
    seed: int = 0
    policies: tuple[Policy, ...] = tuple(Policy(kind) for kind in ALL_POLICIES)
    label_noise: float = 0.8
    semi_synthetic: bool = True
    resamples: int = 2000
    level: float = 0.95


def _run_cell(cfg: BenchmarkConfig, cell_index: int, thetaS: float, thetaH: float) -> BenchmarkReport:
    report = BenchmarkReport(thetaS, thetaH, cfg.replications, cfg.seed)
    try:
        params = cfg.base.with_(thetaS=thetaS, thetaH=thetaH)
        spec = PoolSpec(n=cfg.n, params=params, label_noise=cfg.label_noise, seed=cfg.seed)
    except HireDivError as exc:
        report.skipped = str(exc)
        return report

    n_pol = len(cfg.policies)
    p_h = np.empty((n_pol, cfg.replications))
    p_s = np.empty((n_pol, cfg.replications))
    qual = np.empty((n_pol, cfg.replications))
    unsat = np.zeros(n_pol, dtype=int)
    p_a = np.empty(cfg.replications)
    try:
        for r in range(cfg.replications):
            pool = gen_pool(spec, make_rng(cfg.seed, POOL_STREAM, cell_index, r))
            p_a[r] = pool.female.mean()
            if cfg.semi_synthetic:
                truth_rng = make_rng(cfg.seed, TRUTH_STREAM, cell_index, r)
                pool.q = gen_true_quality(pool.qS, pool.qH, thetaS, thetaH, truth_rng)
            for j, pol in enumerate(cfg.policies):
                sl = shortlist(pool, cfg.k, pol)
                hired = hire(pool, sl, cfg.m)
                unsat[j] += not sl.satisfied
                p_s[j, r] = pool.female[sl.indices].mean()
                p_h[j, r] = pool.female[hired].mean()
                qual[j, r] = pool.q[hired].mean()
    except HireDivError as exc:
        report.skipped = str(exc)
        return report

    report.p_a = float(p_a.mean())
    sqrt_n = math.sqrt(cfg.replications)
    for j, pol in enumerate(cfg.policies):
        boot_seed = _substream_seed(cfg.seed, cell_index, j)
        report.results[pol.name] = PolicyResult(
            policy=pol.name,
            p_h=float(p_h[j].mean()),
            p_h_ci=bootstrap_ci(p_h[j], cfg.level, cfg.resamples, boot_seed),
            quality=float(qual[j].mean()),
            quality_ci=bootstrap_ci(qual[j], cfg.level, cfg.resamples, boot_seed + 1),
            p_s=float(p_s[j].mean()),
            p_h_se=float(p_h[j].std(ddof=1) / sqrt_n),
            quality_se=float(qual[j].std(ddof=1) / sqrt_n),
            unsatisfied=int(unsat[j]),
        )
    return report


def _substream_seed(seed: int, *keys: int) -> int:
    return int(np.random.SeedSequence([seed, BOOT_STREAM, *keys]).generate_state(1)[0])


def _worker_count(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get(THREADS_ENV, "1") or 1)
    return max(1, workers)


def run_benchmark(
    cfg: BenchmarkConfig,
    grid: Sequence[tuple[float, float]],
    workers: int | None = None,
) -> list[BenchmarkReport]:
    """One report per (thetaS, thetaH) cell, in grid order.

    Each replication draws a fresh pool from its own (seed, cell, replication)
    stream and every policy is applied to that same pool, so reports are
    identical for any worker count.
    """
    if cfg.replications < 2:
        raise DomainError("replications must be at least 2")
    if not 1 <= cfg.m <= cfg.k <= cfg.n:
        raise DomainError("need 1 <= m <= k <= n")
    cells = [(i, float(s), float(h)) for i, (s, h) in enumerate(grid)]
    workers = _worker_count(workers)
    if workers == 1 or len(cells) == 1:
        return [_run_cell(cfg, *c) for c in cells]
    with ProcessPoolExecutor(max_workers=min(workers, len(cells))) as ex:
        futures = [ex.submit(_run_cell, cfg, *c) for c in cells]
        return [f.result() for f in futures]
