"""Agent-based simulation of the screening and hiring stages."""

from .benchmark import BenchmarkConfig, BenchmarkReport, PolicyResult, bootstrap_ci, run_benchmark
from .montecarlo import PipelineEstimate, simulate_pipeline
from .policies import ALL_POLICIES, Policy, PolicyKind, Shortlist, hire, shortlist
from .pool import Applicant, Pool, PoolSpec, gen_pool, gen_true_quality
from .rng import make_rng

__all__ = [
    "ALL_POLICIES",
    "Applicant",
    "BenchmarkConfig",
    "BenchmarkReport",
    "Policy",
    "PolicyKind",
    "PolicyResult",
    "Pool",
    "PoolSpec",
    "PipelineEstimate",
    "Shortlist",
    "bootstrap_ci",
    "gen_pool",
    "gen_true_quality",
    "hire",
    "make_rng",
    "run_benchmark",
    "shortlist",
    "simulate_pipeline",
]
