"""Per-job estimation of score correlation and its gender gap.

Predicted stage probabilities are turned into quantile scores within each job,
the screener/hiring-manager correlation is measured with Spearman's rank
correlation, and jobs are pooled with applicant weights. Also houses the IPW
weights, the small OLS used for the proposition regression and a Gaussian
copula goodness-of-fit statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from . import numkern as nk
from .analytic import SkipRecord
from .errors import CollinearityError, DomainError

MIN_GROUP = 10
MIN_JOB = 3
IPW_FLOOR = 0.01
DEFAULT_FINALIST_RATE = 0.2


@dataclass(frozen=True)
class ScoredApplicant:
    applicant_id: str
    job_id: str
    gender: str
    p_screen: float
    p_hire: float | None
    shortlisted: bool
    screened: bool = True
    finalist: bool | None = None

    def __post_init__(self):
        if self.gender not in ("m", "f"):
            raise DomainError(f"gender must be 'm' or 'f', got {self.gender!r}")
        for name in ("p_screen", "p_hire"):
            p = getattr(self, name)
            if p is not None and not 0.0 <= p <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {p}")
        if self.shortlisted and self.p_hire is None:
            raise DomainError("p_hire is required for shortlisted applicants")


@dataclass(frozen=True)
class ApplicantTable:
    """Columnar view of one job's applicants."""

    job_id: str
    female: np.ndarray
    p_screen: np.ndarray
    p_hire: np.ndarray  # NaN where absent
    shortlisted: np.ndarray
    finalist: np.ndarray | None = None

    @classmethod
    def from_records(cls, records: Sequence[ScoredApplicant]) -> "ApplicantTable":
        if not records:
            raise DomainError("no applicants")
        job_ids = {r.job_id for r in records}
        if len(job_ids) != 1:
            raise DomainError("records span more than one job")
        fin = [r.finalist for r in records]
        return cls(
            job_id=records[0].job_id,
            female=np.array([r.gender == "f" for r in records]),
            p_screen=np.array([r.p_screen for r in records], dtype=float),
            p_hire=np.array([np.nan if r.p_hire is None else r.p_hire for r in records], dtype=float),
            shortlisted=np.array([r.shortlisted for r in records]),
            finalist=None if any(f is None for f in fin) else np.array(fin, dtype=bool),
        )

    def __len__(self) -> int:
        return self.female.size


@dataclass(frozen=True)
class JobEstimate:
    job_id: str
    theta_hat: float
    delta_hat: float | None
    p_a: float
    n_applicants: int
    shortlist_size: int
    finalist_size: int


def quantile_transform(values) -> np.ndarray:
    """Average rank / (n + 1), so scores lie strictly inside (0, 1)."""
    x = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("quantile_transform needs a nonempty vector")
    if np.isnan(x).any():
        raise DomainError("quantile_transform got NaN")
    return rankdata(x, method="average") / (x.size + 1.0)


def gaussian_scores(quantiles) -> np.ndarray:
    u = np.asarray(quantiles, dtype=float)
    if np.any((u <= 0.0) | (u >= 1.0)):
        raise DomainError("quantiles must lie strictly inside (0, 1)")
    return nk.norm_quantile(u)


def _pearson(x: np.ndarray, y: np.ndarray, w: np.ndarray | None = None) -> float:
    w = np.ones_like(x) if w is None else w
    w = w / w.sum()
    xc = x - w @ x
    yc = y - w @ y
    sxx, syy = w @ (xc * xc), w @ (yc * yc)
    if sxx <= 0.0 or syy <= 0.0:
        raise DomainError("zero variance")
    return float(np.clip((w @ (xc * yc)) / math.sqrt(sxx * syy), -1.0, 1.0))


def _pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise DomainError("x and y must be vectors of equal length")
    if x.size < 3:
        raise DomainError("need at least 3 pairs")
    return x, y


def spearman(x, y, weights=None) -> float:
    """Pearson correlation of average ranks, optionally weighted."""
    x, y = _pair(x, y)
    w = None if weights is None else np.asarray(weights, dtype=float)
    return _pearson(rankdata(x), rankdata(y), w)


def gaussian_pearson(x, y, weights=None) -> float:
    """Pearson correlation of the normal scores of the ranks."""
    x, y = _pair(x, y)
    w = None if weights is None else np.asarray(weights, dtype=float)
    return _pearson(gaussian_scores(quantile_transform(x)), gaussian_scores(quantile_transform(y)), w)


def spearman_of_gaussian(rho: float) -> float:
    """Population Spearman correlation of a bivariate normal with correlation ``rho``."""
    return 6.0 / math.pi * math.asin(rho / 2.0)


def gaussian_of_spearman(rho_s: float) -> float:
    """Inverse of :func:`spearman_of_gaussian`."""
    return 2.0 * math.sin(math.pi * rho_s / 6.0)


def ipw_weights(p_screen, floor: float = IPW_FLOOR) -> np.ndarray:
    """Inverse screening-propensity weights, clipped below at ``floor``."""
    if not 0.0 < floor <= 0.5:
        raise DomainError("floor must lie in (0, 0.5]")
    p = np.asarray(p_screen, dtype=float)
    if np.any(np.isnan(p) | (p < 0.0) | (p > 1.0)):
        raise DomainError("propensities must lie in [0, 1]")
    return 1.0 / np.maximum(p, floor)


_CORR = {"spearman": spearman, "pearson": gaussian_pearson}


def _job_corr(table: ApplicantTable, mask: np.ndarray, method: str, ipw: bool, floor: float) -> float:
    ps, ph = table.p_screen[mask], table.p_hire[mask]
    w = ipw_weights(ps, floor) if ipw else None
    return _CORR[method](ps, ph, w)


def estimate_job(
    records,
    min_group: int = MIN_GROUP,
    method: str = "spearman",
    ipw: bool = False,
    ipw_floor: float = IPW_FLOOR,
    finalist_rate: float = DEFAULT_FINALIST_RATE,
) -> JobEstimate | SkipRecord:
    """Estimate (theta_hat, delta_hat) for one job.

    The correlation uses every applicant with a predicted hire probability.
    ``delta_hat`` (men minus women) is left empty when either gender has
    fewer than ``min_group`` such applicants. Without a finalist column the
    finalist count is ``round(finalist_rate * shortlist_size)``.
    """
    if method not in _CORR:
        raise DomainError(f"method must be one of {sorted(_CORR)}")
    table = records if isinstance(records, ApplicantTable) else ApplicantTable.from_records(records)
    have = ~np.isnan(table.p_hire)
    if have.sum() < MIN_JOB:
        return SkipRecord(table.job_id, f"fewer than {MIN_JOB} applicants with p_hire")
    try:
        theta = _job_corr(table, have, method, ipw, ipw_floor)
    except DomainError as exc:
        return SkipRecord(table.job_id, str(exc))

    delta = None
    men, women = have & ~table.female, have & table.female
    if min(men.sum(), women.sum()) >= max(min_group, MIN_JOB):
        try:
            delta = _job_corr(table, men, method, ipw, ipw_floor) - _job_corr(
                table, women, method, ipw, ipw_floor
            )
        except DomainError:
            delta = None

    n_short = int(table.shortlisted.sum())
    if table.finalist is not None:
        n_fin = int(table.finalist.sum())
    else:
        n_fin = int(round(finalist_rate * n_short))
    return JobEstimate(
        job_id=table.job_id,
        theta_hat=theta,
        delta_hat=delta,
        p_a=float(table.female.mean()),
        n_applicants=len(table),
        shortlist_size=n_short,
        finalist_size=n_fin,
    )


def aggregate_estimates(estimates: Sequence[JobEstimate]) -> tuple[float, float | None]:
    """Applicant-weighted means of theta_hat and (over jobs that have one) delta_hat."""
    if not estimates:
        raise DomainError("no job estimates to aggregate")
    w = np.array([e.n_applicants for e in estimates], dtype=float)
    theta = float(np.average([e.theta_hat for e in estimates], weights=w))
    with_delta = [(e.delta_hat, e.n_applicants) for e in estimates if e.delta_hat is not None]
    if not with_delta:
        return theta, None
    d, wd = zip(*with_delta)
    return theta, float(np.average(d, weights=wd))


def ols_fit(design, response, rcond: float = 1e-10):
    """Least squares through the normal equations.

    The design is column-scaled before the rank check so that the condition
    threshold ``rcond`` (relative smallest-to-largest eigenvalue of the scaled
    Gram matrix) does not depend on units. Returns (coef, se, r_squared) with
    classical homoskedastic standard errors.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
        raise DomainError("design must be (n, p) and response length n")
    n, p = X.shape
    if n < p:
        raise CollinearityError(f"{n} rows cannot identify {p} coefficients")
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0.0):
        raise CollinearityError("design has an all-zero column")
    Xs = X / scale
    gram = Xs.T @ Xs
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= rcond * eig[-1]:
        raise CollinearityError(f"design is rank deficient (eigenvalue ratio {eig[0] / eig[-1]:.3g})")
    coef_s = np.linalg.solve(gram, Xs.T @ y)
    coef = coef_s / scale
    resid = y - X @ coef
    dof = n - p
    sigma2 = float(resid @ resid) / dof if dof > 0 else 0.0
    se = np.sqrt(np.diag(np.linalg.inv(gram)) * sigma2) / scale
    tss = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / tss if tss > 0 else 1.0
    return coef, se, r2


def proposition_design(p_a, theta, delta) -> np.ndarray:
    """Columns: intercept, p_a, theta, theta^2, delta, delta^2."""
    p_a, theta, delta = (np.asarray(v, dtype=float) for v in (p_a, theta, delta))
    return np.column_stack([np.ones_like(p_a), p_a, theta, theta**2, delta, delta**2])


PROPOSITION_TERMS = ("intercept", "p_a", "theta", "theta_sq", "delta", "delta_sq")


def _empirical_copula(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """C_n(u_i, v_i) = #{j : u_j <= u_i and v_j <= v_i} / n, via a Fenwick tree."""
    n = u.size
    ru = rankdata(u, method="max").astype(np.int64)
    rv = rankdata(v, method="max").astype(np.int64)
    order = np.lexsort((rv, ru))
    tree = np.zeros(n + 1, dtype=np.int64)
    counts = np.empty(n, dtype=np.int64)
    i = 0
    while i < n:
        # insert every point sharing this u-rank before querying any of them
        j = i
        while j < n and ru[order[j]] == ru[order[i]]:
            k = rv[order[j]]
            while k <= n:
                tree[k] += 1
                k += k & -k
            j += 1
        for t in range(i, j):
            k, s = rv[order[t]], 0
            while k > 0:
                s += tree[k]
                k -= k & -k
            counts[order[t]] = s
        i = j
    return counts / n


def ks_gaussian_copula(u, v, theta_hat: float) -> float:
    """sqrt(n) * max |C_n - C_theta| over the sample points."""
    u, v = _pair(u, v)
    if u.size < 10:
        raise DomainError("KS statistic needs at least 10 pairs")
    if np.any((u <= 0) | (u >= 1) | (v <= 0) | (v >= 1)):
        raise DomainError("copula inputs must lie strictly inside (0, 1)")
    emp = _empirical_copula(u, v)
    model = nk.bvn_cdf(nk.norm_quantile(u), nk.norm_quantile(v), float(theta_hat))
    return float(math.sqrt(u.size) * np.max(np.abs(emp - model)))


def synthetic_job(
    job_id: str,
    n: int,
    p_a: float,
    theta: float,
    delta: float,
    rng: np.random.Generator,
    shortlist_rate: float = 0.15,
    finalist_rate: float = DEFAULT_FINALIST_RATE,
) -> ApplicantTable:
    """Applicants whose latent (q^S, q^H) are bivariate normal.

    Men have correlation ``theta`` and women ``theta - delta``. Probabilities
    are the normal CDF of the latent scores, the top ``shortlist_rate`` by
    p_screen are shortlisted and the top ``finalist_rate`` of those by p_hire
    are finalists.
    """
    if n < 2:
        raise DomainError("a job needs at least two applicants")
    female = rng.random(n) < p_a
    rho = np.where(female, theta - delta, theta)
    if np.any(np.abs(rho) >= 1.0):
        raise DomainError("group correlation must lie in (-1, 1)")
    z1 = rng.standard_normal(n)
    z2 = rho * z1 + np.sqrt(1.0 - rho * rho) * rng.standard_normal(n)
    p_screen, p_hire = nk.norm_cdf(z1), nk.norm_cdf(z2)
    n_short = max(1, int(round(shortlist_rate * n)))
    short = np.zeros(n, dtype=bool)
    short[np.argsort(-p_screen, kind="stable")[:n_short]] = True
    idx = np.flatnonzero(short)
    fin = np.zeros(n, dtype=bool)
    fin[idx[np.argsort(-p_hire[idx], kind="stable")[: max(1, int(round(finalist_rate * n_short)))]]] = True
    return ApplicantTable(job_id, female, p_screen, p_hire, short, fin)

