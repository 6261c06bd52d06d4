"""Shortlisting policies and the hiring agent.

All policies rank by screening score q^S within each gender; they differ in how
many of each gender they take (or, for the min-gap kinds, which men). Ties are
broken by applicant index so every result is deterministic.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ..errors import DomainError, FeasibilityError
from .pool import Pool


class PolicyKind(str, enum.Enum):
    NO_CONSTRAINT = "no_constraint"
    EQUAL_SELECTION = "equal_selection"
    DEMOGRAPHIC_PARITY = "demographic_parity"
    ERROR_RATE_PARITY = "error_rate_parity"
    EQUALIZED_ODDS = "equalized_odds"
    EQUAL_SELECTION_MIN_QS_DIFF = "equal_selection_min_qs_diff"
    COMPLEMENTARY_EQUAL_SELECTION = "complementary_equal_selection"


ALL_POLICIES = tuple(PolicyKind)
MATCHING_RULES = ("swap", "nearest")
_PARITY = {PolicyKind.ERROR_RATE_PARITY, PolicyKind.EQUALIZED_ODDS}


@dataclass(frozen=True)
class Policy:
    kind: PolicyKind
    tolerance: float = 0.01
    candidate_pool_multiplier: float = 2.0
    matching: str = "swap"

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind in _PARITY and not self.tolerance > 0.0:
            raise DomainError("parity policies need a positive tolerance")
        if self.candidate_pool_multiplier < 1.0:
            raise DomainError("candidate_pool_multiplier must be >= 1")
        if self.matching not in MATCHING_RULES:
            raise DomainError(f"matching must be one of {MATCHING_RULES}")

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class Shortlist:
    indices: np.ndarray
    satisfied: bool = True
    gap: float = 0.0

    def __len__(self) -> int:
        return self.indices.size


def _ranked(idx: np.ndarray, score: np.ndarray) -> np.ndarray:
    """``idx`` ordered by descending score, ties by ascending index."""
    return idx[np.lexsort((idx, -score[idx]))]


def _top(idx: np.ndarray, score: np.ndarray, count: int) -> np.ndarray:
    return _ranked(idx, score)[:count]


def _split(pool: Pool):
    f = np.flatnonzero(pool.female)
    m = np.flatnonzero(~pool.female)
    return _ranked(f, pool.qS), _ranked(m, pool.qS)


def _equal_counts(pool: Pool, ranked_f, ranked_m, k: int) -> tuple[int, int]:
    half = k // 2
    for g, r in (("f", ranked_f), ("m", ranked_m)):
        if r.size < half:
            raise FeasibilityError(
                f"group {g!r} has {r.size} applicants, fewer than k/2={half}", group=g
            )
    if k % 2 == 0:
        return half, half
    # odd slot goes to the gender whose next-best screening score is higher
    nf = pool.qS[ranked_f[half]] if ranked_f.size > half else -math.inf
    nm = pool.qS[ranked_m[half]] if ranked_m.size > half else -math.inf
    if nf == nm == -math.inf:
        raise FeasibilityError("pool is smaller than k")
    if nf > nm or (nf == nm and ranked_f[half] < ranked_m[half]):
        return half + 1, half
    return half, half + 1


def _largest_remainder(k: int, shares: dict[str, float], caps: dict[str, int]) -> dict[str, int]:
    exact = {g: k * s for g, s in shares.items()}
    counts = {g: min(caps[g], math.floor(v)) for g, v in exact.items()}
    order = sorted(shares, key=lambda g: (-(exact[g] - math.floor(exact[g])), g))
    while sum(counts.values()) < k:
        for g in order:
            if sum(counts.values()) < k and counts[g] < caps[g]:
                counts[g] += 1
        if all(counts[g] >= caps[g] for g in counts) and sum(counts.values()) < k:
            raise FeasibilityError("pool is smaller than k")
    return counts


def _parity_search(pool: Pool, ranked_f, ranked_m, k: int, kind: PolicyKind, tol: float):
    """Pick the per-gender split (i.e. per-gender cutoffs) for a parity rule.

    Among splits whose gap is within ``tol``, keep the one with the largest
    total screening score; otherwise return the smallest gap, unsatisfied.
    """
    nf, nm = ranked_f.size, ranked_m.size
    kf = np.arange(max(0, k - nm), min(k, nf) + 1)
    if kf.size == 0:
        raise FeasibilityError("pool is smaller than k")
    km = k - kf

    def stats(ranked, counts):
        y = pool.yS[ranked].astype(float)
        tp = np.concatenate([[0.0], np.cumsum(y)])[counts]
        pos = y.sum()
        neg = y.size - pos
        fp = counts - tp
        err = ((pos - tp) + fp) / max(y.size, 1)
        tpr = tp / pos if pos > 0 else np.full(counts.shape, np.nan)
        fpr = fp / neg if neg > 0 else np.full(counts.shape, np.nan)
        return err, tpr, fpr

    err_f, tpr_f, fpr_f = stats(ranked_f, kf)
    err_m, tpr_m, fpr_m = stats(ranked_m, km)
    if kind is PolicyKind.ERROR_RATE_PARITY:
        gap = np.abs(err_f - err_m)
    else:
        gap = np.fmax(np.abs(tpr_f - tpr_m), np.abs(fpr_f - fpr_m))
        gap = np.nan_to_num(gap, nan=0.0)

    cum_f = np.concatenate([[0.0], np.cumsum(pool.qS[ranked_f])])
    cum_m = np.concatenate([[0.0], np.cumsum(pool.qS[ranked_m])])
    total = cum_f[kf] + cum_m[km]
    ok = gap <= tol
    if ok.any():
        best = np.flatnonzero(ok)[np.argmax(total[ok])]
    else:
        best = int(np.argmin(gap))
    return int(kf[best]), int(km[best]), bool(ok.any()), float(gap[best])


def _nearest_men(pool: Pool, cand: np.ndarray, km: int, target: float, match) -> np.ndarray:
    dist = np.abs(match[cand] - target)
    order = np.lexsort((cand, -pool.qS[cand], dist))
    return cand[order[:km]]


def _swap_men(pool: Pool, cand: np.ndarray, km: int, target: float, match) -> np.ndarray:
    """Start from the top ``km`` men by q^S and swap in reserve men to close the gap.

    Each step takes the improving (out, in) swap with the least q^S lost per
    unit of gap closed; stops when no swap shrinks the absolute gap.
    """
    sel = cand[:km].copy()
    res = cand[km:].copy()
    if res.size == 0 or km == 0:
        return sel
    gap = match[sel].mean() - target
    for _ in range(4 * km):
        if abs(gap) < 1e-12:
            break
        new = gap + (match[res][None, :] - match[sel][:, None]) / km
        gain = abs(gap) - np.abs(new)
        ok = gain > 1e-12
        if not ok.any():
            break
        loss = pool.qS[sel][:, None] - pool.qS[res][None, :]
        cost = np.where(ok, loss / np.where(ok, gain, 1.0), np.inf)
        i, j = np.unravel_index(np.argmin(cost), cost.shape)
        sel[i], res[j] = res[j], sel[i]
        gap = new[i, j]
    return sel


def _matched_men(pool: Pool, women: np.ndarray, ranked_m: np.ndarray, km: int, match, policy) -> np.ndarray:
    """Min-gap pick among the top ``multiplier * km`` men by q^S."""
    cand = ranked_m[: max(km, math.ceil(policy.candidate_pool_multiplier * km))]
    target = match[women].mean() if women.size else 0.0
    if policy.matching == "nearest":
        return _nearest_men(pool, cand, km, target, match)
    return _swap_men(pool, cand, km, target, match)


def shortlist(pool: Pool, k: int, policy: Policy) -> Shortlist:
    """Indices of the ``k`` applicants passed to the hiring stage."""
    n = len(pool)
    if not 1 <= k <= n:
        raise DomainError(f"k must lie in [1, {n}], got {k}")
    kind = policy.kind
    ranked_f, ranked_m = _split(pool)

    if kind is PolicyKind.NO_CONSTRAINT:
        return Shortlist(_top(np.arange(n), pool.qS, k))

    if kind is PolicyKind.EQUAL_SELECTION:
        kf, km = _equal_counts(pool, ranked_f, ranked_m, k)
        return Shortlist(np.concatenate([ranked_f[:kf], ranked_m[:km]]))

    if kind is PolicyKind.DEMOGRAPHIC_PARITY:
        counts = _largest_remainder(
            k,
            {"f": ranked_f.size / n, "m": ranked_m.size / n},
            {"f": ranked_f.size, "m": ranked_m.size},
        )
        return Shortlist(np.concatenate([ranked_f[: counts["f"]], ranked_m[: counts["m"]]]))

    if kind in _PARITY:
        kf, km, ok, gap = _parity_search(pool, ranked_f, ranked_m, k, kind, policy.tolerance)
        return Shortlist(np.concatenate([ranked_f[:kf], ranked_m[:km]]), ok, gap)

    kf, km = k // 2, k - k // 2
    for g, r, need in (("f", ranked_f, kf), ("m", ranked_m, km)):
        if r.size < need:
            raise FeasibilityError(f"group {g!r} has fewer than {need} applicants", group=g)
    women = ranked_f[:kf]
    match = pool.qS if kind is PolicyKind.EQUAL_SELECTION_MIN_QS_DIFF else pool.qH
    men = _matched_men(pool, women, ranked_m, km, match, policy)
    gap = float(abs(match[women].mean() - match[men].mean())) if kf and km else 0.0
    return Shortlist(np.concatenate([women, men]), True, gap)


def hire(pool: Pool, selected, m: int) -> np.ndarray:
    """Top ``m`` of the shortlist by hiring-manager score."""
    idx = np.asarray(getattr(selected, "indices", selected), dtype=int)
    if idx.size == 0:
        raise DomainError("cannot hire from an empty shortlist")
    if m < 1:
        raise DomainError("m must be at least 1")
    return _top(np.sort(idx), pool.qH, min(m, idx.size))
