"""Univariate and bivariate Gaussian kernels and truncated-moment formulas.

Every function here is pure. Scalar inputs give Python floats back; array
inputs broadcast and give arrays back.

Thresholds may be passed as ``numpy.inf`` / ``-numpy.inf`` (the documented
sentinel for a vacuous constraint) to the bivariate functions only; they are
clipped to ``+-INF_CLIP`` internally, where double precision already saturates.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DegenerateError, DomainError, ModelError

INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

# Outer integration range for the 1-D reduction. Mass beyond 8.5 is < 1e-16.
X_CUT = 8.5
INF_CLIP = 40.0
# Post-quadrature clamp slack.
PROB_SLACK = 1e-13

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_UNIFORM_BREAKS = np.arange(-X_CUT, X_CUT + 0.5, 1.0)
_CHUNK = 2048


class Corr(float):
    """A correlation coefficient in [-1, 1]."""

    def __new__(cls, value: float):
        v = float(value)
        if math.isnan(v) or abs(v) > 1.0:
            raise DomainError(f"correlation must lie in [-1, 1], got {value!r}")
        return super().__new__(cls, v)


class Threshold(float):
    """A finite score cutoff in standard-normal units."""

    def __new__(cls, value: float):
        v = float(value)
        if not math.isfinite(v):
            raise DomainError(f"threshold must be finite, got {value!r}")
        return super().__new__(cls, v)


def _out(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


def _check_rho(rho, strict: bool = False):
    rho = np.asarray(rho, dtype=float)
    if np.isnan(rho).any():
        raise DomainError("correlation is NaN")
    bad = np.abs(rho) >= 1.0 if strict else np.abs(rho) > 1.0
    if bad.any():
        bound = "(-1, 1)" if strict else "[-1, 1]"
        raise DomainError(f"correlation must lie in {bound}")
    return rho


def norm_pdf(x):
    x = np.asarray(x, dtype=float)
    return _out(INV_SQRT_2PI * np.exp(-0.5 * x * x))


def norm_cdf(x):
    return _out(special.ndtr(np.asarray(x, dtype=float)))


def norm_sf(x):
    """Upper tail 1 - cdf(x), computed without cancellation."""
    return _out(special.ndtr(-np.asarray(x, dtype=float)))


def norm_kernel(x):
    """Return ``(pdf, cdf)`` of the standard normal at ``x``."""
    return norm_pdf(x), norm_cdf(x)


def norm_quantile(p):
    p = np.asarray(p, dtype=float)
    if np.isnan(p).any() or ((p <= 0.0) | (p >= 1.0)).any():
        raise DomainError("quantile requires p in the open interval (0, 1)")
    return _out(special.ndtri(p))


def bvn_pdf(x, y, rho):
    """Standard bivariate normal density with correlation ``rho`` (|rho| < 1)."""
    rho = _check_rho(rho, strict=True)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    one_m = 1.0 - rho * rho
    q = (x * x - 2.0 * rho * x * y + y * y) / one_m
    return _out(np.exp(-0.5 * q) / (2.0 * math.pi * np.sqrt(one_m)))


def _clamp_prob(p: np.ndarray) -> np.ndarray:
    if (p < -PROB_SLACK).any() or (p > 1.0 + PROB_SLACK).any():
        raise ArithmeticError("quadrature left [0, 1] by more than the allowed slack")
    return np.clip(p, 0.0, 1.0)


def _bvn_quad(a: np.ndarray, b: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """Integral of phi(x) * Phi((b - rho x)/s) over x in [-X_CUT, a].

    Each point gets its own panel layout: unit panels over the whole range plus
    a geometrically graded mesh around x* = b / rho, where the inner cdf turns
    into a step of width ~ s / |rho| as |rho| -> 1. Breakpoints are clipped into
    the integration range, so unused ones become zero-width panels.
    """
    s = np.sqrt(1.0 - rho * rho)
    lo = np.full_like(a, -X_CUT)
    hi = np.clip(a, -X_CUT, X_CUT)
    # below this |rho| the inner cdf has no sharp step inside the range
    nz = np.abs(rho) > 1e-6
    xstar = np.where(nz, b / np.where(nz, rho, 1.0), -X_CUT)
    scale = np.where(nz, s / np.where(nz, np.abs(rho), 1.0), 2 * X_CUT)
    smallest = float(scale.min()) if scale.size else 1.0
    n_geo = int(min(64, max(1, math.ceil(math.log2(2 * X_CUT / smallest)) + 2)))
    offsets = scale[:, None] * (0.5 * 2.0 ** np.arange(n_geo))[None, :]

    breaks = np.concatenate(
        [
            lo[:, None],
            hi[:, None],
            np.broadcast_to(_UNIFORM_BREAKS, (a.size, _UNIFORM_BREAKS.size)),
            xstar[:, None],
            xstar[:, None] - offsets,
            xstar[:, None] + offsets,
        ],
        axis=1,
    )
    breaks = np.sort(np.clip(breaks, lo[:, None], hi[:, None]), axis=1)
    left, right = breaks[:, :-1], breaks[:, 1:]
    half = 0.5 * (right - left)
    mid = 0.5 * (right + left)
    x = mid[..., None] + half[..., None] * _GL_NODES
    inner = special.ndtr((b[:, None, None] - rho[:, None, None] * x) / s[:, None, None])
    f = INV_SQRT_2PI * np.exp(-0.5 * x * x) * inner
    return np.einsum("npk,k,np->n", f, _GL_WEIGHTS, half)


def bvn_cdf(a, b, rho):
    """P(X <= a, Y <= b) for standard bivariate normal (X, Y) with corr ``rho``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.isnan(a).any() or np.isnan(b).any():
        raise DomainError("threshold is NaN")
    rho = _check_rho(rho)
    a, b, rho = np.broadcast_arrays(a, b, rho)
    shape = a.shape
    a = np.clip(a, -INF_CLIP, INF_CLIP).ravel()
    b = np.clip(b, -INF_CLIP, INF_CLIP).ravel()
    rho = rho.ravel()
    out = np.empty(a.size)

    pos = rho == 1.0
    neg = rho == -1.0
    out[pos] = special.ndtr(np.minimum(a[pos], b[pos]))
    out[neg] = np.maximum(0.0, special.ndtr(a[neg]) + special.ndtr(b[neg]) - 1.0)
    idx = np.flatnonzero(~(pos | neg))
    for start in range(0, idx.size, _CHUNK):
        sel = idx[start : start + _CHUNK]
        out[sel] = _bvn_quad(a[sel], b[sel], rho[sel])
    return _out(_clamp_prob(out).reshape(shape))


def bvn_tail(a, b, rho):
    """P(X > a, Y > b); the hire probability for thresholds (a, b)."""
    return bvn_cdf(-np.asarray(a, dtype=float), -np.asarray(b, dtype=float), rho)


def cond_exceed(tau, x, rho):
    """P(Y > tau | X = x) for a standard bivariate normal pair."""
    rho = _check_rho(rho, strict=True)
    s = np.sqrt(1.0 - rho * rho)
    return _out(special.ndtr((rho * np.asarray(x, float) - np.asarray(tau, float)) / s))


def corr_matrix(thetaS: float, thetaH: float, theta: float) -> np.ndarray:
    """Correlation matrix of (Q, Q^S, Q^H)."""
    return np.array(
        [[1.0, thetaS, thetaH], [thetaS, 1.0, theta], [thetaH, theta, 1.0]]
    )


def check_psd(thetaS: float, thetaH: float, theta: float, tol: float = 1e-12) -> np.ndarray:
    """Return the (Q, Q^S, Q^H) matrix or raise :class:`ModelError`."""
    for name, v in (("thetaS", thetaS), ("thetaH", thetaH), ("theta", theta)):
        if not math.isfinite(v) or abs(v) > 1.0:
            raise ModelError(f"{name}={v!r} is not a correlation")
    sigma = corr_matrix(thetaS, thetaH, theta)
    if np.linalg.eigvalsh(sigma)[0] < -tol:
        det = float(np.linalg.det(sigma))
        raise ModelError(
            f"correlation matrix (thetaS={thetaS}, thetaH={thetaH}, theta={theta}) "
            f"is not positive semi-definite (det={det:.3g})"
        )
    return sigma


def truncated_mean_q(thetaS, thetaH, theta, tauS, tauH) -> float:
    """E[Q | Q^S > tauS, Q^H > tauH] for the trivariate model (Tallis).

    Numerator terms are phi(tau) times the conditional upper tail of the other
    score at that boundary; the denominator is the bivariate upper tail.
    """
    check_psd(thetaS, thetaH, theta)
    theta = float(_check_rho(theta, strict=True))
    s = math.sqrt(1.0 - theta * theta)
    denom = bvn_tail(tauS, tauH, theta)
    if denom <= 0.0:
        raise DegenerateError(
            f"selection region (tauS={tauS}, tauH={tauH}) has zero probability"
        )
    num = thetaH * norm_pdf(tauH) * norm_sf((tauS - theta * tauH) / s) + thetaS * norm_pdf(
        tauS
    ) * norm_sf((tauH - theta * tauS) / s)
    return num / denom


def corner_mean_q(thetaS, thetaH, theta, tauS, tauH) -> float:
    """E[Q | Q^S = tauS, Q^H = tauH] (linear regression of Q on both scores)."""
    return (
        (thetaS * tauS + thetaH * tauH) - theta * (thetaS * tauH + thetaH * tauS)
    ) / (1.0 - theta * theta)


def dE_dtheta(thetaS, thetaH, theta, tauS, tauH) -> float:
    """Derivative of :func:`truncated_mean_q` in ``theta`` at fixed thresholds.

    Density-to-mass ratio at the corner times (corner expectation minus
    region expectation).
    """
    region = truncated_mean_q(thetaS, thetaH, theta, tauS, tauH)
    ratio = bvn_pdf(tauS, tauH, theta) / bvn_cdf(-tauS, -tauH, theta)
    return ratio * (corner_mean_q(thetaS, thetaH, theta, tauS, tauH) - region)
