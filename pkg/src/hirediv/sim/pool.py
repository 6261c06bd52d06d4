"""Synthetic applicant pools."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numkern as nk
from ..analytic import PipelineParams
from ..errors import DomainError, ModelError
from .rng import POOL_STREAM, make_rng


@dataclass(frozen=True)
class PoolSpec:
    """Recipe for one pool.

    ``label_noise`` is the correlation between the latent score behind the
    historical screening label and q^S (1 would make labels a pure q^S cutoff).
    Labels are positive at the rate ``params.shortlist_rate``.
    """

    n: int
    params: PipelineParams
    label_noise: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("a pool needs at least two applicants")
        if not 0.0 <= self.label_noise < 1.0:
            raise DomainError("label_noise must lie in [0, 1)")

    @property
    def p_a(self) -> float:
        return self.params.p_a


@dataclass(frozen=True)
class Applicant:
    gender: str
    q: float
    qS: float
    qH: float
    yS_label: bool


@dataclass
class Pool:
    """Column-oriented pool; ``pool[i]`` gives one :class:`Applicant`."""

    female: np.ndarray
    q: np.ndarray
    qS: np.ndarray
    qH: np.ndarray
    yS: np.ndarray

    def __len__(self) -> int:
        return self.female.size

    def __getitem__(self, i: int) -> Applicant:
        return Applicant(
            "f" if self.female[i] else "m",
            float(self.q[i]),
            float(self.qS[i]),
            float(self.qH[i]),
            bool(self.yS[i]),
        )


def sqrt_psd(sigma: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix."""
    w, v = np.linalg.eigh(sigma)
    if w[0] < -1e-12:
        raise ModelError(f"matrix is not positive semi-definite (min eigenvalue {w[0]:.3g})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


def draw_scores(params: PipelineParams, female: np.ndarray, rng: np.random.Generator):
    """Draw (q, qS, qH) for every applicant given gender flags."""
    n = female.size
    out = np.empty((n, 3))
    roots = {g: sqrt_psd(nk.corr_matrix(*params.corr(g))) for g in ("m", "f")}
    z = rng.standard_normal((n, 3))
    for g, mask in (("m", ~female), ("f", female)):
        out[mask] = z[mask] @ roots[g] + np.asarray(params.means(g))
    return out[:, 0], out[:, 1], out[:, 2]


def gen_pool(spec: PoolSpec, rng: np.random.Generator | None = None) -> Pool:
    """Sample a pool from the trivariate Gaussian score model."""
    if rng is None:
        rng = make_rng(spec.seed, POOL_STREAM)
    female = rng.random(spec.n) < spec.p_a
    q, qS, qH = draw_scores(spec.params, female, rng)
    r = spec.label_noise
    latent = r * qS + np.sqrt(1.0 - r * r) * rng.standard_normal(spec.n)
    # empirical cut keeps the label rate exact when group means or variances differ
    cut = np.quantile(latent, 1.0 - spec.params.shortlist_rate)
    return Pool(female=female, q=q, qS=qS, qH=qH, yS=latent > cut)


def _standardize(x: np.ndarray) -> np.ndarray:
    x = x - x.mean()
    sd = np.sqrt(np.mean(x * x))
    if sd == 0.0:
        raise DomainError("cannot standardize a constant vector")
    return x / sd


def gen_true_quality(
    qS: np.ndarray, qH: np.ndarray, thetaS: float, thetaH: float, rng: np.random.Generator
) -> np.ndarray:
    """Semi-synthetic true quality with sample-exact correlations.

    A random vector is orthogonalised against (1, qS, qH) and mixed with the
    standardised scores so that corr(q, qS) = thetaS and corr(q, qH) = thetaH
    hold exactly in the sample, with q of mean 0 and unit (population)
    variance. The empirical corr(qS, qH) is kept as is.
    """
    qS = np.asarray(qS, dtype=float)
    qH = np.asarray(qH, dtype=float)
    if qS.shape != qH.shape or qS.ndim != 1 or qS.size < 3:
        raise DomainError("qS and qH must be equal-length vectors of length >= 3")
    zS, zH = _standardize(qS), _standardize(qH)
    t = float(np.mean(zS * zH))
    if abs(t) >= 1.0 - 1e-12:
        raise ModelError("qS and qH are collinear; residual direction is undefined")
    det = 1.0 - thetaS**2 - thetaH**2 - t**2 + 2.0 * thetaS * thetaH * t
    if det < -1e-12:
        raise ModelError(
            f"target (thetaS={thetaS}, thetaH={thetaH}) with empirical theta={t:.4f} "
            f"violates the 3x3 determinant minor (det={det:.3g})"
        )
    if max(abs(thetaS), abs(thetaH)) > 1.0:
        raise ModelError("a 2x2 minor is negative: |thetaS| or |thetaH| exceeds 1")

    design = np.column_stack([np.ones_like(zS), zS, zH])
    raw = rng.standard_normal(zS.size)
    coef, *_ = np.linalg.lstsq(design, raw, rcond=None)
    resid = _standardize(raw - design @ coef)

    a, b = np.linalg.solve(np.array([[1.0, t], [t, 1.0]]), np.array([thetaS, thetaH]))
    c2 = max(0.0, 1.0 - (a * thetaS + b * thetaH))
    return a * zS + b * zH + np.sqrt(c2) * resid
