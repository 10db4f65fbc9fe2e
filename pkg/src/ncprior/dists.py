"""Gaussian and Bernoulli primitives used by every loss in the package.

Conventions: the second Gaussian parameter is always a *variance* (never a
standard deviation), and Bernoulli terms are evaluated from logits wherever
a logit is available, so log-probabilities stay finite under saturation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))

# Default lower bound on predicted variances, in standardized-target units.
VARIANCE_FLOOR = 1e-6


@dataclass(frozen=True)
class Gaussian1D:
    """A univariate Gaussian carrying mean and variance (not std)."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.mean):
            raise ValueError("mean must be finite")
        if not (self.variance > 0.0 and np.isfinite(self.variance)):
            raise ValueError(f"variance must be positive and finite, got {self.variance}")


def softplus(x):
    """log(1 + e^x), overflow-safe: max(x, 0) + log1p(e^{-|x|})."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def sigmoid(x):
    """Logistic function, evaluated on the non-overflowing branch per sign."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


def softplus_variance(raw, floor: float = VARIANCE_FLOOR):
    """Map an unconstrained head output to a variance: softplus(raw) + floor.

    The floor keeps divisions by predicted variance bounded even when the
    head saturates toward -inf; the result is strictly greater than floor.
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    return softplus(raw) + floor


def normal_log_pdf(y: float, dist: Gaussian1D) -> float:
    """log N(y | dist.mean, dist.variance) in nats."""
    return float(normal_log_pdf_arrays(y, dist.mean, dist.variance))


def normal_log_pdf_arrays(y, mean, var):
    """Elementwise Gaussian log-density over broadcastable arrays."""
    y = np.asarray(y, dtype=np.float64)
    mean = np.asarray(mean, dtype=np.float64)
    var = np.asarray(var, dtype=np.float64)
    if np.any(var <= 0.0):
        raise ValueError("variance must be strictly positive")
    out = -0.5 * (_LOG_2PI + np.log(var) + (y - mean) ** 2 / var)
    return out if out.ndim else float(out)


def kl_normal_normal(p: Gaussian1D, q: Gaussian1D) -> float:
    """KL(p || q) between univariate Gaussians, in nats; always >= 0."""
    return float(kl_normal_normal_arrays(p.mean, p.variance, q.mean, q.variance))


def kl_normal_normal_arrays(mean_p, var_p, mean_q, var_q):
    """Elementwise Gaussian KL over broadcastable arrays.

    0.5·(var_p/var_q + (mean_p − mean_q)²/var_q − 1 + ln var_q − ln var_p);
    identical arguments give exactly 0.0.
    """
    mean_p = np.asarray(mean_p, dtype=np.float64)
    var_p = np.asarray(var_p, dtype=np.float64)
    mean_q = np.asarray(mean_q, dtype=np.float64)
    var_q = np.asarray(var_q, dtype=np.float64)
    if np.any(var_p <= 0.0) or np.any(var_q <= 0.0):
        raise ValueError("variances must be strictly positive")
    out = 0.5 * (var_p / var_q + (mean_p - mean_q) ** 2 / var_q
                 - 1.0 + np.log(var_q) - np.log(var_p))
    return out if out.ndim else float(out)


def bernoulli_log_pmf(o, p1, strict: bool = False):
    """log Bern(o | p1) for o in {0, 1} and p1 in [0, 1].

    At the boundaries (p1 = 0 or 1) the impossible outcome yields -inf when
    strict is False, and raises when strict is True. Prefer
    bernoulli_log_pmf_from_logit when a logit is available.
    """
    o = np.asarray(o, dtype=np.float64)
    p1 = np.asarray(p1, dtype=np.float64)
    if np.any((o != 0.0) & (o != 1.0)):
        raise ValueError("outcome must be 0 or 1")
    if np.any((p1 < 0.0) | (p1 > 1.0)):
        raise ValueError("p1 must lie in [0, 1]")
    at_boundary = ((p1 == 0.0) & (o == 1.0)) | ((p1 == 1.0) & (o == 0.0))
    if strict and np.any(at_boundary):
        raise ValueError("outcome has probability 0")
    with np.errstate(divide="ignore"):
        out = np.where(o == 1.0, np.log(p1), np.log1p(-p1))
    return out if out.ndim else float(out)


def bernoulli_log_pmf_from_logit(o, logit):
    """log Bern(o | sigmoid(logit)) without forming the probability.

    ln p = −softplus(−logit) and ln(1−p) = −softplus(logit), so the value
    stays finite for arbitrarily large |logit|.
    """
    o = np.asarray(o, dtype=np.float64)
    logit = np.asarray(logit, dtype=np.float64)
    if np.any((o != 0.0) & (o != 1.0)):
        raise ValueError("outcome must be 0 or 1")
    out = -(o * softplus(-logit) + (1.0 - o) * softplus(logit))
    return out if out.ndim else float(out)
