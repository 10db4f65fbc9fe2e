"""Expected-information-gain scoring and tempered batch selection.

The acquisition weight of a candidate x is (1 + Var[q(µ(x))]/σ²(x))^(1/τ)
for the variational kinds — the epistemic-to-noise ratio tempered by τ.
Kinds without a mean belief substitute: the OOD-classifier maps its π(x)
into the same form via epistemic variance π·σ_y² (the extra variance its
mixture assigns), and the plain point estimate falls back to predictive
variance (σ²(x))^(1/τ) since it carries no epistemic signal at all.

Selection draws k distinct pool indices, each proportional to the remaining
weights. Normalizing weights to a distribution and exponentiating the
log-gain by 1/τ before normalizing are the same operation, so no explicit
softmax appears; weights are formed in log space so small τ cannot
overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models import Prediction, PredictionBatch
from .rng import RngStream


@dataclass(frozen=True)
class AcquisitionConfig:
    """Selection temperature and labels acquired per round."""

    tau: float = 0.5
    batch_k: int = 1

    def __post_init__(self) -> None:
        if not (self.tau > 0.0 and np.isfinite(self.tau)):
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.batch_k < 1:
            raise ValueError(f"batch_k must be >= 1, got {self.batch_k}")


def _log_weights(model_kind: str, epistemic_var, aleatoric_var, ood_prob,
                 tau: float, sigma_y_sq: float) -> np.ndarray:
    epistemic_var = np.asarray(epistemic_var, dtype=np.float64)
    aleatoric_var = np.asarray(aleatoric_var, dtype=np.float64)
    if np.any(aleatoric_var <= 0.0):
        raise ValueError("aleatoric variance must be > 0")
    if tau <= 0.0:
        raise ValueError("tau must be > 0")
    if model_kind in ("bbb", "bbb_ncp"):
        return np.log1p(epistemic_var / aleatoric_var) / tau
    if model_kind == "odc_ncp":
        if ood_prob is None:
            raise ValueError("OOD-classifier weights need ood_probability")
        ood_prob = np.asarray(ood_prob, dtype=np.float64)
        return np.log1p(ood_prob * sigma_y_sq / aleatoric_var) / tau
    if model_kind == "det":
        return np.log(aleatoric_var) / tau
    raise ValueError(f"unknown model kind {model_kind!r}")


def information_gain_weight(pred: Prediction, model_kind: str, tau: float,
                            sigma_y_sq: float = 1.0) -> float:
    """Acquisition weight of a single prediction; always >= 0."""
    lw = _log_weights(model_kind, pred.epistemic_variance, pred.aleatoric_variance,
                      pred.ood_probability, tau, sigma_y_sq)
    with np.errstate(over="ignore"):  # saturating to inf is fine for sampling
        return float(np.exp(lw))


def pool_weights(preds: PredictionBatch, model_kind: str, tau: float,
                 sigma_y_sq: float = 1.0) -> np.ndarray:
    """Vectorized information_gain_weight over a scored pool."""
    lw = _log_weights(model_kind, preds.epistemic_variance, preds.aleatoric_variance,
                      preds.ood_probability, tau, sigma_y_sq)
    with np.errstate(over="ignore"):
        return np.exp(lw)


def sample_acquisition(weights, cfg: AcquisitionConfig, rng: RngStream) -> np.ndarray:
    """Draw cfg.batch_k distinct indices, each proportional to remaining weights.

    Exactly one uniform is consumed per selection, so the draw count is
    fixed. If the remaining weight mass hits zero mid-batch (possible when
    some weights are exactly 0), the rest of the batch falls back to
    uniform selection over the remaining indices.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1:
        raise ValueError(f"weights must be a vector, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0.0):
        raise ValueError("weights must be finite and nonnegative")
    n = w.shape[0]
    if cfg.batch_k > n:
        raise ValueError(f"cannot select {cfg.batch_k} from a pool of {n}")
    if not np.any(w > 0.0):
        raise ValueError("weights must not be all zero")

    alive = np.ones(n, dtype=bool)
    out = np.empty(cfg.batch_k, dtype=np.int64)
    for i in range(cfg.batch_k):
        w_alive = np.where(alive, w, 0.0)
        total = float(w_alive.sum())
        if total > 0.0:
            cum = np.cumsum(w_alive)
            # u < total, and searchsorted(right) skips zero-weight slots.
            idx = int(np.searchsorted(cum, rng.uniform() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            remaining = np.flatnonzero(alive)
            j = int(rng.uniform() * remaining.shape[0])
            idx = int(remaining[min(j, remaining.shape[0] - 1)])
        out[i] = idx
        alive[idx] = False
    return out
