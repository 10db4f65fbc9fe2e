"""Input prior (minibatch perturbation) and output prior construction.

The input prior perturbs the current minibatch's inputs in standardized
input space; perturbed batches are regenerated fresh every training step.
The output prior is a wide Gaussian over outputs at those perturbed inputs,
with its mean either copied from the source point's label (data-augmentation
style, the default) or held at a constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dists import Gaussian1D
from .rng import RngStream

NOISE_KINDS = ("gaussian", "uniform", "categorical_flip")
MEAN_RULES = ("passthrough", "constant")
KL_DIRECTIONS = ("forward", "reverse")


@dataclass(frozen=True)
class NcpConfig:
    """Everything that parameterizes the contrastive prior and its weight.

    sigma_x_sq is the input-noise variance (uniform noise spans
    [-2·sigma_x, 2·sigma_x]); sigma_mu_sq is the output prior's variance on
    the mean belief; sigma_y_sq is the data-space output prior variance used
    by the mixture model and by acquisition; gamma trades data fit against
    the prior term. All variances are in standardized units.
    """

    noise_kind: str = "gaussian"
    sigma_x_sq: float = 0.5
    sigma_mu_sq: float = 1.0
    sigma_y_sq: float = 1.0
    mean_rule: str = "passthrough"
    mu_y_const: float = 0.0
    gamma: float = 1.0
    kl_direction: str = "forward"
    flip_prob: float = 0.5

    def __post_init__(self) -> None:
        if self.noise_kind not in NOISE_KINDS:
            raise ValueError(f"noise_kind must be one of {NOISE_KINDS}, got {self.noise_kind!r}")
        if self.mean_rule not in MEAN_RULES:
            raise ValueError(f"mean_rule must be one of {MEAN_RULES}, got {self.mean_rule!r}")
        if self.kl_direction not in KL_DIRECTIONS:
            raise ValueError(
                f"kl_direction must be one of {KL_DIRECTIONS}, got {self.kl_direction!r}")
        if not (self.sigma_x_sq >= 0.0 and np.isfinite(self.sigma_x_sq)):
            raise ValueError(f"sigma_x_sq must be >= 0, got {self.sigma_x_sq}")
        for name in ("sigma_mu_sq", "sigma_y_sq"):
            v = getattr(self, name)
            if not (v > 0.0 and np.isfinite(v)):
                raise ValueError(f"{name} must be > 0, got {v}")
        if not (self.gamma >= 0.0 and np.isfinite(self.gamma)):
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError(f"flip_prob must lie in [0, 1], got {self.flip_prob}")


@dataclass(frozen=True)
class PerturbedBatch:
    """Perturbed inputs plus the labels of their unperturbed source rows."""

    x_tilde: np.ndarray
    y: np.ndarray | None
    spec: NcpConfig

    def __post_init__(self) -> None:
        if self.y is not None and self.y.shape[0] != self.x_tilde.shape[0]:
            raise ValueError("label count differs from perturbed row count")


def perturb_inputs(batch_x: np.ndarray, spec: NcpConfig, rng: RngStream,
                   batch_y: np.ndarray | None = None,
                   column_kinds: list[str] | None = None,
                   column_classes: dict[int, np.ndarray] | None = None) -> PerturbedBatch:
    """Perturb every row of batch_x according to spec; shape and order kept.

    Continuous columns receive the configured additive noise (gaussian:
    N(0, sigma_x_sq); uniform: U[-2·sigma_x, 2·sigma_x]). Columns marked
    "categorical" in column_kinds — all columns, under the categorical_flip
    kind — are instead resampled to a different class with probability
    flip_prob, uniformly over that column's other classes (column_classes).

    Draw order is fixed: one noise block for all continuous columns, then
    two uniforms per row for each categorical column in ascending index
    order — so the output is deterministic given rng.
    """
    x = np.asarray(batch_x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"batch_x must be 2-D, got shape {x.shape}")
    n, d = x.shape
    if spec.sigma_x_sq < 0.0:
        raise ValueError("sigma_x_sq must be >= 0")

    if column_kinds is None:
        default = "categorical" if spec.noise_kind == "categorical_flip" else "continuous"
        column_kinds = [default] * d
    if len(column_kinds) != d:
        raise ValueError("column_kinds length differs from feature count")
    if spec.noise_kind == "categorical_flip":
        column_kinds = ["categorical"] * d

    cont = [j for j, kind in enumerate(column_kinds) if kind == "continuous"]
    cat = [j for j, kind in enumerate(column_kinds) if kind == "categorical"]

    x_tilde = x.copy()
    if cont:
        sigma_x = float(np.sqrt(spec.sigma_x_sq))
        if spec.noise_kind == "uniform":
            eps = (2.0 * rng.uniform(size=(n, len(cont))) - 1.0) * (2.0 * sigma_x)
        else:
            eps = rng.normal(size=(n, len(cont))) * sigma_x
        x_tilde[:, cont] = x[:, cont] + eps

    for j in cat:
        classes = None if column_classes is None else column_classes.get(j)
        if classes is None:
            raise ValueError(f"column {j} is categorical but has no class list")
        classes = np.asarray(classes, dtype=np.float64)
        k = classes.shape[0]
        flip = rng.uniform(size=n) < spec.flip_prob
        # Offset in {1..k-1} rotates to a different class; k=1 degenerates
        # to offset 1 mod 1 = 0, i.e. no change, which is the only option.
        offset = 1 + np.floor(rng.uniform(size=n) * max(k - 1, 1)).astype(np.int64)
        offset = np.minimum(offset, max(k - 1, 1))
        cur = np.searchsorted(classes, x[:, j])
        if np.any(cur >= k) or np.any(classes[np.minimum(cur, k - 1)] != x[:, j]):
            raise ValueError(f"column {j} holds values outside its class list")
        x_tilde[:, j] = np.where(flip, classes[(cur + offset) % k], x[:, j])

    y = None if batch_y is None else np.asarray(batch_y, dtype=np.float64)
    return PerturbedBatch(x_tilde=x_tilde, y=y, spec=spec)


def prior_mean_values(batch_y: np.ndarray, spec: NcpConfig) -> np.ndarray:
    """Output-prior means per row: the source labels, or a shared constant."""
    y = np.asarray(batch_y, dtype=np.float64)
    if spec.mean_rule == "passthrough":
        return y.copy()
    return np.full(y.shape[0], spec.mu_y_const)


def output_prior_targets(batch_y: np.ndarray, spec: NcpConfig) -> list[Gaussian1D]:
    """Data-space output prior per row: N(mean rule applied, sigma_y_sq)."""
    means = prior_mean_values(batch_y, spec)
    return [Gaussian1D(float(m), spec.sigma_y_sq) for m in means]
