"""Feed-forward trunk with three affine heads and hand-derived gradients.

Architecture: input -> [affine -> leaky ReLU] per hidden layer -> features
h(x), from which three affine heads read out: a deterministic mean, a raw
(unconstrained) variance, and an out-of-distribution logit. Positivity of
the variance and squashing of the logit are applied by callers, not here —
heads emit raw reals.

The mean head's parameters are used only by model kinds that point-estimate
the mean output layer; variational kinds keep their own posterior over that
layer and instead route gradients into the trunk through
``HeadGrads.features``.

Serialization format (stable): a JSON object with ``format``,
``layer_widths`` (input dim followed by hidden widths), and ``coeffs`` — all
coefficients flattened in the fixed order: per trunk layer, weight matrix
row-major (rows indexed by input) then bias; then mean weights, mean bias,
variance weights, variance bias, OOD weights, OOD bias. The same order
defines params_to_vector / vector_to_params.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .rng import RngStream

# Negative-side slope of the leaky ReLU; the subgradient at exactly 0 is
# also this value, so forward/backward agree at the kink.
DEFAULT_LEAKY_SLOPE = 0.2

_FORMAT = "ncprior-net-v1"


@dataclass(frozen=True)
class NetworkParams:
    """All point-estimated coefficients of one network.

    Weight matrices are (fan_in, fan_out); activations are row vectors, so
    the affine map is h @ W + b. Also serves as the container for
    NetworkParams-shaped gradients.
    """

    trunk_w: tuple[np.ndarray, ...]
    trunk_b: tuple[np.ndarray, ...]
    mean_w: np.ndarray
    mean_b: float
    var_w: np.ndarray
    var_b: float
    ood_w: np.ndarray
    ood_b: float

    def __post_init__(self) -> None:
        if len(self.trunk_w) != len(self.trunk_b):
            raise ValueError("trunk weight/bias counts differ")
        for i, (w, b) in enumerate(zip(self.trunk_w, self.trunk_b)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[1] != b.shape[0]:
                raise ValueError(f"trunk layer {i} shapes inconsistent")
            if i > 0 and self.trunk_w[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"trunk layers {i - 1}->{i} do not chain")
        feat = self.feature_dim
        for name in ("mean_w", "var_w", "ood_w"):
            w = getattr(self, name)
            if w.shape != (feat,):
                raise ValueError(f"{name} must have shape ({feat},), got {w.shape}")
        for arr in (*self.trunk_w, *self.trunk_b, self.mean_w, self.var_w, self.ood_w):
            if not np.all(np.isfinite(arr)):
                raise ValueError("non-finite network coefficient")
        if not all(np.isfinite(v) for v in (self.mean_b, self.var_b, self.ood_b)):
            raise ValueError("non-finite head bias")

    @property
    def input_dim(self) -> int:
        return self.trunk_w[0].shape[0] if self.trunk_w else self.mean_w.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.trunk_w[-1].shape[1] if self.trunk_w else self.mean_w.shape[0]

    @property
    def layer_widths(self) -> list[int]:
        widths = [self.input_dim]
        widths.extend(w.shape[1] for w in self.trunk_w)
        return widths


@dataclass(frozen=True)
class TrunkOutput:
    """Forward-pass results: features h(x) plus the two raw read-outs.

    For a single input vector, features is (feature_dim,) and the raw heads
    are floats; for a (n, d) batch, features is (n, feature_dim) and the
    raw heads are (n,).
    """

    features: np.ndarray
    var_raw: float | np.ndarray
    ood_logit: float | np.ndarray


@dataclass(frozen=True)
class HeadGrads:
    """Upstream gradients to contract against, any subset may be None.

    mean / var_raw / ood_logit are gradients on the corresponding head
    outputs; features is a gradient applied directly to h(x), used by
    variational mean layers that live outside this module.
    """

    mean: float | np.ndarray | None = None
    var_raw: float | np.ndarray | None = None
    ood_logit: float | np.ndarray | None = None
    features: np.ndarray | None = None


def init_params(layer_widths: Sequence[int], rng: RngStream) -> NetworkParams:
    """Initialize weights uniform on ±sqrt(3/fan_in) (std 1/sqrt(fan_in)), biases zero.

    layer_widths = [input_dim, hidden_1, ..., hidden_L]; with no hidden
    entries the heads read the input directly. Deterministic given rng;
    draw order is trunk layers in order, then mean, variance, OOD heads.
    """
    widths = [int(w) for w in layer_widths]
    if not widths:
        raise ValueError("layer_widths must be non-empty")
    if any(w < 1 for w in widths):
        raise ValueError(f"all widths must be >= 1, got {widths}")

    def draw(fan_in: int, shape) -> np.ndarray:
        bound = np.sqrt(3.0 / fan_in)
        return (2.0 * rng.uniform(size=shape) - 1.0) * bound

    trunk_w, trunk_b = [], []
    for d_in, d_out in zip(widths[:-1], widths[1:]):
        trunk_w.append(draw(d_in, (d_in, d_out)))
        trunk_b.append(np.zeros(d_out))
    feat = widths[-1]
    return NetworkParams(
        trunk_w=tuple(trunk_w), trunk_b=tuple(trunk_b),
        mean_w=draw(feat, (feat,)), mean_b=0.0,
        var_w=draw(feat, (feat,)), var_b=0.0,
        ood_w=draw(feat, (feat,)), ood_b=0.0,
    )


def _as_batch(x: np.ndarray, input_dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise ValueError(f"input has shape {x.shape}, network expects dimension {input_dim}")
    return x, single


def forward(params: NetworkParams, x: np.ndarray,
            slope: float = DEFAULT_LEAKY_SLOPE) -> TrunkOutput:
    """Pure forward pass; accepts a single vector or an (n, d) batch."""
    h, single = _as_batch(x, params.input_dim)
    for w, b in zip(params.trunk_w, params.trunk_b):
        z = h @ w + b
        h = np.where(z > 0.0, z, slope * z)
    var_raw = h @ params.var_w + params.var_b
    ood_logit = h @ params.ood_w + params.ood_b
    if single:
        return TrunkOutput(features=h[0], var_raw=float(var_raw[0]),
                           ood_logit=float(ood_logit[0]))
    return TrunkOutput(features=h, var_raw=var_raw, ood_logit=ood_logit)


def mean_output(params: NetworkParams, features: np.ndarray) -> float | np.ndarray:
    """Point-estimated mean head: features @ mean_w + mean_b."""
    features = np.asarray(features, dtype=np.float64)
    out = features @ params.mean_w + params.mean_b
    return float(out) if features.ndim == 1 else out


def _upstream(grad, n: int, feat: int | None = None) -> np.ndarray:
    shape = (n,) if feat is None else (n, feat)
    if grad is None:
        return np.zeros(shape)
    arr = np.asarray(grad, dtype=np.float64)
    if feat is None and arr.ndim == 0:
        arr = arr[None]
    elif feat is not None and arr.ndim == 1:
        arr = arr[None, :]
    if arr.shape != shape:
        raise ValueError(f"upstream gradient has shape {arr.shape}, expected {shape}")
    return arr


def backward(params: NetworkParams, x: np.ndarray, head_grads: HeadGrads,
             slope: float = DEFAULT_LEAKY_SLOPE) -> NetworkParams:
    """Exact reverse-mode gradients, summed over the batch.

    Returns d/dparams of sum_n [ gm_n·mean_n + gv_n·var_raw_n
    + go_n·ood_logit_n + gf_n·h_n ] as a NetworkParams-shaped value.
    Recomputes the forward pass internally; the caller provides the same x.
    """
    h, _ = _as_batch(x, params.input_dim)
    n = h.shape[0]
    acts = [h]  # layer inputs, acts[i] feeds trunk layer i
    zs = []
    for w, b in zip(params.trunk_w, params.trunk_b):
        z = acts[-1] @ w + b
        zs.append(z)
        acts.append(np.where(z > 0.0, z, slope * z))
    feats = acts[-1]

    gm = _upstream(head_grads.mean, n)
    gv = _upstream(head_grads.var_raw, n)
    go = _upstream(head_grads.ood_logit, n)
    gf = _upstream(head_grads.features, n, params.feature_dim)

    d_mean_w = feats.T @ gm
    d_var_w = feats.T @ gv
    d_ood_w = feats.T @ go
    # All four upstream paths meet at the features.
    dh = (gf + gm[:, None] * params.mean_w + gv[:, None] * params.var_w
          + go[:, None] * params.ood_w)

    d_trunk_w: list[np.ndarray] = []
    d_trunk_b: list[np.ndarray] = []
    for i in reversed(range(len(params.trunk_w))):
        # Subgradient at z == 0 is the negative-side slope, matching forward.
        dz = dh * np.where(zs[i] > 0.0, 1.0, slope)
        d_trunk_w.append(acts[i].T @ dz)
        d_trunk_b.append(dz.sum(axis=0))
        dh = dz @ params.trunk_w[i].T
    d_trunk_w.reverse()
    d_trunk_b.reverse()

    return NetworkParams(
        trunk_w=tuple(d_trunk_w), trunk_b=tuple(d_trunk_b),
        mean_w=d_mean_w, mean_b=float(gm.sum()),
        var_w=d_var_w, var_b=float(gv.sum()),
        ood_w=d_ood_w, ood_b=float(go.sum()),
    )


def n_params(layer_widths: Sequence[int]) -> int:
    widths = list(layer_widths)
    total = sum((d_in + 1) * d_out for d_in, d_out in zip(widths[:-1], widths[1:]))
    return total + 3 * (widths[-1] + 1)


def params_to_vector(params: NetworkParams) -> np.ndarray:
    parts = []
    for w, b in zip(params.trunk_w, params.trunk_b):
        parts.append(w.ravel())
        parts.append(b)
    for head_w, head_b in ((params.mean_w, params.mean_b),
                           (params.var_w, params.var_b),
                           (params.ood_w, params.ood_b)):
        parts.append(head_w)
        parts.append(np.array([head_b]))
    return np.concatenate(parts)


def vector_to_params(vec: np.ndarray, layer_widths: Sequence[int]) -> NetworkParams:
    vec = np.asarray(vec, dtype=np.float64)
    widths = [int(w) for w in layer_widths]
    expected = n_params(widths)
    if vec.shape != (expected,):
        raise ValueError(f"vector has shape {vec.shape}, widths {widths} need ({expected},)")
    pos = 0

    def take(count: int) -> np.ndarray:
        nonlocal pos
        out = vec[pos:pos + count]
        pos += count
        return out

    trunk_w, trunk_b = [], []
    for d_in, d_out in zip(widths[:-1], widths[1:]):
        trunk_w.append(take(d_in * d_out).reshape(d_in, d_out).copy())
        trunk_b.append(take(d_out).copy())
    feat = widths[-1]
    heads = []
    for _ in range(3):
        heads.append((take(feat).copy(), float(take(1)[0])))
    return NetworkParams(
        trunk_w=tuple(trunk_w), trunk_b=tuple(trunk_b),
        mean_w=heads[0][0], mean_b=heads[0][1],
        var_w=heads[1][0], var_b=heads[1][1],
        ood_w=heads[2][0], ood_b=heads[2][1],
    )


def params_to_json(params: NetworkParams) -> dict:
    return {
        "format": _FORMAT,
        "layer_widths": params.layer_widths,
        "coeffs": params_to_vector(params).tolist(),
    }


def params_from_json(obj: dict) -> NetworkParams:
    if obj.get("format") != _FORMAT:
        raise ValueError(f"unrecognized network format: {obj.get('format')!r}")
    return vector_to_params(np.asarray(obj["coeffs"], dtype=np.float64),
                            obj["layer_widths"])


def save_params(params: NetworkParams, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_json(params), fh)


def load_params(path: str) -> NetworkParams:
    with open(path, "r", encoding="utf-8") as fh:
        return params_from_json(json.load(fh))
