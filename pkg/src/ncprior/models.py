"""The four model variants and their training losses.

Kinds:
  det     — point-estimated heteroskedastic Gaussian regression (NLL only).
  bbb     — det's likelihood with a variational belief over the mean output
            layer and a weight-space KL penalty against a zero-mean prior.
  bbb_ncp — bbb's likelihood term plus a contrastive output-prior KL
            evaluated at perturbed inputs instead of the weight-space KL.
  odc_ncp — point-estimated network with an extra OOD head trained to call
            clean inputs in-distribution and perturbed inputs OOD; its
            predictive mixes the network's Gaussian with a wide prior.

The weight belief covers only the mean output layer (weights + bias over
the trunk features); the trunk and the other heads are point estimates.
Losses return (scalar, LossGrads) with exact hand-derived gradients;
RNG-consuming losses draw one reparameterized weight sample per call,
shared across the minibatch.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .dists import (Gaussian1D, kl_normal_normal_arrays, normal_log_pdf_arrays,
                    sigmoid, softplus, softplus_variance)
from .network import (HeadGrads, NetworkParams, backward, forward, mean_output,
                      n_params, params_from_json, params_to_json,
                      params_to_vector, vector_to_params)
from .priors import NcpConfig, PerturbedBatch, prior_mean_values
from .rng import RngStream

MODEL_KINDS = ("det", "bbb", "bbb_ncp", "odc_ncp")
BAYESIAN_KINDS = ("bbb", "bbb_ncp")

_CKPT_FORMAT = "ncprior-checkpoint-v1"


@dataclass(frozen=True)
class VariationalPosterior:
    """Diagonal Gaussian belief over the mean output layer's coefficients.

    m and rho are (feature_dim + 1,) vectors — weights first, bias last —
    holding per-coefficient means and log standard deviations.
    """

    m: np.ndarray
    rho: np.ndarray

    def __post_init__(self) -> None:
        if self.m.ndim != 1 or self.m.shape != self.rho.shape:
            raise ValueError(f"m and rho must be matching vectors, got "
                             f"{self.m.shape} and {self.rho.shape}")
        if not (np.all(np.isfinite(self.m)) and np.all(np.isfinite(self.rho))):
            raise ValueError("non-finite posterior coefficient")

    @property
    def n_coeffs(self) -> int:
        return self.m.shape[0]


@dataclass(frozen=True)
class WeightPrior:
    """Independent N(0, variance) prior per posterior coefficient."""

    variance: float = 1.0

    def __post_init__(self) -> None:
        if not (self.variance > 0.0 and np.isfinite(self.variance)):
            raise ValueError(f"prior variance must be > 0, got {self.variance}")


@dataclass(frozen=True)
class Prediction:
    """Decomposed prediction at one input.

    epistemic_variance is Var[q(µ(x))] for the variational kinds and exactly
    0.0 (degenerate flag) for kinds without a weight belief; the aleatoric
    variance is already floored positive. ood_probability is set only by the
    OOD-classifier kind.
    """

    mean: float
    epistemic_variance: float
    aleatoric_variance: float
    ood_probability: float | None = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.mean) and np.isfinite(self.epistemic_variance)
                and np.isfinite(self.aleatoric_variance)):
            raise ValueError("non-finite prediction field")
        if self.epistemic_variance < 0.0:
            raise ValueError("epistemic variance must be >= 0")
        if self.aleatoric_variance <= 0.0:
            raise ValueError("aleatoric variance must be > 0")
        if self.ood_probability is not None and not 0.0 <= self.ood_probability <= 1.0:
            raise ValueError("ood_probability must lie in [0, 1]")

    @property
    def degenerate(self) -> bool:
        return self.epistemic_variance == 0.0

    @property
    def mean_belief(self) -> Gaussian1D:
        if self.degenerate:
            raise ValueError("degenerate mean belief has no Gaussian form")
        return Gaussian1D(self.mean, self.epistemic_variance)


@dataclass(frozen=True)
class PredictionBatch:
    """Column arrays of Prediction fields over a batch of inputs."""

    mean: np.ndarray
    epistemic_variance: np.ndarray
    aleatoric_variance: np.ndarray
    ood_probability: np.ndarray | None = None


@dataclass(frozen=True)
class LossGrads:
    """Gradients of one loss: NetworkParams-shaped, plus posterior vectors."""

    net: NetworkParams
    post_m: np.ndarray | None = None
    post_rho: np.ndarray | None = None


def init_posterior(feature_dim: int, rng: RngStream,
                   rho_init: float = -3.0) -> VariationalPosterior:
    """Means drawn like a fresh output layer; log-stds constant (std ≈ 0.05)."""
    if feature_dim < 1:
        raise ValueError("feature_dim must be >= 1")
    bound = np.sqrt(3.0 / feature_dim)
    m = np.zeros(feature_dim + 1)
    m[:-1] = (2.0 * rng.uniform(size=feature_dim) - 1.0) * bound
    return VariationalPosterior(m=m, rho=np.full(feature_dim + 1, float(rho_init)))


def mean_belief(posterior: VariationalPosterior, features: np.ndarray) -> Gaussian1D:
    """Exact q(µ(x)) for a linear layer under the diagonal Gaussian belief.

    N( Σ h_i m_i + m_bias , Σ h_i² e^{2ρ_i} + e^{2ρ_bias} ).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (posterior.n_coeffs - 1,):
        raise ValueError(f"features have shape {features.shape}, posterior expects "
                         f"({posterior.n_coeffs - 1},)")
    mu, var = mean_belief_arrays(posterior, features[None, :])
    return Gaussian1D(float(mu[0]), float(var[0]))


def mean_belief_arrays(posterior: VariationalPosterior,
                       features: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched mean-belief moments over (n, feature_dim) features."""
    if features.ndim != 2 or features.shape[1] != posterior.n_coeffs - 1:
        raise ValueError(f"features have shape {features.shape}, posterior expects "
                         f"(n, {posterior.n_coeffs - 1})")
    mu = features @ posterior.m[:-1] + posterior.m[-1]
    var = features**2 @ np.exp(2.0 * posterior.rho[:-1]) + np.exp(2.0 * posterior.rho[-1])
    return mu, var


def _check_batch(batch_x, batch_y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(batch_x, dtype=np.float64)
    y = np.asarray(batch_y, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"batch_x must be 2-D, got shape {x.shape}")
    if y.shape != (x.shape[0],):
        raise ValueError(f"batch_y has shape {y.shape}, expected ({x.shape[0]},)")
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    return x, y


def _nll_head_grads(y, mu, var, var_raw, n):
    """Upstream grads of mean(-ln N(y | mu, var)) on mu and on var_raw."""
    g_mu = (mu - y) / var / n
    g_var = (0.5 / var - (y - mu) ** 2 / (2.0 * var * var)) / n
    return g_mu, g_var * sigmoid(var_raw)


def _add_params(a: NetworkParams, b: NetworkParams) -> NetworkParams:
    return vector_to_params(params_to_vector(a) + params_to_vector(b), a.layer_widths)


def det_loss(params: NetworkParams, batch_x, batch_y) -> tuple[float, LossGrads]:
    """Mean heteroskedastic Gaussian NLL with exact gradients."""
    x, y = _check_batch(batch_x, batch_y)
    out = forward(params, x)
    mu = mean_output(params, out.features)
    var = softplus_variance(out.var_raw)
    loss = float(np.mean(-normal_log_pdf_arrays(y, mu, var)))
    g_mu, g_raw = _nll_head_grads(y, mu, var, out.var_raw, x.shape[0])
    net = backward(params, x, HeadGrads(mean=g_mu, var_raw=g_raw))
    return loss, LossGrads(net=net)


def _expected_nll(params, posterior, x, y, rng):
    """Shared likelihood term of the variational kinds.

    One reparameterized sample θ = m + e^ρ ε of the mean layer (shared
    across the batch) gives an unbiased estimate of -E_q[ln p(y|x,θ)];
    gradients flow to m and ρ through θ and into the trunk through the
    features.
    """
    out = forward(params, x)
    eps = rng.normal(size=posterior.n_coeffs)
    sd = np.exp(posterior.rho)
    theta = posterior.m + sd * eps
    mu = out.features @ theta[:-1] + theta[-1]
    var = softplus_variance(out.var_raw)
    loss = float(np.mean(-normal_log_pdf_arrays(y, mu, var)))
    g_mu, g_raw = _nll_head_grads(y, mu, var, out.var_raw, x.shape[0])
    g_theta = np.empty_like(theta)
    g_theta[:-1] = out.features.T @ g_mu
    g_theta[-1] = g_mu.sum()
    g_feat = g_mu[:, None] * theta[:-1][None, :]
    net = backward(params, x, HeadGrads(var_raw=g_raw, features=g_feat))
    return loss, net, g_theta, g_theta * eps * sd


def bbb_loss(params: NetworkParams, posterior: VariationalPosterior,
             prior: WeightPrior, batch_x, batch_y, dataset_size: int,
             rng: RngStream) -> tuple[float, LossGrads]:
    """Expected NLL plus the weight-space KL scaled by 1/dataset_size."""
    x, y = _check_batch(batch_x, batch_y)
    if dataset_size < x.shape[0]:
        raise ValueError("dataset_size must be >= batch size")
    data, net, g_m, g_rho = _expected_nll(params, posterior, x, y, rng)
    var_q = np.exp(2.0 * posterior.rho)
    kl = float(kl_normal_normal_arrays(posterior.m, var_q, 0.0, prior.variance).sum())
    g_m = g_m + posterior.m / prior.variance / dataset_size
    g_rho = g_rho + (var_q / prior.variance - 1.0) / dataset_size
    return data + kl / dataset_size, LossGrads(net=net, post_m=g_m, post_rho=g_rho)


def bbb_ncp_loss(params: NetworkParams, posterior: VariationalPosterior,
                 batch_x, batch_y, perturbed: PerturbedBatch, ncp: NcpConfig,
                 rng: RngStream) -> tuple[float, LossGrads]:
    """Expected NLL plus γ · mean KL(output prior, q(µ(x̃))) at perturbed inputs.

    The forward direction puts the prior N(µ_µ, σ_µ²) on the KL's left
    (µ_µ = the source row's label under the passthrough rule); the reverse
    flag swaps the arguments.
    """
    x, y = _check_batch(batch_x, batch_y)
    if ncp.gamma < 0.0:
        raise ValueError("gamma must be >= 0")
    data, net, g_m, g_rho = _expected_nll(params, posterior, x, y, rng)
    if ncp.gamma == 0.0:
        return data, LossGrads(net=net, post_m=g_m, post_rho=g_rho)

    xt = np.asarray(perturbed.x_tilde, dtype=np.float64)
    n_t = xt.shape[0]
    if n_t == 0:
        raise ValueError("empty perturbed batch")
    if perturbed.y is not None:
        prior_mu = prior_mean_values(perturbed.y, ncp)
    elif ncp.mean_rule == "constant":
        prior_mu = np.full(n_t, ncp.mu_y_const)
    else:
        raise ValueError("label-passthrough output prior needs source labels")

    feats = forward(params, xt).features
    m_w, ew = posterior.m[:-1], np.exp(2.0 * posterior.rho[:-1])
    eb = np.exp(2.0 * posterior.rho[-1])
    mu_q = feats @ m_w + posterior.m[-1]
    s_q = feats**2 @ ew + eb
    sp2 = ncp.sigma_mu_sq
    if ncp.kl_direction == "forward":
        kls = kl_normal_normal_arrays(prior_mu, sp2, mu_q, s_q)
        g_mu_q = (mu_q - prior_mu) / s_q
        g_s_q = 0.5 * (1.0 / s_q - (sp2 + (prior_mu - mu_q) ** 2) / s_q**2)
    else:
        kls = kl_normal_normal_arrays(mu_q, s_q, prior_mu, sp2)
        g_mu_q = (mu_q - prior_mu) / sp2
        g_s_q = 0.5 * (1.0 / sp2 - 1.0 / s_q)
    scale = ncp.gamma / n_t
    loss = data + scale * float(kls.sum())
    g_mu_q = g_mu_q * scale
    g_s_q = g_s_q * scale

    g_m2 = np.empty_like(posterior.m)
    g_m2[:-1] = feats.T @ g_mu_q
    g_m2[-1] = g_mu_q.sum()
    g_rho2 = np.empty_like(posterior.rho)
    g_rho2[:-1] = ((feats**2).T @ g_s_q) * 2.0 * ew
    g_rho2[-1] = g_s_q.sum() * 2.0 * eb
    g_feat = g_mu_q[:, None] * m_w[None, :] + g_s_q[:, None] * (2.0 * feats * ew[None, :])
    net = _add_params(net, backward(params, xt, HeadGrads(features=g_feat)))
    return loss, LossGrads(net=net, post_m=g_m + g_m2, post_rho=g_rho + g_rho2)


def odc_ncp_loss(params: NetworkParams, batch_x, batch_y,
                 perturbed: PerturbedBatch, ncp: NcpConfig) -> tuple[float, LossGrads]:
    """Gaussian NLL + in-distribution Bernoulli term + γ · OOD term at x̃.

    mean[-ln N(y|µ,σ²) - ln Bern(0|π(x))] + γ·mean[-ln Bern(1|π(x̃))], with
    both Bernoulli terms evaluated from logits: -ln Bern(0|π) = softplus(o)
    and -ln Bern(1|π̃) = softplus(-õ).
    """
    x, y = _check_batch(batch_x, batch_y)
    xt = np.asarray(perturbed.x_tilde, dtype=np.float64)
    if xt.shape[0] == 0:
        raise ValueError("empty perturbed batch")
    n, n_t = x.shape[0], xt.shape[0]

    out = forward(params, x)
    mu = mean_output(params, out.features)
    var = softplus_variance(out.var_raw)
    nll = -normal_log_pdf_arrays(y, mu, var)
    out_t = forward(params, xt)
    loss = (float(np.mean(nll + softplus(out.ood_logit)))
            + ncp.gamma * float(np.mean(softplus(-out_t.ood_logit))))

    g_mu, g_raw = _nll_head_grads(y, mu, var, out.var_raw, n)
    g_o = sigmoid(out.ood_logit) / n
    g_ot = -ncp.gamma * sigmoid(-out_t.ood_logit) / n_t
    net = _add_params(
        backward(params, x, HeadGrads(mean=g_mu, var_raw=g_raw, ood_logit=g_o)),
        backward(params, xt, HeadGrads(ood_logit=g_ot)))
    return loss, LossGrads(net=net)


def predict(model_kind: str, params: NetworkParams,
            posterior: VariationalPosterior | None, x: np.ndarray) -> Prediction:
    """Decomposed prediction at a single input vector."""
    _check_kind(model_kind)
    bayesian = model_kind in BAYESIAN_KINDS
    if bayesian and posterior is None:
        raise ValueError(f"model kind {model_kind!r} needs a posterior")
    if not bayesian and posterior is not None:
        raise ValueError(f"model kind {model_kind!r} takes no posterior")
    out = forward(params, np.asarray(x, dtype=np.float64))
    var = float(softplus_variance(out.var_raw))
    if bayesian:
        belief = mean_belief(posterior, out.features)
        return Prediction(mean=belief.mean, epistemic_variance=belief.variance,
                          aleatoric_variance=var)
    mu = float(mean_output(params, out.features))
    ood = float(sigmoid(out.ood_logit)) if model_kind == "odc_ncp" else None
    return Prediction(mean=mu, epistemic_variance=0.0, aleatoric_variance=var,
                      ood_probability=ood)


def predict_batch(model_kind: str, params: NetworkParams,
                  posterior: VariationalPosterior | None,
                  x: np.ndarray) -> PredictionBatch:
    """Vectorized predict over an (n, d) input matrix."""
    _check_kind(model_kind)
    bayesian = model_kind in BAYESIAN_KINDS
    if bayesian and posterior is None:
        raise ValueError(f"model kind {model_kind!r} needs a posterior")
    if not bayesian and posterior is not None:
        raise ValueError(f"model kind {model_kind!r} takes no posterior")
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"x must be 2-D, got shape {x.shape}")
    out = forward(params, x)
    var = softplus_variance(out.var_raw)
    if bayesian:
        mu, ep = mean_belief_arrays(posterior, out.features)
        return PredictionBatch(mean=mu, epistemic_variance=ep, aleatoric_variance=var)
    mu = mean_output(params, out.features)
    ood = sigmoid(out.ood_logit) if model_kind == "odc_ncp" else None
    return PredictionBatch(mean=mu, epistemic_variance=np.zeros_like(mu),
                           aleatoric_variance=var, ood_probability=ood)


def predictive_distribution(pred: Prediction, ncp: NcpConfig) -> Gaussian1D:
    """Single Gaussian combining the uncertainty components.

    Variational kinds add epistemic and aleatoric variances; the OOD
    mixture is moment-matched with the network mean reused on the OOD
    branch: N(µ, (1−π)·σ²(x) + π·σ_y²).
    """
    if pred.ood_probability is not None:
        pi = pred.ood_probability
        return Gaussian1D(pred.mean,
                          (1.0 - pi) * pred.aleatoric_variance + pi * ncp.sigma_y_sq)
    return Gaussian1D(pred.mean, pred.epistemic_variance + pred.aleatoric_variance)


def _check_kind(model_kind: str) -> None:
    if model_kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {model_kind!r}; valid: {MODEL_KINDS}")


def n_trainable(layer_widths, model_kind: str) -> int:
    base = n_params(layer_widths)
    if model_kind in BAYESIAN_KINDS:
        return base + 2 * (list(layer_widths)[-1] + 1)
    return base


def pack(params: NetworkParams,
         posterior: VariationalPosterior | None = None) -> np.ndarray:
    """Flatten trainables into one vector: network coefficients, then m, ρ."""
    if posterior is None:
        return params_to_vector(params)
    return np.concatenate([params_to_vector(params), posterior.m, posterior.rho])


def unpack(vec: np.ndarray, layer_widths, with_posterior: bool
           ) -> tuple[NetworkParams, VariationalPosterior | None]:
    vec = np.asarray(vec, dtype=np.float64)
    n_net = n_params(layer_widths)
    if not with_posterior:
        return vector_to_params(vec, layer_widths), None
    n_post = list(layer_widths)[-1] + 1
    if vec.shape != (n_net + 2 * n_post,):
        raise ValueError(f"vector has shape {vec.shape}, expected ({n_net + 2 * n_post},)")
    params = vector_to_params(vec[:n_net], layer_widths)
    posterior = VariationalPosterior(m=vec[n_net:n_net + n_post].copy(),
                                     rho=vec[n_net + n_post:].copy())
    return params, posterior


def pack_grads(grads: LossGrads) -> np.ndarray:
    """Flatten LossGrads in the same order as pack."""
    if grads.post_m is None:
        return params_to_vector(grads.net)
    return np.concatenate([params_to_vector(grads.net), grads.post_m, grads.post_rho])


def checkpoint_to_json(model_kind: str, params: NetworkParams,
                       posterior: VariationalPosterior | None,
                       ncp: NcpConfig) -> dict:
    _check_kind(model_kind)
    return {
        "format": _CKPT_FORMAT,
        "model_kind": model_kind,
        "network": params_to_json(params),
        "posterior": None if posterior is None else
            {"m": posterior.m.tolist(), "rho": posterior.rho.tolist()},
        "ncp": asdict(ncp),
    }


def checkpoint_from_json(obj: dict) -> tuple[str, NetworkParams,
                                             VariationalPosterior | None, NcpConfig]:
    if obj.get("format") != _CKPT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format: {obj.get('format')!r}")
    params = params_from_json(obj["network"])
    post = obj.get("posterior")
    posterior = None if post is None else VariationalPosterior(
        m=np.asarray(post["m"], dtype=np.float64),
        rho=np.asarray(post["rho"], dtype=np.float64))
    return obj["model_kind"], params, posterior, NcpConfig(**obj["ncp"])


def save_checkpoint(path: str, model_kind: str, params: NetworkParams,
                    posterior: VariationalPosterior | None, ncp: NcpConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_to_json(model_kind, params, posterior, ncp), fh)


def load_checkpoint(path: str) -> tuple[str, NetworkParams,
                                        VariationalPosterior | None, NcpConfig]:
    with open(path, "r", encoding="utf-8") as fh:
        return checkpoint_from_json(json.load(fh))
