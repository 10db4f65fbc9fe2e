"""Training loops, the active-learning protocol, metrics, and sweeps.

RNG discipline: every source of randomness in a run draws from its own
stream keyed (seed, stream id), so runs are bit-reproducible and the draw
sequences of independent concerns never interleave. Stream ids:

  0 data generation        4 reparameterized weight noise
  1 parameter init         5 input perturbation
  2 initial visible seed   6 acquisition sampling
  3 minibatch shuffling    7 train/test splitting

Standardization happens once per run: feature statistics over the full
train split's inputs (pool inputs are not hidden), target statistics over
the initial visible labels only, never refit while acquiring — so metric
scales stay stable across rounds. Model parameters persist across
acquisition rounds (warm start). RMSE/NLPD are reported in original target
units.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import AcquisitionConfig, pool_weights, sample_acquisition
from .data import Dataset, Standardizer, standardize
from .dists import normal_log_pdf_arrays
from .models import (BAYESIAN_KINDS, MODEL_KINDS, LossGrads, NetworkParams,
                     VariationalPosterior, WeightPrior, bbb_loss, bbb_ncp_loss,
                     det_loss, init_posterior, n_trainable, odc_ncp_loss, pack,
                     pack_grads, predict_batch, unpack)
from .network import init_params
from .optim import AdamState, adam_init, adam_step
from .priors import NcpConfig, perturb_inputs
from .rng import RngStream, make_rng

STREAM_DATA = 0
STREAM_INIT = 1
STREAM_SEED_VISIBLE = 2
STREAM_SHUFFLE = 3
STREAM_WEIGHT_NOISE = 4
STREAM_PERTURB = 5
STREAM_ACQUIRE = 6
STREAM_SPLIT = 7

METRIC_FIELDS = ("round", "epochs", "n_visible", "rmse", "nlpd", "train_nll", "seconds")


@dataclass(frozen=True)
class Schedule:
    """Active-learning cadence: label counts and epochs per round."""

    initial_visible: int = 10
    labels_per_round: int = 1
    epochs_per_round: int = 200
    rounds: int = 20

    def __post_init__(self) -> None:
        for name in ("initial_visible", "labels_per_round", "epochs_per_round", "rounds"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def total_acquired(self) -> int:
        return self.rounds * self.labels_per_round


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one run, apart from the dataset itself."""

    model_kind: str = "bbb_ncp"
    hidden: tuple[int, ...] = (64, 64)
    learning_rate: float = 3e-4
    batch_size: int = 10
    weight_prior_var: float = 1.0
    ncp: NcpConfig = field(default_factory=NcpConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    schedule: Schedule = field(default_factory=Schedule)
    seed: int = 0
    eval_every_epochs: int = 0
    round_seconds_limit: float | None = None
    deterministic_timing: bool = True

    def __post_init__(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model_kind!r}; valid: {MODEL_KINDS}")
        if any(w < 1 for w in self.hidden):
            raise ValueError("hidden widths must be >= 1")
        if not (self.learning_rate > 0.0 and np.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.weight_prior_var <= 0.0:
            raise ValueError("weight_prior_var must be > 0")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.eval_every_epochs < 0:
            raise ValueError("eval_every_epochs must be >= 0")


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation point; rmse/nlpd/train_nll are in original target units."""

    round: int
    epochs: int
    n_visible: int
    rmse: float
    nlpd: float
    train_nll: float
    seconds: float


@dataclass
class TrainState:
    """Mutable carrier of one model's parameters and optimizer moments."""

    model_kind: str
    layer_widths: list[int]
    params: NetworkParams
    posterior: VariationalPosterior | None
    opt: AdamState
    prior: WeightPrior
    ncp: NcpConfig
    last_loss: float = float("nan")


@dataclass
class RunResult:
    """Records plus the final model and split state of one run."""

    records: list[MetricsRecord]
    state: TrainState
    dataset: Dataset
    standardizer: Standardizer
    partial: bool
    pool_label_reads: int
    wall_seconds: float


def init_state(cfg: ExperimentConfig, input_dim: int) -> TrainState:
    rng = make_rng(cfg.seed, STREAM_INIT)
    widths = [input_dim, *cfg.hidden]
    params = init_params(widths, rng)
    posterior = (init_posterior(widths[-1], rng)
                 if cfg.model_kind in BAYESIAN_KINDS else None)
    opt = adam_init(n_trainable(widths, cfg.model_kind), lr=cfg.learning_rate)
    return TrainState(model_kind=cfg.model_kind, layer_widths=widths, params=params,
                      posterior=posterior, opt=opt,
                      prior=WeightPrior(cfg.weight_prior_var), ncp=cfg.ncp)


def _step(state: TrainState, x: np.ndarray, y: np.ndarray, n_visible: int,
          cfg: ExperimentConfig, rng_noise: RngStream, rng_perturb: RngStream,
          column_kinds, column_classes) -> float:
    kind = state.model_kind
    if kind == "det":
        loss, grads = det_loss(state.params, x, y)
    elif kind == "bbb":
        loss, grads = bbb_loss(state.params, state.posterior, state.prior,
                               x, y, n_visible, rng_noise)
    else:
        perturbed = perturb_inputs(x, cfg.ncp, rng_perturb, batch_y=y,
                                   column_kinds=column_kinds,
                                   column_classes=column_classes)
        if kind == "bbb_ncp":
            loss, grads = bbb_ncp_loss(state.params, state.posterior, x, y,
                                       perturbed, cfg.ncp, rng_noise)
        else:
            loss, grads = odc_ncp_loss(state.params, x, y, perturbed, cfg.ncp)
    vec, state.opt = adam_step(pack(state.params, state.posterior),
                               pack_grads(grads), state.opt)
    state.params, state.posterior = unpack(vec, state.layer_widths,
                                           kind in BAYESIAN_KINDS)
    return loss


def train_epochs(state: TrainState, ds: Dataset, epochs: int, cfg: ExperimentConfig,
                 rng_shuffle: RngStream, rng_noise: RngStream,
                 rng_perturb: RngStream) -> TrainState:
    """Shuffled minibatch passes over the visible set; mutates state.

    The final short batch of each epoch is trained on rather than dropped.
    NCP kinds perturb each minibatch freshly.
    """
    visible = ds.visible_idx
    if visible.size == 0:
        raise ValueError("empty visible set")
    column_kinds = list(ds.column_kinds)
    column_classes = ds.column_classes()
    for _ in range(epochs):
        order = visible[rng_shuffle.permutation(visible.size)]
        for start in range(0, order.size, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            state.last_loss = _step(state, ds.x[idx], ds.labels(idx), visible.size,
                                    cfg, rng_noise, rng_perturb,
                                    column_kinds, column_classes)
    return state


def predictive_arrays(state: TrainState, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance per row, in the model's (standardized) units."""
    pb = predict_batch(state.model_kind, state.params, state.posterior, x)
    if pb.ood_probability is not None:
        var = ((1.0 - pb.ood_probability) * pb.aleatoric_variance
               + pb.ood_probability * state.ncp.sigma_y_sq)
    else:
        var = pb.epistemic_variance + pb.aleatoric_variance
    return pb.mean, var


def evaluate(state: TrainState, ds: Dataset, split_idx,
             standardizer: Standardizer | None = None) -> tuple[float, float]:
    """(RMSE, NLPD) of the predictive distribution over the given rows.

    With a standardizer, both metrics are mapped back to original target
    units; otherwise they are in the dataset's units as stored.
    """
    idx = np.asarray(split_idx, dtype=np.int64)
    if idx.size == 0:
        raise ValueError("empty evaluation split")
    mean, var = predictive_arrays(state, ds.x[idx])
    y = ds.labels(idx)
    if standardizer is not None:
        mean = standardizer.inverse_target(mean)
        var = standardizer.inverse_target_variance(var)
        y = standardizer.inverse_target(y)
    rmse = float(np.sqrt(np.mean((mean - y) ** 2)))
    nlpd = float(np.mean(-normal_log_pdf_arrays(y, mean, var)))
    return rmse, nlpd


def _chunked_epochs(total: int, chunk: int):
    if chunk <= 0 or chunk >= total:
        yield total
        return
    done = 0
    while done < total:
        step = min(chunk, total - done)
        done += step
        yield step


def run_active_learning(cfg: ExperimentConfig, ds: Dataset) -> RunResult:
    """Seed, then loop rounds of train -> evaluate -> score pool -> acquire.

    The caller's dataset is left untouched; pool labels are only ever read
    after acquisition (the guard counter in the result proves it). One
    MetricsRecord per round — plus intermediate ones when
    cfg.eval_every_epochs is set.
    """
    t0 = time.monotonic()
    sched = cfg.schedule
    ds = ds.copy()
    needed = sched.initial_visible + sched.total_acquired
    if needed > ds.pool_idx.size:
        raise ValueError(f"schedule needs {needed} train labels, "
                         f"pool holds {ds.pool_idx.size}")

    rng_seed = make_rng(cfg.seed, STREAM_SEED_VISIBLE)
    pick = rng_seed.choice_without_replacement(ds.pool_idx.size, sched.initial_visible)
    ds.set_visible(ds.pool_idx[pick])
    std_ds, standardizer = standardize(ds, fit_on=ds.train_idx,
                                       target_fit_on=ds.visible_idx)

    state = init_state(cfg, ds.n_features)
    rng_shuffle = make_rng(cfg.seed, STREAM_SHUFFLE)
    rng_noise = make_rng(cfg.seed, STREAM_WEIGHT_NOISE)
    rng_perturb = make_rng(cfg.seed, STREAM_PERTURB)
    rng_acquire = make_rng(cfg.seed, STREAM_ACQUIRE)

    records: list[MetricsRecord] = []
    partial = False
    epochs_done = 0
    for rnd in range(sched.rounds):
        round_start = time.monotonic()
        for chunk in _chunked_epochs(sched.epochs_per_round, cfg.eval_every_epochs):
            train_epochs(state, std_ds, chunk, cfg, rng_shuffle, rng_noise, rng_perturb)
            epochs_done += chunk
            records.append(_make_record(cfg, state, std_ds, standardizer,
                                        rnd, epochs_done, t0))
        pool = std_ds.pool_idx
        preds = predict_batch(state.model_kind, state.params, state.posterior,
                              std_ds.x[pool])
        weights = pool_weights(preds, state.model_kind, cfg.acquisition.tau,
                               cfg.ncp.sigma_y_sq)
        sel = sample_acquisition(weights,
                                 replace(cfg.acquisition, batch_k=sched.labels_per_round),
                                 rng_acquire)
        std_ds.acquire(pool[sel])
        if (cfg.round_seconds_limit is not None
                and time.monotonic() - round_start > cfg.round_seconds_limit):
            partial = True
            break

    return RunResult(records=records, state=state, dataset=std_ds,
                     standardizer=standardizer, partial=partial,
                     pool_label_reads=ds.pool_label_reads + std_ds.pool_label_reads,
                     wall_seconds=time.monotonic() - t0)


def run_passive(cfg: ExperimentConfig, ds: Dataset) -> RunResult:
    """Train on the whole train split, no acquisition.

    Emits a baseline record at epoch 0 (the untrained model), then one per
    round of epochs_per_round, for schedule.rounds rounds.
    """
    t0 = time.monotonic()
    sched = cfg.schedule
    ds = ds.copy()
    ds.set_visible(ds.pool_idx)
    std_ds, standardizer = standardize(ds, fit_on=ds.train_idx,
                                       target_fit_on=ds.visible_idx)

    state = init_state(cfg, ds.n_features)
    rng_shuffle = make_rng(cfg.seed, STREAM_SHUFFLE)
    rng_noise = make_rng(cfg.seed, STREAM_WEIGHT_NOISE)
    rng_perturb = make_rng(cfg.seed, STREAM_PERTURB)

    records = [_make_record(cfg, state, std_ds, standardizer, 0, 0, t0)]
    partial = False
    epochs_done = 0
    for rnd in range(sched.rounds):
        round_start = time.monotonic()
        for chunk in _chunked_epochs(sched.epochs_per_round, cfg.eval_every_epochs):
            train_epochs(state, std_ds, chunk, cfg, rng_shuffle, rng_noise, rng_perturb)
            epochs_done += chunk
            records.append(_make_record(cfg, state, std_ds, standardizer,
                                        rnd + 1, epochs_done, t0))
        if (cfg.round_seconds_limit is not None
                and time.monotonic() - round_start > cfg.round_seconds_limit):
            partial = True
            break

    return RunResult(records=records, state=state, dataset=std_ds,
                     standardizer=standardizer, partial=partial,
                     pool_label_reads=ds.pool_label_reads + std_ds.pool_label_reads,
                     wall_seconds=time.monotonic() - t0)


def _make_record(cfg, state, std_ds, standardizer, rnd, epochs, t0) -> MetricsRecord:
    rmse, nlpd = evaluate(state, std_ds, std_ds.test_idx, standardizer)
    _, train_nll = evaluate(state, std_ds, std_ds.visible_idx, standardizer)
    seconds = 0.0 if cfg.deterministic_timing else time.monotonic() - t0
    return MetricsRecord(round=rnd, epochs=epochs, n_visible=int(std_ds.visible_idx.size),
                         rmse=rmse, nlpd=nlpd, train_nll=train_nll, seconds=seconds)


@dataclass
class SweepResult:
    """One aggregate row per grid cell plus per-run failures.

    Each row carries noise_kind, sigma_x_sq, mean/std of the final RMSE
    and NLPD over the seeds that completed, and n_seeds.
    """

    rows: list[dict]
    errors: list[dict]
    seeds: tuple[int, ...]


def run_sweep(base: ExperimentConfig, noise_kinds, sigma_grid, seeds,
              make_dataset, jobs: int = 1) -> SweepResult:
    """One active-learning run per (noise kind, σ_x², seed); aggregate per cell.

    The same seed list is used in every cell, and make_dataset(seed) builds
    each run's dataset, so cells are paired across the grid. Per-run
    failures (including budget-partial runs) are recorded, not fatal.
    """
    noise_kinds = list(noise_kinds)
    sigma_grid = [float(s) for s in sigma_grid]
    seeds = tuple(int(s) for s in seeds)
    if not noise_kinds or not sigma_grid or not seeds:
        raise ValueError("grid and seed list must be nonempty")

    tasks = [(kind, sig, seed) for kind in noise_kinds for sig in sigma_grid
             for seed in seeds]

    def one(task):
        kind, sig, seed = task
        cfg = replace(base, seed=seed,
                      ncp=replace(base.ncp, noise_kind=kind, sigma_x_sq=sig))
        res = run_active_learning(cfg, make_dataset(seed))
        if res.partial:
            raise RuntimeError("round budget exceeded; partial results discarded")
        final = res.records[-1]
        return final.rmse, final.nlpd

    outcomes: dict[tuple, tuple | str] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {task: pool.submit(one, task) for task in tasks}
        for task, fut in futures.items():
            err = fut.exception()
            outcomes[task] = f"{type(err).__name__}: {err}" if err else fut.result()
    else:
        for task in tasks:
            try:
                outcomes[task] = one(task)
            except Exception as err:  # per-cell isolation, sweep must finish
                outcomes[task] = f"{type(err).__name__}: {err}"

    rows, errors = [], []
    for kind in noise_kinds:
        for sig in sigma_grid:
            finals = []
            for seed in seeds:
                got = outcomes[(kind, sig, seed)]
                if isinstance(got, str):
                    errors.append({"noise_kind": kind, "sigma_x_sq": sig,
                                   "seed": seed, "error": got})
                else:
                    finals.append(got)
            arr = np.asarray(finals, dtype=np.float64).reshape(-1, 2)
            row = {"noise_kind": kind, "sigma_x_sq": sig}
            for col, metric in enumerate(("rmse", "nlpd")):
                row[f"{metric}_mean"] = float(arr[:, col].mean()) if arr.size else float("nan")
                row[f"{metric}_std"] = float(arr[:, col].std()) if arr.size else float("nan")
            row["n_seeds"] = arr.shape[0]
            rows.append(row)
    return SweepResult(rows=rows, errors=errors, seeds=seeds)


def record_to_json_line(rec: MetricsRecord) -> str:
    return json.dumps({name: getattr(rec, name) for name in METRIC_FIELDS})


def write_metrics_jsonl(records, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json_line(rec) + "\n")


def write_metrics_csv(records, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(METRIC_FIELDS) + "\n")
        for rec in records:
            fh.write(",".join(repr(getattr(rec, name)) if isinstance(getattr(rec, name), float)
                              else str(getattr(rec, name))
                              for name in METRIC_FIELDS) + "\n")


def write_sweep_csv(result: SweepResult, path: str) -> None:
    cols = ("noise_kind", "sigma_x_sq", "rmse_mean", "rmse_std",
            "nlpd_mean", "nlpd_std", "n_seeds")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in result.rows:
            fh.write(",".join(repr(row[c]) if isinstance(row[c], float) else str(row[c])
                              for c in cols) + "\n")
