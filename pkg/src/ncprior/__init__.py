"""Noise contrastive priors for uncertainty-aware neural regression.

A numpy-only library plus CLI: heteroskedastic regression networks with a
variational belief over the mean output layer, contrastive data-space
priors enforced at noise-perturbed inputs, an OOD-classifier variant, and
an expected-information-gain active-learning harness with seeded,
bit-reproducible experiments.
"""

__version__ = "0.1.0"

from .acquisition import (AcquisitionConfig, information_gain_weight,
                          pool_weights, sample_acquisition)
from .config import (ConfigError, ConfigWarning, DataConfig, RunConfig,
                     SweepConfig, config_to_text, parse_config)
from .data import (Dataset, ParseError, SchemaError, Standardizer,
                   apply_splits, apply_standardizer, generate_toy, load_csv,
                   load_splits, random_split, save_csv, save_splits,
                   splits_to_json, standardize, with_test_split)
from .dists import (VARIANCE_FLOOR, Gaussian1D, bernoulli_log_pmf,
                    bernoulli_log_pmf_from_logit, kl_normal_normal,
                    kl_normal_normal_arrays, normal_log_pdf,
                    normal_log_pdf_arrays, sigmoid, softplus,
                    softplus_variance)
from .harness import (ExperimentConfig, MetricsRecord, RunResult, Schedule,
                      SweepResult, TrainState, evaluate, init_state,
                      run_active_learning, run_passive, run_sweep,
                      train_epochs, write_metrics_csv, write_metrics_jsonl,
                      write_sweep_csv)
from .models import (BAYESIAN_KINDS, MODEL_KINDS, LossGrads, Prediction,
                     PredictionBatch, VariationalPosterior, WeightPrior,
                     bbb_loss, bbb_ncp_loss, checkpoint_from_json,
                     checkpoint_to_json, det_loss, init_posterior,
                     load_checkpoint, mean_belief, mean_belief_arrays,
                     n_trainable, odc_ncp_loss, pack, pack_grads, predict,
                     predict_batch, predictive_distribution, save_checkpoint,
                     unpack)
from .network import (HeadGrads, NetworkParams, TrunkOutput, backward, forward,
                      init_params, load_params, mean_output, n_params,
                      params_from_json, params_to_json, params_to_vector,
                      save_params, vector_to_params)
from .optim import AdamState, adam_init, adam_step, finite_diff_grad
from .priors import (NcpConfig, PerturbedBatch, output_prior_targets,
                     perturb_inputs)
from .rng import RngStream, make_rng

__all__ = [name for name in dir() if not name.startswith("_")]
