"""Differentially private optimization lab built around automatic
per-sample gradient clipping.

The package provides clipping policies (classical min-based and automatic
normalization variants), privatization, DP optimizer wrappers with exact
threshold-free equivalences, Renyi and Gaussian privacy accountants with
noise calibration, a convergence-bound toolkit, and a CLI harness.
"""

__version__ = "0.1.0"

from .errors import (AuditFailureError, CalibrationError, DomainError,
                     InvalidArgumentError, InvalidStateError,
                     NumericAbortError, ParseError, UnsupportedMetricError)
from .numeric import (LayerPartition, RngStream, batch_row_norms,
                      gaussian_vector, group_norms, poisson_subsample)
from .models import (Dataset, ModelSpec, batch_loss_accuracy, gen_synthetic,
                     init_params, param_dim, per_sample_gradients,
                     sample_loss)
from .clipping import (Abadi, AutoS, AutoSFree, AutoV, GlobalClip, PerLayer,
                       PrivatizedGrad, ReParam, clip_and_sum, clip_factor,
                       noise_to_signal, privatize)
from .optimizers import (OptimizerConfig, OptimizerState,
                         equivalence_pair_run, init_state, paired_config,
                         step)
from .accounting import (DEFAULT_ORDERS, PrivacySpec, calibrate_sigma,
                         gdp_epsilon, gdp_mu, rdp_epsilon)
from .bounds import (TheoryParams, bound_input, descent_distance,
                     descent_distance_inv, descent_factor, envelope,
                     grad_norm_bound, grad_norm_bound_curve, lemma_audit,
                     min_descent_factor, optimal_lr, sgd_baseline)
from .data_io import load_dataset
from .training import RunConfig, RunManifest, run_training

__all__ = [
    "__version__",
    "AuditFailureError", "CalibrationError", "DomainError",
    "InvalidArgumentError", "InvalidStateError", "NumericAbortError",
    "ParseError", "UnsupportedMetricError",
    "LayerPartition", "RngStream", "batch_row_norms", "gaussian_vector",
    "group_norms", "poisson_subsample",
    "Dataset", "ModelSpec", "batch_loss_accuracy", "gen_synthetic",
    "init_params", "param_dim", "per_sample_gradients", "sample_loss",
    "Abadi", "AutoS", "AutoSFree", "AutoV", "GlobalClip", "PerLayer",
    "PrivatizedGrad", "ReParam", "clip_and_sum", "clip_factor",
    "noise_to_signal", "privatize",
    "OptimizerConfig", "OptimizerState", "equivalence_pair_run",
    "init_state", "paired_config", "step",
    "DEFAULT_ORDERS", "PrivacySpec", "calibrate_sigma", "gdp_epsilon",
    "gdp_mu", "rdp_epsilon",
    "TheoryParams", "bound_input", "descent_distance",
    "descent_distance_inv", "descent_factor", "envelope",
    "grad_norm_bound", "grad_norm_bound_curve", "lemma_audit",
    "min_descent_factor", "optimal_lr", "sgd_baseline",
    "load_dataset", "RunConfig", "RunManifest", "run_training",
]
