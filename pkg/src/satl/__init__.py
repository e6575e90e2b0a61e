"""Smoothness-adaptive kernel ridge regression and offset transfer learning.

Fixed-bandwidth Gaussian-kernel ridge regression with exponential
regularization schedules, smoothness adaptation by train/validate
selection or Lepski's method, a two-phase source-plus-offset transfer
pipeline, finite-basis and misspecified-Matern baselines, quadrature
evaluation, and a deterministic experiment runner.
"""

from satl.adaptivity import (
    AdaptiveSelection,
    SmoothnessGrid,
    build_grid,
    select_lepski,
    select_train_validate,
)
from satl.baselines import (
    FbeModel,
    FbeTransferModel,
    fit_fbe,
    fit_fbe_transfer,
    fit_misspecified_matern,
    fourier_basis,
)
from satl.datagen import (
    Dataset,
    SampledFunction,
    TransferScenario,
    make_dataset,
    make_transfer_scenario,
    sample_gp,
)
from satl.evaluation import (
    ErrorReport,
    RateFit,
    TrialSummary,
    aggregate_trials,
    fit_rate,
    quadrature_l2_distance,
    simpson_l2_error,
)
from satl.kernels import (
    GaussianKernel,
    GramMatrix,
    MaternKernel,
    eval_gaussian,
    eval_matern,
    gram,
)
from satl.krr import FittedKrr, RegSchedule, fit, predict, schedule_lambda, zero_model
from satl.transfer import (
    PseudoLabelSet,
    SatlModel,
    build_pseudo_labels,
    fit_otl_fixed,
    fit_satl,
    predict_satl,
)

__all__ = [
    "AdaptiveSelection",
    "Dataset",
    "ErrorReport",
    "FbeModel",
    "FbeTransferModel",
    "FittedKrr",
    "GaussianKernel",
    "GramMatrix",
    "MaternKernel",
    "PseudoLabelSet",
    "RateFit",
    "RegSchedule",
    "SampledFunction",
    "SatlModel",
    "SmoothnessGrid",
    "TransferScenario",
    "TrialSummary",
    "aggregate_trials",
    "build_grid",
    "build_pseudo_labels",
    "eval_gaussian",
    "eval_matern",
    "fit",
    "fit_fbe",
    "fit_fbe_transfer",
    "fit_misspecified_matern",
    "fit_otl_fixed",
    "fit_rate",
    "fit_satl",
    "fourier_basis",
    "gram",
    "make_dataset",
    "make_transfer_scenario",
    "predict",
    "predict_satl",
    "quadrature_l2_distance",
    "sample_gp",
    "schedule_lambda",
    "select_lepski",
    "select_train_validate",
    "simpson_l2_error",
    "zero_model",
]

__version__ = "0.1.0"
