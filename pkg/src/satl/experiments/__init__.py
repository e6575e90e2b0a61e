"""Config-driven experiment harness: suites, determinism, and plot data."""

from satl.experiments.config import (
    ConfigError,
    ExperimentConfig,
    SUITES,
    config_from_dict,
    config_to_dict,
    load_config,
    paper_scale,
)
from satl.experiments.runner import (
    RAW_COLUMNS,
    ResultsBundle,
    emit_plot_data,
    rerun_cell,
    run_suite,
    select_C_cv,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "RAW_COLUMNS",
    "ResultsBundle",
    "SUITES",
    "config_from_dict",
    "config_to_dict",
    "emit_plot_data",
    "load_config",
    "paper_scale",
    "rerun_cell",
    "run_suite",
    "select_C_cv",
]
