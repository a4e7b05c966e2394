"""Experiment configuration, Monte Carlo driver and command line interface."""

from .config import ConfigError, RunConfig, config_from_dict, dump_config, load_config
from .experiment import (
    ResultTable,
    drop_seeds,
    emit_outputs,
    load_table,
    percentile5,
    run_drop,
    run_experiment,
    summarize,
)

__all__ = [
    "ConfigError",
    "ResultTable",
    "RunConfig",
    "config_from_dict",
    "drop_seeds",
    "dump_config",
    "emit_outputs",
    "load_config",
    "load_table",
    "percentile5",
    "run_drop",
    "run_experiment",
    "summarize",
]
