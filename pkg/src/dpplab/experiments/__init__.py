"""Experiment configs, scenario runners, reports and the command-line interface."""

from .config import ConfigError, ExperimentConfig, config_from_dict, load_config
from .report import ConvergenceReport, ReportIntegrityError
from .runners import (
    RUNNERS,
    StatisticalFailure,
    run,
    run_bulk_sine,
    run_discrete_sine,
    run_edge_airy,
    run_equilibrium,
    run_gap,
    run_mc_verify,
)

__all__ = [
    "ConfigError",
    "ConvergenceReport",
    "ExperimentConfig",
    "RUNNERS",
    "ReportIntegrityError",
    "StatisticalFailure",
    "config_from_dict",
    "load_config",
    "run",
    "run_bulk_sine",
    "run_discrete_sine",
    "run_edge_airy",
    "run_equilibrium",
    "run_gap",
    "run_mc_verify",
]
