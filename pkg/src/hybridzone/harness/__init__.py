"""Experiment harness: configs, workloads, simulation runner, reports and CLI."""

from .config import ConfigError, ExperimentConfig, WorkloadSpec, load_config
from .report import emit_report
from .runner import MetricsReport, Simulation, run_experiment
from .workload import OperationStream, ZipfSampler, make_key, make_value, zipf_next

__all__ = [
    "ConfigError", "ExperimentConfig", "MetricsReport", "OperationStream", "Simulation",
    "WorkloadSpec", "ZipfSampler", "emit_report", "load_config", "make_key", "make_value",
    "run_experiment", "zipf_next",
]
