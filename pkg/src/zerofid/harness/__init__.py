"""Config-driven experiment runner and command-line interface."""

from zerofid.harness.config import ConfigError, ExperimentConfig, load_config, parse_config
from zerofid.harness.runner import ExperimentResult, run_experiment, write_result

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentResult", "load_config",
           "parse_config", "run_experiment", "write_result"]
