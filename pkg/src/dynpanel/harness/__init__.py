"""Config-driven Monte Carlo experiments and the command-line interface."""
from .config import (
    EstimatorSpec,
    ExperimentConfig,
    TolerancePolicy,
    bundled_scenarios,
    load_experiment_config,
    parse_experiment_config,
)
from .experiment import ExperimentReport, compute_oracle, run_experiment, run_replication

__all__ = [
    "EstimatorSpec",
    "ExperimentConfig",
    "ExperimentReport",
    "TolerancePolicy",
    "bundled_scenarios",
    "compute_oracle",
    "load_experiment_config",
    "parse_experiment_config",
    "run_experiment",
    "run_replication",
]
