"""Simulation and estimation toolkit for dynamic treatment effects in short panels.

Generators produce complete potential-outcome worlds, estimators see only the
realized panel, and oracles compute ground truth from the full record.
"""
__version__ = "0.1.0"

from .core import (  # noqa: E402
    CausalTargets,
    EstimatorReport,
    ObservedPanel,
    PotentialOutcomeWorld,
    TreatmentPath,
    first_difference,
    period_two_contrasts,
    realize_observed,
)
from .dgp import parse_dgp_config, simulate  # noqa: E402
from .errors import ConfigError, DynPanelError, NumericalError  # noqa: E402

__all__ = [
    "CausalTargets",
    "ConfigError",
    "DynPanelError",
    "EstimatorReport",
    "NumericalError",
    "ObservedPanel",
    "PotentialOutcomeWorld",
    "TreatmentPath",
    "__version__",
    "first_difference",
    "parse_dgp_config",
    "period_two_contrasts",
    "realize_observed",
    "simulate",
]
