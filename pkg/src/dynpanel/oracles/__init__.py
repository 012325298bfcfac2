"""Ground truth from complete counterfactual records."""
from .checks import (
    HOLDS,
    INCONCLUSIVE,
    VIOLATED,
    AssumptionVerdict,
    CheckConfig,
    check_ab_moments,
    check_full_se_period_one,
    check_parallel_trends,
    check_sequential_exchangeability,
    check_trend_equivalence,
    group_contrasts,
)
from .targets import causal_targets, convex_weights, designer_targets

__all__ = [
    "HOLDS",
    "INCONCLUSIVE",
    "VIOLATED",
    "AssumptionVerdict",
    "CheckConfig",
    "causal_targets",
    "check_ab_moments",
    "check_full_se_period_one",
    "check_parallel_trends",
    "check_sequential_exchangeability",
    "check_trend_equivalence",
    "convex_weights",
    "designer_targets",
    "group_contrasts",
]
