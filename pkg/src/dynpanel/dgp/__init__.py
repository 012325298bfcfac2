"""Seeded generators of potential-outcome worlds."""
from ..core import PotentialOutcomeWorld
from .config import (
    DesignerSpec,
    DgpConfig,
    LearningConfig,
    LinearDpdmConfig,
    OutcomeFamily,
    SeqRandConfig,
    parse_dgp_config,
)
from .designer import designer_population, implied_flags, simulate_designer
from .learning import simulate_learning
from .linear import reduced_form_residual, simulate_linear_dpdm, structural_step
from .seqrand import simulate_seq_randomized


def simulate(cfg, n: int, seed) -> PotentialOutcomeWorld:
    """Dispatch on the regime of a ``DgpConfig`` (or a raw JSON document)."""
    cfg = parse_dgp_config(cfg)
    if cfg.regime == "linear_dpdm":
        return simulate_linear_dpdm(cfg.params, n, cfg.horizon, seed)
    if cfg.regime == "learning":
        return simulate_learning(cfg.params, n, seed)
    if cfg.regime == "seq_randomized":
        return simulate_seq_randomized(cfg.params, n, seed)
    return simulate_designer(cfg.params, n, seed)


__all__ = [
    "DesignerSpec",
    "DgpConfig",
    "LearningConfig",
    "LinearDpdmConfig",
    "OutcomeFamily",
    "SeqRandConfig",
    "designer_population",
    "implied_flags",
    "parse_dgp_config",
    "reduced_form_residual",
    "simulate",
    "simulate_designer",
    "simulate_learning",
    "simulate_linear_dpdm",
    "simulate_seq_randomized",
    "structural_step",
]
