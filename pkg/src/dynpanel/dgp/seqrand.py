"""Sequentially randomized treatments over the shared two-period outcome family."""
from __future__ import annotations

import numpy as np

from ..core import PotentialOutcomeWorld
from ..errors import ConfigError
from ..rng import as_generator
from .config import OutcomeFamily, SeqRandConfig
from .family import draw_family


def simulate_seq_randomized(cfg: SeqRandConfig, n: int, seed, po_family: OutcomeFamily = None) -> PotentialOutcomeWorld:
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = as_generator(seed)
    fam = po_family if po_family is not None else cfg.po_family
    draw = draw_family(fam, n, rng)
    y1_po, y2_po = draw.po
    u = rng.random((n, 2))

    p1 = cfg.p1(draw.y0)
    if np.any((p1 <= 0) | (p1 >= 1)):
        raise ConfigError("first-period propensity left (0, 1)")
    d1 = (u[:, 0] < p1).astype(np.int8)
    y1 = y1_po[np.arange(n), d1]
    p2 = cfg.p2(draw.y0, y1, d1)
    if not cfg.degenerate_p2 and np.any((p2 <= 0) | (p2 >= 1)):
        raise ConfigError("second-period propensity left (0, 1); set degenerate_p2 for boundary designs")
    d2 = (u[:, 1] < p2).astype(np.int8)

    return PotentialOutcomeWorld(
        y0=draw.y0,
        po=(y1_po, y2_po),
        assigned=np.column_stack([d1, d2]),
        latent={"alpha": draw.alpha, "t_eps": draw.eps, "t_propensity": np.column_stack([p1, p2])},
        regime="seq_randomized",
        meta={"a": fam.a, "b": fam.b},
    )
