"""Two-period outcome family shared by the learning and randomized regimes."""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..core import to_lattice
from .config import OutcomeFamily


class FamilyDraw(NamedTuple):
    y0: np.ndarray
    alpha: np.ndarray  # (n, 2): alpha(0), alpha(1)
    eps: np.ndarray  # (n, 2, 2): period, arm
    po: tuple  # (Y1 (n, 2), Y2 (n, 4))


def draw_family(fam: OutcomeFamily, n: int, rng: np.random.Generator) -> FamilyDraw:
    mean = np.asarray(fam.alpha_mean)
    root = _psd_root(np.asarray(fam.alpha_cov))
    alpha = mean + rng.standard_normal((n, 2)) @ root.T
    y0 = to_lattice(fam.y0_rule.draw(alpha[:, 0] - mean[0], rng.standard_normal(n)))
    eps = fam.eps_sd * rng.standard_normal((n, 2, 2))
    return FamilyDraw(y0, alpha, eps, family_outcomes(fam, y0, alpha, eps))


def family_outcomes(fam: OutcomeFamily, y0, alpha, eps):
    a, b = fam.a, fam.b
    d = np.array([0.0, 1.0])
    y1 = to_lattice(a * d + b * y0[:, None] + alpha + eps[:, 0, :])
    k = np.arange(4)
    d1, d2 = k >> 1, k & 1
    y2 = to_lattice(a * d2 + b * y1[:, d1] + alpha[:, d2] + eps[:, 1, :][:, d2])
    return y1, y2


def _psd_root(cov):
    w, v = np.linalg.eigh(cov)
    return v @ np.diag(np.sqrt(np.clip(w, 0, None)))
