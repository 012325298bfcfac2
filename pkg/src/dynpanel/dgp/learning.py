"""Two-period model of treatment choice by a forward-looking agent who learns its fixed effects.

Beliefs over ``alpha = (alpha(0), alpha(1))`` are bivariate normal. The prior
mean is shifted by an unobserved ``xi0``; after period one the agent observes
``Y1`` and updates by the conjugate normal rule. Choices maximise expected
``y - cost * d`` plus Gumbel shocks, with the period-one choice valuing the
period-two option by exact integration over the period-one signal.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..core import PotentialOutcomeWorld
from ..errors import ConfigError, UnsupportedConfigError
from ..rng import as_generator
from .config import LearningConfig
from .family import draw_family


def belief_gain(prior_cov, eps_sd, d1):
    """Kalman gain vector and predictive signal variance when arm ``d1`` is observed."""
    prior_cov = np.asarray(prior_cov, dtype=float)
    v = prior_cov[d1, d1] + eps_sd**2
    if v == 0:
        return np.zeros(2), 0.0
    return prior_cov[:, d1] / v, v


def posterior(mu1, prior_cov, eps_sd, d1, signal):
    """Posterior mean of alpha after seeing ``signal = alpha(d1) + eps`` (vectorised over units)."""
    mu2 = np.array(mu1, dtype=float, copy=True)
    for arm in (0, 1):
        sel = d1 == arm
        gain, _ = belief_gain(prior_cov, eps_sd, arm)
        mu2[sel] = mu1[sel] + np.outer(signal[sel] - mu1[sel, arm], gain)
    return mu2


def continuation_value(mu1, cfg: LearningConfig, d1: int):
    """Expected period-two value of choosing ``d1`` now (constants common to both arms dropped)."""
    fam = cfg.outcome
    a, b, c = fam.a, fam.b, cfg.cost
    scale = cfg.eta_spec.scale
    gain, v = belief_gain(cfg.prior_cov, fam.eps_sd, d1)
    z, w = np.polynomial.hermite_e.hermegauss(int(cfg.quadrature_nodes))
    w = w / np.sqrt(2 * np.pi)
    base = a - c + mu1[:, 1] - mu1[:, 0]
    spread = (gain[1] - gain[0]) * np.sqrt(v)
    gap = base[:, None] + spread * z[None, :]
    option = scale * (np.logaddexp(0.0, gap / scale) @ w)
    return mu1[:, 0] + option


def simulate_learning(cfg: LearningConfig, n: int, seed) -> PotentialOutcomeWorld:
    if n < 1:
        raise ConfigError("n must be >= 1")
    if cfg.belief != "conjugate-normal":
        raise UnsupportedConfigError(f"belief family {cfg.belief!r} is not supported; only conjugate-normal")
    rng = as_generator(seed)
    fam = cfg.outcome
    a, b, c = fam.a, fam.b, cfg.cost
    scale = cfg.eta_spec.scale

    draw = draw_family(fam, n, rng)
    y0, alpha = draw.y0, draw.alpha
    y1_po, y2_po = draw.po
    xi = cfg.xi0_spec
    xi0 = xi.y0_loading * y0 + xi.sd * rng.standard_normal(n)
    if not xi.independent_given_y0:
        gap = alpha[:, 1] - alpha[:, 0]
        xi0 = xi0 + xi.alpha_loading * (gap - (fam.alpha_mean[1] - fam.alpha_mean[0]))
    eta1 = rng.gumbel(0.0, scale, (n, 2))
    eta2 = rng.gumbel(0.0, scale, (n, 2))

    mu1 = np.asarray(cfg.prior_mean, dtype=float)[None, :] + np.column_stack([np.zeros(n), xi0])
    disc = cfg.discount
    value = np.empty((n, 2))
    for d1 in (0, 1):
        flow = a * d1 + b * y0 + mu1[:, d1] - c * d1
        expected_y1 = a * d1 + b * y0 + mu1[:, d1]
        value[:, d1] = flow + disc * (b * expected_y1 + continuation_value(mu1, cfg, d1))
    d1 = (value[:, 1] - value[:, 0] + eta1[:, 1] - eta1[:, 0] > 0).astype(np.int8)
    e1 = expit((value[:, 1] - value[:, 0]) / scale)

    rows = np.arange(n)
    y1 = y1_po[rows, d1]
    signal = y1 - a * d1 - b * y0
    mu2 = posterior(mu1, cfg.prior_cov, fam.eps_sd, d1, signal)
    gap2 = a - c + mu2[:, 1] - mu2[:, 0]
    d2 = (gap2 + eta2[:, 1] - eta2[:, 0] > 0).astype(np.int8)
    e2 = expit(gap2 / scale)

    return PotentialOutcomeWorld(
        y0=y0,
        po=(y1_po, y2_po),
        assigned=np.column_stack([d1, d2]),
        latent={
            "alpha": alpha,
            "xi0": xi0,
            "eta1": eta1,
            "eta2": eta2,
            "psi1": mu1,
            "psi2": mu2,
            "t_eps": draw.eps,
            "t_propensity": np.column_stack([e1, e2]),
        },
        regime="learning",
        meta={"a": a, "b": b, "cost": c},
    )
