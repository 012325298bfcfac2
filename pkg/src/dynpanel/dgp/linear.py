"""Potential outcomes from a linear AR(1) model with fixed effects and selection on them."""
from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..core import PotentialOutcomeWorld, path_indices, realize_observed, to_lattice
from ..errors import ConfigError, HorizonError
from ..rng import as_generator
from .config import LinearDpdmConfig


def structural_step(beta, gamma, theta, alpha, d, y_prev, eps):
    """One step of the potential-outcome recursion, rounded onto the outcome lattice.

    Both the generator and the in-sample reduced-form check evaluate this exact
    expression, so they agree bit-for-bit.
    """
    return to_lattice(beta * d + gamma * y_prev + theta + alpha + eps)


def _draw_alpha(cfg: LinearDpdmConfig, n, rng):
    dist = cfg.alpha_dist
    if dist.family == "two-point":
        sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
        return dist.mean + dist.sd * sign
    return dist.mean + dist.sd * rng.standard_normal(n)


def simulate_linear_dpdm(cfg: LinearDpdmConfig, n: int, T: int, seed) -> PotentialOutcomeWorld:
    if n < 1:
        raise ConfigError("n must be >= 1")
    if T < 2:
        raise HorizonError("the linear DPDM generator needs T >= 2")
    rng = as_generator(seed)
    theta = cfg.theta(T)
    beta, gamma = float(cfg.beta_star), float(cfg.gamma_star)

    alpha = _draw_alpha(cfg, n, rng)
    y0 = to_lattice(cfg.y0_rule.draw(alpha - cfg.alpha_dist.mean, rng.standard_normal(n)))
    innov = rng.standard_normal((n, T, 2)) * np.asarray(cfg.eps_dist.sd)
    eps = np.empty_like(innov)
    eps[:, 0] = innov[:, 0]
    for t in range(1, T):
        eps[:, t] = cfg.eps_dist.rho * eps[:, t - 1] + innov[:, t]
    uniforms = rng.random((n, T))

    po = []
    prev = y0[:, None]
    for t in range(1, T + 1):
        k = np.arange(2**t)
        d_t = (k & 1).astype(np.float64)
        cur = structural_step(beta, gamma, theta[t - 1], alpha[:, None], d_t[None, :],
                              prev[:, k >> 1], eps[:, t - 1, :][:, k & 1])
        po.append(cur)
        prev = cur

    sel = cfg.selection_rule
    d = np.zeros((n, T), dtype=np.int8)
    prop = np.empty((n, T))
    rows = np.arange(n)
    y_lag = y0
    d_lag = np.zeros(n)
    for t in range(T):
        e = expit(sel.intercept + sel.y_lag * y_lag + sel.d_lag * d_lag + sel.alpha * alpha)
        prop[:, t] = e
        d[:, t] = uniforms[:, t] < e
        y_lag = po[t][rows, path_indices(d, t + 1)]
        d_lag = d[:, t].astype(np.float64)

    return PotentialOutcomeWorld(
        y0=y0,
        po=tuple(po),
        assigned=d,
        latent={"alpha": alpha, "t_eps": eps, "t_propensity": prop},
        regime="linear_dpdm",
        meta={"beta_star": beta, "gamma_star": gamma, "theta_star": list(theta)},
    )


def reduced_form_residual(world: PotentialOutcomeWorld) -> np.ndarray:
    """Realized Y_t minus the recursion evaluated on realized history; zero when the
    observed sequence follows the reduced-form model with epsilon = eps*(D_t)."""
    meta = world.meta
    beta, gamma, theta = meta["beta_star"], meta["gamma_star"], meta["theta_star"]
    alpha, eps = world.latent["alpha"], world.latent["t_eps"]
    rows = np.arange(world.n)
    panel = realize_observed(world)
    out = np.empty((world.n, world.horizon))
    for t in range(1, world.horizon + 1):
        d_t = panel.d[:, t - 1].astype(np.float64)
        rhs = structural_step(beta, gamma, theta[t - 1], alpha, d_t, panel.y[:, t - 1],
                              eps[rows, t - 1, panel.d[:, t - 1]])
        out[:, t - 1] = panel.y[:, t] - rhs
    return out
