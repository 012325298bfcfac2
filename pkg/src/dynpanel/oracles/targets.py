"""Causal targets read off a world's complete counterfactual record."""
from __future__ import annotations

import numpy as np

from ..core import CausalTargets, PotentialOutcomeWorld, period_two_contrasts, realize_observed
from ..dgp.designer import designer_population
from ..errors import DegenerateWeightsError, HorizonError, SaturationError
from ..estimators.cells import cell_codes
from ..estimators.twosls import fwl_beta


def convex_weights(world: PotentialOutcomeWorld) -> np.ndarray:
    """Per-unit ``w = E[D2 | Y0, D1] - E[D2 | D1]``.

    Cell propensities average the generator's own ``Pr{D2 = 1 | .}`` when it
    was recorded, otherwise the realized ``D2``.
    """
    d1 = world.assigned[:, 0]
    prop = world.latent.get("t_propensity")
    e2 = prop[:, 1] if prop is not None else world.assigned[:, 1].astype(np.float64)
    codes, keys = cell_codes(world.y0, d1)
    count = np.bincount(codes)
    cell = (np.bincount(codes, weights=e2) / count)[codes]
    by_d1 = np.array([e2[d1 == d].mean() if np.any(d1 == d) else np.nan for d in (0, 1)])
    return cell - by_d1[d1]


def causal_targets(world: PotentialOutcomeWorld) -> CausalTargets:
    if world.horizon != 2:
        raise HorizonError(f"causal targets are defined for T = 2 worlds, got T = {world.horizon}")
    c = period_two_contrasts(world)
    rows = np.arange(world.n)
    d1, d2 = world.assigned[:, 0], world.assigned[:, 1]
    tau2_realized = c.tau2[rows, d1]

    w = convex_weights(world)
    w2 = w * w
    convex = float(np.sum(w2 * tau2_realized) / np.sum(w2)) if np.sum(w2) > 0 else float("nan")

    # sample plim terms: the same partialled-out weights the estimator uses
    try:
        _, W = fwl_beta(realize_observed(world))
        ew2 = np.sum(W * W)
        te = float(np.sum(W * d2 * tau2_realized) / ew2)
        trend = float(np.sum(W * c.delta2[rows, d1]) / ew2)
    except (DegenerateWeightsError, SaturationError):
        te = trend = float("nan")

    return CausalTargets(
        ate_tau2_given_d1=(float(c.tau2[:, 0].mean()), float(c.tau2[:, 1].mean())),
        ate_tau2_over_D1=float(tau2_realized.mean()),
        trend_means=(float(c.delta1.mean()), float(c.delta2[:, 0].mean()), float(c.delta2[:, 1].mean())),
        convex_aggregate=convex,
        plim_te_term=te,
        plim_trend_term=trend,
        ate_tau1=float(c.tau1.mean()),
    )


def designer_targets(spec) -> CausalTargets:
    """Exact population targets of a designer world by enumeration."""
    pop = designer_population(spec)
    return CausalTargets(
        ate_tau2_given_d1=pop.ate_tau2_given_d1,
        ate_tau2_over_D1=pop.ate_tau2_over_D1,
        trend_means=pop.trend_means,
        convex_aggregate=pop.convex_aggregate,
        plim_te_term=pop.plim_te_term,
        plim_trend_term=pop.plim_trend_term,
        ate_tau1=pop.ate_tau1,
    )
