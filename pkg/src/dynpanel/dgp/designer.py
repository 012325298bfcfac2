"""Fixture worlds with hand-set trends, effects and propensities.

Every mean is linear in ``(Y0, U)`` (period two may also load on ``Y1(d1)``)
where ``U`` is a latent coin the researcher never sees. Because ``Y0`` and the
period-one trend shock are discrete, the saturated ``(Y0, D1)`` and
``(Y0, Y1, D1)`` cells are exact and the population targets can be enumerated.
"""
from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from ..core import PotentialOutcomeWorld, to_lattice
from ..errors import ConfigError, SpecError
from ..rng import as_generator
from .config import DesignerSpec, Linear

FLAG_NAMES = ("se", "invar_trend_1", "invar_trend_2", "invar_te_1", "invar_te_2")


def _lin(f: Linear, y0, u, y1=0.0):
    return f.const + f.y0 * y0 + f.u * u + f.y1 * y1


def _u_enters_outcomes(spec: DesignerSpec) -> bool:
    funcs = [spec.delta1, spec.tau1, *spec.delta2, *spec.tau2]
    return any(f.u != 0 for f in funcs)


def implied_flags(spec: DesignerSpec) -> dict:
    """Which clauses of the limited-heterogeneity and exchangeability conditions hold.

    ``U`` is independent of ``Y0`` and noise is mean zero, so each clause
    reduces to a condition on the linear coefficients.
    """
    d1_mean_tau1 = spec.tau1.const + spec.tau1.y0 * np.dot(spec.y0_grid, spec.y0_probs) + spec.tau1.u * spec.u_prob
    trend2 = all(
        spec.delta2[d].y0 + spec.delta2[d].y1 * (1 + spec.delta1.y0 + d * spec.tau1.y0) == 0 for d in (0, 1)
    )
    y1_reveals_u = spec.delta1.u != 0 or spec.tau1.u != 0
    te2 = all(
        spec.tau2[d].y0 == 0 and spec.tau2[d].y1 == 0 and (spec.tau2[d].u == 0 or not y1_reveals_u)
        for d in (0, 1)
    )
    selection_on_u = spec.e1.loads_on_u or spec.e2.loads_on_u
    return {
        "se": not (selection_on_u and _u_enters_outcomes(spec)),
        "invar_trend_1": spec.delta1.y0 == 0,
        "invar_trend_2": bool(trend2),
        "invar_te_1": bool(spec.tau1.y0 == 0 and d1_mean_tau1 != 0),
        "invar_te_2": bool(te2),
    }


def validate_designer(spec: DesignerSpec) -> dict:
    """Return the implied flags, raising ``SpecError`` if declared flags disagree."""
    if spec.e1.prob_by_d1 is not None or spec.e1.d1 != 0 or spec.e1.y1 != 0:
        raise SpecError("the period-one propensity can depend on Y0 and U only")
    flags = implied_flags(spec)
    if spec.flags:
        unknown = set(spec.flags) - set(FLAG_NAMES)
        if unknown:
            raise SpecError(f"unknown designer flags {sorted(unknown)}")
        bad = {k: flags[k] for k, v in spec.flags.items() if bool(v) != flags[k]}
        if bad:
            detail = ", ".join(f"{k} declared {spec.flags[k]} but parameters imply {v}" for k, v in bad.items())
            raise SpecError(f"inconsistent designer spec: {detail}")
    return flags


def simulate_designer(spec: DesignerSpec, n: int, seed) -> PotentialOutcomeWorld:
    if n < 1:
        raise ConfigError("n must be >= 1")
    flags = validate_designer(spec)
    rng = as_generator(seed)
    grid = np.asarray(spec.y0_grid)
    y0 = grid[rng.choice(len(grid), size=n, p=np.asarray(spec.y0_probs))]
    u = (rng.random(n) < spec.u_prob).astype(np.float64)
    support = np.asarray(spec.delta1_support)
    shock = support[rng.integers(len(support), size=n)]
    noise_d = spec.delta2_noise_sd * rng.standard_normal((n, 2))
    noise_t = spec.tau2_noise_sd * rng.standard_normal((n, 2))
    uniforms = rng.random((n, 2))

    y0 = to_lattice(y0)
    delta1 = _lin(spec.delta1, y0, u) + shock
    tau1 = _lin(spec.tau1, y0, u)
    y1 = to_lattice(np.column_stack([y0 + delta1, y0 + delta1 + tau1]))
    y2 = np.empty((n, 4))
    for d1 in (0, 1):
        delta2 = _lin(spec.delta2[d1], y0, u, y1[:, d1]) + noise_d[:, d1]
        tau2 = _lin(spec.tau2[d1], y0, u, y1[:, d1]) + noise_t[:, d1]
        y2[:, 2 * d1] = y1[:, d1] + delta2
        y2[:, 2 * d1 + 1] = y1[:, d1] + delta2 + tau2
    y2 = to_lattice(y2)

    e1 = spec.e1(y0, u)
    d1 = (uniforms[:, 0] < e1).astype(np.int8)
    y1_obs = y1[np.arange(n), d1]
    e2 = spec.e2(y0, u, d1, y1_obs)
    d2 = (uniforms[:, 1] < e2).astype(np.int8)

    return PotentialOutcomeWorld(
        y0=y0,
        po=(y1, y2),
        assigned=np.column_stack([d1, d2]),
        latent={"u": u, "t_propensity": np.column_stack([e1, e2])},
        regime="designer",
        meta={"flags": flags},
    )


class DesignerPopulation(NamedTuple):
    """Exact population quantities of a designer world, by enumeration."""

    ate_tau2_given_d1: tuple
    ate_tau2_over_D1: float
    trend_means: tuple  # E[delta1], E[delta2(0)], E[delta2(1)]
    ate_tau1: float
    convex_aggregate: float
    plim_te_term: float
    plim_trend_term: float
    cell_weights: dict  # (y0, d1) -> w(y0, d1)


def designer_population(spec: DesignerSpec) -> DesignerPopulation:
    """Enumerate ``(Y0, U, shock, D1)`` atoms and integrate out the period-two draws.

    The noise in period-two trends and effects is mean zero and independent of
    treatment, so conditional means only need the atoms.
    """
    validate_designer(spec)
    support = spec.delta1_support
    atoms = []
    ex_ante = np.zeros(6)  # delta1, tau1, delta2(0), delta2(1), tau2(0), tau2(1)
    for (y0, p0), (u, pu), s in itertools.product(
        zip(spec.y0_grid, spec.y0_probs), ((0.0, 1 - spec.u_prob), (1.0, spec.u_prob)), support
    ):
        base = p0 * pu / len(support)
        if base == 0:
            continue
        delta1 = _lin(spec.delta1, y0, u) + s
        tau1 = _lin(spec.tau1, y0, u)
        y1 = [y0 + delta1, y0 + delta1 + tau1]
        tau2 = [_lin(spec.tau2[d], y0, u, y1[d]) for d in (0, 1)]
        delta2 = [_lin(spec.delta2[d], y0, u, y1[d]) for d in (0, 1)]
        ex_ante += base * np.array([delta1, tau1, *delta2, *tau2])
        e1 = float(spec.e1(np.array(y0), np.array(u)))
        for d1 in (0, 1):
            p = base * (e1 if d1 else 1 - e1)
            if p == 0:
                continue
            e2 = float(spec.e2(np.array(y0), np.array(u), np.array(d1), np.array(y1[d1])))
            atoms.append((p, y0, d1, e2, y1[d1] - y0, tau2[d1], delta2[d1]))
    p, y0s, d1, e2, dy1, tau2, delta2 = (np.array(c, dtype=np.float64) for c in zip(*atoms))
    ate_over = float(np.sum(p * tau2))

    keys = sorted(set(zip(y0s.tolist(), d1.astype(int).tolist())))
    lookup = {k: i for i, k in enumerate(keys)}
    idx = np.array([lookup[k] for k in zip(y0s.tolist(), d1.astype(int).tolist())])
    pc = np.bincount(idx, weights=p)
    A = np.bincount(idx, weights=p * dy1) / pc
    B = np.bincount(idx, weights=p * (e2 - d1)) / pc
    E2 = np.bincount(idx, weights=p * e2) / pc
    # population projection of B on [1, A] with cell weights pc
    X = np.column_stack([np.ones(len(keys)), A])
    coef = np.linalg.lstsq(X * np.sqrt(pc)[:, None], B * np.sqrt(pc), rcond=None)[0]
    W = B - X @ coef
    ew2 = float(np.sum(pc * W**2))
    w_unit = W[idx]
    te = float(np.sum(p * w_unit * e2 * tau2)) / ew2 if ew2 > 1e-14 else float("nan")
    trend = float(np.sum(p * w_unit * delta2)) / ew2 if ew2 > 1e-14 else float("nan")

    # convex weights use E[D2|Y0,D1] - E[D2|D1]
    kd1 = np.array([k[1] for k in keys])
    e2_d1 = np.array([np.sum(pc[kd1 == d] * E2[kd1 == d]) / np.sum(pc[kd1 == d]) for d in (0, 1)])
    w = E2 - e2_d1[kd1]
    w2 = w[idx] ** 2
    convex = float(np.sum(p * w2 * tau2) / np.sum(p * w2)) if np.sum(p * w2) > 1e-14 else float("nan")
    return DesignerPopulation(
        ate_tau2_given_d1=(float(ex_ante[4]), float(ex_ante[5])),
        ate_tau2_over_D1=ate_over,
        trend_means=(float(ex_ante[0]), float(ex_ante[2]), float(ex_ante[3])),
        ate_tau1=float(ex_ante[1]),
        convex_aggregate=convex,
        plim_te_term=te,
        plim_trend_term=trend,
        cell_weights={k: float(v) for k, v in zip(keys, w)},
    )
