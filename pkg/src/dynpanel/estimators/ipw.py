"""Adjusted inverse-propensity weighting for ``E[tau2(D1)]`` and its 2SLS twin.

With ``M1 = E[D2 | Y0, Y1, D1]`` and ``M2 = E[dY2 | D2 = 0, Y0, Y1, D1]`` the
estimator is the sample mean of ``(dY2 - M2) / M1``. The transformed 2SLS
regression rescales each summand by ``mean(W**2) / W`` and feeds it through the
partialled-out 2SLS slope, which reproduces the same number.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from sklearn.base import clone

from ..core import EstimatorReport, ObservedPanel, first_difference
from ..errors import ConfigError, OverlapError, WeightDivisionError
from .cells import CondMeanEstimator, cell_codes
from .twosls import DEGENERATE_TOL, fwl_beta, saturated_first_stage
from .validation import require_horizon

HISTORY = ("y0", "y1", "d1")


def _history(panel):
    return np.column_stack([panel.y[:, 0], panel.y[:, 1], panel.d[:, 0]])


def estimate_cond_mean(panel: ObservedPanel, target: str, cme: CondMeanEstimator = None) -> np.ndarray:
    """Per-unit plug-in ``M1`` (``E[D2 | history]``) or ``M2`` (``E[dY2 | D2 = 0, history]``)."""
    require_horizon(panel, exact=2)
    cme = clone(cme) if cme is not None else CondMeanEstimator()
    if cme.mode == "kernel":
        cme.set_params(discrete=(2,))
    H = _history(panel)
    if target == "M1":
        return cme.fit(H, panel.d[:, 1].astype(np.float64), names=HISTORY).predict(H)
    if target == "M2":
        untreated = panel.d[:, 1] == 0
        dy2 = first_difference(panel).dy[:, 1]
        return cme.fit(H[untreated], dy2[untreated], names=HISTORY).predict(H)
    raise ConfigError(f"target must be 'M1' or 'M2', got {target!r}")


class IpwSummands(NamedTuple):
    summand: np.ndarray  # over kept units
    keep: np.ndarray  # boolean mask of units passing the overlap bound
    m1: np.ndarray
    m2: np.ndarray


def ipw_summands(panel: ObservedPanel, cme: CondMeanEstimator = None) -> IpwSummands:
    cme = cme if cme is not None else CondMeanEstimator()
    m1 = estimate_cond_mean(panel, "M1", cme)
    low = m1 < cme.trim
    if np.any(low) and cme.policy == "error":
        codes, keys = cell_codes(*_history(panel).T)
        bad = np.unique(codes[low])
        shown = ", ".join(
            "(" + ", ".join(f"{n}={v:g}" for n, v in zip(HISTORY, keys[c])) + f"; M1={m1[codes == c][0]:.3g})"
            for c in bad[:5]
        )
        raise OverlapError(
            f"{int(low.sum())} unit(s) with estimated propensity below c={cme.trim}: {shown}"
            + (" ..." if len(bad) > 5 else "")
        )
    keep = ~low
    m2 = np.full(panel.n, np.nan)
    m2[keep] = estimate_cond_mean(panel if np.all(keep) else _subset(panel, keep), "M2", cme)
    dy2 = first_difference(panel).dy[:, 1]
    summand = (dy2[keep] - m2[keep]) / m1[keep]
    return IpwSummands(summand, keep, m1, m2)


def _subset(panel, mask):
    return ObservedPanel(y=panel.y[mask], d=panel.d[mask])


def _overlap_diag(s: IpwSummands, cme):
    kept = s.m1[s.keep]
    return {"min": float(kept.min()), "max": float(kept.max()), "trim": cme.trim,
            "trimmed": int((~s.keep).sum()), "policy": cme.policy}


def adjusted_ipw(panel: ObservedPanel, cme: CondMeanEstimator = None):
    """Returns ``(mu_tau2_hat, report)``."""
    require_horizon(panel, exact=2)
    cme = cme if cme is not None else CondMeanEstimator()
    s = ipw_summands(panel, cme)
    mu = float(np.mean(s.summand))
    report = EstimatorReport(mu_tau2_hat=mu, overlap_diag=_overlap_diag(s, cme), extra={"mode": cme.mode})
    return mu, report


def transformed_2sls(panel: ObservedPanel, cme: CondMeanEstimator = None, small_weight="error",
                     tol=DEGENERATE_TOL):
    """Returns ``(mu_tau2_hat, report)`` from the 2SLS slope on the transformed outcome."""
    require_horizon(panel, exact=2)
    if small_weight not in ("error", "drop"):
        raise ConfigError("small_weight must be 'error' or 'drop'")
    cme = cme if cme is not None else CondMeanEstimator()
    s = ipw_summands(panel, cme)
    sub = panel if np.all(s.keep) else _subset(panel, s.keep)
    summand = s.summand
    stage = saturated_first_stage(sub)
    _, W = fwl_beta(sub, tol=tol, stage=stage)
    floor = np.sqrt(tol * max(float(np.var(stage.dd2)), 0.0))
    small = np.abs(W) <= floor
    dropped = 0
    if np.any(small):
        if small_weight == "error":
            cells = np.unique(stage.codes[small])
            shown = ", ".join(stage.table.label(c) for c in cells[:5])
            raise WeightDivisionError(f"projection weight below {floor:.3g} in cell(s) {shown}")
        dropped = int(small.sum())
    ok = ~small
    scale = np.mean(W[ok] ** 2)
    dy2_dagger = np.zeros_like(W)
    dy2_dagger[ok] = summand[ok] * scale / W[ok]
    beta = float(np.sum(W[ok] * dy2_dagger[ok]) / np.sum(W[ok] ** 2))
    report = EstimatorReport(
        beta_hat=beta,
        mu_tau2_hat=beta,
        overlap_diag=_overlap_diag(s, cme),
        extra={"mode": cme.mode, "small_weight_policy": small_weight, "small_weight_dropped": dropped},
    )
    return beta, report
