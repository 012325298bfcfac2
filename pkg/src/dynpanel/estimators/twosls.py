"""First-difference 2SLS with a saturated ``(Y0, D1)`` first stage, for T = 2.

The first stage fits ``dY1`` and ``dD2`` on a full set of ``(Y0, D1)`` cell
dummies, which is the same as replacing each unit's value by its cell mean.
The second stage regresses ``dY2`` on an intercept and the two fitted values.
By Frisch-Waugh-Lovell the slope on the fitted ``dD2`` equals
``sum(W * dY2) / sum(W**2)`` where ``W`` is the residual of fitted ``dD2`` on
``[1, fitted dY1]``.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..core import EstimatorReport, ObservedPanel, first_difference
from ..errors import ConditioningError, DegenerateWeightsError, SaturationError
from .cells import CellTable, cell_codes
from .validation import require_horizon

DEGENERATE_TOL = 1e-8


class FirstStage(NamedTuple):
    codes: np.ndarray
    table: CellTable  # keyed by (y0, d1) with means of dy1 and dd2
    za: np.ndarray  # fitted dY1 per unit
    zb: np.ndarray  # fitted dD2 per unit
    dy2: np.ndarray
    dd2: np.ndarray


class ProjectionWeights(NamedTuple):
    table: CellTable  # per-cell w
    w: np.ndarray  # per unit
    mean_w2: float
    normalized: np.ndarray  # w**2 / mean(w**2), per unit
    diagnostics: dict


def saturated_first_stage(panel: ObservedPanel) -> FirstStage:
    require_horizon(panel, exact=2)
    fd = first_difference(panel)
    y0, d1 = panel.y[:, 0], panel.d[:, 0]
    codes, keys = cell_codes(y0, d1)
    levels = np.unique(y0)
    if len(keys) != 2 * len(levels):
        present = {(float(a), int(b)) for a, b in keys}
        missing = [(float(v), d) for v in levels for d in (0, 1) if (float(v), d) not in present]
        shown = ", ".join(f"(y0={v:g}, d1={d})" for v, d in missing[:5])
        raise SaturationError(f"empty first-stage cell {shown}; every (Y0, D1) cell needs units")
    table = CellTable.from_codes(("y0", "d1"), keys, codes, dy1=fd.dy[:, 0], dd2=fd.dd[:, 0])
    za = table.means["dy1"][codes]
    zb = table.means["dd2"][codes]
    return FirstStage(codes, table, za, zb, fd.dy[:, 1], fd.dd[:, 0])


def _residualize(stage: FirstStage):
    X = np.column_stack([np.ones_like(stage.za), stage.za])
    coef = np.linalg.lstsq(X, stage.zb, rcond=None)[0]
    return stage.zb - X @ coef


def _weight_diagnostics(w, dd2, tol):
    var_dd = float(np.var(dd2))
    floor = np.sqrt(tol * var_dd)
    return {
        "min": float(w.min()),
        "max": float(w.max()),
        "frac_small": float(np.mean(np.abs(w) < floor)) if floor > 0 else 1.0,
        "mean_w2": float(np.mean(w**2)),
        "var_dd2": var_dd,
        "threshold": tol * var_dd,
    }


def _check_degenerate(diag):
    if not diag["mean_w2"] > diag["threshold"] or diag["var_dd2"] == 0:
        raise DegenerateWeightsError(
            f"projection weights are degenerate: mean(w^2) = {diag['mean_w2']:.3g} "
            f"<= {diag['threshold']:.3g} (E[D2 | Y0, D1] does not vary with Y0)"
        )


def fwl_beta(panel: ObservedPanel, tol=DEGENERATE_TOL, stage: FirstStage = None):
    """Slope on fitted dD2 in partialled-out form; returns ``(beta_hat, W)``."""
    stage = stage if stage is not None else saturated_first_stage(panel)
    W = _residualize(stage)
    _check_degenerate(_weight_diagnostics(W, stage.dd2, tol))
    return float(np.sum(W * stage.dy2) / np.sum(W * W)), W


def fit_fd_2sls(panel: ObservedPanel, tol=DEGENERATE_TOL):
    """Two-stage least squares on the first-differenced equation; returns ``(gamma, beta, report)``."""
    stage = saturated_first_stage(panel)
    W = _residualize(stage)
    diag = _weight_diagnostics(W, stage.dd2, tol)
    _check_degenerate(diag)
    X = np.column_stack([np.ones_like(stage.za), stage.za, stage.zb])
    coef, _, rank, _ = np.linalg.lstsq(X, stage.dy2, rcond=None)
    if rank < 3:
        raise ConditioningError("second stage is rank deficient: fitted dY1 does not vary across cells")
    report = EstimatorReport(beta_hat=float(coef[2]), gamma_hat=float(coef[1]), weight_diag=diag,
                             extra={"intercept": float(coef[0]), "cells": len(stage.table)})
    return report.gamma_hat, report.beta_hat, report


def projection_weights(panel: ObservedPanel, tol=DEGENERATE_TOL) -> ProjectionWeights:
    """Per-cell projection errors and their convex normalisation (no degeneracy error)."""
    stage = saturated_first_stage(panel)
    W = _residualize(stage)
    table = CellTable.from_codes(stage.table.names, stage.table.keys, stage.codes, w=W)
    mean_w2 = float(np.mean(W**2))
    normalized = W**2 / mean_w2 if mean_w2 > 0 else np.zeros_like(W)
    return ProjectionWeights(table, W, mean_w2, normalized, _weight_diagnostics(W, stage.dd2, tol))
