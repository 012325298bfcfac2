"""Arellano-Bond GMM for ``dY_t = gamma dY_{t-1} + beta dD_t + dtheta_t + d eps_t``.

Equations ``t = 2..T`` are stacked per unit. Each has its own intercept, and
its instruments are the levels ``Y_0..Y_{t-2}`` and ``D_1..D_{t-1}`` in a
block-diagonal layout. With T = 2 the single equation is instrumented by the
saturated ``(Y0, D1)`` cell dummies, which makes GMM coincide with the
first-difference 2SLS.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..core import EstimatorReport, ObservedPanel, first_difference
from ..errors import ConditioningError, ConfigError
from .cells import cell_codes
from .twosls import saturated_first_stage
from .validation import require_horizon

COND_LIMIT = 1e13


class GmmResult(NamedTuple):
    gamma_hat: float
    beta_hat: float
    j_stat: float
    j_df: int
    report: EstimatorReport


def _design(panel: ObservedPanel):
    """Per-unit stacked outcome ``(n, m)``, regressors ``(n, m, k)`` and instruments ``(n, m, L)``."""
    T = panel.horizon
    fd = first_difference(panel)
    n, m = panel.n, T - 1
    y = fd.dy[:, 1:]
    k = 2 + m
    X = np.zeros((n, m, k))
    X[:, :, 0] = fd.dy[:, :-1]
    X[:, :, 1] = fd.dd
    for j in range(m):
        X[:, j, 2 + j] = 1.0
    if T == 2:
        saturated_first_stage(panel)  # same cell checks as the 2SLS path
        codes, keys = cell_codes(panel.y[:, 0], panel.d[:, 0])
        Z = np.zeros((n, 1, len(keys)))
        Z[np.arange(n), 0, codes] = 1.0
        return y, X, Z
    blocks = []
    for t in range(2, T + 1):
        # levels Y_0..Y_{t-2}, D_1..D_{t-1}, plus the equation's intercept
        blocks.append(np.column_stack([np.ones(n), panel.y[:, : t - 1], panel.d[:, : t - 1]]))
    L = sum(b.shape[1] for b in blocks)
    Z = np.zeros((n, m, L))
    col = 0
    for j, b in enumerate(blocks):
        Z[:, j, col: col + b.shape[1]] = b
        col += b.shape[1]
    return y, X, Z


def _solve(A, b, what):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise ConditioningError(
            f"{what} is singular (condition number {cond:.3g}); instruments may be collinear or units too few"
        )
    return np.linalg.solve(A, b)


def _estimate(ZX, Zy, Wt):
    A = ZX.T @ Wt @ ZX
    return _solve(A, ZX.T @ Wt @ Zy, "GMM normal matrix")


def arellano_bond_gmm(panel: ObservedPanel, weighting="one-step", ridge=1e-10) -> GmmResult:
    require_horizon(panel, minimum=2)
    if weighting not in ("one-step", "two-step"):
        raise ConfigError(f"weighting must be 'one-step' or 'two-step', got {weighting!r}")
    y, X, Z = _design(panel)
    m = y.shape[1]
    H = 2 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
    ZX = np.einsum("iml,imk->lk", Z, X)
    Zy = np.einsum("iml,im->l", Z, y)
    ZHZ = np.einsum("iml,mp,ipq->lq", Z, H, Z)
    W1 = np.linalg.inv(ZHZ) if np.linalg.cond(ZHZ) < COND_LIMIT else None
    if W1 is None:
        raise ConditioningError("one-step weighting matrix is singular; instruments may be collinear")
    b = _estimate(ZX, Zy, W1)
    resid = y - np.einsum("imk,k->im", X, b)
    g = np.einsum("iml,im->il", Z, resid)
    S = g.T @ g
    ridge_added = ridge * np.trace(S) / S.shape[0]
    S_r = S + ridge_added * np.eye(S.shape[0])
    if weighting == "two-step":
        W2 = np.linalg.inv(S_r) if np.linalg.cond(S_r) < COND_LIMIT else None
        if W2 is None:
            raise ConditioningError("two-step weighting matrix is singular")
        b = _estimate(ZX, Zy, W2)
        resid = y - np.einsum("imk,k->im", X, b)
    L, k = Z.shape[2], X.shape[2]
    gbar = np.einsum("iml,im->l", Z, resid)
    j_df = L - k
    j_stat = float(gbar @ np.linalg.solve(S_r, gbar)) if j_df > 0 else float("nan")
    report = EstimatorReport(
        beta_hat=float(b[1]),
        gamma_hat=float(b[0]),
        extra={
            "weighting": weighting,
            "time_effects": [float(v) for v in b[2:]],
            "j_stat": j_stat if j_df > 0 else None,
            "j_df": int(j_df),
            "instruments": int(L),
            "ridge": float(ridge_added) if weighting == "two-step" else 0.0,
        },
    )
    return GmmResult(report.gamma_hat, report.beta_hat, j_stat, int(j_df), report)
