"""Estimator classes with the scikit-learn ``fit`` / fitted-attribute convention.

``fit`` takes either an ``ObservedPanel`` or the outcome matrix
``Y`` (``n x (T+1)``, column 0 is ``Y0``) together with the treatment matrix
``D`` (``n x T``).
"""
from __future__ import annotations

from sklearn.base import BaseEstimator

from ..errors import ConfigError
from .cells import CondMeanEstimator
from .gmm import arellano_bond_gmm
from .ipw import adjusted_ipw, transformed_2sls
from .twosls import DEGENERATE_TOL, fit_fd_2sls
from .validation import check_panel


class FirstDifference2SLS(BaseEstimator):
    """Saturated-first-stage 2SLS on the first-differenced T = 2 equation."""

    def __init__(self, degenerate_tol=DEGENERATE_TOL):
        self.degenerate_tol = degenerate_tol

    def fit(self, Y, D=None):
        panel = check_panel(Y, D)
        self.gamma_, self.beta_, self.report_ = fit_fd_2sls(panel, tol=self.degenerate_tol)
        return self


class _PropensityEstimator(BaseEstimator):
    def __init__(self, mode="cell", bandwidth=None, trim=0.01, policy="error"):
        self.mode = mode
        self.bandwidth = bandwidth
        self.trim = trim
        self.policy = policy

    def _cme(self):
        return CondMeanEstimator(mode=self.mode, bandwidth=self.bandwidth, trim=self.trim, policy=self.policy)


class AdjustedIPW(_PropensityEstimator):
    """Adjusted IPW estimate of ``E[tau2(D1)]``.

    Parameters
    ----------
    mode : {"cell", "kernel"}
        How the plug-ins ``M1`` and ``M2`` are estimated.
    bandwidth : float or None
        Kernel bandwidth for ``(Y0, Y1)``; rule of thumb when ``None``.
    trim : float
        Overlap bound ``c``.
    policy : {"error", "trim"}
        Fail on, or drop, units with ``M1 < c``.
    """

    def fit(self, Y, D=None):
        panel = check_panel(Y, D)
        self.mu_, self.report_ = adjusted_ipw(panel, self._cme())
        return self


class Transformed2SLS(_PropensityEstimator):
    """2SLS slope on the IPW-transformed outcome; equal to ``AdjustedIPW`` by construction."""

    def __init__(self, mode="cell", bandwidth=None, trim=0.01, policy="error", small_weight="error"):
        super().__init__(mode=mode, bandwidth=bandwidth, trim=trim, policy=policy)
        self.small_weight = small_weight

    def fit(self, Y, D=None):
        panel = check_panel(Y, D)
        self.mu_, self.report_ = transformed_2sls(panel, self._cme(), small_weight=self.small_weight)
        return self


class ArellanoBondGMM(BaseEstimator):
    def __init__(self, weighting="one-step", ridge=1e-10):
        self.weighting = weighting
        self.ridge = ridge

    def fit(self, Y, D=None):
        panel = check_panel(Y, D)
        res = arellano_bond_gmm(panel, weighting=self.weighting, ridge=self.ridge)
        self.gamma_, self.beta_ = res.gamma_hat, res.beta_hat
        self.j_stat_, self.j_df_ = res.j_stat, res.j_df
        self.report_ = res.report
        return self


ESTIMATORS = {
    "fd_2sls": FirstDifference2SLS,
    "ipw": AdjustedIPW,
    "t2sls": Transformed2SLS,
    "ab_gmm": ArellanoBondGMM,
}


def make_estimator(name: str, **params) -> BaseEstimator:
    if name not in ESTIMATORS:
        raise ConfigError(f"unknown estimator {name!r}; expected one of {sorted(ESTIMATORS)}")
    est = ESTIMATORS[name]()
    valid = est.get_params()
    unknown = set(params) - set(valid)
    if unknown:
        raise ConfigError(f"estimator {name!r}: unknown parameters {sorted(unknown)}")
    return est.set_params(**params)
