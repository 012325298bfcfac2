"""Estimators that read only the observed panel."""
from .api import ESTIMATORS, AdjustedIPW, ArellanoBondGMM, FirstDifference2SLS, Transformed2SLS, make_estimator
from .cells import CellTable, CondMeanEstimator, cell_codes
from .gmm import GmmResult, arellano_bond_gmm
from .ipw import adjusted_ipw, estimate_cond_mean, ipw_summands, transformed_2sls
from .twosls import DEGENERATE_TOL, fit_fd_2sls, fwl_beta, projection_weights, saturated_first_stage
from .validation import check_panel

__all__ = [
    "DEGENERATE_TOL",
    "ESTIMATORS",
    "AdjustedIPW",
    "ArellanoBondGMM",
    "CellTable",
    "CondMeanEstimator",
    "FirstDifference2SLS",
    "GmmResult",
    "Transformed2SLS",
    "adjusted_ipw",
    "arellano_bond_gmm",
    "cell_codes",
    "check_panel",
    "estimate_cond_mean",
    "fit_fd_2sls",
    "fwl_beta",
    "ipw_summands",
    "make_estimator",
    "projection_weights",
    "saturated_first_stage",
    "transformed_2sls",
]
