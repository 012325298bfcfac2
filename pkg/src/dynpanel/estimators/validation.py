"""Input checking shared by the estimators."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array

from ..core import ObservedPanel
from ..errors import HorizonError


def check_panel(Y, D=None) -> ObservedPanel:
    """Accept an ``ObservedPanel`` or the pair (outcomes ``n x (T+1)``, treatments ``n x T``)."""
    if isinstance(Y, ObservedPanel):
        return Y
    if D is None:
        raise TypeError("pass an ObservedPanel or both the outcome and treatment matrices")
    Y = check_array(Y, dtype=np.float64, ensure_min_features=2)
    D = check_array(D, dtype=None, ensure_min_features=1)
    return ObservedPanel(y=Y, d=D)


def require_horizon(panel: ObservedPanel, exact=None, minimum=None):
    T = panel.horizon
    if exact is not None and T != exact:
        raise HorizonError(f"this estimator needs T = {exact}, got T = {T}")
    if minimum is not None and T < minimum:
        raise HorizonError(f"this estimator needs T >= {minimum}, got T = {T}")
    return panel
