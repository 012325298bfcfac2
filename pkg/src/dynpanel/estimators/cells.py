"""Cell tables and conditional-mean plug-ins.

``CondMeanEstimator`` is a scikit-learn style regressor. In ``cell`` mode every
column is a discrete key and predictions are exact cell means. In ``kernel``
mode it is a Nadaraya-Watson smoother with a product Gaussian kernel over the
continuous columns and exact matching on the columns listed in ``discrete``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..errors import CellSupportError, ConfigError


def cell_codes(*columns):
    """Integer code per row for the distinct value tuples of ``columns``, plus the sorted keys."""
    cols = [np.asarray(c, dtype=np.float64).ravel() for c in columns]
    uniq = [np.unique(c, return_inverse=True) for c in cols]
    if np.prod([float(len(v)) for v, _ in uniq]) >= 2.0**62:
        keys, codes = np.unique(np.column_stack(cols), axis=0, return_inverse=True)
        return codes.ravel(), keys
    # mixed-radix code over the per-column level indices
    levels, combined = [], 0
    for vals, inv in uniq:
        levels.append(vals)
        combined = combined * len(vals) + inv.ravel().astype(np.int64)
    used, codes = np.unique(combined, return_inverse=True)
    keys = np.empty((len(used), len(levels)))
    rest = used
    for j in range(len(levels) - 1, -1, -1):
        keys[:, j] = levels[j][rest % len(levels[j])]
        rest = rest // len(levels[j])
    return codes.ravel(), keys


def _fmt_key(names, key):
    return "(" + ", ".join(f"{n}={float(v):g}" for n, v in zip(names, key)) + ")"


@dataclass(frozen=True)
class CellTable:
    """Counts and per-cell means of named statistics over a discrete key."""

    names: tuple
    keys: np.ndarray  # (cells, len(names))
    count: np.ndarray
    means: dict  # statistic -> (cells,) array

    @classmethod
    def from_codes(cls, names, keys, codes, **stats):
        count = np.bincount(codes, minlength=len(keys))
        means = {}
        for name, values in stats.items():
            values = np.asarray(values, dtype=np.float64)
            with np.errstate(invalid="ignore", divide="ignore"):
                means[name] = np.bincount(codes, weights=values, minlength=len(keys)) / count
        return cls(tuple(names), keys, count, means)

    def __len__(self):
        return len(self.keys)

    def label(self, i) -> str:
        return _fmt_key(self.names, self.keys[i])

    def rows(self):
        out = []
        for i, key in enumerate(self.keys):
            row = {n: float(v) for n, v in zip(self.names, key)}
            row["count"] = int(self.count[i])
            row.update({k: float(v[i]) for k, v in self.means.items()})
            out.append(row)
        return out


def default_bandwidth(X):
    """Rule of thumb ``1.06 * sd * n**(-1/5)`` per column (1.0 for constant columns)."""
    X = np.asarray(X, dtype=np.float64)
    sd = X.std(axis=0, ddof=1) if len(X) > 1 else np.zeros(X.shape[1])
    sd = np.where(sd > 0, sd, 1.0)
    return 1.06 * sd * len(X) ** (-0.2)


class CondMeanEstimator(RegressorMixin, BaseEstimator):
    """Conditional mean E[y | X] by exact cells or Nadaraya-Watson smoothing.

    Parameters
    ----------
    mode : {"cell", "kernel"}
    bandwidth : float, array-like or None
        Kernel bandwidth per continuous column; ``None`` uses the rule of thumb.
    discrete : tuple of int
        Columns matched exactly in kernel mode.
    trim : float
        Lower bound ``c`` in ``(0, 0.5)`` for propensity denominators that use
        this estimator.
    policy : {"error", "trim"}
        What a propensity consumer does with units whose plug-in falls below ``trim``.
    chunk : int
        Rows per block when evaluating kernel weights.
    """

    def __init__(self, mode="cell", bandwidth=None, discrete=(), trim=0.01, policy="error", chunk=2048):
        self.mode = mode
        self.bandwidth = bandwidth
        self.discrete = discrete
        self.trim = trim
        self.policy = policy
        self.chunk = chunk

    def _check_params(self):
        if self.mode not in ("cell", "kernel"):
            raise ConfigError(f"mode must be 'cell' or 'kernel', got {self.mode!r}")
        if not 0 < self.trim < 0.5:
            raise ConfigError("trimming bound must lie in (0, 0.5)")
        if self.policy not in ("error", "trim"):
            raise ConfigError(f"policy must be 'error' or 'trim', got {self.policy!r}")

    def fit(self, X, y, names=None):
        self._check_params()
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        self.names_ = tuple(names) if names else tuple(f"x{j}" for j in range(X.shape[1]))
        self.n_features_in_ = X.shape[1]
        if self.mode == "cell":
            codes, keys = cell_codes(*X.T)
            self.table_ = CellTable.from_codes(self.names_, keys, codes, y=y)
            return self
        disc = sorted(set(int(j) for j in self.discrete))
        cont = [j for j in range(X.shape[1]) if j not in disc]
        if self.bandwidth is None:
            bw = default_bandwidth(X[:, cont]) if cont else np.zeros(0)
        else:
            bw = np.broadcast_to(np.asarray(self.bandwidth, dtype=np.float64), (len(cont),)).copy()
        if np.any(bw <= 0):
            raise ConfigError("kernel bandwidths must be > 0")
        self.discrete_, self.continuous_, self.bandwidth_ = disc, cont, bw
        self.X_, self.y_ = X, y
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_array(X, dtype=np.float64)
        if self.mode == "cell":
            return self._predict_cell(X)
        return self._predict_kernel(X)

    def _predict_cell(self, X):
        t = self.table_
        # locate rows of X among the fitted keys
        inv, _ = cell_codes(*np.vstack([t.keys, X]).T)
        lookup = np.full(inv.max() + 1, -1, dtype=np.int64)
        lookup[inv[: len(t.keys)]] = np.arange(len(t.keys))
        pos = lookup[inv[len(t.keys):]]
        if np.any(pos < 0):
            missing = np.unique(X[pos < 0], axis=0)
            shown = ", ".join(_fmt_key(t.names, k) for k in missing[:5])
            raise CellSupportError(f"no training units in cell(s) {shown}" + (" ..." if len(missing) > 5 else ""))
        return t.means["y"][pos]

    def _predict_kernel(self, X):
        out = np.empty(len(X))
        Xc, bw = self.X_[:, self.continuous_], self.bandwidth_
        for start in range(0, len(X), self.chunk):
            block = X[start:start + self.chunk]
            z = (block[:, None, self.continuous_] - Xc[None, :, :]) / bw
            logw = -0.5 * np.sum(z * z, axis=2)
            if self.discrete_:
                match = np.all(block[:, None, self.discrete_] == self.X_[None, :, self.discrete_], axis=2)
                logw = np.where(match, logw, -np.inf)
            top = logw.max(axis=1, keepdims=True)
            if not np.all(np.isfinite(top)):
                bad = block[~np.isfinite(top.ravel())][0]
                raise CellSupportError(f"zero kernel mass at {_fmt_key(self.names_, bad)}")
            # subtracting the row maximum keeps the nearest neighbours from underflowing
            w = np.exp(logw - top)
            out[start:start + len(block)] = (w @ self.y_) / w.sum(axis=1)
        return out
