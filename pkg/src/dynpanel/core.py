"""Domain types shared by the generators, estimators and oracles.

Potential outcomes for period ``t`` are stored as an ``(n, 2**t)`` array whose
column index encodes the treatment path ``(d_1, ..., d_t)`` with ``d_1`` as the
most significant bit, so the length ``t - 1`` prefix of column ``k`` is
``k >> 1`` and appending ``d_t`` is ``(k << 1) | d_t``.

All stored outcomes live on a dyadic lattice (multiples of ``2**-LATTICE_BITS``
bounded by ``2**MAGNITUDE_BITS``). On that lattice sums and differences of two
stored values are exact in float64, which is what lets the per-unit
decomposition of observed first differences into trends and effects hold
bit-for-bit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Optional

import numpy as np

from .errors import HorizonError, MalformedWorldError

LATTICE_BITS = 32
MAGNITUDE_BITS = 20
MAX_HORIZON = 12

_SCALE = float(2**LATTICE_BITS)


def to_lattice(x):
    """Round values onto the outcome lattice; reject values too large to keep it exact."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise MalformedWorldError("non-finite potential outcome")
    if x.size and np.max(np.abs(x)) >= 2.0**MAGNITUDE_BITS:
        raise MalformedWorldError(
            f"potential outcome magnitude exceeds 2**{MAGNITUDE_BITS}; "
            "check the stationarity of the generating process"
        )
    return np.round(x * _SCALE) / _SCALE


def on_lattice(x) -> bool:
    x = np.asarray(x, dtype=np.float64)
    return bool(np.all(x * _SCALE == np.round(x * _SCALE)))


@dataclass(frozen=True)
class TreatmentPath:
    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)
        if any(b not in (0, 1) for b in bits):
            raise ValueError(f"treatment path entries must be 0/1, got {self.bits!r}")
        object.__setattr__(self, "bits", bits)

    @property
    def horizon(self) -> int:
        return len(self.bits)

    @property
    def index(self) -> int:
        k = 0
        for b in self.bits:
            k = (k << 1) | b
        return k

    @property
    def key(self) -> str:
        return "".join(str(b) for b in self.bits)

    def prefix(self, t: int) -> "TreatmentPath":
        return TreatmentPath(self.bits[:t])

    @classmethod
    def from_index(cls, index: int, horizon: int) -> "TreatmentPath":
        if not 0 <= index < 2**horizon:
            raise ValueError(f"index {index} out of range for horizon {horizon}")
        return cls(tuple((index >> (horizon - 1 - s)) & 1 for s in range(horizon)))

    @classmethod
    def from_key(cls, key: str) -> "TreatmentPath":
        return cls(tuple(int(c) for c in key))

    @classmethod
    def all(cls, horizon: int):
        return [cls.from_index(k, horizon) for k in range(2**horizon)]


def path_indices(d: np.ndarray, t: int) -> np.ndarray:
    """Integer encoding of each row's length-``t`` treatment prefix."""
    k = np.zeros(d.shape[0], dtype=np.int64)
    for s in range(t):
        k = (k << 1) | d[:, s].astype(np.int64)
    return k


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PotentialOutcomeWorld:
    """Complete counterfactual record for ``n`` units over ``T`` periods.

    ``po[t - 1]`` holds ``Y_t(d^t)`` for all ``2**t`` paths. ``latent`` keeps
    whatever unobservables the generating process drew (fixed effects,
    structural errors, belief states, propensities); oracles may read it,
    estimators never see it.
    """

    y0: np.ndarray
    po: tuple
    assigned: np.ndarray
    latent: Mapping[str, np.ndarray] = field(default_factory=dict)
    regime: str = "unknown"
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        y0 = _frozen(self.y0, np.float64)
        if y0.ndim != 1:
            raise MalformedWorldError("y0 must be one-dimensional")
        n = y0.shape[0]
        po = tuple(_frozen(p, np.float64) for p in self.po)
        T = len(po)
        if T < 1:
            raise HorizonError("a world needs at least one treated period")
        if T > MAX_HORIZON:
            raise HorizonError(f"horizon {T} exceeds MAX_HORIZON={MAX_HORIZON}")
        for t, p in enumerate(po, start=1):
            if p.shape != (n, 2**t):
                raise MalformedWorldError(
                    f"period {t} outcomes have shape {p.shape}, expected {(n, 2**t)}"
                )
            if not np.all(np.isfinite(p)):
                raise MalformedWorldError(f"missing (non-finite) potential outcome in period {t}")
        assigned = _frozen(self.assigned, np.int8)
        if assigned.shape != (n, T):
            raise MalformedWorldError(f"assigned paths have shape {assigned.shape}, expected {(n, T)}")
        if not np.all((assigned == 0) | (assigned == 1)):
            raise MalformedWorldError("assigned treatments must be binary")
        latent = {k: _frozen(v, np.asarray(v).dtype) for k, v in dict(self.latent).items()}
        object.__setattr__(self, "y0", y0)
        object.__setattr__(self, "po", po)
        object.__setattr__(self, "assigned", assigned)
        object.__setattr__(self, "latent", latent)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return self.y0.shape[0]

    @property
    def horizon(self) -> int:
        return len(self.po)

    def outcome(self, path) -> np.ndarray:
        """``Y_t(d^t)`` for every unit, ``t`` being the path length."""
        if not isinstance(path, TreatmentPath):
            path = TreatmentPath(tuple(path))
        t = path.horizon
        if t == 0:
            return self.y0
        if t > self.horizon:
            raise HorizonError(f"path of length {t} beyond horizon {self.horizon}")
        return self.po[t - 1][:, path.index]

    def realized_index(self, t: int) -> np.ndarray:
        return path_indices(self.assigned, t)

    def truncate(self, horizon: int) -> "PotentialOutcomeWorld":
        """Restrict to the first ``horizon`` periods (valid without anticipation)."""
        if not 1 <= horizon <= self.horizon:
            raise HorizonError(f"cannot truncate horizon {self.horizon} to {horizon}")
        latent = {}
        for k, v in self.latent.items():
            # per-period latents are laid out as (n, T, ...) arrays
            if v.ndim >= 2 and v.shape[1] == self.horizon and k.startswith("t_"):
                latent[k] = v[:, :horizon]
            else:
                latent[k] = v
        return PotentialOutcomeWorld(
            y0=self.y0,
            po=self.po[:horizon],
            assigned=self.assigned[:, :horizon],
            latent=latent,
            regime=self.regime,
            meta=self.meta,
        )


@dataclass(frozen=True, eq=False)
class ObservedPanel:
    """Realized outcomes ``y`` (n x T+1, column 0 is Y_0) and treatments ``d`` (n x T)."""

    y: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        y = _frozen(self.y, np.float64)
        d = np.asarray(self.d)
        if y.ndim != 2 or d.ndim != 2:
            raise MalformedWorldError("panel arrays must be two-dimensional")
        if d.shape != (y.shape[0], y.shape[1] - 1):
            raise MalformedWorldError(f"treatments shape {d.shape} inconsistent with outcomes {y.shape}")
        if not np.all((d == 0) | (d == 1)):
            raise MalformedWorldError("treatments must be binary")
        if not np.all(np.isfinite(y)):
            raise MalformedWorldError("outcomes must be finite (no missing data)")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "d", _frozen(d, np.int8))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def horizon(self) -> int:
        return self.d.shape[1]


class FirstDifferences(NamedTuple):
    dy: np.ndarray  # (n, T): Y_t - Y_{t-1}, t = 1..T
    dd: np.ndarray  # (n, T-1): D_t - D_{t-1}, t = 2..T


def realize_observed(world: PotentialOutcomeWorld) -> ObservedPanel:
    n, T = world.n, world.horizon
    rows = np.arange(n)
    y = np.empty((n, T + 1))
    y[:, 0] = world.y0
    for t in range(1, T + 1):
        y[:, t] = world.po[t - 1][rows, world.realized_index(t)]
    return ObservedPanel(y=y, d=world.assigned)


def first_difference(panel: ObservedPanel) -> FirstDifferences:
    if panel.horizon < 2:
        raise HorizonError("first differencing needs T >= 2")
    dy = np.diff(panel.y, axis=1)
    dd = np.diff(panel.d.astype(np.float64), axis=1)
    return FirstDifferences(dy=dy, dd=dd)


class PeriodTwoContrasts(NamedTuple):
    """Per-unit trends and effects read from the counterfactual record."""

    delta1: np.ndarray
    tau1: np.ndarray
    delta2: np.ndarray  # (n, 2) indexed by d1
    tau2: np.ndarray  # (n, 2) indexed by d1


def period_two_contrasts(world: PotentialOutcomeWorld) -> PeriodTwoContrasts:
    if world.horizon < 2:
        raise HorizonError("period-two contrasts need T >= 2")
    y1, y2 = world.po[0], world.po[1]
    delta1 = y1[:, 0] - world.y0
    tau1 = y1[:, 1] - y1[:, 0]
    # y2 columns: 00, 01, 10, 11
    delta2 = np.column_stack([y2[:, 0] - y1[:, 0], y2[:, 2] - y1[:, 1]])
    tau2 = np.column_stack([y2[:, 1] - y2[:, 0], y2[:, 3] - y2[:, 2]])
    return PeriodTwoContrasts(delta1, tau1, delta2, tau2)


@dataclass(frozen=True)
class CausalTargets:
    ate_tau2_given_d1: tuple
    ate_tau2_over_D1: float
    trend_means: tuple
    convex_aggregate: float
    plim_te_term: float
    plim_trend_term: float
    ate_tau1: float = float("nan")

    @property
    def plim_2sls(self) -> float:
        return self.plim_te_term + self.plim_trend_term

    def as_dict(self) -> dict:
        return {
            "ate_tau2_given_d1": list(self.ate_tau2_given_d1),
            "ate_tau2_over_D1": self.ate_tau2_over_D1,
            "ate_tau1": self.ate_tau1,
            "trend_means": list(self.trend_means),
            "convex_aggregate": self.convex_aggregate,
            "plim_te_term": self.plim_te_term,
            "plim_trend_term": self.plim_trend_term,
            "plim_2sls": self.plim_2sls,
        }


@dataclass
class EstimatorReport:
    beta_hat: float = float("nan")
    gamma_hat: float = float("nan")
    mu_tau2_hat: Optional[float] = None
    weight_diag: Optional[dict] = None
    overlap_diag: Optional[dict] = None
    seed: Optional[str] = None
    config_digest: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def is_finite(self) -> bool:
        vals = [self.beta_hat, self.gamma_hat]
        if self.mu_tau2_hat is not None:
            vals.append(self.mu_tau2_hat)
        return all(np.isfinite(v) for v in vals if v is not None)

    def to_json(self) -> dict:
        def num(v):
            if v is None:
                return None
            v = float(v)
            return v if np.isfinite(v) else None

        diagnostics = {}
        if self.weight_diag is not None:
            diagnostics["weights"] = self.weight_diag
        if self.overlap_diag is not None:
            diagnostics["overlap"] = self.overlap_diag
        diagnostics.update(self.extra)
        return {
            "beta_hat": num(self.beta_hat),
            "gamma_hat": num(self.gamma_hat),
            "mu_tau2_hat": num(self.mu_tau2_hat),
            "diagnostics": diagnostics,
            "seed": self.seed,
            "config_digest": self.config_digest,
        }

