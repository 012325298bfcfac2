"""Generator configurations and the tagged-union JSON document that selects one.

A DGP document is a JSON object with ``"schema": 1`` and ``"regime"`` naming
one of ``linear_dpdm``, ``learning``, ``seq_randomized`` or ``designer``; the
remaining keys are the regime's parameters.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..errors import ConfigError

SCHEMA_VERSION = 1


def _build(cls, doc, where):
    if doc is None:
        return cls()
    if isinstance(doc, cls):
        return doc
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object, got {type(doc).__name__}")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in doc:
            continue
        sub = _NESTED.get((cls.__name__, f.name))
        kwargs[f.name] = sub(doc[f.name], f"{where}.{f.name}") if sub else doc[f.name]
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def to_dict(cfg) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if dataclasses.is_dataclass(v):
            v = to_dict(v)
        elif isinstance(v, (list, tuple)):
            v = [to_dict(x) if dataclasses.is_dataclass(x) else x for x in v]
        out[f.name] = v
    return out


def _finite(x, what):
    x = float(x)
    if not np.isfinite(x):
        raise ConfigError(f"{what} must be finite")
    return x


@dataclass
class Y0Rule:
    """Y0 = grid[bucket(loading * driver + noise_sd * Z)] with ``cutpoints`` as bucket edges."""

    grid: list = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    cutpoints: Optional[list] = None
    loading: float = 0.0
    noise_sd: float = 1.0

    def __post_init__(self):
        self.grid = [float(g) for g in self.grid]
        if len(self.grid) < 1:
            raise ConfigError("y0 grid must be non-empty")
        if self.cutpoints is None:
            from scipy.stats import norm

            k = len(self.grid)
            self.cutpoints = [float(norm.ppf(j / k)) for j in range(1, k)]
        self.cutpoints = [float(c) for c in self.cutpoints]
        if len(self.cutpoints) != len(self.grid) - 1:
            raise ConfigError("y0 rule needs len(grid) - 1 cutpoints")
        if any(b <= a for a, b in zip(self.cutpoints, self.cutpoints[1:])):
            raise ConfigError("y0 cutpoints must be increasing")
        if self.noise_sd < 0:
            raise ConfigError("y0 noise_sd must be >= 0")

    def draw(self, driver, z):
        index = self.loading * np.asarray(driver) + self.noise_sd * z
        return np.asarray(self.grid)[np.searchsorted(self.cutpoints, index)]


@dataclass
class AlphaDist:
    family: str = "two-point"
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.family not in ("normal", "two-point"):
            raise ConfigError(f"alpha family must be 'normal' or 'two-point', got {self.family!r}")
        _finite(self.mean, "alpha mean")
        if not self.sd >= 0:
            raise ConfigError("alpha sd must be >= 0")


@dataclass
class EpsDist:
    """Structural errors per arm; ``rho`` injects AR(1) serial correlation (violates exogeneity)."""

    sd: list = field(default_factory=lambda: [1.0, 1.0])
    rho: float = 0.0

    def __post_init__(self):
        if np.isscalar(self.sd):
            self.sd = [float(self.sd)] * 2
        self.sd = [float(s) for s in self.sd]
        if len(self.sd) != 2 or any(not s >= 0 for s in self.sd):
            raise ConfigError("eps sd must be two non-negative values (arm 0, arm 1)")
        if not -1 < self.rho < 1:
            raise ConfigError("eps rho must lie in (-1, 1)")


@dataclass
class SelectionRule:
    """Pr{D_t = 1} = logistic(intercept + y_lag*Y_{t-1} + d_lag*D_{t-1} + alpha*alpha_i)."""

    intercept: float = 0.0
    y_lag: float = 0.0
    d_lag: float = 0.0
    alpha: float = 0.0


@dataclass
class LinearDpdmConfig:
    beta_star: float = 1.0
    gamma_star: float = 0.5
    theta_star: list = field(default_factory=list)
    alpha_dist: AlphaDist = field(default_factory=AlphaDist)
    eps_dist: EpsDist = field(default_factory=EpsDist)
    y0_rule: Y0Rule = field(default_factory=lambda: Y0Rule(loading=1.0))
    selection_rule: SelectionRule = field(default_factory=SelectionRule)
    allow_nonstationary: bool = False

    def __post_init__(self):
        _finite(self.beta_star, "beta_star")
        _finite(self.gamma_star, "gamma_star")
        if abs(self.gamma_star) >= 1 and not self.allow_nonstationary:
            raise ConfigError("|gamma_star| must be < 1 (set allow_nonstationary to override)")
        self.theta_star = [_finite(x, "theta_star") for x in self.theta_star]

    def theta(self, T):
        th = list(self.theta_star)
        if len(th) > T:
            return th[:T]
        if th and len(th) < T:
            raise ConfigError(f"theta_star has {len(th)} entries but T = {T}")
        return th or [0.0] * T


@dataclass
class OutcomeFamily:
    """Y_1(d1) = a*d1 + b*Y0 + alpha(d1) + eps_1(d1);  Y_2(d1,d2) = a*d2 + b*Y_1(d1) + alpha(d2) + eps_2(d2).

    ``alpha = (alpha(0), alpha(1))`` is bivariate normal. Y0 is drawn on a grid
    from ``y0_rule`` with ``alpha(0)`` as the driver.
    """

    a: float = 1.0
    b: float = 0.5
    alpha_mean: list = field(default_factory=lambda: [0.0, 0.0])
    alpha_cov: list = field(default_factory=lambda: [[1.0, 0.5], [0.5, 1.0]])
    eps_sd: float = 1.0
    y0_rule: Y0Rule = field(default_factory=Y0Rule)

    def __post_init__(self):
        self.alpha_mean = [float(x) for x in self.alpha_mean]
        cov = np.asarray(self.alpha_cov, dtype=float)
        if len(self.alpha_mean) != 2 or cov.shape != (2, 2):
            raise ConfigError("alpha prior must be bivariate")
        if not np.allclose(cov, cov.T) or np.any(np.linalg.eigvalsh(cov) < -1e-12):
            raise ConfigError("alpha covariance must be symmetric positive semi-definite")
        self.alpha_cov = cov.tolist()
        if not self.eps_sd >= 0:
            raise ConfigError("eps_sd must be >= 0")


@dataclass
class Xi0Spec:
    """Prior shifter xi0 = y0_loading*Y0 + sd*Z [+ alpha_loading*(alpha(1) - alpha(0) - mean)]."""

    y0_loading: float = 0.0
    sd: float = 1.0
    independent_given_y0: bool = True
    alpha_loading: float = 1.0


@dataclass
class EtaSpec:
    family: str = "gumbel"
    scale: float = 1.0

    def __post_init__(self):
        if self.family != "gumbel":
            raise ConfigError("eta family must be 'gumbel' (logistic choice probabilities)")
        if not self.scale > 0:
            raise ConfigError("eta scale must be > 0")


@dataclass
class LearningConfig:
    outcome: OutcomeFamily = field(default_factory=OutcomeFamily)
    prior_mean: Optional[list] = None
    prior_cov: Optional[list] = None
    xi0_spec: Xi0Spec = field(default_factory=Xi0Spec)
    cost: float = 0.5
    eta_spec: EtaSpec = field(default_factory=EtaSpec)
    discount: float = 0.9
    belief: str = "conjugate-normal"
    quadrature_nodes: int = 48

    def __post_init__(self):
        if not 0 <= self.discount < 1:
            raise ConfigError("discount must lie in [0, 1)")
        if self.prior_mean is None:
            self.prior_mean = list(self.outcome.alpha_mean)
        if self.prior_cov is None:
            self.prior_cov = [list(r) for r in self.outcome.alpha_cov]
        pc = np.asarray(self.prior_cov, dtype=float)
        if pc.shape != (2, 2) or np.any(np.linalg.eigvalsh(pc) < -1e-12):
            raise ConfigError("prior_cov must be a 2x2 PSD matrix")
        if int(self.quadrature_nodes) < 2:
            raise ConfigError("quadrature_nodes must be >= 2")


@dataclass
class Propensity:
    """``kind`` is ``constant`` (uses ``value``) or ``logistic`` over the named coefficients."""

    kind: str = "constant"
    value: float = 0.5
    intercept: float = 0.0
    y0: float = 0.0
    y1: float = 0.0
    y1_sq: float = 0.0
    d1: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "logistic"):
            raise ConfigError(f"propensity kind must be 'constant' or 'logistic', got {self.kind!r}")

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or (self.y0 == 0 and self.y1 == 0 and self.y1_sq == 0 and self.d1 == 0)

    def __call__(self, y0, y1=None, d1=None):
        from scipy.special import expit

        y0 = np.asarray(y0, dtype=float)
        if self.kind == "constant":
            return np.full(y0.shape, float(self.value))
        idx = self.intercept + self.y0 * y0
        if y1 is not None:
            y1 = np.asarray(y1, dtype=float)
            idx = idx + self.y1 * y1 + self.y1_sq * y1**2
        if d1 is not None:
            idx = idx + self.d1 * np.asarray(d1, dtype=float)
        return expit(idx)


@dataclass
class SeqRandConfig:
    p1: Propensity = field(default_factory=Propensity)
    p2: Propensity = field(default_factory=Propensity)
    degenerate_p2: bool = False
    po_family: OutcomeFamily = field(default_factory=OutcomeFamily)

    def __post_init__(self):
        if self.degenerate_p2 and self.p2.kind != "constant":
            raise ConfigError("degenerate_p2 requires a constant p2")
        if self.p1.kind == "constant" and not 0 < self.p1.value < 1:
            raise ConfigError("p1 must lie strictly inside (0, 1)")
        if self.p2.kind == "constant" and not (0 <= self.p2.value <= 1):
            raise ConfigError("p2 must be a probability")
        if self.p2.kind == "constant" and not self.degenerate_p2 and not 0 < self.p2.value < 1:
            raise ConfigError("p2 on the boundary of [0, 1] requires degenerate_p2")


@dataclass
class Linear:
    """Cell-mean function const + y0*Y0 + u*U (+ y1*Y1 where the period allows it)."""

    const: float = 0.0
    y0: float = 0.0
    u: float = 0.0
    y1: float = 0.0


@dataclass
class Logit:
    """Treatment propensity: fixed ``prob`` (may sit on {0, 1}) or logistic index."""

    prob: Optional[float] = None
    prob_by_d1: Optional[list] = None
    const: float = 0.0
    y0: float = 0.0
    u: float = 0.0
    d1: float = 0.0
    y1: float = 0.0

    def __post_init__(self):
        if self.prob is not None and not 0 <= self.prob <= 1:
            raise ConfigError("prob must lie in [0, 1]")
        if self.prob_by_d1 is not None:
            if len(self.prob_by_d1) != 2 or any(not 0 <= p <= 1 for p in self.prob_by_d1):
                raise ConfigError("prob_by_d1 must be two probabilities")

    def __call__(self, y0, u, d1=None, y1=None):
        from scipy.special import expit

        y0 = np.asarray(y0, dtype=float)
        if self.prob is not None:
            return np.full(y0.shape, float(self.prob))
        if self.prob_by_d1 is not None:
            return np.asarray(self.prob_by_d1, dtype=float)[np.asarray(d1, dtype=np.int64)]
        idx = self.const + self.y0 * y0 + self.u * np.asarray(u, dtype=float)
        if d1 is not None:
            idx = idx + self.d1 * np.asarray(d1, dtype=float)
        if y1 is not None:
            idx = idx + self.y1 * np.asarray(y1, dtype=float)
        return expit(idx)

    @property
    def loads_on_u(self) -> bool:
        return self.prob is None and self.prob_by_d1 is None and self.u != 0


@dataclass
class DesignerSpec:
    """Free-form fixture world, discrete in (Y0, Y1) so saturated cells are exact.

    Y1(d1) = Y0 + delta1 + d1*tau1 with delta1 = mean + noise drawn uniformly from
    ``delta1_support``; Y2(d1, d2) = Y1(d1) + delta2(d1) + d2*tau2(d1), where the
    period-two means may load on Y1(d1) and carry Gaussian noise.
    """

    y0_grid: list = field(default_factory=lambda: [-1.0, 0.0, 1.0])
    y0_probs: Optional[list] = None
    u_prob: float = 0.5
    delta1: Linear = field(default_factory=Linear)
    delta1_support: list = field(default_factory=lambda: [0.0])
    tau1: Linear = field(default_factory=lambda: Linear(const=1.0))
    delta2: list = field(default_factory=lambda: [Linear(), Linear()])
    tau2: list = field(default_factory=lambda: [Linear(const=1.0), Linear(const=1.0)])
    delta2_noise_sd: float = 0.0
    tau2_noise_sd: float = 0.0
    e1: Logit = field(default_factory=Logit)
    e2: Logit = field(default_factory=Logit)
    flags: Optional[dict] = None

    def __post_init__(self):
        self.y0_grid = [float(g) for g in self.y0_grid]
        k = len(self.y0_grid)
        if self.y0_probs is None:
            self.y0_probs = [1.0 / k] * k
        p = np.asarray(self.y0_probs, dtype=float)
        if p.shape != (k,) or np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ConfigError("y0_probs must be a probability vector matching y0_grid")
        if not 0 <= self.u_prob <= 1:
            raise ConfigError("u_prob must lie in [0, 1]")
        if len(self.delta2) != 2 or len(self.tau2) != 2:
            raise ConfigError("delta2 and tau2 need one entry per d1 in {0, 1}")
        if self.delta1.y1 != 0 or self.tau1.y1 != 0:
            raise ConfigError("period-one means cannot load on Y1")
        if not self.delta1_support:
            raise ConfigError("delta1_support must be non-empty")
        self.delta1_support = [float(x) for x in self.delta1_support]


def _linear_list(doc, where):
    if not isinstance(doc, list):
        raise ConfigError(f"{where}: expected a list of two objects")
    return [_build(Linear, x, f"{where}[{i}]") for i, x in enumerate(doc)]


_NESTED = {
    ("LinearDpdmConfig", "alpha_dist"): lambda d, w: _build(AlphaDist, d, w),
    ("LinearDpdmConfig", "eps_dist"): lambda d, w: _build(EpsDist, d, w),
    ("LinearDpdmConfig", "y0_rule"): lambda d, w: _build(Y0Rule, d, w),
    ("LinearDpdmConfig", "selection_rule"): lambda d, w: _build(SelectionRule, d, w),
    ("OutcomeFamily", "y0_rule"): lambda d, w: _build(Y0Rule, d, w),
    ("LearningConfig", "outcome"): lambda d, w: _build(OutcomeFamily, d, w),
    ("LearningConfig", "xi0_spec"): lambda d, w: _build(Xi0Spec, d, w),
    ("LearningConfig", "eta_spec"): lambda d, w: _build(EtaSpec, d, w),
    ("SeqRandConfig", "p1"): lambda d, w: _build(Propensity, d, w),
    ("SeqRandConfig", "p2"): lambda d, w: _build(Propensity, d, w),
    ("SeqRandConfig", "po_family"): lambda d, w: _build(OutcomeFamily, d, w),
    ("DesignerSpec", "delta1"): lambda d, w: _build(Linear, d, w),
    ("DesignerSpec", "tau1"): lambda d, w: _build(Linear, d, w),
    ("DesignerSpec", "delta2"): _linear_list,
    ("DesignerSpec", "tau2"): _linear_list,
    ("DesignerSpec", "e1"): lambda d, w: _build(Logit, d, w),
    ("DesignerSpec", "e2"): lambda d, w: _build(Logit, d, w),
}

REGIMES = {
    "linear_dpdm": LinearDpdmConfig,
    "learning": LearningConfig,
    "seq_randomized": SeqRandConfig,
    "designer": DesignerSpec,
}


@dataclass
class DgpConfig:
    """Resolved tagged union: ``regime`` plus its parameter object and horizon."""

    regime: str
    params: object
    horizon: int = 2

    def to_dict(self) -> dict:
        return {"schema": SCHEMA_VERSION, "regime": self.regime, "horizon": self.horizon,
                "params": to_dict(self.params)}


def parse_dgp_config(doc) -> DgpConfig:
    if isinstance(doc, DgpConfig):
        return doc
    if not isinstance(doc, dict):
        raise ConfigError("DGP config must be a JSON object")
    schema = doc.get("schema", SCHEMA_VERSION)
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported DGP schema {schema!r}; expected {SCHEMA_VERSION}")
    regime = doc.get("regime")
    if regime not in REGIMES:
        raise ConfigError(f"unknown regime {regime!r}; expected one of {sorted(REGIMES)}")
    horizon = int(doc.get("horizon", 2))
    extra = set(doc) - {"schema", "regime", "horizon", "params"}
    if extra:
        raise ConfigError(f"unknown DGP keys {sorted(extra)}")
    params = _build(REGIMES[regime], doc.get("params", {}), regime)
    if regime != "linear_dpdm" and horizon != 2:
        raise ConfigError(f"regime {regime!r} supports horizon 2 only")
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    return DgpConfig(regime=regime, params=params, horizon=horizon)
