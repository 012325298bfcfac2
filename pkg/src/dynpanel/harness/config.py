"""Experiment configuration documents."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..dgp.config import DgpConfig, parse_dgp_config
from ..errors import ConfigError
from ..estimators.api import ESTIMATORS, make_estimator
from ..io import load_json
from ..oracles.checks import CheckConfig

SCHEMA_VERSION = 1
CHECKS = ("se", "se_alpha", "trend_equivalence", "trend_equivalence_alpha", "pt", "full_se", "ab_moments")
ESTIMATES = ("beta_hat", "gamma_hat", "mu_tau2_hat")
NAMED_TARGETS = (
    "convex_aggregate",
    "ate_tau2_over_D1",
    "plim_2sls",
    "plim_te_term",
    "ate_tau2_given_d1_0",
    "ate_tau2_given_d1_1",
    "beta_star",
    "gamma_star",
)


@dataclass(frozen=True)
class EstimatorSpec:
    """One reported row: an estimator, the estimate it yields and the target it is scored against."""

    name: str
    estimator: str
    estimate: str = "beta_hat"
    target: object = "convex_aggregate"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator {self.name!r}: unknown kind {self.estimator!r}")
        if self.estimate not in ESTIMATES:
            raise ConfigError(f"estimator {self.name!r}: estimate must be one of {ESTIMATES}")
        if not isinstance(self.target, (int, float)) and self.target not in NAMED_TARGETS:
            raise ConfigError(f"estimator {self.name!r}: target must be a number or one of {NAMED_TARGETS}")
        make_estimator(self.estimator, **self.params)  # validates params early


@dataclass(frozen=True)
class TolerancePolicy:
    """Bias passes when ``|bias| <= max(abs_floor, k * MC s.e.)``.

    ``coverage_k`` sets the per-replication band ``|estimate - target| <= coverage_k * sd``
    whose hit rate is reported as coverage.
    """

    k: float = 3.0
    abs_floor: float = 0.01
    coverage_k: float = 4.0

    def __post_init__(self):
        if not (self.k > 0 and self.abs_floor >= 0 and self.coverage_k > 0):
            raise ConfigError("tolerance policy needs k > 0, abs_floor >= 0 and coverage_k > 0")


@dataclass(frozen=True)
class ExperimentConfig:
    """A Monte Carlo experiment: one generator, a list of estimator rows and the oracle checks.

    ``expectations`` maps check names to the verdict each must return and row
    names to ``"pass"`` or ``"fail"``; a mismatch makes the scenario fail.
    """

    name: str
    dgp: DgpConfig
    estimators: tuple = ()
    n_units: int = 10_000
    replications: int = 100
    seed: int = 0
    oracle_n: int = 1_000_000
    output_dir: str = "results"
    tolerance_policy: TolerancePolicy = field(default_factory=TolerancePolicy)
    checks: tuple = ()
    check_config: CheckConfig = field(default_factory=CheckConfig)
    expectations: dict = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.n_units < 1:
            raise ConfigError("n_units must be >= 1")
        if self.oracle_n < self.n_units:
            raise ConfigError("oracle_n must be >= n_units")
        unknown = set(self.checks) - set(CHECKS)
        if unknown:
            raise ConfigError(f"unknown checks {sorted(unknown)}; expected some of {CHECKS}")
        names = [e.name for e in self.estimators]
        if len(set(names)) != len(names):
            raise ConfigError("estimator row names must be unique")
        for key, want in self.expectations.items():
            if key in names:
                if want not in ("pass", "fail"):
                    raise ConfigError(f"expectation for row {key!r} must be 'pass' or 'fail'")
            elif key not in self.checks:
                raise ConfigError(f"expectation {key!r} names neither a row nor a configured check")

    def with_overrides(self, **kw) -> "ExperimentConfig":
        kw = {k: v for k, v in kw.items() if v is not None}
        return dataclasses.replace(self, **kw) if kw else self

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "name": self.name,
            "description": self.description,
            "dgp": self.dgp.to_dict(),
            "estimators": [dataclasses.asdict(e) for e in self.estimators],
            "n_units": self.n_units,
            "replications": self.replications,
            "seed": self.seed,
            "oracle_n": self.oracle_n,
            "tolerance_policy": dataclasses.asdict(self.tolerance_policy),
            "checks": list(self.checks),
            "check_config": self.check_config.to_dict(),
            "expectations": dict(self.expectations),
        }


_KEYS = {
    "schema", "name", "description", "dgp", "estimators", "n_units", "replications", "seed", "oracle_n",
    "output_dir", "tolerance_policy", "checks", "check_config", "expectations",
}


def parse_experiment_config(doc, name=None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("experiment config must be a JSON object")
    if doc.get("schema", SCHEMA_VERSION) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported experiment schema {doc.get('schema')!r}")
    unknown = set(doc) - _KEYS
    if unknown:
        raise ConfigError(f"experiment config: unknown keys {sorted(unknown)}")
    if "dgp" not in doc:
        raise ConfigError("experiment config needs a 'dgp' section")
    try:
        rows = tuple(EstimatorSpec(**e) for e in doc.get("estimators", []))
        tol = TolerancePolicy(**doc.get("tolerance_policy", {}))
        seed = int(doc.get("seed", 0))
    except TypeError as exc:
        raise ConfigError(f"experiment config: {exc}") from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return ExperimentConfig(
        name=doc.get("name") or name or "experiment",
        description=doc.get("description", ""),
        dgp=parse_dgp_config(doc["dgp"]),
        estimators=rows,
        n_units=int(doc.get("n_units", 10_000)),
        replications=int(doc.get("replications", 100)),
        seed=seed,
        oracle_n=int(doc.get("oracle_n", 1_000_000)),
        output_dir=str(doc.get("output_dir", "results")),
        tolerance_policy=tol,
        checks=tuple(doc.get("checks", ())),
        check_config=CheckConfig.from_dict(doc.get("check_config")),
        expectations=dict(doc.get("expectations", {})),
    )


def bundled_scenarios() -> list:
    files = resources.files("dynpanel") / "scenarios"
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def resolve_config_path(ref) -> Path:
    """A path on disk, or the name of a bundled scenario (with or without ``.json``)."""
    path = Path(ref)
    if path.exists():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if stem in bundled_scenarios():
        return Path(str(resources.files("dynpanel") / "scenarios" / f"{stem}.json"))
    raise ConfigError(f"config not found: {ref} (bundled scenarios: {', '.join(bundled_scenarios())})")


def load_experiment_config(ref) -> ExperimentConfig:
    path = resolve_config_path(ref)
    return parse_experiment_config(load_json(path), name=path.stem)
