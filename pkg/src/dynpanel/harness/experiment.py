"""Monte Carlo driver: oracle world, replications, ordered aggregation, reports."""
from __future__ import annotations

import csv
import io
import json
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy
import sklearn

from .. import __version__
from ..core import realize_observed
from ..dgp import simulate
from ..errors import ConfigError, DynPanelError, ExperimentError
from ..estimators.api import make_estimator
from ..io import canonical_json, digest, dumps_pretty, jsonable
from ..oracles import (
    causal_targets,
    check_ab_moments,
    check_full_se_period_one,
    check_parallel_trends,
    check_sequential_exchangeability,
    check_trend_equivalence,
    designer_targets,
)
from ..rng import ORACLE_STREAM, REPLICATION_STREAM, stream
from .config import ExperimentConfig


def oracle_world(cfg: ExperimentConfig, n=None):
    return simulate(cfg.dgp, n or cfg.oracle_n, stream(cfg.seed, ORACLE_STREAM, 0))


def replication_world(cfg: ExperimentConfig, r: int, n=None):
    return simulate(cfg.dgp, n or cfg.n_units, stream(cfg.seed, REPLICATION_STREAM, r))


def _flat_targets(t) -> dict:
    return {
        "convex_aggregate": t.convex_aggregate,
        "ate_tau2_over_D1": t.ate_tau2_over_D1,
        "plim_2sls": t.plim_2sls,
        "plim_te_term": t.plim_te_term,
        "plim_trend_term": t.plim_trend_term,
        "ate_tau2_given_d1_0": t.ate_tau2_given_d1[0],
        "ate_tau2_given_d1_1": t.ate_tau2_given_d1[1],
        "ate_tau1": t.ate_tau1,
        "trend_delta1": t.trend_means[0],
        "trend_delta2_0": t.trend_means[1],
        "trend_delta2_1": t.trend_means[2],
    }


def run_check(name, world, cfg: ExperimentConfig):
    import dataclasses

    cc = cfg.check_config
    given_alpha = dataclasses.replace(cc, condition_on_alpha=True)
    if name == "ab_moments":
        return check_ab_moments(world, cc)
    w2 = world.truncate(2) if world.horizon > 2 else world
    if name == "se":
        return check_sequential_exchangeability(w2, cc)
    if name == "se_alpha":
        return check_sequential_exchangeability(w2, given_alpha)
    if name == "trend_equivalence":
        return check_trend_equivalence(w2, cc)
    if name == "trend_equivalence_alpha":
        return check_trend_equivalence(w2, given_alpha)
    if name == "pt":
        return check_parallel_trends(w2, cc)
    if name == "full_se":
        return check_full_se_period_one(w2, cc)
    raise ConfigError(f"unknown check {name!r}")


def compute_oracle(cfg: ExperimentConfig):
    """Targets and verdicts from one large world drawn on the oracle stream.

    Returns ``(targets, world_targets, checks)``. ``world_targets`` are read off
    the oracle world; ``targets`` are what rows are scored against, which is
    the same dict except for designer worlds, whose targets are exact
    population values obtained by enumeration.
    """
    world = oracle_world(cfg)
    world_targets = {}
    if world.horizon == 2:
        world_targets.update(_flat_targets(causal_targets(world)))
    if world.regime == "linear_dpdm":
        world_targets["beta_star"] = world.meta["beta_star"]
        world_targets["gamma_star"] = world.meta["gamma_star"]
    targets = dict(world_targets)
    if cfg.dgp.regime == "designer":
        targets.update(_flat_targets(designer_targets(cfg.dgp.params)))
    checks = {name: run_check(name, world, cfg) for name in cfg.checks}
    return targets, world_targets, checks


def _fit_key(spec):
    return spec.estimator + canonical_json(spec.params)


def run_replication(cfg: ExperimentConfig, r: int):
    """Estimates for every row in replication ``r``: list of ``(value, error_name)``."""
    panel = realize_observed(replication_world(cfg, r))
    fitted = {}
    out = []
    for spec in cfg.estimators:
        key = _fit_key(spec)
        if key not in fitted:
            est = make_estimator(spec.estimator, **spec.params)
            try:
                est.fit(panel)
                fitted[key] = (est.report_, None)
            except (DynPanelError, np.linalg.LinAlgError, FloatingPointError) as exc:
                fitted[key] = (None, type(exc).__name__)
        report, err = fitted[key]
        if err is not None:
            out.append((None, err))
            continue
        value = getattr(report, spec.estimate)
        if value is None or not np.isfinite(value):
            out.append((None, "NonFiniteEstimate"))
        else:
            out.append((float(value), None))
    return out


def _run_chunk(cfg, indices):
    return [(r, run_replication(cfg, r)) for r in indices]


def run_replications(cfg: ExperimentConfig, jobs: int = 1):
    """All replications in index order, whatever the worker count."""
    R = cfg.replications
    if jobs <= 1 or R <= 1:
        return [run_replication(cfg, r) for r in range(R)]
    size = max(1, -(-R // (4 * jobs)))
    chunks = [list(range(s, min(R, s + size))) for s in range(0, R, size)]
    results = {}
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_run_chunk, [cfg] * len(chunks), chunks):
            results.update(part)
    return [results[r] for r in range(R)]


def _summary(values, target, policy):
    v = np.asarray(values, dtype=np.float64)
    m = v.size
    if m == 0:
        return {"n_ok": 0}
    mean = float(v.mean())
    sd = float(v.std(ddof=1)) if m > 1 else float("nan")
    mc_se = sd / np.sqrt(m) if m > 1 else float("nan")
    row = {"n_ok": m, "mean": mean, "sd": sd, "mc_se": mc_se, "variance": float(v.var())}
    if target is None or not np.isfinite(target):
        return row
    k, floor = policy.k, policy.abs_floor
    bias = mean - target
    row.update(
        bias=bias,
        rmse=float(np.sqrt(np.mean((v - target) ** 2))),
        coverage=float(np.mean(np.abs(v - target) <= policy.coverage_k * sd)) if m > 1 else float("nan"),
        band=float(max(floor, k * mc_se)) if m > 1 else float(floor),
    )
    row["passes"] = bool(abs(bias) <= row["band"])
    return row


@dataclass
class ExperimentReport:
    doc: dict
    check_cells: list
    wall_time: float

    @property
    def rows(self):
        return self.doc["rows"]

    @property
    def passed(self) -> bool:
        return self.doc["acceptance"]["passed"]

    def row(self, name) -> dict:
        return next(r for r in self.rows if r["name"] == name)

    def to_json(self) -> str:
        return dumps_pretty(self.doc)

    def rows_csv(self) -> str:
        cols = ["name", "estimator", "estimate", "target", "oracle", "mean", "bias", "rmse", "mc_se", "sd",
                "coverage", "band", "passes", "n_ok", "failures"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in self.rows:
            w.writerow([json.dumps(r.get(c)) if c == "failures" else _csv_val(r.get(c)) for c in cols])
        return buf.getvalue()

    def cells_csv(self) -> str:
        return cells_to_csv(self.check_cells)

    def write(self, out_dir, jobs=1):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        (out / "rows.csv").write_text(self.rows_csv())
        (out / "check_cells.csv").write_text(self.cells_csv())
        meta = {"wall_time_s": round(self.wall_time, 3), "jobs": jobs, "report_digest": digest(self.doc)}
        (out / "run_meta.json").write_text(dumps_pretty(meta))
        return out


def _csv_val(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def cells_to_csv(cells) -> str:
    cols = ["check"] if any("check" in c for c in cells) else []
    for c in cells:
        for key in c:
            if key not in cols:
                cols.append(key)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for c in cells:
        w.writerow([_csv_val(jsonable(c.get(k))) for k in cols])
    return buf.getvalue()


def _acceptance(cfg: ExperimentConfig, rows, checks):
    mismatches = []
    for key, want in cfg.expectations.items():
        if key in checks:
            got = checks[key]["verdict"]
            if got != want:
                mismatches.append({"item": key, "expected": want, "got": got})
        else:
            row = next(r for r in rows if r["name"] == key)
            got = "pass" if row.get("passes") else "fail"
            if got != want:
                mismatches.append({"item": key, "expected": want, "got": got})
    return {"passed": not mismatches, "mismatches": mismatches}


def run_experiment(cfg: ExperimentConfig, jobs: int = None) -> ExperimentReport:
    """Oracle targets and checks, then replications, then a deterministic ordered reduce."""
    if jobs is None:
        jobs = int(os.environ.get("DYNPANEL_JOBS", "1") or 1)
    start = time.perf_counter()
    targets, world_targets, checks = compute_oracle(cfg)
    results = run_replications(cfg, jobs)
    rows = []
    for j, spec in enumerate(cfg.estimators):
        values = [res[j][0] for res in results if res[j][1] is None]
        failures = dict(sorted(Counter(res[j][1] for res in results if res[j][1] is not None).items()))
        if isinstance(spec.target, (int, float)):
            target = float(spec.target)
        else:
            target = targets.get(spec.target)
        row = {"name": spec.name, "estimator": spec.estimator, "estimate": spec.estimate,
               "target": spec.target, "oracle": target, "failures": failures}
        row.update(_summary(values, target, cfg.tolerance_policy))
        rows.append(row)
        if cfg.replications and sum(failures.values()) > 0.5 * cfg.replications:
            raise ExperimentError(
                f"estimator row {spec.name!r} failed in {sum(failures.values())} of {cfg.replications} "
                f"replications: {failures}"
            )
    check_docs = {name: v.to_json() for name, v in checks.items()}
    doc = jsonable({
        "schema": 1,
        "name": cfg.name,
        "config": cfg.to_dict(),
        "config_digest": digest(jsonable(cfg.to_dict())),
        "seed": str(cfg.seed),
        "targets": targets,
        "oracle_world_targets": world_targets,
        "checks": check_docs,
        "rows": rows,
        "versions": {"dynpanel": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "scikit-learn": sklearn.__version__},
    })
    doc["acceptance"] = _acceptance(cfg, doc["rows"], doc["checks"])
    cells = [dict(c, check=name) for name, v in checks.items() for c in v.cells]
    return ExperimentReport(doc, cells, time.perf_counter() - start)
