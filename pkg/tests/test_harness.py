import json

import numpy as np
import pytest

from dynpanel.errors import ConfigError, ExperimentError
from dynpanel.harness import (
    ExperimentConfig,
    bundled_scenarios,
    compute_oracle,
    load_experiment_config,
    parse_experiment_config,
    run_experiment,
    run_replication,
)
from dynpanel.harness.cli import main
from dynpanel.io import load_json

from .helpers import HETERO_DESIGNER

BASE = {
    "schema": 1,
    "name": "tiny",
    "dgp": {"schema": 1, "regime": "designer", "params": HETERO_DESIGNER},
    "estimators": [
        {"name": "fd_2sls", "estimator": "fd_2sls"},
        {"name": "ipw", "estimator": "ipw", "estimate": "mu_tau2_hat", "target": "ate_tau2_over_D1"},
        {"name": "t2sls", "estimator": "t2sls", "estimate": "mu_tau2_hat", "target": "ate_tau2_over_D1"},
    ],
    "n_units": 1000,
    "replications": 6,
    "seed": 99,
    "oracle_n": 20000,
    "output_dir": "unused",
    "checks": ["se", "trend_equivalence", "pt"],
}


def _doc(**overrides):
    doc = json.loads(json.dumps(BASE))
    doc.update(overrides)
    return doc


def _write(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


# config


@pytest.mark.parametrize(
    "overrides",
    [
        dict(schema=2),
        dict(replications=0),
        dict(oracle_n=10),
        dict(checks=["nope"]),
        dict(estimators=[{"name": "a", "estimator": "fd_2sls"}, {"name": "a", "estimator": "ipw"}]),
        dict(estimators=[{"name": "a", "estimator": "fd_2sls", "target": "median"}]),
        dict(estimators=[{"name": "a", "estimator": "fd_2sls", "params": {"bogus": 1}}]),
        dict(expectations={"ghost": "pass"}),
        dict(tolerance_policy={"k": -1}),
        dict(surprise=True),
    ],
)
def test_bad_experiment_configs(overrides):
    with pytest.raises(ConfigError):
        parse_experiment_config(_doc(**overrides))


def test_bundled_scenarios_parse():
    names = bundled_scenarios()
    assert {"prop2_convex", "prop3_ipw", "ab_consistency", "se_vs_pt", "learning_ci_off"} <= set(names)
    for name in names:
        cfg = load_experiment_config(name)
        assert isinstance(cfg, ExperimentConfig) and cfg.name == name
        assert parse_experiment_config(cfg.to_dict()).to_dict() == cfg.to_dict()
    with pytest.raises(ConfigError):
        load_experiment_config("no_such_scenario")


def test_overrides_ignore_none():
    cfg = parse_experiment_config(_doc())
    assert cfg.with_overrides(seed=None, replications=3).replications == 3
    assert cfg.with_overrides(seed=None).seed == cfg.seed


# experiments


def test_oracle_uses_exact_designer_targets():
    cfg = parse_experiment_config(_doc())
    targets, world_targets, checks = compute_oracle(cfg)
    assert targets["convex_aggregate"] != world_targets["convex_aggregate"]
    assert abs(targets["convex_aggregate"] - world_targets["convex_aggregate"]) < 0.05
    assert set(checks) == {"se", "trend_equivalence", "pt"}


def test_replication_results_are_pure():
    cfg = parse_experiment_config(_doc())
    assert run_replication(cfg, 3) == run_replication(cfg, 3)
    assert run_replication(cfg, 3) != run_replication(cfg, 4)


def test_summary_statistics_are_consistent():
    report = run_experiment(parse_experiment_config(_doc()), jobs=1)
    for row in report.rows:
        assert row["n_ok"] == 6 and row["failures"] == {}
        assert row["rmse"] ** 2 == pytest.approx(row["bias"] ** 2 + row["variance"], rel=1e-9)
        assert 0 <= row["coverage"] <= 1
        assert row["mc_se"] == pytest.approx(row["sd"] / np.sqrt(6), rel=1e-12)
    # IPW and its transformed 2SLS twin agree replication by replication
    assert report.row("ipw")["mean"] == pytest.approx(report.row("t2sls")["mean"], rel=1e-8)
    assert set(report.doc["versions"]) == {"dynpanel", "numpy", "scipy", "scikit-learn"}


def test_artifacts_do_not_depend_on_worker_count(tmp_path):
    cfg = parse_experiment_config(_doc())
    a = run_experiment(cfg, jobs=1).write(tmp_path / "a", jobs=1)
    b = run_experiment(cfg, jobs=2).write(tmp_path / "b", jobs=2)
    for name in ("report.json", "rows.csv", "check_cells.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    meta = load_json(a / "run_meta.json")
    assert meta["jobs"] == 1 and meta["wall_time_s"] >= 0


def test_failures_are_counted_and_majority_failure_aborts():
    doc = _doc(dgp={"schema": 1, "regime": "designer",
                    "params": dict(HETERO_DESIGNER, e2={"const": -6.0, "y0": 3.0})})
    cfg = parse_experiment_config(doc)
    results = run_replication(cfg, 0)
    assert results[1] == (None, "OverlapError")
    with pytest.raises(ExperimentError, match="ipw"):
        run_experiment(cfg, jobs=1)


def test_expectations_are_reported():
    cfg = parse_experiment_config(_doc(expectations={"ipw": "pass", "pt": "violated"}))
    report = run_experiment(cfg, jobs=1)
    assert not report.passed
    assert [m["item"] for m in report.doc["acceptance"]["mismatches"]] == ["pt"]


# command line


def test_cli_simulate_estimate_check(tmp_path, capsys):
    cfg = _write(tmp_path, BASE["dgp"], "dgp.json")
    assert main(["simulate", "--config", cfg, "--n", "2000", "--seed", "5", "--out", str(tmp_path)]) == 0
    panel = tmp_path / "panel.csv"
    assert panel.read_text().splitlines()[0] == "unit,t,y,d"

    capsys.readouterr()
    assert main(["estimate", str(panel), "--estimator", "fd_2sls"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["estimator"] == "fd_2sls" and isinstance(doc["beta_hat"], float)
    assert "weights" in doc["diagnostics"]

    assert main(["simulate", "--config", cfg, "--n", "500", "--format", "json", "--out", str(tmp_path)]) == 0
    assert main(["check", str(tmp_path / "world.json"), "--checks", "se", "pt", "--out", str(tmp_path)]) == 0
    verdicts = load_json(tmp_path / "verdicts.json")
    assert set(verdicts) == {"se", "pt"}
    assert (tmp_path / "check_cells.csv").read_text().startswith("check,")


def test_cli_simulate_is_seeded(tmp_path, capsys):
    cfg = _write(tmp_path, BASE["dgp"], "dgp.json")
    outs = []
    for seed in ("1", "1", "2"):
        main(["simulate", "--config", cfg, "--n", "50", "--seed", seed])
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1] != outs[2]


def test_cli_exit_codes(tmp_path, capsys):
    dgp = dict(BASE["dgp"], params=dict(HETERO_DESIGNER, e2={"const": -6.0, "y0": 3.0}))
    main(["simulate", "--config", _write(tmp_path, dgp, "dgp.json"), "--n", "5000", "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["estimate", str(tmp_path / "panel.csv"), "--estimator", "ipw"]) == 3
    err = capsys.readouterr().err
    assert "OverlapError" in err and "y0=-1" in err

    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--config", "x", "--bogus"])
    assert exc.value.code == 2
    assert main(["simulate", "--config", _write(tmp_path, {"regime": "warp"}, "bad.json")]) == 2
    assert main(["estimate", str(tmp_path / "panel.csv")]) == 2
    assert main(["experiment", "--config", str(tmp_path / "missing.json")]) == 2


def test_cli_experiment_expectation_mismatch_exits_4(tmp_path, capsys):
    doc = _doc(output_dir=str(tmp_path / "out"), expectations={"pt": "violated"})
    assert main(["experiment", "--config", _write(tmp_path, doc), "--replications", "3"]) == 4
    assert (tmp_path / "out" / "report.json").exists()
    assert "pt expected violated" in capsys.readouterr().err


def test_cli_experiment_csv_and_env_jobs(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DYNPANEL_JOBS", "2")
    doc = _doc(output_dir=str(tmp_path / "out"))
    assert main(["experiment", "--config", _write(tmp_path, doc), "--replications", "3", "--format", "csv"]) == 0
    assert capsys.readouterr().out.startswith("name,")
    assert load_json(tmp_path / "out" / "run_meta.json")["jobs"] == 2
    monkeypatch.setenv("DYNPANEL_JOBS", "zero")
    assert main(["experiment", "--config", _write(tmp_path, doc), "--replications", "3"]) == 2


def test_cli_lists_scenarios(capsys):
    assert main(["scenarios"]) == 0
    out = capsys.readouterr().out
    assert all(name in out for name in bundled_scenarios())
