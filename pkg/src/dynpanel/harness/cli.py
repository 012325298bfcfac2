"""``dynpanel`` command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical or degeneracy
error, 4 acceptance-scenario failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .. import __version__
from ..core import realize_observed
from ..dgp import parse_dgp_config, simulate
from ..errors import AcceptanceFailure, ConfigError, DynPanelError
from ..estimators.api import ESTIMATORS, make_estimator
from ..io import dumps_pretty, load_json, panel_from_csv, panel_to_csv, world_from_json, world_to_json
from ..oracles.checks import CheckConfig
from ..rng import SIMULATE_STREAM, stream
from .config import CHECKS, bundled_scenarios, load_experiment_config, resolve_config_path
from .experiment import cells_to_csv, run_check, run_experiment


def _u64(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _emit(text, out_dir, filename):
    if out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / filename).write_text(text)
    print(out / filename, file=sys.stderr)


def _dgp_doc(doc):
    """A DGP document, or the ``dgp`` section of an experiment config."""
    if "regime" in doc:
        return doc, None
    if "dgp" in doc:
        return doc["dgp"], doc.get("n_units")
    raise ConfigError("config has neither a 'regime' nor a 'dgp' section")


def cmd_simulate(args):
    dgp, n_default = _dgp_doc(load_json(resolve_config_path(args.config)))
    n = args.n or n_default or 10_000
    world = simulate(parse_dgp_config(dgp), n, stream(args.seed, SIMULATE_STREAM, 0))
    if args.format == "json":
        _emit(dumps_pretty(world_to_json(world)), args.out, "world.json")
    else:
        _emit(panel_to_csv(realize_observed(world)), args.out, "panel.csv")
    return 0


def _estimator_from(args):
    doc = load_json(args.config) if args.config else {}
    name = args.estimator or doc.get("estimator")
    if name is None:
        raise ConfigError(f"choose an estimator with --estimator or the config key 'estimator' ({sorted(ESTIMATORS)})")
    extra = set(doc) - {"estimator", "params"}
    if extra:
        raise ConfigError(f"estimator config: unknown keys {sorted(extra)}")
    return name, make_estimator(name, **doc.get("params", {}))


def cmd_estimate(args):
    name, est = _estimator_from(args)
    panel = panel_from_csv(args.panel)
    est.fit(panel)
    report = est.report_.to_json()
    report["estimator"] = name
    if args.format == "csv":
        keys = ("estimator", "beta_hat", "gamma_hat", "mu_tau2_hat")
        text = ",".join(keys) + "\n" + ",".join("" if report[k] is None else str(report[k]) for k in keys) + "\n"
        _emit(text, args.out, "estimate.csv")
    else:
        _emit(dumps_pretty(report), args.out, "estimate.json")
    return 0


def cmd_check(args):
    doc = load_json(args.config) if args.config else {}
    extra = set(doc) - {"checks", "check_config"}
    if extra:
        raise ConfigError(f"check config: unknown keys {sorted(extra)}")
    names = tuple(args.checks or doc.get("checks") or ("se", "trend_equivalence", "pt", "full_se"))
    unknown = set(names) - set(CHECKS)
    if unknown:
        raise ConfigError(f"unknown checks {sorted(unknown)}; expected some of {CHECKS}")
    world = world_from_json(load_json(args.world))

    class _Cfg:  # run_check only reads check_config
        check_config = CheckConfig.from_dict(doc.get("check_config"))

    verdicts = {name: run_check(name, world, _Cfg) for name in names}
    cells = [dict(c, check=name) for name, v in verdicts.items() for c in v.cells]
    if args.format == "csv":
        _emit(cells_to_csv(cells), args.out, "check_cells.csv")
    else:
        _emit(dumps_pretty({name: v.to_json() for name, v in verdicts.items()}), args.out, "verdicts.json")
        if args.out is not None:
            _emit(cells_to_csv(cells), args.out, "check_cells.csv")
    return 0


def _jobs(args):
    if args.jobs is not None:
        return args.jobs
    env = os.environ.get("DYNPANEL_JOBS")
    if env:
        try:
            return _positive(env)
        except argparse.ArgumentTypeError as exc:
            raise ConfigError(f"DYNPANEL_JOBS: {exc}") from None
    return 1


def cmd_experiment(args):
    cfg = load_experiment_config(args.config).with_overrides(
        seed=args.seed, replications=args.replications, n_units=args.n_units, oracle_n=args.oracle_n,
        output_dir=args.out,
    )
    jobs = _jobs(args)
    report = run_experiment(cfg, jobs=jobs)
    out = report.write(cfg.output_dir, jobs=jobs)
    if args.format == "csv":
        sys.stdout.write(report.rows_csv())
    else:
        _print_summary(report, out)
    if not report.passed:
        raise AcceptanceFailure(
            "scenario expectations not met: "
            + "; ".join(f"{m['item']} expected {m['expected']}, got {m['got']}"
                        for m in report.doc["acceptance"]["mismatches"])
        )
    return 0


def _print_summary(report, out):
    print(f"scenario {report.doc['name']}  digest {report.doc['config_digest'][:12]}  -> {out}")
    for name, c in report.doc["checks"].items():
        print(f"  check {name:<24} {c['verdict']:<20} max|z| {c['max_z']}")
    for r in report.rows:
        bias = r.get("bias")
        bias = "n/a" if bias is None else f"{bias:+.4f}"
        status = {True: "pass", False: "fail", None: "-"}[r.get("passes")]
        print(f"  row {r['name']:<22} target {str(r['target']):<18} bias {bias:<9} {status}"
              + (f"  failures {r['failures']}" if r["failures"] else ""))


def cmd_scenarios(args):
    for name in bundled_scenarios():
        cfg = load_experiment_config(name)
        print(f"{name:<22} {cfg.description}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=None, help="unsigned 64-bit seed")
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--jobs", type=_positive, default=None, help="worker count (default: $DYNPANEL_JOBS or 1)")

    p = argparse.ArgumentParser(prog="dynpanel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="draw a world and write its panel (csv) or world (json)")
    s.add_argument("--config", required=True, help="DGP config, experiment config or bundled scenario name")
    s.add_argument("--n", type=_positive, default=None, help="number of units")
    s.set_defaults(func=cmd_simulate, default_format="csv")

    e = sub.add_parser("estimate", parents=[common], help="fit an estimator to a panel CSV")
    e.add_argument("panel", help="panel CSV with header unit,t,y,d")
    e.add_argument("--config", default=None, help='JSON {"estimator": ..., "params": {...}}')
    e.add_argument("--estimator", choices=sorted(ESTIMATORS), default=None)
    e.set_defaults(func=cmd_estimate, default_format="json")

    c = sub.add_parser("check", parents=[common], help="run assumption checks on a world JSON")
    c.add_argument("world", help="world JSON written by 'simulate --format json'")
    c.add_argument("--config", default=None, help='JSON {"checks": [...], "check_config": {...}}')
    c.add_argument("--checks", nargs="+", choices=CHECKS, default=None)
    c.set_defaults(func=cmd_check, default_format="json")

    x = sub.add_parser("experiment", parents=[common], help="run a Monte Carlo experiment")
    x.add_argument("--config", required=True, help="experiment config path or bundled scenario name")
    x.add_argument("--replications", type=_positive, default=None)
    x.add_argument("--n-units", type=_positive, default=None)
    x.add_argument("--oracle-n", type=_positive, default=None)
    x.set_defaults(func=cmd_experiment, default_format="json")

    sc = sub.add_parser("scenarios", help="list bundled scenarios")
    sc.set_defaults(func=cmd_scenarios, default_format="json")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "format", None) is None:
        args.format = args.default_format
    if getattr(args, "seed", None) is None and args.command != "experiment":
        args.seed = 0
    try:
        return args.func(args)
    except DynPanelError as exc:
        print(f"dynpanel: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except json.JSONDecodeError as exc:
        print(f"dynpanel: invalid JSON: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
