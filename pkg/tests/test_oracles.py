import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynpanel.core import realize_observed
from dynpanel.dgp import designer_population, simulate
from dynpanel.errors import ConfigError, HorizonError, NotApplicableError
from dynpanel.estimators import cell_codes, fwl_beta
from dynpanel.harness import load_experiment_config
from dynpanel.oracles import (
    HOLDS,
    VIOLATED,
    CheckConfig,
    causal_targets,
    check_ab_moments,
    check_full_se_period_one,
    check_parallel_trends,
    check_sequential_exchangeability,
    check_trend_equivalence,
    convex_weights,
    designer_targets,
    group_contrasts,
)

from .helpers import designer_cfg


def _scenario_world(name, n, seed=0, **dgp_overrides):
    dgp = load_experiment_config(name).dgp
    doc = dgp.to_dict()
    doc["params"].update(dgp_overrides)
    return simulate(doc, n, seed)


def _linear_world(n, seed=0, T=4, **params):
    return simulate({"regime": "linear_dpdm", "horizon": T, "params": params}, n, seed)


# targets


def test_plim_terms_add_up_to_fwl_slope(hetero_world):
    t = causal_targets(hetero_world)
    beta, _ = fwl_beta(realize_observed(hetero_world))
    assert t.plim_2sls == pytest.approx(beta, rel=1e-10)


def test_sample_targets_approach_population_targets(hetero_cfg):
    t = causal_targets(simulate(hetero_cfg, 300_000, 1))
    pop = designer_targets(hetero_cfg.params)
    assert t.ate_tau2_over_D1 == pytest.approx(pop.ate_tau2_over_D1, abs=0.02)
    assert t.convex_aggregate == pytest.approx(pop.convex_aggregate, abs=0.02)
    assert t.plim_te_term == pytest.approx(pop.plim_te_term, abs=0.05)
    for a, b in zip(t.trend_means, pop.trend_means):
        assert a == pytest.approx(b, abs=0.02)


def test_convex_weights_use_recorded_propensities(hetero_cfg):
    world = simulate(hetero_cfg, 200_000, 2)
    w = convex_weights(world)
    pop = designer_population(hetero_cfg.params).cell_weights
    codes, keys = cell_codes(world.y0, world.assigned[:, 0])
    for g, (y0, d1) in enumerate(keys):
        assert w[codes == g][0] == pytest.approx(pop[(y0, int(d1))], abs=0.01)


def test_targets_need_two_periods():
    with pytest.raises(HorizonError):
        causal_targets(_linear_world(100))
    with pytest.raises(HorizonError):
        check_parallel_trends(_linear_world(100))


# group contrasts against ordinary least squares


def _ols_contrast(y, t, x=None):
    cols = [np.ones_like(y), t.astype(float)] + ([x] if x is not None else [])
    X = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    if x is None:
        # unequal-variance standard error of a difference in means
        a, b = y[t == 1], y[t == 0]
        return coef[1], np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size)
    resid = y - X @ coef
    s2 = resid @ resid / (len(y) - X.shape[1])
    cov = s2 * np.linalg.inv(X.T @ X)
    return coef[1], np.sqrt(cov[1, 1])


@given(st.integers(0, 2**32 - 1), st.booleans())
def test_group_contrasts_match_per_group_ols(seed, with_x):
    rng = np.random.default_rng(seed)
    n = 120
    groups = rng.integers(0, 3, n)
    t = rng.integers(0, 2, n)
    x = rng.normal(size=n) + t
    y = 0.5 * groups + t + 0.7 * x + rng.normal(size=n)
    n1, n0, c, se, ok = group_contrasts(y, t, groups, 5, x if with_x else None)
    for g in range(3):
        sel = groups == g
        if not ok[g]:
            continue
        want_c, want_se = _ols_contrast(y[sel], t[sel], x[sel] if with_x else None)
        assert c[g] == pytest.approx(want_c, rel=1e-9, abs=1e-12)
        assert se[g] == pytest.approx(want_se, rel=1e-9)
        assert n1[g] == t[sel].sum() and n0[g] == (1 - t[sel]).sum()


# verdicts


def test_observable_selection_keeps_exchangeability(hetero_world):
    v = check_sequential_exchangeability(hetero_world)
    assert v.verdict == HOLDS
    assert set(v.detail["clause_max_z"]) == {"mse1", "mse2", "mse3"}
    doc = json.loads(json.dumps(v.to_json()))
    assert doc["verdict"] == HOLDS and doc["evaluated_cells"] > 0


def test_selection_on_unobservable_violates_both_forms():
    world = simulate(designer_cfg(e1={"y0": 0.8, "u": 2.0}), 50_000, 3)
    assert check_sequential_exchangeability(world).verdict == VIOLATED
    assert check_full_se_period_one(world).verdict == VIOLATED


def test_learning_without_conditional_independence_breaks_period_one():
    world = _scenario_world("learning_ci_off", 100_000, 4)
    v = check_sequential_exchangeability(world)
    assert v.verdict == VIOLATED
    assert v.detail["clause_max_z"]["mse1"] > 5


def test_learning_defaults_hold_se_but_not_parallel_trends():
    world = _scenario_world("se_vs_pt", 1_000_000, 5)
    assert check_sequential_exchangeability(world).verdict == HOLDS
    assert check_parallel_trends(world).verdict == VIOLATED


def test_nonlinear_seqrand_violates_parallel_trends():
    world = _scenario_world("seqrand_nonlinear", 1_000_000, 6)
    assert check_sequential_exchangeability(world).verdict == HOLDS
    pt = check_parallel_trends(world)
    assert pt.verdict == VIOLATED and pt.max_z > pt.k


def test_constant_second_propensity_keeps_parallel_trends():
    world = _scenario_world("seqrand_degenerate", 100_000, 7)
    assert check_parallel_trends(world).verdict == HOLDS


@pytest.mark.parametrize("name", ["se_vs_pt", "learning_ci_off", "seqrand_nonlinear"])
def test_levels_and_trends_agree(name):
    v = check_trend_equivalence(_scenario_world(name, 50_000, 8))
    assert v.detail["agree"]
    assert v.detail["identity_gap"] <= 1e-12


def test_conditioning_on_alpha_needs_alpha(hetero_world):
    with pytest.raises(NotApplicableError):
        check_sequential_exchangeability(hetero_world, CheckConfig(condition_on_alpha=True))
    with pytest.raises(ConfigError):
        check_sequential_exchangeability(hetero_world, form="ratios")


def test_alpha_conditioning_restores_exchangeability_in_linear_model():
    sel = {"intercept": -0.2, "y_lag": 0.3, "d_lag": 0.5, "alpha": 1.0}
    world = _linear_world(50_000, 9, selection_rule=sel).truncate(2)
    assert check_sequential_exchangeability(world).verdict == VIOLATED
    assert check_sequential_exchangeability(world, CheckConfig(condition_on_alpha=True)).verdict == HOLDS


def test_ab_moments():
    assert check_ab_moments(_linear_world(20_000, 10)).verdict == HOLDS
    bad = check_ab_moments(_linear_world(20_000, 10, eps_dist={"sd": [1.0, 1.0], "rho": 0.6}))
    assert bad.verdict == VIOLATED and bad.detail["worst_moment"].startswith("E[eps")
    with pytest.raises(NotApplicableError):
        check_ab_moments(simulate(designer_cfg(), 100, 0))


def test_check_config_validation():
    assert CheckConfig.from_dict({"k": 3}).k == 3
    with pytest.raises(ConfigError):
        CheckConfig.from_dict({"kappa": 3})
    with pytest.raises(ConfigError):
        CheckConfig.from_dict({"min_count": 1})
    assert CheckConfig.from_dict(CheckConfig().to_dict()) == CheckConfig()
