import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynpanel.core import period_two_contrasts, realize_observed
from dynpanel.dgp import (
    designer_population,
    implied_flags,
    parse_dgp_config,
    reduced_form_residual,
    simulate,
)
from dynpanel.dgp.config import LearningConfig
from dynpanel.dgp.learning import belief_gain, continuation_value, posterior
from dynpanel.errors import ConfigError, HorizonError, SpecError, UnsupportedConfigError
from dynpanel.io import panel_digest

from .helpers import designer_cfg, make_world

REGIME_DOCS = [
    {"regime": "designer", "params": {}},
    {"regime": "linear_dpdm", "horizon": 3, "params": {}},
    {"regime": "learning", "params": {}},
    {"regime": "seq_randomized", "params": {"p2": {"kind": "logistic", "y1": 0.5}}},
]


# config parsing


@pytest.mark.parametrize(
    "doc",
    [
        {"regime": "nope"},
        {"regime": "designer", "schema": 2},
        {"regime": "designer", "extra": 1},
        {"regime": "designer", "params": {"bogus": 1}},
        {"regime": "learning", "horizon": 3},
        {"regime": "linear_dpdm", "params": {"gamma_star": 1.2}},
        {"regime": "linear_dpdm", "params": {"alpha_dist": {"family": "cauchy"}}},
        {"regime": "seq_randomized", "params": {"p2": {"kind": "constant", "value": 1.0}}},
        {"regime": "seq_randomized", "params": {"p1": {"kind": "constant", "value": 0.0}}},
        {"regime": "designer", "params": {"y0_probs": [0.5, 0.5]}},
        {"regime": "designer", "params": {"tau1": {"y1": 1.0}}},
        "not a dict",
    ],
)
def test_invalid_configs_raise_config_error(doc):
    with pytest.raises(ConfigError):
        parse_dgp_config(doc)


def test_nonstationary_override_and_boundary_p2_flag():
    cfg = parse_dgp_config({"regime": "linear_dpdm", "params": {"gamma_star": 1.0, "allow_nonstationary": True}})
    assert cfg.params.gamma_star == 1.0
    cfg = parse_dgp_config(
        {"regime": "seq_randomized", "params": {"p2": {"kind": "constant", "value": 1.0}, "degenerate_p2": True}}
    )
    world = simulate(cfg, 100, 0)
    assert np.all(world.assigned[:, 1] == 1)


def test_config_to_dict_roundtrip():
    for doc in REGIME_DOCS:
        cfg = parse_dgp_config(doc)
        again = parse_dgp_config(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()


# determinism and decomposition


@pytest.mark.parametrize("doc", REGIME_DOCS, ids=lambda d: d["regime"])
def test_same_seed_same_world(doc):
    a, b = make_world(doc, 300, 17), make_world(doc, 300, 17)
    for pa, pb in zip(a.po, b.po):
        assert np.array_equal(pa, pb)
    assert np.array_equal(a.assigned, b.assigned)
    assert panel_digest(realize_observed(a)) == panel_digest(realize_observed(b))
    assert panel_digest(realize_observed(make_world(doc, 300, 18))) != panel_digest(realize_observed(a))


@pytest.mark.parametrize("doc", REGIME_DOCS, ids=lambda d: d["regime"])
def test_decomposition_identity_every_regime(doc):
    world = make_world(doc, 5_000, 2)
    if world.horizon > 2:
        world = world.truncate(2)
    panel = realize_observed(world)
    c = period_two_contrasts(world)
    rows = np.arange(world.n)
    d1, d2 = world.assigned[:, 0], world.assigned[:, 1]
    assert np.array_equal(panel.y[:, 1] - panel.y[:, 0], c.delta1 + d1 * c.tau1)
    assert np.array_equal(panel.y[:, 2] - panel.y[:, 1], c.delta2[rows, d1] + d2 * c.tau2[rows, d1])


# linear dynamic panel


def _linear(params, n=2_000, T=4, seed=1):
    return simulate({"regime": "linear_dpdm", "horizon": T, "params": params}, n, seed)


def test_linear_observed_sequence_follows_reduced_form():
    world = _linear({"selection_rule": {"alpha": 1.0, "y_lag": 0.3, "d_lag": 0.5}, "theta_star": [0.1, 0.2, 0.3, 0.4]})
    assert np.all(reduced_form_residual(world) == 0.0)


def test_linear_closed_form_matches_recursion():
    params = {"beta_star": 0.7, "gamma_star": 0.6, "theta_star": [0.1, -0.2, 0.3, 0.05]}
    world = _linear(params, n=300)
    g, b, th = 0.6, 0.7, params["theta_star"]
    alpha, eps = world.latent["alpha"], world.latent["t_eps"]
    T = 4
    for t in range(1, T + 1):
        for k in range(2**t):
            bits = [(k >> (t - 1 - r)) & 1 for r in range(t)]
            for s in range(1, t + 1):
                start = world.y0 if s == 1 else world.po[s - 2][:, k >> (t - s + 1)]
                acc = g ** (t - s + 1) * start
                for r in range(s, t + 1):
                    nu = alpha + eps[:, r - 1, bits[r - 1]]
                    acc = acc + g ** (t - r) * (b * bits[r - 1] + th[r - 1] + nu)
                # each recursion step rounds onto the 2**-32 lattice
                assert np.max(np.abs(acc - world.po[t - 1][:, k])) <= (t - s + 1) * 2.0**-32


def test_linear_zero_effect_world_is_path_free():
    world = _linear({"beta_star": 0.0, "eps_dist": {"sd": [0.0, 0.0]}}, n=50)
    for t in range(1, 5):
        assert np.all(world.po[t - 1] == world.po[t - 1][:, :1])


def test_linear_tau2_is_beta_plus_eps_gap():
    world = _linear({"beta_star": 1.0}, n=200_000, T=2, seed=5)
    c = period_two_contrasts(world)
    eps = world.latent["t_eps"]
    gap = 1.0 + eps[:, 1, 1] - eps[:, 1, 0]
    for d1 in (0, 1):
        assert np.max(np.abs(c.tau2[:, d1] - gap)) <= 2.0**-31
    # sd of tau2 is sqrt(2): the mean is within a few standard errors of beta
    assert abs(c.tau2.mean() - 1.0) < 4 * np.sqrt(2 / 200_000)


def test_linear_needs_two_periods():
    with pytest.raises(HorizonError):
        _linear({}, T=1)


# learning


def test_posterior_matches_gaussian_conditioning(rng):
    cov = np.array([[1.0, 0.4], [0.4, 2.0]])
    eps_sd = 0.7
    mu1 = rng.normal(size=(6, 2))
    d1 = np.array([0, 1, 0, 1, 1, 0])
    signal = rng.normal(size=6)
    got = posterior(mu1, cov, eps_sd, d1, signal)
    for i in range(6):
        # joint of (alpha, signal) is Gaussian; condition directly
        a = d1[i]
        s_var = cov[a, a] + eps_sd**2
        want = mu1[i] + cov[:, a] / s_var * (signal[i] - mu1[i, a])
        assert np.allclose(got[i], want, rtol=0, atol=1e-14)
    gain, v = belief_gain(cov, 0.0, 1)
    assert np.allclose(gain, [0.2, 1.0]) and v == 2.0


def test_continuation_value_matches_monte_carlo():
    cfg = LearningConfig()
    mu1 = np.array([[0.1, -0.3], [0.0, 0.5]])
    fam = cfg.outcome
    draws = np.random.default_rng(0).standard_normal(400_000)
    for d1 in (0, 1):
        got = continuation_value(mu1, cfg, d1)
        gain, v = belief_gain(cfg.prior_cov, fam.eps_sd, d1)
        for i in range(2):
            # the innovation in the signal is N(0, v); the posterior mean moves along the gain
            mu2 = mu1[i][None, :] + np.outer(np.sqrt(v) * draws, gain)
            gap = fam.a - cfg.cost + mu2[:, 1] - mu2[:, 0]
            mc = np.mean(mu2[:, 0] + np.logaddexp(0.0, gap))
            assert abs(got[i] - mc) < 5e-3


def test_learning_propensities_interior_and_huge_scale_is_coin_flip():
    world = make_world({"regime": "learning", "params": {}}, 2_000, 3)
    e = world.latent["t_propensity"]
    assert np.all((e > 0) & (e < 1))
    world = make_world({"regime": "learning", "params": {"eta_spec": {"scale": 1e6}}}, 2_000, 3)
    assert np.allclose(world.latent["t_propensity"], 0.5, atol=1e-4)


def test_learning_rejects_nonconjugate_beliefs():
    with pytest.raises(UnsupportedConfigError):
        make_world({"regime": "learning", "params": {"belief": "student-t"}}, 10)


# sequential randomization


def test_seqrand_fair_coins():
    doc = {"regime": "seq_randomized", "params": {"p1": {"value": 0.5}, "p2": {"value": 0.5}}}
    world = make_world(doc, 20_000, 4)
    assert np.all(world.latent["t_propensity"] == 0.5)
    assert abs(world.assigned.mean() - 0.5) < 0.02


def test_seqrand_custom_family_is_used():
    from dynpanel.dgp import OutcomeFamily, SeqRandConfig
    from dynpanel.dgp.seqrand import simulate_seq_randomized

    fam = OutcomeFamily(a=0.0, b=0.0, alpha_cov=[[0.0, 0.0], [0.0, 0.0]], eps_sd=0.0)
    world = simulate_seq_randomized(SeqRandConfig(), 100, 0, po_family=fam)
    assert np.all(world.po[1] == 0.0)


# designer


def test_designer_flags_are_implied_and_checked():
    cfg = designer_cfg()
    assert implied_flags(cfg.params) == {
        "se": True, "invar_trend_1": True, "invar_trend_2": True, "invar_te_1": True, "invar_te_2": True,
    }
    with pytest.raises(SpecError, match="invar_te_1"):
        simulate(designer_cfg(tau1={"const": 0.0}, flags={"invar_te_1": True}), 10, 0)
    with pytest.raises(SpecError):
        simulate(designer_cfg(e1={"d1": 1.0}), 10, 0)
    with pytest.raises(SpecError, match="unknown"):
        simulate(designer_cfg(flags={"made_up": True}), 10, 0)
    off = designer_cfg(tau2=[{"const": 2.0, "y1": 0.5}, {"const": 3.0}], delta1={"const": 0.5, "y0": 0.2})
    flags = implied_flags(off.params)
    assert not flags["invar_te_2"] and not flags["invar_trend_1"]


def test_designer_ate_over_d1_closed_form():
    # tau2(d1) = 1 + d1 and Pr{D1 = 1} = 0.3 give E[tau2(D1)] = 1.3
    cfg = designer_cfg(tau2=[{"const": 1.0}, {"const": 2.0}], tau2_noise_sd=0.0, e1={"prob": 0.3})
    assert designer_population(cfg.params).ate_tau2_over_D1 == pytest.approx(1.3, abs=1e-12)
    world = simulate(cfg, 100_000, 1)
    c = period_two_contrasts(world)
    realized = c.tau2[np.arange(world.n), world.assigned[:, 0]]
    assert np.array_equal(realized, 1.0 + world.assigned[:, 0])


def test_designer_population_matches_large_world(hetero_cfg):
    from dynpanel.oracles import causal_targets

    pop = designer_population(hetero_cfg.params)
    t = causal_targets(simulate(hetero_cfg, 400_000, 8))
    assert t.convex_aggregate == pytest.approx(pop.convex_aggregate, abs=0.01)
    assert t.ate_tau2_over_D1 == pytest.approx(pop.ate_tau2_over_D1, abs=0.01)
    assert t.plim_2sls == pytest.approx(pop.plim_te_term + pop.plim_trend_term, abs=0.03)


@st.composite
def designer_specs(draw):
    coef = st.sampled_from([-1.0, -0.5, 0.0, 0.25, 0.5, 1.0])
    lin = st.fixed_dictionaries({"const": coef, "y0": coef, "u": coef})
    lin2 = st.fixed_dictionaries({"const": coef, "y0": coef, "u": coef, "y1": coef})
    logit = st.fixed_dictionaries({"const": coef, "y0": coef, "u": coef})
    logit2 = st.fixed_dictionaries({"const": coef, "y0": coef, "d1": coef, "y1": coef})
    return {
        "delta1": draw(lin),
        "delta1_support": draw(st.sampled_from([[0.0], [-0.5, 0.5], [-0.25, 0.0, 0.75]])),
        "tau1": draw(lin),
        "delta2": [draw(lin2), draw(lin2)],
        "tau2": [draw(lin2), draw(lin2)],
        "delta2_noise_sd": draw(st.sampled_from([0.0, 0.3, 1.0])),
        "tau2_noise_sd": draw(st.sampled_from([0.0, 0.7])),
        "e1": draw(logit),
        "e2": draw(logit2),
        "u_prob": draw(st.sampled_from([0.0, 0.3, 0.5])),
    }


@given(designer_specs(), st.integers(0, 2**32 - 1))
def test_designer_decomposition_identity_property(params, seed):
    world = simulate({"regime": "designer", "params": params}, 500, seed)
    panel = realize_observed(world)
    c = period_two_contrasts(world)
    rows = np.arange(world.n)
    d1, d2 = world.assigned[:, 0], world.assigned[:, 1]
    assert np.array_equal(panel.y[:, 1] - panel.y[:, 0], c.delta1 + d1 * c.tau1)
    assert np.array_equal(panel.y[:, 2] - panel.y[:, 1], c.delta2[rows, d1] + d2 * c.tau2[rows, d1])
