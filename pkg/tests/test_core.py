import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynpanel.core import (
    EstimatorReport,
    ObservedPanel,
    PotentialOutcomeWorld,
    TreatmentPath,
    first_difference,
    on_lattice,
    path_indices,
    period_two_contrasts,
    realize_observed,
    to_lattice,
)
from dynpanel.errors import HorizonError, MalformedWorldError


def _world(y0, y1, y2, assigned):
    return PotentialOutcomeWorld(y0=y0, po=(y1, y2), assigned=assigned)


def test_zero_world_realizes_zero_panel():
    n = 5
    w = _world(np.zeros(n), np.zeros((n, 2)), np.zeros((n, 4)), np.ones((n, 2)))
    panel = realize_observed(w)
    assert np.all(panel.y == 0)
    assert np.array_equal(panel.d, w.assigned)


def test_realized_outcomes_follow_assigned_path():
    y1 = np.array([[10.0, 11.0]])
    y2 = np.array([[20.0, 21.0, 22.0, 23.0]])
    w = _world(np.array([1.0]), y1, y2, np.array([[1, 0]]))
    panel = realize_observed(w)
    assert panel.y[0, 1] == 11.0  # Y1(1)
    assert panel.y[0, 2] == 22.0  # Y2(1, 0)


def test_first_difference_arithmetic():
    panel = ObservedPanel(y=np.array([[1.0, 3.0, 2.0]]), d=np.array([[1, 1]]))
    fd = first_difference(panel)
    assert fd.dy.tolist() == [[2.0, -1.0]]
    assert fd.dd.tolist() == [[0.0]]


def test_first_difference_constant_series_and_horizon_error():
    panel = ObservedPanel(y=np.full((3, 4), 2.5), d=np.zeros((3, 3), dtype=int))
    assert np.all(first_difference(panel).dy == 0)
    with pytest.raises(HorizonError):
        first_difference(ObservedPanel(y=np.zeros((2, 2)), d=np.zeros((2, 1))))


@given(st.lists(st.integers(0, 1), min_size=1, max_size=12))
def test_path_index_roundtrip(bits):
    p = TreatmentPath(tuple(bits))
    assert TreatmentPath.from_index(p.index, p.horizon) == p
    assert TreatmentPath.from_key(p.key) == p
    for t in range(1, len(bits)):
        # the prefix index is the path index shifted right
        assert p.prefix(t).index == p.index >> (len(bits) - t)


@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_path_indices_match_treatment_path(T, seed):
    d = np.random.default_rng(seed).integers(0, 2, size=(7, T))
    got = path_indices(d, T)
    want = [TreatmentPath(tuple(row)).index for row in d]
    assert got.tolist() == want


def test_world_outcome_prefix_consistency():
    rng = np.random.default_rng(0)
    n = 4
    w = _world(rng.normal(size=n), rng.normal(size=(n, 2)), rng.normal(size=(n, 4)), np.zeros((n, 2)))
    assert np.array_equal(w.outcome((1,)), w.po[0][:, 1])
    assert np.array_equal(w.outcome((1, 0)), w.po[1][:, 2])
    assert np.array_equal(w.outcome(()), w.y0)
    with pytest.raises(HorizonError):
        w.outcome((0, 0, 0))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(po=(np.zeros((3, 2)), np.zeros((3, 3)))),
        dict(po=(np.zeros((3, 2)), np.full((3, 4), np.nan))),
        dict(assigned=np.full((3, 2), 2)),
        dict(assigned=np.zeros((3, 1))),
    ],
)
def test_malformed_worlds_rejected(kwargs):
    base = dict(y0=np.zeros(3), po=(np.zeros((3, 2)), np.zeros((3, 4))), assigned=np.zeros((3, 2)))
    base.update(kwargs)
    with pytest.raises(MalformedWorldError):
        PotentialOutcomeWorld(**base)


def test_world_arrays_are_read_only(hetero_world):
    with pytest.raises(ValueError):
        hetero_world.po[0][0, 0] = 1.0


def test_truncate_slices_per_period_latents():
    from dynpanel.dgp import simulate

    w = simulate({"regime": "linear_dpdm", "horizon": 4, "params": {}}, 50, 3)
    w2 = w.truncate(2)
    assert w2.horizon == 2
    assert w2.latent["t_eps"].shape == (50, 2, 2)
    assert np.array_equal(w2.latent["alpha"], w.latent["alpha"])
    assert np.array_equal(realize_observed(w2).y, realize_observed(w).y[:, :3])
    with pytest.raises(HorizonError):
        w.truncate(5)


@given(st.lists(st.floats(-1e5, 1e5, allow_nan=False), min_size=1, max_size=20))
def test_lattice_sums_are_exact(xs):
    a = to_lattice(np.asarray(xs))
    assert on_lattice(a)
    b = to_lattice(a[::-1] * 0.37)
    # sums and differences of lattice points land on the lattice with no rounding
    assert on_lattice(a + b) and on_lattice(a - b)
    assert np.array_equal((a + b) - b, a)


def test_period_two_contrasts_reconstruct_outcomes(hetero_world):
    c = period_two_contrasts(hetero_world)
    y1, y2 = hetero_world.po
    assert np.array_equal(hetero_world.y0 + c.delta1, y1[:, 0])
    assert np.array_equal(y1[:, 0] + c.tau1, y1[:, 1])
    for d1 in (0, 1):
        assert np.array_equal(y1[:, d1] + c.delta2[:, d1], y2[:, 2 * d1])
        assert np.array_equal(y2[:, 2 * d1] + c.tau2[:, d1], y2[:, 2 * d1 + 1])


def test_estimator_report_json_drops_nonfinite():
    r = EstimatorReport(beta_hat=1.5, gamma_hat=float("nan"), weight_diag={"min": 0.0}, extra={"cells": 6})
    doc = r.to_json()
    assert doc["beta_hat"] == 1.5 and doc["gamma_hat"] is None and doc["mu_tau2_hat"] is None
    assert doc["diagnostics"] == {"weights": {"min": 0.0}, "cells": 6}
    assert not r.is_finite()


def test_panel_validation():
    with pytest.raises(MalformedWorldError):
        ObservedPanel(y=np.zeros((2, 3)), d=np.zeros((2, 3)))
    with pytest.raises(MalformedWorldError):
        ObservedPanel(y=np.array([[0.0, np.nan, 1.0]]), d=np.zeros((1, 2)))
    with pytest.raises(MalformedWorldError):
        ObservedPanel(y=np.zeros((1, 3)), d=np.array([[0, 3]]))
