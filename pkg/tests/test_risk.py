from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialrisk.correlation import CorrelationFunction
from spatialrisk.geometry import Disk, Square, scale_region
from spatialrisk.models import TEG, ExtremalGaussian, InvertedMaxStable, MaxMixture, MaxStable, Smith
from spatialrisk.quadrature import adaptive_gk
from spatialrisk.risk import (
    DamageSpec,
    RiskEstimate,
    axiom_suite,
    damage_mean,
    damage_variance,
    grid_variance,
    q_cov,
    q_teg_closed,
    risk_r1,
    risk_scaled,
    teg_moment_integrand,
)
from spatialrisk.simulation import SimulationConfig, mc_risk, realized_model

from conftest import EXP_02
from oracles import FRECHET_POWER_VARIANCE, GAMMA_06, GAMMA_08

TEG_MODEL = MaxStable(TEG(EXP_02, 0.25))
MM1 = MaxMixture(0.5, TEG(EXP_02, 0.25), TEG(CorrelationFunction("exponential", 0.4), 0.45))
MM2 = MaxMixture(0.5, TEG(EXP_02, 0.25), Smith(0.8))


def test_damage_mean():
    assert damage_mean(1e-12) == pytest.approx(1.0, abs=1e-11)
    assert damage_mean(0.2) == pytest.approx(GAMMA_08, rel=1e-12)
    assert damage_mean(0.4) == pytest.approx(GAMMA_06, rel=1e-12)
    assert damage_mean(DamageSpec(0.2)) == damage_mean(0.2)


@pytest.mark.parametrize("nu", [0.0, 0.5, -0.1, 0.7])
def test_damage_spec_domain(nu):
    with pytest.raises(ValueError):
        DamageSpec(nu)
    with pytest.raises(ValueError):
        damage_mean(nu)


def test_risk_estimate_route_checked():
    with pytest.raises(ValueError):
        RiskEstimate(0.0, 0.0, "guess")


@pytest.mark.parametrize("nu", [0.1, 0.2, 0.3])
def test_q_at_zero_is_power_variance(nu):
    assert damage_variance(nu) == pytest.approx(FRECHET_POWER_VARIANCE[nu], abs=1e-12)
    for model in (TEG_MODEL, MaxStable(Smith(0.6)), InvertedMaxStable(Smith(0.6)), MM2):
        res = q_cov(model, 0.0, nu)
        assert res.value == pytest.approx(FRECHET_POWER_VARIANCE[nu], abs=1e-6)
    assert q_teg_closed(EXP_02, 0.25, 0.0, nu).value == pytest.approx(FRECHET_POWER_VARIANCE[nu], abs=1e-12)


def test_q_vanishes_for_independent_pairs():
    h = np.array([0.5, 0.6, 2.0])
    assert np.all(q_cov(TEG_MODEL, h, 0.2).value == 0.0)
    assert np.all(q_teg_closed(EXP_02, 0.25, h, 0.2).value == 0.0)
    smith = MaxMixture(1.0, Smith(1.0), Smith(1.0))
    assert abs(q_cov(smith, 1e6, 0.2).value) <= 1e-8


def test_closed_form_halves_are_exchangeable():
    for h in (0.05, 0.25, 0.45):
        for nu in (0.1, 0.3):
            def f(t):
                w = np.exp(t)
                return teg_moment_integrand(w, h, EXP_02, 0.25, nu) * w

            below = adaptive_gk(f, -80.0, 0.0, 1e-13, 1e-12).value
            above = adaptive_gk(f, 0.0, 80.0, 1e-13, 1e-12).value
            assert below == pytest.approx(above, abs=1e-8)


@pytest.mark.parametrize("overlap", ["tent", "disk"])
def test_closed_form_equals_hoeffding_on_grid(overlap):
    h = np.linspace(0.01, 0.6, 5)
    for theta in np.linspace(0.05, 0.5, 5):
        corr = CorrelationFunction("exponential", theta)
        model = MaxStable(TEG(corr, 0.25, overlap))
        for nu in (0.05, 0.2, 0.4):
            a = q_cov(model, h, nu)
            b = q_teg_closed(corr, 0.25, h, nu, overlap=overlap)
            assert np.all(np.abs(a.value - b.value) <= a.error + b.error)
            live = b.value > 0
            np.testing.assert_allclose(a.value[live], b.value[live], rtol=1e-4)


@pytest.mark.parametrize("family", ["exponential", "gaussian", "spherical", "matern"])
def test_closed_form_other_correlations(family):
    corr = CorrelationFunction(family, 0.3, kappa=1.5)
    h = np.array([0.02, 0.15, 0.35])
    a = q_cov(MaxStable(TEG(corr, 0.3)), h, 0.25)
    b = q_teg_closed(corr, 0.3, h, 0.25)
    np.testing.assert_allclose(a.value, b.value, rtol=1e-4)


@pytest.mark.parametrize("model", [TEG_MODEL, MaxStable(Smith(0.6)), MaxStable(ExtremalGaussian(EXP_02)), MM1, MM2],
                         ids=["teg", "smith", "eg", "mm1", "mm2"])
def test_q_nonnegative_nonincreasing_in_h_increasing_in_nu(model):
    h = np.linspace(0.0, 1.2, 25)
    prev = None
    for nu in (0.05, 0.1, 0.2, 0.3, 0.4):
        res = q_cov(model, h, nu)
        assert np.all(res.value >= -res.error)
        assert np.all(np.diff(res.value) <= res.error[1:] + res.error[:-1])
        if prev is not None:
            live = res.value > 1e-12
            assert np.all(res.value[live] > prev[live])
        prev = res.value


def test_risk_of_independent_model_is_zero():
    assert risk_r1(MaxStable(TEG(EXP_02, 1e-12)), Square(1.0), 0.2).value < 1e-12


@pytest.mark.parametrize("region", [Square(1.0), Disk(0.6)], ids=["square", "disk"])
def test_routes_agree_for_teg(region):
    a = risk_r1(TEG_MODEL, region, 0.2, route="closed_form_1d")
    b = risk_r1(TEG_MODEL, region, 0.2, route="hoeffding_3d")
    assert a.route == "closed_form_1d" and b.route == "hoeffding_3d"
    assert a.value == pytest.approx(b.value, rel=1e-4)
    assert abs(a.value - b.value) <= a.error_bound + b.error_bound


def test_route_selection():
    assert risk_r1(TEG_MODEL, Square(1.0), 0.2).route == "closed_form_1d"
    assert risk_r1(MM2, Square(1.0), 0.2).route == "hoeffding_3d"
    with pytest.raises(ValueError):
        risk_r1(MM2, Square(1.0), 0.2, route="closed_form_1d")
    with pytest.raises(ValueError):
        risk_r1(MM2, Square(1.0), 0.2, route="monte_carlo")


def test_risk_scaled_identity_and_change_of_variables():
    for model in (TEG_MODEL, MM2):
        base = risk_r1(model, Square(1.0), 0.2)
        assert risk_scaled(model, Square(1.0), 1.0, 0.2).value == pytest.approx(base.value, rel=1e-12)
        for lam in (0.5, 2.0, 4.0):
            a = risk_scaled(model, Square(1.0), lam, 0.2)
            b = risk_r1(model, scale_region(Square(1.0), lam), 0.2)
            assert abs(a.value - b.value) <= a.error_bound + b.error_bound


@pytest.mark.parametrize("model", [TEG_MODEL, MM1], ids=["teg", "mm1"])
def test_risk_nonincreasing_in_lambda(model):
    vals = [risk_scaled(model, Disk(0.5), lam, 0.2) for lam in (0.1, 0.3, 0.6, 1.0, 2.0, 5.0)]
    for a, b in zip(vals, vals[1:]):
        assert b.value <= a.value + a.error_bound + b.error_bound


def test_mm1_knee_near_twice_radius():
    # R1 stays high while the scaled region is small against 2 r_X = 0.5
    lam = np.array([0.1, 0.3, 1.0, 5.0])
    vals = np.array([risk_scaled(MM1, Square(1.0), x, 0.2).value for x in lam])
    assert vals[0] > 0.5 * damage_variance(0.2)
    assert vals[1] > 0.5 * vals[0]
    assert vals[3] < 0.05 * vals[0]


def test_grid_variance_approaches_continuum():
    exact = risk_r1(TEG_MODEL, Square(1.0), 0.2).value
    errs = [abs(grid_variance(TEG_MODEL, n, 1.0, 0.2) - exact) for n in (10, 20, 40)]
    assert errs[2] < errs[0]
    assert errs[2] < 1e-3 * exact


@pytest.mark.slow
def test_teg_risk_matches_monte_carlo():
    reference = risk_r1(realized_model(TEG_MODEL), Square(1.0), 0.2).value
    est = mc_risk(TEG_MODEL, SimulationConfig(TEG_MODEL, grid_n=50, replicates=1000, seed=3), 0.2)
    assert abs(est.variance - reference) <= 3 * est.variance_se


@pytest.mark.parametrize("model", [MM1, MM2], ids=["mm1", "mm2"])
@pytest.mark.parametrize("region", [Square(1.0), Disk(0.5)], ids=["square", "disk"])
def test_axiom_suite_passes(model, region):
    rep = axiom_suite(model, region, 0.2)
    assert rep["translation_invariance"]["passed"]
    assert rep["anti_monotonicity"]["passed"]
    assert rep["homogeneity"]["asserted"] is False
    if region.shape == "square":
        assert rep["sub_additivity"]["passed"]
        assert rep["super_sub_additivity"]["asserted"] is False


def test_axiom_suite_for_independent_model_degenerates():
    rep = axiom_suite(MaxStable(TEG(EXP_02, 1e-12)), Square(1.0), 0.2)
    assert all(v < 1e-12 for v in rep["anti_monotonicity"]["value"])
    assert rep["anti_monotonicity"]["passed"]
    assert rep["sub_additivity"]["passed"]


def test_closed_form_near_comonotone_pairs():
    h = np.concatenate([[0.0], np.logspace(-16, -0.5, 12)])
    for theta in (0.05, 0.5):
        corr = CorrelationFunction("exponential", theta)
        a = q_teg_closed(corr, 0.25, h, 0.25)
        b = q_cov(MaxStable(TEG(corr, 0.25)), h, 0.25)
        assert np.all(np.abs(a.value - b.value) <= a.error + b.error)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 0.6), st.floats(0.02, 0.45), st.floats(0.05, 0.6))
def test_closed_form_between_zero_and_variance(h, nu, theta):
    corr = CorrelationFunction("exponential", theta)
    q = q_teg_closed(corr, 0.3, h, nu)
    assert -q.error <= q.value <= damage_variance(nu) + q.error
    assert math.isfinite(q.value)
