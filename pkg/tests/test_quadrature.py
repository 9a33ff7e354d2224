from __future__ import annotations

import math

import numpy as np
import pytest

from spatialrisk.geometry import Square
from spatialrisk.models import TEG, MaxMixture, MaxStable, Smith, cdf_excess
from spatialrisk.quadrature import (
    IntegrandNaN,
    NonConvergence,
    QuadratureConfig,
    adaptive_gk,
    integrate_1d,
    integrate_2d_semiinf,
    integrate_risk_3d,
)
from spatialrisk.risk import damage_variance, q_cov, q_teg_closed, risk_r1
from spatialrisk.simulation import SimulationConfig, mc_risk, realized_model

from conftest import EXP_02
from oracles import GAMMA_08


@pytest.mark.parametrize("transform", ["rational", "log"])
def test_exponential_tail(transform):
    res = integrate_1d(lambda x: np.exp(-x), 0.0, math.inf, QuadratureConfig(transform=transform))
    assert res.value == pytest.approx(1.0, abs=1e-10)
    assert abs(res.value - 1.0) <= res.error


def test_algebraic_endpoint_singularity():
    res = integrate_1d(lambda x: x**-0.8, 0.0, 1.0, endpoint_singular=True)
    assert res.value == pytest.approx(5.0, abs=1e-8)


@pytest.mark.parametrize("transform", ["rational", "log"])
def test_frechet_power_moment(transform):
    nu = 0.2
    cfg = QuadratureConfig(transform=transform)
    res = integrate_1d(lambda x: x**nu * np.exp(-1 / x) / x**2, 0.0, math.inf, cfg)
    assert res.value == pytest.approx(GAMMA_08, rel=cfg.rel_tol)
    assert abs(res.value - GAMMA_08) <= res.error


def test_vector_valued_integrand():
    k = np.arange(1, 6)[:, None]
    res = adaptive_gk(lambda x: x[None, :] ** k, 0.0, 1.0, 1e-13, 1e-13)
    np.testing.assert_allclose(res.value, 1.0 / (k[:, 0] + 1.0), rtol=1e-13)


def test_non_convergence_is_reported():
    cfg = QuadratureConfig(max_subdivisions=2)
    with pytest.raises(NonConvergence) as info:
        integrate_1d(lambda x: np.sin(1 / x), 1e-4, 1.0, cfg, stage="test")
    assert info.value.best_error > 0
    assert info.value.stage == "test"


def test_nan_reports_abscissa():
    with pytest.raises(IntegrandNaN) as info:
        integrate_1d(lambda x: np.where(x > 0.5, np.nan, x), 0.0, 1.0)
    assert info.value.abscissa is not None


def test_config_validation():
    with pytest.raises(ValueError):
        QuadratureConfig(abs_tol=0.0)
    with pytest.raises(ValueError):
        QuadratureConfig(transform="tanh")
    with pytest.raises(ValueError):
        QuadratureConfig(max_subdivisions=0)


@pytest.mark.parametrize("transform", ["rational", "log"])
def test_2d_product_exponential(transform):
    res = integrate_2d_semiinf(lambda x1, x2: np.exp(-x1 - x2), QuadratureConfig(transform=transform))
    assert res.value == pytest.approx(1.0, abs=1e-8)


def test_2d_independent_hoeffding_integrand_is_zero():
    d = MaxStable(TEG(EXP_02, 0.25))
    res = integrate_2d_semiinf(lambda x1, x2: cdf_excess(d, 0.6, x1, x2), symmetric=True)
    assert res.value == 0.0


def test_2d_symmetric_matches_full():
    d = MaxStable(Smith(1.0))

    def f(x1, x2):
        return 0.04 * (x1 * x2) ** -0.8 * cdf_excess(d, 0.7, x1, x2)

    cfg = QuadratureConfig(transform="log")
    full = integrate_2d_semiinf(f, cfg, bounds=(-4.0, 60.0))
    half = integrate_2d_semiinf(f, cfg, symmetric=True, bounds=(-4.0, 60.0))
    assert full.value == pytest.approx(half.value, rel=1e-6)


def test_hoeffding_matches_closed_form_teg():
    c = q_cov(MaxStable(TEG(EXP_02, 0.25)), 0.25, 0.2)
    d = q_teg_closed(EXP_02, 0.25, 0.25, 0.2)
    assert c.value == pytest.approx(d.value, rel=1e-4)
    assert abs(c.value - d.value) <= c.error + d.error


def test_log_and_power_forms_agree():
    # the power form is only trusted up to nu = 0.3
    for model in (MaxStable(Smith(0.6)), MaxMixture(0.5, TEG(EXP_02, 0.25), Smith(1.0))):
        for nu in (0.1, 0.2, 0.3):
            for h in (0.05, 0.3):
                a = q_cov(model, h, nu, form="log")
                b = q_cov(model, h, nu, form="power")
                assert abs(a.value - b.value) <= a.error + b.error


def test_error_bounds_cover_refined_values():
    cfg = QuadratureConfig()
    fine = cfg.tightened(0.1)
    model = MaxMixture(0.5, TEG(EXP_02, 0.25), Smith(1.0))
    h = np.array([0.0, 0.02, 0.1, 0.3, 0.8])
    for nu in (0.05, 0.2, 0.4):
        for form in ("log", "power") if nu <= 0.3 else ("log",):
            a = q_cov(model, h, nu, cfg, form=form)
            b = q_cov(model, h, nu, fine, form=form)
            assert np.all(np.abs(a.value - b.value) <= a.error)
        a = q_teg_closed(EXP_02, 0.25, h, nu, cfg)
        b = q_teg_closed(EXP_02, 0.25, h, nu, fine)
        assert np.all(np.abs(a.value - b.value) <= a.error + 1e-15)
    for rule in (lambda x: np.exp(-x), lambda x: 1 / (1 + x * x), lambda x: x**0.3 * np.exp(-1 / x) / x**2):
        a = integrate_1d(rule, 0.0, math.inf, cfg)
        b = integrate_1d(rule, 0.0, math.inf, fine)
        assert abs(a.value - b.value) <= a.error


def test_risk_3d_of_independent_model_vanishes():
    tiny = MaxStable(TEG(EXP_02, 1e-9))
    assert integrate_risk_3d(tiny, Square(1.0), 0.2).value <= 1e-8
    far = MaxMixture(1.0, TEG(EXP_02, 0.25), Smith(1.0))
    ref = integrate_risk_3d(far, Square(1.0), 0.2).value
    assert ref == pytest.approx(risk_r1(MaxStable(TEG(EXP_02, 0.25)), Square(1.0), 0.2).value, rel=1e-6)


def test_risk_3d_vanishes_as_nu_goes_to_zero():
    model = MaxMixture(0.5, TEG(EXP_02, 0.25), Smith(1.0))
    vals = [integrate_risk_3d(model, Square(1.0), nu).value for nu in (0.1, 0.01, 0.001)]
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 1e-5
    assert vals[2] <= damage_variance(0.001)


@pytest.mark.slow
def test_risk_3d_matches_monte_carlo_for_mixture():
    model = MaxMixture(0.5, TEG(EXP_02, 0.25), Smith(1.0))
    ref = integrate_risk_3d(realized_model(model), Square(1.0), 0.2)
    est = mc_risk(model, SimulationConfig(model, grid_n=50, replicates=1000, seed=7), 0.2)
    assert abs(est.variance - ref.value) <= 3 * est.variance_se
