from __future__ import annotations

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialrisk.specialfns import (
    BesselOverflowError,
    DomainError,
    bessel_k,
    expm1_stable,
    gamma,
    log1mexp,
    log1p_stable,
    std_normal_cdf,
)

from oracles import GAMMA_08, K1_1, KHALF_1, PHI_1


def test_gamma_values():
    assert gamma(1.0) == pytest.approx(1.0, rel=1e-14)
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma(0.8) == pytest.approx(GAMMA_08, rel=1e-12)


def test_gamma_recurrence_on_random_points():
    x = np.random.default_rng(1).uniform(0.01, 20.0, 1000)
    np.testing.assert_allclose(gamma(x + 1.0), x * gamma(x), rtol=1e-12)


def test_gamma_rejects_nonpositive():
    with pytest.raises(DomainError):
        gamma(0.0)
    with pytest.raises(DomainError):
        gamma(np.array([1.0, -2.0]))


def test_normal_cdf_values():
    assert std_normal_cdf(0.0) == 0.5
    assert 1.0 - 1e-15 < std_normal_cdf(10.0) <= 1.0
    assert std_normal_cdf(1.0) == pytest.approx(PHI_1, rel=1e-12)
    assert std_normal_cdf(-37.0) > 0.0


def test_normal_cdf_monotone():
    v = std_normal_cdf(np.linspace(-8.0, 8.0, 10_000))
    assert np.all(np.diff(v) >= 0.0)


def test_bessel_values():
    assert bessel_k(0.5, 1.0) == pytest.approx(KHALF_1, rel=1e-12)
    assert bessel_k(1.0, 1.0) == pytest.approx(K1_1, rel=1e-12)
    assert bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2.0) * math.exp(-1.0), rel=1e-13)
    assert bessel_k(1.0, 30.0) < 1e-13


def test_bessel_decreasing_in_x():
    x = np.linspace(0.05, 40.0, 2000)
    for kappa in (0.3, 0.5, 1.0, 2.5):
        assert np.all(np.diff(bessel_k(kappa, x)) < 0.0)


def test_bessel_errors():
    with pytest.raises(DomainError):
        bessel_k(1.0, 0.0)
    with pytest.raises(DomainError):
        bessel_k(-1.0, 1.0)
    with pytest.raises(BesselOverflowError):
        bessel_k(200.0, 1e-3)


def test_log1p_and_expm1_small_arguments():
    assert log1p_stable(1e-18) == 1e-18
    assert expm1_stable(1e-18) == 1e-18
    with pytest.raises(DomainError):
        log1p_stable(-1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-12, max_value=700.0))
def test_log1mexp_matches_high_precision(a):
    with mpmath.workdps(400):
        ref = float(mpmath.log(1 - mpmath.exp(-mpmath.mpf(a))))
    assert float(log1mexp(a)) == pytest.approx(ref, rel=1e-14, abs=1e-300)
