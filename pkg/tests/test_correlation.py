from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialrisk.correlation import FAMILIES, CorrelationFunction, rho


@pytest.mark.parametrize("family", FAMILIES)
def test_unit_at_origin_and_nonincreasing(family):
    c = CorrelationFunction(family, 0.7, kappa=1.5)
    assert rho(c, 0.0) == 1.0
    v = rho(c, np.linspace(0.0, 5 * 0.7, 2001))
    assert np.all(np.diff(v) <= 1e-15)
    assert np.all((v >= 0.0) & (v <= 1.0))


def test_matern_half_is_exponential():
    h = np.linspace(0.0, 3.0, 500)
    m = CorrelationFunction("matern", 0.4, kappa=0.5)
    e = CorrelationFunction("exponential", 0.4)
    np.testing.assert_allclose(m(h), e(h), atol=1e-9)


def test_named_values():
    assert CorrelationFunction("spherical", 0.3)(0.3) == 0.0
    assert CorrelationFunction("cubic", 0.3)(0.3) == pytest.approx(0.0, abs=1e-15)
    assert CorrelationFunction("exponential", 0.3)(0.3) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert CorrelationFunction("gaussian", 0.3)(0.3) == pytest.approx(math.exp(-1.0), rel=1e-15)
    assert CorrelationFunction("spherical", 0.3).support == 0.3
    assert CorrelationFunction("matern", 0.3).support == math.inf


@pytest.mark.parametrize("family", FAMILIES)
def test_correlation_matrix_positive_semidefinite(family):
    g = np.linspace(0.0, 1.0, 20)
    pts = np.array([(x, y) for x in g for y in g])
    d = np.hypot(*(pts[:, None, :] - pts[None, :, :]).transpose(2, 0, 1))
    c = CorrelationFunction(family, 0.35, kappa=1.0)
    assert np.linalg.eigvalsh(c(d)).min() >= -1e-10


def test_invalid_inputs():
    with pytest.raises(ValueError):
        CorrelationFunction("powered", 1.0)
    with pytest.raises(ValueError):
        CorrelationFunction("exponential", 0.0)
    with pytest.raises(ValueError):
        CorrelationFunction("matern", 1.0, kappa=-1.0)
    with pytest.raises(ValueError):
        CorrelationFunction("exponential", 1.0)(-0.1)


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=0.0, max_value=50.0), st.floats(min_value=0.05, max_value=5.0))
def test_matern_is_finite_and_bounded(h, kappa):
    v = CorrelationFunction("matern", 0.5, kappa=kappa)(h)
    assert 0.0 <= v <= 1.0
