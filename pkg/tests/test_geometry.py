from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spatialrisk.geometry import Disk, Square, distance_density, sample_distances, scale_region
from spatialrisk.quadrature import adaptive_gk

from oracles import MEAN_DISTANCE_UNIT_DISK_EXACT, MEAN_DISTANCE_UNIT_DISK_MC, MEAN_DISTANCE_UNIT_SQUARE_MC


def _moment(reg, k):
    res = adaptive_gk(lambda h: h**k * distance_density(reg, h), 0.0, reg.diameter, 1e-13, 1e-13,
                      breakpoints=reg.breakpoints())
    return res.value


def test_disk_endpoints_vanish():
    assert distance_density(Disk(1.3), 0.0) == 0.0
    assert distance_density(Disk(1.3), 2.6) == pytest.approx(0.0, abs=1e-12)


def test_square_near_branch_matches_printed_polynomial():
    R = 1.7
    h = np.linspace(0.0, R, 50)
    printed = 2 * math.pi * h / R**2 - 8 * h**2 / R**3 + 2 * h**3 / R**4
    np.testing.assert_allclose(distance_density(Square(R), h), printed, rtol=1e-12, atol=1e-14)


def test_square_density_continuous_at_side():
    R = 1.0
    left = distance_density(Square(R), R * (1 - 1e-10))
    right = distance_density(Square(R), R * (1 + 1e-10))
    assert left == pytest.approx(right, rel=1e-8)


@pytest.mark.parametrize("shape", [Disk, Square])
def test_density_integrates_to_one(shape):
    for R in np.random.default_rng(3).uniform(0.1, 10.0, 20):
        assert _moment(shape(R), 0) == pytest.approx(1.0, abs=1e-8)


def test_mean_distances_match_monte_carlo_oracles():
    assert _moment(Square(1.0), 1) == pytest.approx(MEAN_DISTANCE_UNIT_SQUARE_MC, abs=5e-4)
    assert _moment(Disk(1.0), 1) == pytest.approx(MEAN_DISTANCE_UNIT_DISK_MC, abs=5e-4)
    assert _moment(Disk(1.0), 1) == pytest.approx(MEAN_DISTANCE_UNIT_DISK_EXACT, rel=1e-10)


@pytest.mark.parametrize("shape", [Disk, Square])
def test_sampled_distances_follow_density(shape):
    from scipy import stats
    reg = shape(1.0)
    d = sample_distances(reg, 20_000, np.random.default_rng(11))

    def cdf(x):
        return np.array([adaptive_gk(lambda h: distance_density(reg, h), 0.0, v, 1e-12, 1e-10).value
                         for v in np.atleast_1d(x)])

    grid = np.linspace(0.0, reg.diameter, 400)
    table = cdf(grid)
    assert stats.kstest(d, lambda x: np.interp(x, grid, table)).pvalue > 1e-3


def test_scale_region():
    assert scale_region(Square(1.0), 2.0).size == 2.0
    assert scale_region(Disk(0.5), 1.0) == Disk(0.5)
    reg = Disk(0.8)
    assert scale_region(reg, 3.7).area == pytest.approx(3.7**2 * reg.area, rel=1e-14)
    assert Square(2.0).diameter == pytest.approx(2.0 * math.sqrt(2.0))
    with pytest.raises(ValueError):
        scale_region(reg, 0.0)


def test_density_domain_errors():
    with pytest.raises(ValueError):
        distance_density(Square(1.0), 1.5)
    with pytest.raises(ValueError):
        distance_density(Disk(1.0), -0.1)
    with pytest.raises(ValueError):
        Square(-1.0)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([Disk, Square]), st.floats(0.1, 5.0), st.floats(0.2, 5.0), st.floats(0.0, 0.9999))
def test_scaling_covariance(shape, R, lam, frac):
    reg = shape(R)
    h = frac * reg.diameter
    lhs = distance_density(scale_region(reg, lam), lam * h) * lam
    assert lhs == pytest.approx(distance_density(reg, h), rel=1e-10, abs=1e-300)
