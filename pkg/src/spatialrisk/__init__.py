"""Spatial risk measures for max-stable, inverted max-stable and max-mixture fields.

The risk measure of a region A is the variance of the spatial average of the
damage ``|Z(s)|^nu``.  It is computed deterministically, either through a
one-dimensional integral (TEG models) or through a distance integral of the
Hoeffding covariance, and estimated by Monte Carlo on simulated fields.
"""
from .correlation import CorrelationFunction
from .geometry import Disk, Region, Square, distance_density, scale_region
from .models import (
    TEG,
    ExtremalGaussian,
    InvertedMaxStable,
    MaxMixture,
    MaxStable,
    Smith,
    chi,
    chi_u,
    extremal_coefficient,
)
from .quadrature import QuadratureConfig, integrate_risk_3d
from .risk import RiskEstimate, q_cov, q_teg_closed, risk_r1, risk_scaled
from .simulation import SimulationConfig, mc_risk, simulate

__version__ = "0.1.0"

__all__ = [
    "CorrelationFunction",
    "Disk",
    "ExtremalGaussian",
    "InvertedMaxStable",
    "MaxMixture",
    "MaxStable",
    "QuadratureConfig",
    "Region",
    "RiskEstimate",
    "SimulationConfig",
    "Smith",
    "Square",
    "TEG",
    "chi",
    "chi_u",
    "distance_density",
    "extremal_coefficient",
    "integrate_risk_3d",
    "mc_risk",
    "q_cov",
    "q_teg_closed",
    "risk_r1",
    "risk_scaled",
    "scale_region",
    "simulate",
]
