"""Bivariate dependence models with unit Frechet margins.

Three max-stable families (Smith, extremal Gaussian, truncated extremal
Gaussian), their inverted counterparts, and max-mixtures of the two.

Every quantity of interest is built on the exponent-measure *deficit*
``1/x1 + 1/x2 - V_h(x1, x2)``, which each family evaluates without
cancellation.  The Hoeffding integrand ``G_h - F F`` far in the tails is the
product of tiny factors, never a difference of numbers close to one.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .correlation import CorrelationFunction
from .specialfns import log1mexp, std_normal_cdf


class EtaUndefinedWarning(UserWarning):
    """eta was requested for a max-stable model, where it is 1 wherever AD."""


def _check_positive(*xs):
    for x in xs:
        if np.any(~(np.asarray(x) > 0)):
            raise ValueError("arguments must be strictly positive")


def _check_distance(h):
    if np.any(~(np.asarray(h) >= 0)):
        raise ValueError("distance must be nonnegative")


# ---------------------------------------------------------------- max-stable

@dataclass(frozen=True)
class Smith:
    """Smith (Gaussian extreme-value) model with isotropic covariance sigma2 * I."""

    sigma2: float

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    @property
    def independence_range(self) -> float:
        return math.inf

    def breakpoints(self) -> tuple[float, ...]:
        return ()

    def deficit(self, h, x1, x2):
        tau = np.asarray(h, dtype=float) / math.sqrt(self.sigma2)
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        log_ratio = np.log(x2) - np.log(x1)
        pos = tau > 0
        ts = np.where(pos, tau, 1.0)
        d = std_normal_cdf(-ts / 2 - log_ratio / ts) / x1 + std_normal_cdf(-ts / 2 + log_ratio / ts) / x2
        return np.where(pos, d, np.minimum(1.0 / x1, 1.0 / x2))


@dataclass(frozen=True)
class ExtremalGaussian:
    """Schlather's extremal Gaussian model driven by correlation ``corr``."""

    corr: CorrelationFunction

    @property
    def independence_range(self) -> float:
        return math.inf

    def breakpoints(self) -> tuple[float, ...]:
        s = self.corr.support
        return (s,) if math.isfinite(s) else ()

    def deficit(self, h, x1, x2):
        return _eg_deficit(self.corr(np.asarray(h, dtype=float)), x1, x2)


OVERLAPS = ("tent", "disk")


def overlap_fraction(kind: str, h, r: float):
    """Normalized set covariogram alpha(h) of the TEG truncation set.

    ``"tent"`` is the linear form ``(1 - h/2r)_+``.  ``"disk"`` is the exact
    overlap ``|B ∩ (B + h)| / |B|`` of a disk of radius r, which is what a
    simulation with fixed disks realizes.  The two differ: the tent is not a
    positive definite function in the plane.
    """
    q = np.asarray(h, dtype=float) / (2.0 * r)
    if kind == "tent":
        return np.maximum(0.0, 1.0 - q)
    if kind == "disk":
        qc = np.clip(q, 0.0, 1.0)
        return (2.0 / math.pi) * (np.arccos(qc) - qc * np.sqrt(1.0 - qc * qc))
    raise ValueError(f"unknown overlap {kind!r}; expected one of {OVERLAPS}")


@dataclass(frozen=True)
class TEG:
    """Truncated extremal Gaussian model; truncation sets are disks of radius r.

    ``overlap`` selects the form of alpha(h), see :func:`overlap_fraction`.
    """

    corr: CorrelationFunction
    r: float
    overlap: str = "tent"

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("truncation radius must be positive")
        if self.overlap not in OVERLAPS:
            raise ValueError(f"unknown overlap {self.overlap!r}; expected one of {OVERLAPS}")

    @property
    def independence_range(self) -> float:
        return 2.0 * self.r

    def breakpoints(self) -> tuple[float, ...]:
        pts = {2.0 * self.r}
        if math.isfinite(self.corr.support):
            pts.add(self.corr.support)
        return tuple(sorted(pts))

    def alpha(self, h):
        return overlap_fraction(self.overlap, h, self.r)

    def deficit(self, h, x1, x2):
        h = np.asarray(h, dtype=float)
        return self.alpha(h) * _eg_deficit(self.corr(h), x1, x2)


def _eg_deficit(rho, x1, x2):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    s = x1 + x2
    q = 2.0 * (rho + 1.0) * (x1 / s) * (x2 / s)
    root = np.sqrt(np.clip(1.0 - q, 0.0, 1.0))
    return (rho + 1.0) / (s * (1.0 + root))


MaxStableModel = Smith | ExtremalGaussian | TEG


def exponent_measure(m: MaxStableModel, h, x1, x2):
    """V_h(x1, x2) of a max-stable model."""
    _check_positive(x1, x2)
    _check_distance(h)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    out = 1.0 / x1 + 1.0 / x2 - m.deficit(h, x1, x2)
    return float(out) if out.ndim == 0 else out


def extremal_coefficient(m: MaxStableModel, h):
    """Theta(h) = V_h(1, 1), in [1, 2]."""
    _check_distance(h)
    out = 2.0 - m.deficit(h, 1.0, 1.0)
    out = np.clip(out, 1.0, 2.0)
    return float(out) if np.ndim(out) == 0 else out


# ------------------------------------------------------- inversion transform

def inverse_transform(x):
    """g(x) = -1/log(1 - exp(-1/x)), a decreasing involution of (0, inf).

    It maps a unit Frechet variable to another one with F(g(x)) = 1 - F(x).
    """
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    _check_positive(x)
    out = -1.0 / log1mexp(1.0 / x)
    return float(out) if scalar else out


def inverse_transform_a(z, a: float):
    """g_a(z) = g(z / (1 - a)); undefined at a = 1."""
    if a >= 1.0:
        raise ValueError("g_a is undefined for a = 1; the mixture is then max-stable")
    return inverse_transform(np.asarray(z, dtype=float) / (1.0 - a))


def _inv_g(x):
    """1/g(x) = -log(1 - exp(-1/x)) = -log(1 - F(x))."""
    return -log1mexp(1.0 / x)


def _excess(inv1, inv2, deficit):
    """exp(-V) - exp(-S) with S = inv1 + inv2 and V = S - deficit."""
    v = inv1 + inv2 - deficit
    return np.exp(-v) * (-np.expm1(-deficit))


# ------------------------------------------------------- dependence models

@dataclass(frozen=True)
class MaxStable:
    m: MaxStableModel

    @property
    def independence_range(self) -> float:
        return self.m.independence_range

    def breakpoints(self):
        return self.m.breakpoints()

    def excess(self, h, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return _excess(1.0 / x1, 1.0 / x2, self.m.deficit(h, x1, x2))

    def log_cdf(self, h, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        return -(1.0 / x1 + 1.0 / x2 - self.m.deficit(h, x1, x2))


@dataclass(frozen=True)
class InvertedMaxStable:
    m: MaxStableModel

    @property
    def independence_range(self) -> float:
        return self.m.independence_range

    def breakpoints(self):
        return self.m.breakpoints()

    def excess(self, h, x1, x2):
        i1 = _inv_g(np.asarray(x1, dtype=float))
        i2 = _inv_g(np.asarray(x2, dtype=float))
        return _excess(i1, i2, self.m.deficit(h, 1.0 / i1, 1.0 / i2))


@dataclass(frozen=True)
class MaxMixture:
    """Z = max(a X, (1 - a) Y) with X max-stable and Y the inversion of ``y_part``."""

    a: float
    x_part: MaxStableModel
    y_part: MaxStableModel

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError("mixing weight must lie in [0, 1]")

    @property
    def independence_range(self) -> float:
        parts = []
        if self.a > 0:
            parts.append(self.x_part.independence_range)
        if self.a < 1:
            parts.append(self.y_part.independence_range)
        return max(parts)

    @property
    def h_star(self) -> float:
        """Distance up to which the mixture is asymptotically dependent."""
        if self.a == 0:
            return 0.0
        return self.x_part.independence_range

    def breakpoints(self):
        return tuple(sorted(set(self.x_part.breakpoints()) | set(self.y_part.breakpoints())))

    def excess(self, h, z1, z2):
        a = self.a
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        if a == 1.0:
            return MaxStable(self.x_part).excess(h, z1, z2)
        if a == 0.0:
            return InvertedMaxStable(self.y_part).excess(h, z1, z2)
        s = 1.0 / z1 + 1.0 / z2
        dx = a * self.x_part.deficit(h, z1, z2)
        a_full = np.exp(-(a * s - dx))
        a_excess = np.exp(-(a * s - dx)) * (-np.expm1(-dx))
        b_indep = np.exp(-(1.0 - a) * s)
        b_excess = InvertedMaxStable(self.y_part).excess(h, z1 / (1.0 - a), z2 / (1.0 - a))
        return a_full * b_excess + b_indep * a_excess


DependenceModel = MaxStable | InvertedMaxStable | MaxMixture


def _underlying_max_stable(d: DependenceModel):
    return d.m if not isinstance(d, MaxMixture) else None


def cdf_excess(d: DependenceModel, h, x1, x2):
    """G_h(x1, x2) - F(x1) F(x2), the Hoeffding integrand (>= 0 for PQD models)."""
    out = d.excess(np.asarray(h, dtype=float), x1, x2)
    return float(out) if np.ndim(out) == 0 else out


def bivariate_cdf(d: DependenceModel, h, x1, x2):
    """P(Z(s) <= x1, Z(s + h) <= x2)."""
    _check_positive(x1, x2)
    _check_distance(h)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if isinstance(d, MaxStable):
        out = np.exp(d.log_cdf(h, x1, x2))
    else:
        out = np.exp(-1.0 / x1 - 1.0 / x2) + d.excess(np.asarray(h, dtype=float), x1, x2)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def joint_survivor(d: DependenceModel, h, x1, x2):
    """P(Z(s) > x1, Z(s + h) > x2)."""
    _check_positive(x1, x2)
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    indep = np.expm1(-1.0 / x1) * np.expm1(-1.0 / x2)
    out = indep + d.excess(np.asarray(h, dtype=float), x1, x2)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def marginal_cdf(x):
    return np.exp(-1.0 / np.asarray(x, dtype=float))


# ------------------------------------------------- dependence coefficients

def chi(d: DependenceModel, h):
    """Upper tail dependence coefficient chi(h)."""
    _check_distance(h)
    if isinstance(d, MaxStable):
        out = 2.0 - extremal_coefficient(d.m, h)
    elif isinstance(d, InvertedMaxStable):
        out = np.zeros_like(np.asarray(h, dtype=float))
    else:
        out = d.a * (2.0 - extremal_coefficient(d.x_part, h)) if d.a > 0 else np.zeros_like(np.asarray(h, dtype=float))
    return float(out) if np.ndim(out) == 0 else np.asarray(out)


def eta(d: DependenceModel, h):
    """Ledford-Tawn coefficient: P(Z1 > x, Z2 > x) ~ L(x) x^(-1/eta)."""
    _check_distance(h)
    h = np.asarray(h, dtype=float)
    if isinstance(d, MaxStable):
        warnings.warn("eta of a max-stable model is 1 where AD and 1/2 where independent", EtaUndefinedWarning)
        out = np.where(extremal_coefficient(d.m, h) < 2.0, 1.0, 0.5)
    elif isinstance(d, InvertedMaxStable):
        out = 1.0 / extremal_coefficient(d.m, h)
    else:
        eta_y = 1.0 / extremal_coefficient(d.y_part, h) if d.a < 1 else np.full(h.shape, 0.5)
        if d.a > 0:
            ad = extremal_coefficient(d.x_part, h) < 2.0
            out = np.where(ad, 1.0, eta_y)
        else:
            out = eta_y
    return float(out) if np.ndim(out) == 0 else out


def chibar(d: DependenceModel, h):
    """Coefficient chi-bar(h) = 2 eta(h) - 1, equal to 1 under asymptotic dependence."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EtaUndefinedWarning)
        out = 2.0 * np.asarray(eta(d, h)) - 1.0
    return float(out) if np.ndim(out) == 0 else out


def _check_level(u):
    if np.any(~((np.asarray(u) > 0) & (np.asarray(u) < 1))):
        raise ValueError("probability level must lie strictly inside (0, 1)")


def chi_u(d: DependenceModel, h, u):
    """Finite-level chi(h, u) = 2 - log P(F(Z1) < u, F(Z2) < u) / log u."""
    _check_level(u)
    u = np.asarray(u, dtype=float)
    x = -1.0 / np.log(u)
    out = 2.0 - np.log(bivariate_cdf(d, h, x, x)) / np.log(u)
    return float(out) if np.ndim(out) == 0 else out


def chibar_u(d: DependenceModel, h, u):
    """Finite-level chi-bar(h, u) = 2 log(1 - u) / log P(F(Z1) > u, F(Z2) > u) - 1."""
    _check_level(u)
    u = np.asarray(u, dtype=float)
    x = -1.0 / np.log(u)
    out = 2.0 * np.log1p(-u) / np.log(joint_survivor(d, h, x, x)) - 1.0
    return float(out) if np.ndim(out) == 0 else out
