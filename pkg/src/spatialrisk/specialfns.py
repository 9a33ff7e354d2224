"""Special functions used throughout the package.

All functions accept scalars or numpy arrays and broadcast. Scalars in give
floats out.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as _sp


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class BesselOverflowError(OverflowError):
    """K_kappa(x) is not representable as a finite double."""


def _out(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


def gamma(x):
    """Gamma function on the positive real axis."""
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise DomainError("gamma is only defined here for x > 0")
    if scalar:
        return math.gamma(float(x))
    return _sp.gamma(x)


def std_normal_cdf(x):
    """Standard normal CDF, accurate in both tails (erfc based)."""
    scalar = np.ndim(x) == 0
    return _out(_sp.ndtr(np.asarray(x, dtype=float)), scalar)


def bessel_k(kappa, x):
    """Modified Bessel function of the second kind K_kappa(x).

    Raises
    ------
    DomainError
        If ``kappa <= 0`` or ``x <= 0``.
    BesselOverflowError
        If the value overflows (small ``x`` with large ``kappa``).
    """
    scalar = np.ndim(x) == 0 and np.ndim(kappa) == 0
    kappa = np.asarray(kappa, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(kappa > 0)):
        raise DomainError("bessel_k needs kappa > 0")
    if np.any(~(x > 0)):
        raise DomainError("bessel_k needs x > 0")
    val = _sp.kv(kappa, x)
    if np.any(~np.isfinite(val)):
        bad = np.broadcast_to(x, val.shape)[~np.isfinite(val)]
        raise BesselOverflowError(f"K_kappa overflows at x={bad.min():.3e}")
    return _out(val, scalar)


def log1p_stable(u):
    """log(1 + u) without cancellation near u = 0."""
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if np.any(~(u > -1)):
        raise DomainError("log1p_stable needs u > -1")
    return _out(np.log1p(u), scalar)


def expm1_stable(u):
    """exp(u) - 1 without cancellation near u = 0."""
    scalar = np.ndim(u) == 0
    return _out(np.expm1(np.asarray(u, dtype=float)), scalar)


def log1mexp(a):
    """log(1 - exp(-a)) for a > 0, switching branches at a = log 2."""
    a = np.asarray(a, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(
            a > math.log(2.0),
            np.log1p(-np.exp(-a)),
            np.log(-np.expm1(-np.minimum(a, math.log(2.0)))),
        )
