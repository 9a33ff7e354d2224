"""Stationary isotropic correlation families."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .specialfns import bessel_k, gamma

FAMILIES = ("exponential", "gaussian", "spherical", "cubic", "matern")


@dataclass(frozen=True)
class CorrelationFunction:
    """A named correlation family with length scale ``theta``.

    ``kappa`` is the Matern smoothness and is ignored by the other families.
    """

    family: str
    theta: float
    kappa: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown correlation family {self.family!r}; expected one of {FAMILIES}")
        if not self.theta > 0:
            raise ValueError("theta must be positive")
        if self.family == "matern" and not self.kappa > 0:
            raise ValueError("kappa must be positive")

    def __call__(self, h):
        return rho(self, h)

    @property
    def support(self) -> float:
        """Distance beyond which the correlation is exactly zero (inf if none)."""
        if self.family in ("spherical", "cubic"):
            return self.theta
        return np.inf


def rho(corr: CorrelationFunction, h):
    """Evaluate the correlation at distance(s) ``h >= 0``."""
    scalar = np.ndim(h) == 0
    h = np.asarray(h, dtype=float)
    if np.any(h < 0) or np.any(np.isnan(h)):
        raise ValueError("distance must be nonnegative")
    t = h / corr.theta
    fam = corr.family
    if fam == "exponential":
        out = np.exp(-t)
    elif fam == "gaussian":
        out = np.exp(-t * t)
    elif fam == "spherical":
        tc = np.minimum(t, 1.0)
        out = np.where(t < 1.0, 1.0 - 1.5 * tc + 0.5 * tc**3, 0.0)
    elif fam == "cubic":
        tc = np.minimum(t, 1.0)
        poly = 1.0 - 7.0 * tc**2 + 8.75 * tc**3 - 3.5 * tc**5 + 0.75 * tc**7
        out = np.where(t < 1.0, poly, 0.0)
    else:
        out = _matern(t, corr.kappa)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if scalar else out


def _matern(t: np.ndarray, kappa: float) -> np.ndarray:
    out = np.ones_like(t)
    # below this the series limit 1 is exact to double precision
    pos = t > 1e-12
    # K_kappa underflows to 0 long before 745; the product is 0 there anyway
    live = pos & (t < 700.0)
    tl = t[live]
    out[live] = tl**kappa * bessel_k(kappa, tl) / (gamma(kappa) * 2.0 ** (kappa - 1.0))
    out[pos & ~live] = 0.0
    return out
