"""Disk and square regions and their inter-point distance densities."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

SHAPES = ("disk", "square")


@dataclass(frozen=True)
class Region:
    """A disk of radius ``R`` or a square of side ``R``, scaled by ``scale``.

    The effective size is ``R * scale``; all geometric quantities use it.
    """

    shape: str
    R: float
    scale: float = 1.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown region shape {self.shape!r}; expected one of {SHAPES}")
        if not (self.R > 0 and self.scale > 0):
            raise ValueError("region size and scale must be positive")

    @property
    def size(self) -> float:
        return self.R * self.scale

    @property
    def area(self) -> float:
        s = self.size
        return math.pi * s * s if self.shape == "disk" else s * s

    @property
    def diameter(self) -> float:
        """Largest distance between two points of the region."""
        return 2.0 * self.size if self.shape == "disk" else math.sqrt(2.0) * self.size

    def breakpoints(self) -> tuple[float, ...]:
        """Interior points where the distance density is not smooth."""
        return () if self.shape == "disk" else (self.size,)

    def density(self, h):
        return distance_density(self, h)


def Disk(R: float, scale: float = 1.0) -> Region:
    return Region("disk", R, scale)


def Square(R: float, scale: float = 1.0) -> Region:
    return Region("square", R, scale)


def scale_region(reg: Region, lam: float) -> Region:
    """The region ``{lam * x : x in reg}``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return replace(reg, scale=reg.scale * lam)


def _x_minus_sin(x: np.ndarray) -> np.ndarray:
    small = x < 0.5
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    # Taylor series to x^15; the first omitted term is below 1e-17 relative
    series = xs * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0 * (1.0 - x2 / 110.0 * (
        1.0 - x2 / 156.0 * (1.0 - x2 / 210.0))))))
    return np.where(small, series, x - np.sin(x))


def distance_density(reg: Region, h):
    """Density of the distance between two independent uniform points of ``reg``.

    Raises ``ValueError`` for distances outside ``[0, reg.diameter]``.
    """
    scalar = np.ndim(h) == 0
    h = np.asarray(h, dtype=float)
    diam = reg.diameter
    if np.any(h < 0) or np.any(h > diam * (1 + 1e-12)) or np.any(np.isnan(h)):
        raise ValueError(f"distance outside the support [0, {diam}] of the {reg.shape} density")
    R = reg.size
    d = np.minimum(h / R, diam / R)
    if reg.shape == "disk":
        # arccos(q) - q sqrt(1 - q^2) = (x - sin x)/2 with x = 2 arccos(q), written
        # without cancellation so the density keeps full relative accuracy near 2R
        gap = np.clip((diam - h) / diam, 0.0, 1.0)
        x = 4.0 * np.arcsin(np.sqrt(gap / 2.0))
        out = (2.0 * d) * (2.0 / math.pi) * 0.5 * _x_minus_sin(x)
    else:
        near = 2.0 * d * (math.pi - 4.0 * d + d * d)
        dd = np.maximum(d, 1.0)
        far = 2.0 * d * (4.0 * np.sqrt(dd * dd - 1.0) - (d * d + 2.0 - math.pi) - 4.0 * np.arccos(1.0 / dd))
        out = np.where(d <= 1.0, near, far)
    out = np.maximum(out, 0.0) / R
    return float(out) if scalar else out


def sample_distances(reg: Region, size: int, rng: np.random.Generator) -> np.ndarray:
    """Distances between ``size`` independent pairs of uniform points of ``reg``."""
    R = reg.size
    if reg.shape == "square":
        p = rng.random((4, size)) * R
        return np.hypot(p[0] - p[2], p[1] - p[3])
    r = R * np.sqrt(rng.random((2, size)))
    a = 2.0 * math.pi * rng.random((2, size))
    return np.hypot(r[0] * np.cos(a[0]) - r[1] * np.cos(a[1]), r[0] * np.sin(a[0]) - r[1] * np.sin(a[1]))
