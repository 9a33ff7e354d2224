"""Gridded simulation of max-stable, inverted and max-mixture fields.

Fields are built from the spectral representation ``max_i xi_i W_i(s)`` with
the Poisson points generated in decreasing order of ``xi`` and a stopping
rule once no further point can raise the current grid minimum.  Every
replicate owns an RNG substream keyed by ``(seed, replicate, component)``,
so results do not depend on how replicates are spread over workers.

The Monte-Carlo estimator of the risk measure averages the damage
``Z(s)^nu`` over the grid (one loss ``L`` per field) and reports the sample
variance of the losses.
"""
from __future__ import annotations

import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from scipy import linalg
from scipy.linalg import blas
from scipy.ndimage import minimum_filter

from .correlation import CorrelationFunction
from .geometry import Region, Square
from .models import (
    TEG,
    DependenceModel,
    ExtremalGaussian,
    InvertedMaxStable,
    MaxMixture,
    MaxStable,
    Smith,
    inverse_transform,
)

CONVENTIONS = ("midpoint", "endpoint")
MAGIC = b"SRFG"
_HEADER = struct.Struct("<4sId")

# Gaussian values above this bound are treated as impossible by the stopping
# and skipping rules; P(N(0,1) > 4.5) is about 3.4e-6, and a skipped point
# matters only if it also beats the current field, which is far rarer.
_W_BOUND = 4.5
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SimulationError(RuntimeError):
    """Gaussian field factorization failed; ``eigenvalue`` is the most negative one."""

    def __init__(self, message: str, eigenvalue: float):
        super().__init__(f"{message} (smallest eigenvalue {eigenvalue:.3e})")
        self.eigenvalue = eigenvalue


class InsufficientSampleError(ValueError):
    """Too few pairs or exceedances for a tail-dependence estimate."""


@dataclass(frozen=True)
class SimulationConfig:
    """Grid, replicate count and seed of a simulation run.

    ``convention`` picks the grid: ``"midpoint"`` uses the ``grid_n**2`` cell
    centres of a regular partition, ``"endpoint"`` uses the nodes
    ``i R/(n-1)`` for ``i = 1..n-1`` (a right Riemann sum).  For a disk the
    grid covers the bounding square and only nodes inside the disk enter the
    loss.
    """

    model: DependenceModel
    region: Region = field(default_factory=lambda: Square(1.0))
    grid_n: int = 50
    replicates: int = 1000
    seed: int = 0
    convention: str = "midpoint"
    workers: int = 1

    def __post_init__(self):
        if self.grid_n < 2:
            raise ValueError("grid_n must be at least 2")
        if self.replicates < 2:
            raise ValueError("at least two replicates are needed")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}; expected one of {CONVENTIONS}")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class Grid:
    axis: np.ndarray
    spacing: float
    inside: np.ndarray

    @property
    def n_side(self) -> int:
        return self.axis.size

    @property
    def weights(self) -> np.ndarray:
        """Riemann weights of the loss; zero outside the region, summing to one."""
        return self.inside / self.inside.sum()


def make_grid(region: Region, grid_n: int, convention: str = "midpoint") -> Grid:
    side = 2.0 * region.size if region.shape == "disk" else region.size
    if convention == "midpoint":
        step = side / grid_n
        axis = (np.arange(grid_n) + 0.5) * step
    elif convention == "endpoint":
        step = side / (grid_n - 1)
        axis = np.arange(1, grid_n) * step
    else:
        raise ValueError(f"unknown convention {convention!r}")
    if region.shape == "disk":
        c = region.size
        inside = (axis[:, None] - c) ** 2 + (axis[None, :] - c) ** 2 <= c * c
    else:
        inside = np.ones((axis.size, axis.size), dtype=bool)
    return Grid(axis, step, inside)


@dataclass(frozen=True, eq=False)
class FieldRealization:
    """One simulated field; ``values[i, j]`` sits at ``(axis[i], axis[j])``."""

    values: np.ndarray
    axis: np.ndarray
    replicate: int

    @property
    def grid_n(self) -> int:
        return self.values.shape[0]


# ------------------------------------------------------------- factorization

def _factor(corr: np.ndarray) -> np.ndarray:
    """A matrix ``L`` with ``L @ L.T == corr``; eigen-decomposition if Cholesky fails."""
    try:
        return linalg.cholesky(corr, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass
    lam, vec = linalg.eigh(corr, check_finite=False)
    if lam[0] < -1e-8 * max(lam[-1], 1.0):
        raise SimulationError("correlation matrix is not positive semi-definite", float(lam[0]))
    return vec * np.sqrt(np.clip(lam, 0.0, None))


def _correlation_matrix(corr: CorrelationFunction, pts: np.ndarray) -> np.ndarray:
    d = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=-1))
    return corr(d)


class _GaussianVectors:
    """Batches of standard Gaussian vectors with correlation ``corr`` at ``pts``.

    Generated in single precision, which is ample for the extremes built on
    top of them and halves the cost of the dominant matrix product.
    """

    def __init__(self, corr: CorrelationFunction, pts: np.ndarray):
        self.chol = np.asfortranarray(_factor(_correlation_matrix(corr, pts)), dtype=np.float32)
        self.triangular = bool(np.all(np.triu(self.chol, 1) == 0.0))
        self.dim = self.chol.shape[0]

    def __call__(self, rng: np.random.Generator, k: int) -> np.ndarray:
        """Array of shape ``(k, dim)``."""
        z = rng.standard_normal((self.dim, k), dtype=np.float32)
        if self.triangular:
            return blas.strmm(1.0, self.chol, np.asfortranarray(z), lower=1).T
        return (self.chol @ z).T


# ------------------------------------------------------------------ samplers

class _SmithSampler:
    """Gaussian storm profiles with Poisson centres on the window dilated by 4 sigma."""

    batch = 16

    def __init__(self, m: Smith, grid: Grid):
        self.sigma = math.sqrt(m.sigma2)
        self.axis = grid.axis
        pad = 4.0 * self.sigma
        self.lo = grid.axis[0] - pad
        self.width = grid.axis[-1] - grid.axis[0] + 2.0 * pad
        self.area = self.width**2
        self.peak = 1.0 / (2.0 * math.pi * m.sigma2)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        n = self.axis.size
        x = np.zeros((n, n))
        gam = 0.0
        while True:
            g = gam + np.cumsum(rng.standard_exponential(self.batch))
            gam = g[-1]
            xi = self.area / g
            c = self.lo + self.width * rng.random((self.batch, 2))
            ex = np.exp(-0.5 * ((self.axis[None, :] - c[:, :1]) / self.sigma) ** 2)
            ey = np.exp(-0.5 * ((self.axis[None, :] - c[:, 1:]) / self.sigma) ** 2)
            prof = (xi * self.peak)[:, None, None] * ex[:, :, None] * ey[:, None, :]
            np.maximum(x, prof.max(axis=0), out=x)
            if xi[-1] * self.peak < x.min():
                return x


class _EGSampler:
    """Extremal Gaussian field from a dense factorization of the grid correlation."""

    batch = 8

    def __init__(self, m: ExtremalGaussian, grid: Grid):
        a = grid.axis
        pts = np.stack(np.meshgrid(a, a, indexing="ij"), axis=-1).reshape(-1, 2)
        self.n = a.size
        self.gauss = _GaussianVectors(m.corr, pts)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        x = np.zeros(self.n * self.n)
        gam = 0.0
        while True:
            g = gam + np.cumsum(rng.standard_exponential(self.batch))
            gam = g[-1]
            xi = _SQRT_2PI / g
            w = self.gauss(rng, self.batch)
            np.maximum(x, (np.maximum(w, 0.0) * xi[:, None]).max(axis=0), out=x)
            if xi[-1] * _W_BOUND < x.min():
                return x.reshape(self.n, self.n)


class _TEGSampler:
    """Extremal Gaussian fields truncated to disks of radius r.

    Each Poisson point only touches grid nodes in a fixed-size block around
    its disk, so one factorization of the block correlation serves every
    point.  The block keeps the nodes that fall inside the disk for some
    position of the centre within a grid cell.  Points whose largest
    possible contribution is below the current minimum over their block are
    skipped.
    """

    batch = 128

    def __init__(self, m: TEG, grid: Grid):
        self.r = m.r
        self.axis = grid.axis
        self.step = grid.spacing
        nb = int(math.floor(2.0 * m.r / self.step + 1e-9)) + 1
        self.nb = nb
        rel = np.arange(nb) * self.step - m.r
        near = np.where((rel > -self.step) & (rel <= 0.0), 0.0, np.minimum(np.abs(rel), np.abs(rel + self.step)))
        usable = near[:, None] ** 2 + near[None, :] ** 2 <= m.r * m.r
        self.rows, self.cols = np.nonzero(usable)
        off = np.arange(nb) * self.step
        pts = np.stack([off[self.rows], off[self.cols]], axis=-1)
        self.rx = off[self.rows].astype(np.float32)
        self.ry = off[self.cols].astype(np.float32)
        self.gauss = _GaussianVectors(m.corr, pts)
        self.lo = grid.axis[0] - m.r
        self.width = grid.axis[-1] - grid.axis[0] + 2.0 * m.r
        self.area = self.width**2
        self.scale = _SQRT_2PI / (math.pi * m.r * m.r)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        n, nb, step, r = self.axis.size, self.nb, self.step, self.r
        width = n + 2 * nb
        xp = np.full((width, width), np.inf)
        core = xp[nb:nb + n, nb:nb + n]
        core[...] = 0.0
        flat = xp.reshape(-1)
        block = self.rows * width + self.cols
        gam = 0.0
        while True:
            g = gam + np.cumsum(rng.standard_exponential(self.batch))
            gam = g[-1]
            amp = self.scale * self.area / g
            c = self.lo + self.width * rng.random((self.batch, 2))
            start = np.ceil((c - r - self.axis[0]) / step - 1e-12).astype(int)
            local = minimum_filter(xp, size=nb, mode="constant", cval=np.inf)
            lmin = local[start[:, 0] + nb + nb // 2, start[:, 1] + nb + nb // 2]
            need = np.flatnonzero(amp * _W_BOUND > lmin)
            if need.size:
                w = self.gauss(rng, need.size)
                i0, j0 = start[need, :1], start[need, 1:]
                ox = (self.axis[0] + i0 * step - c[need, :1]).astype(np.float32)
                oy = (self.axis[0] + j0 * step - c[need, 1:]).astype(np.float32)
                outside = (ox + self.rx) ** 2 + (oy + self.ry) ** 2 > np.float32(r * r)
                np.maximum(w, 0.0, out=w)
                w[outside] = 0.0
                vals = w * amp[need, None]
                idx = (i0 + nb) * width + j0 + nb + block
                np.maximum.at(flat, idx.ravel(), vals.ravel())
            if amp[-1] * _W_BOUND < core.min():
                return core.copy()


def _sampler(m, grid: Grid):
    if isinstance(m, Smith):
        return _SmithSampler(m, grid)
    if isinstance(m, ExtremalGaussian):
        return _EGSampler(m, grid)
    if isinstance(m, TEG):
        return _TEGSampler(m, grid)
    raise TypeError(f"cannot simulate {type(m).__name__}")


def _stream(seed: int, replicate: int, component: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, replicate, component])))


class _FieldFactory:
    """Draws the max-stable and inverted components of a replicate.

    Component 0 is the max-stable part and component 1 the inverted part, so
    a mixture at a = 1 reproduces the pure max-stable field bit for bit.
    """

    def __init__(self, model: DependenceModel, grid: Grid):
        self.model = model
        if isinstance(model, MaxStable):
            x_part, y_part = model.m, None
        elif isinstance(model, InvertedMaxStable):
            x_part, y_part = None, model.m
        elif isinstance(model, MaxMixture):
            x_part, y_part = model.x_part, model.y_part
        else:
            raise TypeError(f"cannot simulate {type(model).__name__}")
        self.x = _sampler(x_part, grid) if x_part is not None else None
        self.y = _sampler(y_part, grid) if y_part is not None else None

    def components(self, seed: int, rep: int):
        x = self.x.draw(_stream(seed, rep, 0)) if self.x is not None else None
        y = inverse_transform(self.y.draw(_stream(seed, rep, 1))) if self.y is not None else None
        return x, y

    def field(self, seed: int, rep: int) -> np.ndarray:
        x, y = self.components(seed, rep)
        if isinstance(self.model, MaxStable):
            return x
        if isinstance(self.model, InvertedMaxStable):
            return y
        return mix(x, y, self.model.a)


def realized_model(model: DependenceModel) -> DependenceModel:
    """The dependence model a simulation of ``model`` actually realizes.

    TEG fields are truncated by fixed disks, whose overlap fraction is the
    ``"disk"`` form whatever ``overlap`` the model declares.
    """
    def fix(m):
        return replace(m, overlap="disk") if isinstance(m, TEG) else m

    if isinstance(model, MaxMixture):
        return replace(model, x_part=fix(model.x_part), y_part=fix(model.y_part))
    return replace(model, m=fix(model.m))


def mix(x: np.ndarray, y: np.ndarray, a: float) -> np.ndarray:
    """max(a X, (1 - a) Y)."""
    return np.maximum(a * x, (1.0 - a) * y)


def simulate(model: DependenceModel, cfg: SimulationConfig) -> Iterator[FieldRealization]:
    """Stream of ``cfg.replicates`` independent realizations of ``model`` on the grid."""
    grid = make_grid(cfg.region, cfg.grid_n, cfg.convention)
    factory = _FieldFactory(model, grid)
    for rep in range(cfg.replicates):
        yield FieldRealization(factory.field(cfg.seed, rep), grid.axis, rep)


# ---------------------------------------------------------------- estimator

@dataclass(frozen=True)
class MCEstimate:
    """M1 summary of a loss sample: mean and variance with jackknife errors."""

    mean: float
    variance: float
    mean_se: float
    variance_se: float
    replicates: int


def jackknife_variance(losses: np.ndarray, axis: int = 0):
    """Sample variance (divisor m - 1) and its delete-one jackknife standard error."""
    z = np.moveaxis(np.asarray(losses, dtype=float), axis, 0)
    m = z.shape[0]
    d = z - z.mean(axis=0)
    s1 = d.sum(axis=0)
    s2 = (d * d).sum(axis=0)
    var = (s2 - s1 * s1 / m) / (m - 1)
    if m < 3:
        return var, np.full_like(var, np.nan)
    loo = (s2 - d * d - (s1 - d) ** 2 / (m - 1)) / (m - 2)
    se = np.sqrt((m - 1) / m * ((loo - loo.mean(axis=0)) ** 2).sum(axis=0))
    return var, se


def summarize(losses: np.ndarray) -> MCEstimate:
    losses = np.asarray(losses, dtype=float)
    var, se = jackknife_variance(losses)
    m = losses.size
    return MCEstimate(float(losses.mean()), float(var), float(losses.std(ddof=1) / math.sqrt(m)), float(se), m)


def _loss_chunk(args):
    model, grid, seed, reps, nus, a_values = args
    factory = _FieldFactory(model, grid)
    w = grid.weights
    nus = np.asarray(nus, dtype=float)
    out = np.empty((len(reps), len(a_values) if a_values is not None else 1, nus.size))
    for k, rep in enumerate(reps):
        if a_values is None:
            fields = [factory.field(seed, rep)]
        else:
            x, y = factory.components(seed, rep)
            fields = [mix(x, y, a) for a in a_values]
        for i, z in enumerate(fields):
            logz = np.log(z)
            for j, nu in enumerate(nus):
                out[k, i, j] = float((w * np.exp(nu * logz)).sum())
    return out


def _run_losses(model, cfg: SimulationConfig, nus, a_values):
    grid = make_grid(cfg.region, cfg.grid_n, cfg.convention)
    reps = np.arange(cfg.replicates)
    if cfg.workers == 1:
        return _loss_chunk((model, grid, cfg.seed, reps, nus, a_values))
    chunks = np.array_split(reps, min(cfg.workers * 4, cfg.replicates))
    jobs = [(model, grid, cfg.seed, c, nus, a_values) for c in chunks if c.size]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        parts = list(pool.map(_loss_chunk, jobs))
    return np.concatenate(parts, axis=0)


def losses(model: DependenceModel, cfg: SimulationConfig, nus) -> np.ndarray:
    """Losses ``L_j`` of every replicate; shape ``(replicates, len(nus))``."""
    nus = _nus(nus)
    return _run_losses(model, cfg, nus, None)[:, 0, :]


def mixture_losses(x_part, y_part, a_values: Sequence[float], cfg: SimulationConfig, nus) -> np.ndarray:
    """Losses of max-mixtures of the same X and Y fields for several weights.

    Shape ``(replicates, len(a_values), len(nus))``.  Column ``a`` equals what
    :func:`losses` returns for ``MaxMixture(a, x_part, y_part)``.
    """
    nus = _nus(nus)
    a_values = [float(a) for a in a_values]
    if any(not 0.0 <= a <= 1.0 for a in a_values):
        raise ValueError("mixing weights must lie in [0, 1]")
    model = MaxMixture(0.5, x_part, y_part)
    return _run_losses(model, cfg, nus, a_values)


def _nus(nus):
    nus = np.atleast_1d(np.asarray(nus, dtype=float))
    if np.any(~((nus > 0) & (nus < 0.5))):
        raise ValueError("nu must lie in (0, 1/2)")
    return nus


def mc_risk(model: DependenceModel, cfg: SimulationConfig, nu):
    """M1 estimate of the risk measure: mean and variance of L with standard errors.

    Returns one :class:`MCEstimate` for scalar ``nu`` and a list otherwise.
    """
    sample = losses(model, cfg, nu)
    out = [summarize(sample[:, j]) for j in range(sample.shape[1])]
    return out[0] if np.ndim(nu) == 0 else out


# ------------------------------------------------------ tail dependence

@dataclass(frozen=True)
class ChiEstimate:
    value: float
    se: float
    pairs: int
    exceedances: int


def _as_stack(realizations) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(realizations, np.ndarray):
        raise TypeError("pass FieldRealization objects so the grid spacing is known")
    reals = list(realizations)
    if not reals:
        raise InsufficientSampleError("no realizations supplied")
    return np.stack([r.values for r in reals]), reals[0].axis


def empirical_chi(realizations, h: float, u: float, min_pairs: int = 1000) -> ChiEstimate:
    """Estimate chi(h, u) = 2 - log P(F(Z1) < u, F(Z2) < u) / log u on grid pairs at distance ``h``.

    Pairs are taken along both grid axes.  The standard error is a
    delete-one-replicate jackknife, which respects the dependence between
    pairs of one field.
    """
    if not 0.0 < u < 1.0:
        raise ValueError("level must lie in (0, 1)")
    z, axis = _as_stack(realizations)
    step = axis[1] - axis[0]
    k = int(round(h / step))
    if k < 1 or abs(k * step - h) > 1e-9 * max(1.0, h) or k >= axis.size:
        raise ValueError(f"distance {h} is not a positive multiple of the grid spacing {step} inside the grid")
    below = np.exp(-1.0 / z) < u
    both = (below[:, k:, :] & below[:, :-k, :]).sum(axis=(1, 2)) + (below[:, :, k:] & below[:, :, :-k]).sum(
        axis=(1, 2))
    per_rep = 2 * (axis.size - k) * axis.size
    reps = z.shape[0]
    pairs = reps * per_rep
    if pairs < min_pairs or reps < 2:
        raise InsufficientSampleError(f"{pairs} pairs from {reps} replicates; need {min_pairs} from at least 2")
    total = int(both.sum())
    exceed = pairs - total
    if total == 0 or exceed == 0:
        raise InsufficientSampleError(f"no pairs on one side of level {u}; the estimate is degenerate")
    log_u = math.log(u)
    value = 2.0 - math.log(total / pairs) / log_u
    with np.errstate(divide="ignore"):
        loo = 2.0 - np.log((total - both) / ((reps - 1) * per_rep)) / log_u
    se = math.sqrt((reps - 1) / reps * ((loo - loo.mean()) ** 2).sum())
    return ChiEstimate(value, se, pairs, exceed)


# ------------------------------------------------------------------- export

def write_binary(path, fields: Sequence[FieldRealization] | FieldRealization, R: float) -> None:
    """Write fields as a 16-byte header (magic, grid_n, R) then row-major little-endian doubles."""
    if isinstance(fields, FieldRealization):
        fields = [fields]
    data = np.stack([f.values for f in fields]).astype("<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, data.shape[1], float(R)))
        fh.write(data.tobytes(order="C"))


def read_binary(path) -> tuple[np.ndarray, float]:
    """Inverse of :func:`write_binary`; returns ``(values[k, n, n], R)``."""
    raw = Path(path).read_bytes()
    magic, n, R = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ValueError(f"{path}: not a field file")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size % (n * n):
        raise ValueError(f"{path}: truncated data")
    return body.reshape(-1, n, n).astype(float), R


def write_csv(path, fields: Sequence[FieldRealization] | FieldRealization) -> None:
    """Long-format CSV with columns replicate, i, j, x, y, value."""
    if isinstance(fields, FieldRealization):
        fields = [fields]
    with open(path, "w", newline="") as fh:
        fh.write("replicate,i,j,x,y,value\n")
        for f in fields:
            n = f.values.shape[0]
            for i in range(n):
                for j in range(n):
                    fh.write(f"{f.replicate},{i},{j},{float(f.axis[i])!r},{float(f.axis[j])!r},{float(f.values[i, j])!r}\n")
