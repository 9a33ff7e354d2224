"""Adaptive Gauss-Kronrod integration engines.

The 1-D engine is vectorised twice over: every panel of a refinement sweep is
evaluated in one call, and the integrand may return a batch of independent
integrands that share the panel layout.  Nested 2-D integrals use the batch
axis to run all inner integrals of an outer sweep at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy import special as _special

# QUADPACK 21-point Kronrod rule and its embedded 10-point Gauss rule.
_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])
NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD = np.concatenate([_WK[:-1], _WK[::-1]])
GAUSS = np.zeros(21)
GAUSS[1:10:2] = _WG
GAUSS[11:20:2] = _WG[::-1]


@dataclass(frozen=True)
class QuadratureConfig:
    """Tolerances and budget shared by every engine.

    ``transform`` selects how a semi-infinite axis is mapped onto a finite
    one: ``"rational"`` uses x = t/(1-t) on (0, 1), ``"log"`` uses x = e^u.
    Rational-map evaluations beyond ``t = 1 - tail_cut`` are skipped and
    their estimated mass is reported as a truncation term.
    """

    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_subdivisions: int = 2000
    transform: str = "rational"
    tail_cut: float = 1e-12

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be at least 1")
        if self.transform not in ("rational", "log"):
            raise ValueError(f"unknown transform {self.transform!r}")

    def tightened(self, factor: float) -> "QuadratureConfig":
        return replace(self, abs_tol=self.abs_tol * factor, rel_tol=self.rel_tol * factor)


class QuadratureError(ArithmeticError):
    """Base class for integration failures."""

    stage: str = ""


class NonConvergence(QuadratureError):
    """The subdivision budget ran out before the tolerance was met."""

    def __init__(self, best_value, best_error, stage: str = ""):
        self.best_value = best_value
        self.best_error = best_error
        self.stage = stage
        where = f" ({stage})" if stage else ""
        super().__init__(
            f"no convergence{where}: best value {np.max(np.abs(best_value)):.6g}, "
            f"error estimate {np.max(best_error):.3g}"
        )


class IntegrandNaN(QuadratureError):
    """The integrand returned a non-finite value."""

    def __init__(self, abscissa, stage: str = ""):
        self.abscissa = abscissa
        self.stage = stage
        where = f" ({stage})" if stage else ""
        super().__init__(f"integrand is not finite at x={abscissa!r}{where}")


@dataclass(frozen=True)
class QuadResult:
    """Integral estimate; unpacks as ``value, error``."""

    value: float | np.ndarray
    error: float | np.ndarray
    evaluations: int = 0
    truncation: float | np.ndarray = 0.0
    diagnostics: dict = field(default_factory=dict)

    def __iter__(self):
        yield self.value
        yield self.error


def adaptive_gk(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    abs_tol: float,
    rel_tol: float,
    max_subdivisions: int = 2000,
    breakpoints: Sequence[float] = (),
    initial_panels: int = 1,
    stage: str = "",
    aux: bool = False,
) -> QuadResult:
    """Globally adaptive G10/K21 integration of a batch of integrands on [a, b].

    ``func`` receives a 1-D array of abscissae and returns an array of shape
    ``batch + (len(x),)``.  All integrands share one panel layout; a panel is
    bisected while it carries a large share of the error of any batch member.
    The error estimate is |K21 - G10| summed over panels.

    With ``aux=True`` the leading output axis must have length 2: entry 0
    drives refinement, entry 1 is integrated alongside without affecting it.
    """
    if not b > a:
        if b == a:
            return QuadResult(0.0, 0.0)
        raise ValueError("integration limits must satisfy a <= b")
    cuts = sorted({float(c) for c in breakpoints if a < c < b})
    edges = [a, *cuts, b]
    lo_l, hi_l = [], []
    for left, right in zip(edges[:-1], edges[1:]):
        grid = np.linspace(left, right, initial_panels + 1)
        lo_l.extend(grid[:-1])
        hi_l.extend(grid[1:])
    lo = np.array(lo_l)
    hi = np.array(hi_l)

    def evaluate(lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        x = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
        y = np.asarray(func(x), dtype=float)
        if not np.all(np.isfinite(y)):
            bad = np.nonzero(~np.isfinite(y.reshape(-1, x.size)))[1]
            raise IntegrandNaN(float(x[bad[0]]), stage)
        y = y.reshape(y.shape[:-1] + (lo.size, 21))
        k = (y @ KRONROD) * half
        g = (y @ GAUSS) * half
        return k, np.abs(k - g), x.size

    kval, kerr, neval = evaluate(lo, hi)
    min_width = (b - a) * 1e-13
    while True:
        ctl_val = kval[0] if aux else kval
        ctl_err = kerr[0] if aux else kerr
        total = ctl_val.sum(axis=-1)
        err = ctl_err.sum(axis=-1)
        tol = np.maximum(abs_tol, rel_tol * np.abs(total))
        if np.all(err <= tol):
            break
        share = ctl_err / tol[..., None]
        share = share.reshape(-1, lo.size).max(axis=0) if share.ndim > 1 else share
        share = np.where(hi - lo > min_width, share, 0.0)
        if not np.any(share > 0):
            # nothing left to split: roundoff floor reached
            break
        order = np.argsort(share)[::-1]
        cum = np.cumsum(share[order])
        excess = cum[-1] - 0.5
        nsplit = int(np.searchsorted(cum, excess) + 1) if excess > 0 else 1
        split = order[: max(1, min(nsplit, order.size))]
        if lo.size + split.size > max_subdivisions:
            raise NonConvergence(total, err, stage)
        keep = np.ones(lo.size, dtype=bool)
        keep[split] = False
        mid = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mid])
        new_hi = np.concatenate([mid, hi[split]])
        nk, ne, n = evaluate(new_lo, new_hi)
        neval += n
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        kval = np.concatenate([kval[..., keep], nk], axis=-1)
        kerr = np.concatenate([kerr[..., keep], ne], axis=-1)
    total = kval.sum(axis=-1)
    err = kerr.sum(axis=-1)
    if np.ndim(total) == 0:
        total, err = float(total), float(err)
    return QuadResult(total, err, neval, diagnostics={"panels": int(lo.size)})


def integrate_1d(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    cfg: QuadratureConfig | None = None,
    breakpoints: Sequence[float] = (),
    stage: str = "",
    endpoint_singular: bool = False,
) -> QuadResult:
    """Integrate ``f`` (vectorised) over [a, b]; ``b`` may be ``inf``.

    A semi-infinite range is mapped onto (0, 1) with x = a + t/(1-t), or
    onto u with x = a + e^u when ``cfg.transform == "log"``.  On a finite
    range, ``endpoint_singular=True`` switches to the double-exponential map
    x = a + (b-a) expit(pi sinh s), which absorbs algebraic endpoint
    singularities such as x^(p-1).
    """
    cfg = cfg or QuadratureConfig()
    if math.isinf(a):
        raise ValueError("lower limit must be finite")
    if not math.isinf(b) and endpoint_singular:
        return _double_exponential(f, a, b, cfg, stage)
    if not math.isinf(b):
        return adaptive_gk(f, a, b, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions, breakpoints, stage=stage)
    if cfg.transform == "log":
        return _semi_infinite_log(f, a, cfg, breakpoints, stage)
    cut = 1.0 - cfg.tail_cut

    def g(t):
        live = t <= cut
        tl = np.where(live, t, 0.0)
        s = 1.0 - tl
        val = np.asarray(f(a + tl / s), dtype=float) / (s * s)
        return np.where(live, val, 0.0)

    tb = [(c - a) / (1.0 + c - a) for c in breakpoints if c > a]
    res = adaptive_gk(g, 0.0, 1.0, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions, tb, stage=stage)
    xc = a + cut / (1.0 - cut)
    trunc = abs(float(np.sum(f(np.array([xc]))))) * xc
    return QuadResult(res.value, res.error + trunc, res.evaluations, trunc, res.diagnostics)


def _double_exponential(f, a, b, cfg, stage):
    width = b - a
    smax = math.asinh(700.0 / math.pi)

    def g(s):
        z = math.pi * np.sinh(s)
        left = _special.expit(z)
        right = _special.expit(-z)
        x = np.where(z < 0, a + width * left, b - width * right)
        inside = (x > a) & (x < b)
        jac = width * math.pi * np.cosh(s) * left * right
        val = np.asarray(f(np.where(inside, x, 0.5 * (a + b))), dtype=float) * jac
        return np.where(inside, val, 0.0)

    res = adaptive_gk(g, -smax, smax, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions, initial_panels=8, stage=stage)
    return res




def _semi_infinite_log(f, a, cfg, breakpoints, stage):
    # integrand mass outside e^-100 < x - a < e^100 is reported as truncation
    ulo, uhi = -100.0, 100.0

    def g(u):
        x = np.exp(u)
        return np.asarray(f(a + x), dtype=float) * x

    ub = [math.log(c - a) for c in breakpoints if c > a]
    res = adaptive_gk(g, ulo, uhi, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions, ub, initial_panels=32, stage=stage)
    edge = np.abs(g(np.array([ulo, uhi])))
    trunc = float(edge.sum())
    return QuadResult(res.value, res.error + trunc, res.evaluations, trunc, res.diagnostics)


def integrate_2d_semiinf(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    cfg: QuadratureConfig | None = None,
    symmetric: bool = False,
    bounds: tuple[float, float] | None = None,
    batch_shape: tuple[int, ...] = (),
) -> QuadResult:
    """Integrate ``f(x1, x2)`` over the quadrant (0, inf)^2 by nested 1-D rules.

    Parameters
    ----------
    f
        Vectorised integrand.  It is called with ``x1`` of shape
        ``batch_shape + (n1, 1)`` and ``x2`` of shape ``(n2,)`` and must
        broadcast to ``batch_shape + (n1, n2)``.
    symmetric
        If ``f(x1, x2) == f(x2, x1)`` only the triangle ``x2 <= x1`` is
        integrated and doubled; the inner limit then follows the diagonal.
    bounds
        Finite limits on the transformed axis: ``t`` for the rational map,
        ``u = log x`` for the log map.  Defaults cover the full quadrant for
        the rational map and ``[-40, 40]`` for the log map.
    """
    cfg = cfg or QuadratureConfig()
    if cfg.transform == "log":
        lo, hi = bounds or (-40.0, 40.0)

        def to_x(t):
            x = np.exp(t)
            return x, x
    else:
        lo, hi = bounds or (0.0, 1.0 - cfg.tail_cut)

        def to_x(t):
            s = 1.0 - t
            return t / s, 1.0 / (s * s)

    return nested_2d(f, to_x, lo, hi, cfg, symmetric, batch_shape)


def nested_2d(f, to_x, lo, hi, cfg, symmetric=False, batch_shape=(), inner_breaks=(), outer_breaks=()):
    """Nested integration over a square (or its lower triangle) in mapped coordinates.

    ``to_x(t)`` returns ``(x, dx/dt)``.  Inner tolerances are a tenth of the
    outer ones; inner error estimates are integrated with the outer rule and
    added to the outer error.
    """
    inner_abs = cfg.abs_tol * 0.1 / max(hi - lo, 1.0)
    inner_rel = cfg.rel_tol * 0.1
    counter = {"inner": 0}

    def outer(t1):
        x1, j1 = to_x(t1)
        x1b = x1[..., :, None]
        if symmetric:
            width = t1 - lo

            def inner(s):
                t2 = lo + width[:, None] * s[None, :]
                x2, j2 = to_x(t2)
                val = f(np.broadcast_to(x1b, batch_shape + x1b.shape), x2) * j2
                return val * width[:, None]

            res = adaptive_gk(inner, 0.0, 1.0, inner_abs, inner_rel, cfg.max_subdivisions, stage="inner")
        else:
            def inner(t2):
                x2, j2 = to_x(t2)
                return f(np.broadcast_to(x1b, batch_shape + x1b.shape), x2) * j2

            res = adaptive_gk(inner, lo, hi, inner_abs, inner_rel, cfg.max_subdivisions, inner_breaks, stage="inner")
        counter["inner"] += res.evaluations
        scale = 2.0 if symmetric else 1.0
        val = np.broadcast_to(res.value, batch_shape + t1.shape) * j1 * scale
        err = np.broadcast_to(res.error, batch_shape + t1.shape) * j1 * scale
        # carry the inner error through the outer rule on a stacked axis
        return np.stack([val, err], axis=0)

    res = adaptive_gk(
        outer, lo, hi, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions, outer_breaks, stage="outer", aux=True
    )
    value = res.value[0]
    inner_err = np.abs(res.value[1])
    error = res.error[0] + inner_err
    if np.ndim(value) == 0:
        value, error = float(value), float(error)
    return QuadResult(value, error, res.evaluations + counter["inner"], diagnostics={"inner_error": inner_err})


def integrate_risk_3d(model, region, nu, cfg: QuadratureConfig | None = None) -> QuadResult:
    """Risk measure R1 as a 3-D integral: distances against the region's density, Q by Hoeffding.

    Errors of the inner 2-D integrals are carried through the outer
    integral and added to its own estimate.
    """
    from .risk import risk_r1

    est = risk_r1(model, region, nu, cfg, route="hoeffding_3d")
    return QuadResult(est.value, est.error_bound, est.diagnostics.get("evaluations", 0),
                      diagnostics=dict(est.diagnostics))
