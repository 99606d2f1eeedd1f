"""Grids, interval-valued samples, the boundary-joining parabolic metric and
truncated Holder seminorms.

Everything in here is a pure function of its inputs.  Reductions run in a
fixed order so results are reproducible bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy import optimize

TWO_PI = 2.0 * np.pi


class LatticeError(ValueError):
    """Raised when a requested step or radius is not representable on the lattice."""


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PeriodicGrid1D:
    """Uniform periodic grid on [0, L_x)."""

    n_x: int
    L_x: float = TWO_PI

    def __post_init__(self):
        n = int(self.n_x)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n_x must be a power of two >= 8, got {self.n_x}")
        if not self.L_x > 0:
            raise ValueError(f"L_x must be positive, got {self.L_x}")

    @property
    def h(self) -> float:
        return self.L_x / self.n_x

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.h

    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers matching ``np.fft.rfft`` ordering."""
        return TWO_PI * np.fft.rfftfreq(self.n_x, d=self.h)

    def lattice_multiple(self, h: float, *, tol: float = 1e-9) -> int:
        """Return m with h = m*h_x, or raise LatticeError."""
        m = h / self.h
        mi = int(round(m))
        if mi < 1 or abs(m - mi) > tol * max(1.0, m):
            lo = max(1, math.floor(m)) * self.h
            hi = max(1, math.ceil(m)) * self.h
            raise LatticeError(
                f"step h={h!r} is not a positive integer multiple of h_x={self.h!r} "
                f"(ratio {m:.6g}); use h={lo!r} or h={hi!r}, i.e. m*grid.h for an integer m"
            )
        return mi


@dataclass(frozen=True)
class StripGrid:
    """Periodic-in-x, bounded-in-y grid on the mapped strip.

    Row 0 is the fixed bottom (y = 0), row n_y-1 the image of the free boundary.
    """

    horizontal: PeriodicGrid1D
    n_y: int

    def __post_init__(self):
        if int(self.n_y) < 8:
            raise ValueError(f"n_y must be >= 8, got {self.n_y}")

    @property
    def n_x(self) -> int:
        return self.horizontal.n_x

    @property
    def h_x(self) -> float:
        return self.horizontal.h

    @property
    def h_y(self) -> float:
        return 1.0 / (self.n_y - 1)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_y)

    @property
    def shape(self):
        return (self.n_y, self.n_x)


# ---------------------------------------------------------------------------
# multi-valued samples
# ---------------------------------------------------------------------------

class MultiValuedSample:
    """Interval-valued samples [lo, hi]; NaN in both arrays marks the empty set.

    Arrays of any shape are allowed.  By convention the last axis is x'.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi=None):
        lo = np.array(lo, dtype=float)
        hi = lo.copy() if hi is None else np.array(hi, dtype=float)
        if lo.shape != hi.shape:
            raise ValueError(f"lo/hi shape mismatch {lo.shape} vs {hi.shape}")
        empty = np.isnan(lo) | np.isnan(hi)
        lo[empty] = np.nan
        hi[empty] = np.nan
        bad = ~empty & (lo > hi)
        if np.any(bad):
            idx = tuple(int(i[0]) for i in np.nonzero(bad))
            raise ValueError(f"lo > hi at node {idx}: [{lo[idx]}, {hi[idx]}]")
        self.lo = lo
        self.hi = hi

    @classmethod
    def singleton(cls, values) -> "MultiValuedSample":
        return cls(values)

    @classmethod
    def empty(cls, shape) -> "MultiValuedSample":
        return cls(np.full(shape, np.nan))

    @classmethod
    def coerce(cls, v) -> "MultiValuedSample":
        return v if isinstance(v, MultiValuedSample) else cls(v)

    @property
    def shape(self):
        return self.lo.shape

    @property
    def empty_mask(self) -> np.ndarray:
        return np.isnan(self.lo)

    @property
    def any_empty(self) -> bool:
        return bool(np.any(self.empty_mask))

    @property
    def singleton_mask(self) -> np.ndarray:
        return ~self.empty_mask & (self.lo == self.hi)

    def is_singleton(self) -> bool:
        return bool(np.all(self.singleton_mask))

    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def __getitem__(self, key) -> "MultiValuedSample":
        return MultiValuedSample(self.lo[key], self.hi[key])

    def roll(self, shift: int, axis: int = -1) -> "MultiValuedSample":
        return MultiValuedSample(np.roll(self.lo, shift, axis), np.roll(self.hi, shift, axis))

    # interval arithmetic (Minkowski semantics on hulls)
    def __add__(self, other):
        if isinstance(other, MultiValuedSample):
            return MultiValuedSample(self.lo + other.lo, self.hi + other.hi)
        return MultiValuedSample(self.lo + other, self.hi + other)

    __radd__ = __add__

    def __neg__(self):
        return MultiValuedSample(-self.hi, -self.lo)

    def __sub__(self, other):
        if isinstance(other, MultiValuedSample):
            return MultiValuedSample(self.lo - other.hi, self.hi - other.lo)
        return MultiValuedSample(self.lo - other, self.hi - other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "MultiValuedSample":
        """Multiply by a scalar or a nonnegative/negative array elementwise."""
        c = np.asarray(c, dtype=float)
        a, b = self.lo * c, self.hi * c
        return MultiValuedSample(np.minimum(a, b), np.maximum(a, b))

    def __mul__(self, c):
        return self.scale(c)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self.scale(1.0 / np.asarray(c, dtype=float))

    def __repr__(self):
        return f"MultiValuedSample(shape={self.shape}, singleton={self.is_singleton()})"


Field = Union[np.ndarray, MultiValuedSample]


def _region(v: MultiValuedSample, region) -> MultiValuedSample:
    if region is None:
        return v
    if isinstance(region, np.ndarray) and region.dtype == bool:
        return MultiValuedSample(v.lo[region], v.hi[region])
    return v[region]


def oscillation(v: Field, region=None) -> float:
    """sup minus inf over the region, interval aware; +inf if any value is empty."""
    w = _region(MultiValuedSample.coerce(v), region)
    if w.lo.size == 0:
        raise ValueError("oscillation over an empty region")
    if w.any_empty:
        return math.inf
    return float(np.max(w.hi) - np.min(w.lo))


def linf_norm(v: Field, region=None) -> float:
    """sup of |value| over the region; +inf if any value is empty."""
    w = _region(MultiValuedSample.coerce(v), region)
    if w.lo.size == 0:
        raise ValueError("norm over an empty region")
    if w.any_empty:
        return math.inf
    return float(max(np.max(np.abs(w.lo)), np.max(np.abs(w.hi))))


# ---------------------------------------------------------------------------
# parabolic metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParabolicPoint:
    x: tuple
    xn: float
    t: float

    def __post_init__(self):
        x = self.x
        if np.isscalar(x):
            x = (float(x),)
        object.__setattr__(self, "x", tuple(float(c) for c in x))
        if self.xn < 0:
            raise ValueError(f"x_n must be >= 0, got {self.xn}")

    def scaled(self, rho: float) -> "ParabolicPoint":
        return ParabolicPoint(tuple(rho * c for c in self.x), rho * self.xn, rho * self.t)

    def as_list(self):
        return [list(self.x), self.xn, self.t]


def _as_point(p) -> ParabolicPoint:
    if isinstance(p, ParabolicPoint):
        return p
    x, xn, t = p
    return ParabolicPoint(x, xn, t)


def metric_d(p, q) -> float:
    """Boundary-joining parabolic distance between (x', x_n, t) and (y', y_n, s).

    Same time: Euclidean distance in (x', x_n).  Different times: a path must
    descend to x_n = 0, travel in space-time along the boundary and climb back
    up, so d = inf_{z,w} |x - z| + |(z,t) - (w,s)| + |w - y|.  The infimum is
    attained with the Minkowski inequality and equals
    sqrt(|x' - y'|^2 + (x_n + y_n + |t - s|)^2).
    """
    p, q = _as_point(p), _as_point(q)
    dx2 = sum((a - b) ** 2 for a, b in zip(p.x, q.x))
    if p.t == q.t:
        return math.sqrt(dx2 + (p.xn - q.xn) ** 2)
    return math.sqrt(dx2 + (p.xn + q.xn + abs(p.t - q.t)) ** 2)


def metric_d_arrays(x1, xn1, t1, x2, xn2, t2) -> np.ndarray:
    """Vectorized metric_d for a single horizontal coordinate, with broadcasting."""
    x1, xn1, t1, x2, xn2, t2 = (np.asarray(a, dtype=float) for a in (x1, xn1, t1, x2, xn2, t2))
    dx2 = (x1 - x2) ** 2
    same = t1 == t2
    dn = np.where(same, xn1 - xn2, xn1 + xn2 + np.abs(t1 - t2))
    return np.sqrt(dx2 + dn * dn)


def metric_d_waypoints(p, q, n_grid: int = 64) -> float:
    """Direct evaluation of the waypoint infimum (grid search plus local polish).

    Kept as an independent check on the closed form in ``metric_d``.
    """
    p, q = _as_point(p), _as_point(q)
    x = np.array(p.x + (p.xn,))
    y = np.array(q.x + (q.xn,))
    if p.t == q.t:
        return float(np.linalg.norm(x - y))
    dt = abs(p.t - q.t)
    px, qx = np.array(p.x), np.array(q.x)

    def cost(zw):
        k = len(px)
        z, w = zw[:k], zw[k:]
        return (math.sqrt(np.sum((px - z) ** 2) + p.xn ** 2)
                + math.sqrt(np.sum((z - w) ** 2) + dt ** 2)
                + math.sqrt(np.sum((w - qx) ** 2) + q.xn ** 2))

    # waypoints only matter along the segment between the projections
    lo = np.minimum(px, qx) - 1.0
    hi = np.maximum(px, qx) + 1.0
    best, arg = math.inf, None
    if len(px) == 1:
        g = np.linspace(lo[0], hi[0], n_grid)
        Z, W = np.meshgrid(g, g, indexing="ij")
        c = (np.sqrt((px[0] - Z) ** 2 + p.xn ** 2) + np.sqrt((Z - W) ** 2 + dt ** 2)
             + np.sqrt((W - qx[0]) ** 2 + q.xn ** 2))
        i = np.unravel_index(np.argmin(c), c.shape)
        best, arg = float(c[i]), np.array([Z[i], W[i]])
    else:
        rng = np.random.default_rng(0)
        for _ in range(n_grid * 4):
            zw = np.concatenate([rng.uniform(lo, hi), rng.uniform(lo, hi)])
            c = cost(zw)
            if c < best:
                best, arg = c, zw
    res = optimize.minimize(cost, arg, method="Nelder-Mead",
                            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000})
    return float(min(best, res.fun))


# ---------------------------------------------------------------------------
# truncated Holder seminorm
# ---------------------------------------------------------------------------

@dataclass
class SeminormReport:
    alpha: float
    r: float
    region: str
    value: float
    witness: Optional[tuple] = None
    n_points: int = 0
    n_pairs: int = 0

    def to_json(self) -> dict:
        w = None
        if self.witness is not None:
            w = [pt.as_list() for pt in self.witness]
        val = self.value if math.isfinite(self.value) else "inf"
        return {"alpha": self.alpha, "r": self.r, "region": self.region, "value": val,
                "witness": w, "n_points": self.n_points, "n_pairs": self.n_pairs}


def trunc_holder(v: Field, coords: Sequence[np.ndarray], alpha: float, r: float = 0.0,
                 region: str = "", chunk: int = 2048) -> SeminormReport:
    """Truncated Holder seminorm of sampled values.

    Parameters
    ----------
    v : array or MultiValuedSample
        samples; flattened together with the coordinates
    coords : (x, x_n, t) arrays broadcastable to the shape of ``v``
    alpha : exponent in (0, 1]
    r : only pairs with d(p, q) > r are considered

    Returns the sup of |a - b| / d^alpha over pairs, where a and b range over
    interval endpoints, along with a witness pair.
    """
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    v = MultiValuedSample.coerce(v)
    if v.lo.size == 0:
        raise ValueError("trunc_holder over an empty region")
    if v.any_empty:
        return SeminormReport(alpha, r, region, math.inf, None, v.lo.size, 0)
    x, xn, t = (np.broadcast_to(np.asarray(c, dtype=float), v.shape).ravel() for c in coords)
    lo, hi = v.lo.ravel(), v.hi.ravel()
    n = lo.size
    best, bi, bj, npairs = 0.0, -1, -1, 0
    for s in range(0, n, chunk):
        e = min(n, s + chunk)
        d = metric_d_arrays(x[s:e, None], xn[s:e, None], t[s:e, None], x[None], xn[None], t[None])
        diff = np.maximum(np.abs(lo[s:e, None] - hi[None]), np.abs(hi[s:e, None] - lo[None]))
        ok = d > r
        npairs += int(np.count_nonzero(ok))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(ok, diff / np.where(ok, d, 1.0) ** alpha, -1.0)
        k = int(np.argmax(q))
        if q.flat[k] > best:
            best = float(q.flat[k])
            bi, bj = s + k // n, k % n
    witness = None
    if bi >= 0:
        witness = (ParabolicPoint(x[bi], xn[bi], t[bi]), ParabolicPoint(x[bj], xn[bj], t[bj]))
    return SeminormReport(alpha, r, region, best, witness, n, npairs // 2)


# ---------------------------------------------------------------------------
# difference quotients
# ---------------------------------------------------------------------------

@dataclass
class DiffQuotient:
    """Result of a centered difference quotient.

    ``values`` sits at ``centers`` (node positions, shifted by half a cell when
    the step is an odd multiple of h_x).
    """

    values: MultiValuedSample
    centers: np.ndarray
    m: int
    h: float


def diff_quotient(v: Field, grid: PeriodicGrid1D, h: float, e: int = 1,
                  beta: float = 0.0) -> DiffQuotient:
    """(v(x + h e/2) - v(x - h e/2)) / h^beta along the last axis, periodic in x'.

    ``h`` must be an integer multiple of the grid spacing.  ``e`` is +1 or -1.
    """
    if e not in (1, -1):
        raise ValueError("e must be +1 or -1 for a one-dimensional horizontal direction")
    if not 0 <= beta <= 1:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    m = grid.lattice_multiple(h)
    v = MultiValuedSample.coerce(v)
    if v.shape[-1] != grid.n_x:
        raise ValueError(f"last axis has {v.shape[-1]} nodes, grid has {grid.n_x}")
    up, down = -(m - m // 2), m // 2
    plus, minus = v.roll(up), v.roll(down)
    d = plus - minus if e == 1 else minus - plus
    hb = (m * grid.h) ** beta
    centers = grid.x + (0.5 * grid.h if m % 2 else 0.0)
    return DiffQuotient(d / hb, centers, m, m * grid.h)


def second_difference(v: Field, m: int, axis: int = -1, periodic: bool = True) -> MultiValuedSample:
    """v(x + m) + v(x - m) - 2 v(x) on the index lattice (interval aware)."""
    v = MultiValuedSample.coerce(v)
    if periodic:
        return v.roll(-m, axis) + v.roll(m, axis) - v.scale(2.0)
    sl = [slice(None)] * v.lo.ndim
    n = v.shape[axis]
    sl_c = list(sl); sl_c[axis] = slice(m, n - m)
    sl_p = list(sl); sl_p[axis] = slice(2 * m, n)
    sl_m = list(sl); sl_m[axis] = slice(0, n - 2 * m)
    return v[tuple(sl_p)] + v[tuple(sl_m)] - v[tuple(sl_c)].scale(2.0)
