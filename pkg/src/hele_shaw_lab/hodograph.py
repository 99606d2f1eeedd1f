"""Hodograph transform of simulated solutions.

Conventions
-----------
The simulator keeps the fluid below the front.  Heights are measured as
depth below the reference front, zeta = gamma_ref(t) - z, which plays the
role of the normalized vertical coordinate x_n >= 0.  The trace is

    ubar(x', 0, t) = (gamma0 + A(t) - gamma(x', t)) / eps,

so a lagging front gives positive values.  The interior field solves

    u(x', gamma_ref(t) - x_n - eps * ubar) = x_n

along every vertical line.  With this orientation the free boundary law reads

    d_t ubar = [(a - 1)/eps + a d_n ubar - eps |D ubar|^2] / (1 + eps d_n ubar),

which both sides of ``boundary_relation_residual`` evaluate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .field_core import MultiValuedSample, linf_norm
from .hele_shaw import Trajectory, normalized_time
from .laplace_strip import InterfaceState, ScalarField2D
from .schedule import SlopeSchedule


@dataclass
class HodographTrace:
    """ubar(x', 0, t) on the (t, x') lattice of a trajectory's snapshots."""

    values: np.ndarray
    x: np.ndarray
    t: np.ndarray
    eps: float
    gamma0: float
    schedule: SlopeSchedule
    A: np.ndarray
    t_end: float
    L: Optional[np.ndarray] = None

    @property
    def t_norm(self) -> np.ndarray:
        return normalized_time(self.t, self.t_end)

    @property
    def N(self) -> float:
        return linf_norm(self.values) + 1.0

    @property
    def h_x(self) -> float:
        return float(self.x[1] - self.x[0])

    def window(self, t_lo: float, t_hi: float) -> "HodographTrace":
        """Sub-trace over simulator times t_lo <= t <= t_hi (same t_end)."""
        sel = (self.t >= t_lo - 1e-12) & (self.t <= t_hi + 1e-12)
        L = None if self.L is None else self.L[sel]
        return HodographTrace(self.values[sel], self.x, self.t[sel], self.eps, self.gamma0,
                              self.schedule, self.A[sel], self.t_end, L)


def _check_eps(eps):
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")


def trace_from_interface(traj: Trajectory, eps: float) -> HodographTrace:
    _check_eps(eps)
    vals = (traj.reference[:, None] - traj.gammas) / eps
    return HodographTrace(vals, traj.x.copy(), traj.times.copy(), float(eps), traj.gamma0,
                          traj.schedule, traj.A.copy(), float(traj.times[-1]), traj.mean_depth)


@dataclass
class HodographField:
    """Interior hodograph on samples (x_n, x') at one time."""

    values: MultiValuedSample
    xn: np.ndarray
    x: np.ndarray
    t: float
    eps: float
    monotone: np.ndarray

    def normal_derivative_at_boundary(self) -> np.ndarray:
        """One-sided second-order d_n ubar at x_n = 0 from the first rows (midpoints)."""
        v = self.values.mid()
        h = self.xn[1] - self.xn[0]
        return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)


def _cubic_eval(yn, un, y):
    """Lagrange cubic through 4 nodes per entry; yn, un shape (..., 4)."""
    out = np.zeros_like(y)
    for a in range(4):
        w = np.ones_like(y)
        for b in range(4):
            if a != b:
                w = w * (y - yn[..., b]) / (yn[..., a] - yn[..., b])
        out = out + w * un[..., a]
    return out


def interior_hodograph(u: ScalarField2D, eps: float, xn: np.ndarray,
                       s: Optional[InterfaceState] = None, bisect_tol: float = 1e-12) -> HodographField:
    """Solve u(x', gamma_ref - x_n - eps*ubar) = x_n on every vertical line.

    Monotone columns use bracketed bisection on a local cubic interpolant in
    the mapped coordinate.  Columns failing the monotonicity check return the
    hull of all crossings found by a row-by-row scan.  Values above the
    bottom pressure have no root in the strip and come back empty.
    """
    _check_eps(eps)
    s = s or u.state
    g = s.grid
    y = g.y
    U = u.values                       # (n_y, n_x), decreasing in y when monotone
    xn = np.asarray(xn, dtype=float)
    ns, nx, ny = xn.size, g.n_x, g.n_y
    D = s.depth
    ref = s.reference_height
    lo = np.full((ns, nx), np.nan)
    hi = np.full((ns, nx), np.nan)
    mono = np.all(np.diff(U, axis=0) < 0, axis=0)

    # monotone columns: bracket by counting rows above the level
    cols = np.nonzero(mono)[0]
    if cols.size:
        Uc = U[:, cols]                                   # (ny, nc)
        lvl = xn[:, None]                                 # (ns, 1)
        cnt = np.sum(Uc[None, :, :] > lvl[:, :, None], axis=1)   # (ns, nc) rows strictly above level
        ok = (cnt >= 1) & (lvl <= Uc[0][None, :])
        j = np.clip(cnt, 1, ny - 1)                        # root in [y_{j-1}, y_j]
        base = np.clip(j - 2, 0, ny - 4)
        idx = base[..., None] + np.arange(4)
        yn = y[idx]
        un = np.take_along_axis(np.broadcast_to(Uc.T[None], (ns,) + Uc.T.shape), idx, axis=2)
        a = y[j - 1].astype(float)
        b = y[j].astype(float)
        fa = _cubic_eval(yn, un, a) - lvl
        n_iter = int(math.ceil(math.log2(max(g.h_y, 1e-300) / bisect_tol))) + 1
        for _ in range(n_iter):
            m = 0.5 * (a + b)
            fm = _cubic_eval(yn, un, m) - lvl
            left = np.sign(fm) == np.sign(fa)
            a = np.where(left, m, a)
            fa = np.where(left, fm, fa)
            b = np.where(left, b, m)
        yr = 0.5 * (a + b)
        # exact hits on nodes (e.g. the interface row at level 0)
        hit = Uc[None, :, :] == lvl[:, :, None]
        any_hit = np.any(hit, axis=1)
        yr = np.where(any_hit, y[np.argmax(hit, axis=1)], yr)
        z = yr * D[cols][None, :] - s.H
        val = (ref - xn[:, None] - z) / eps
        val = np.where(ok | any_hit, val, np.nan)
        lo[:, cols] = val
        hi[:, cols] = val

    for i in np.nonzero(~mono)[0]:
        col = U[:, i]
        for q, level in enumerate(xn):
            f = col - level
            roots = []
            for jj in range(ny - 1):
                if f[jj] == 0.0:
                    roots.append(y[jj])
                if f[jj] * f[jj + 1] < 0:
                    roots.append(y[jj] + (y[jj + 1] - y[jj]) * f[jj] / (f[jj] - f[jj + 1]))
            if f[-1] == 0.0:
                roots.append(y[-1])
            if roots:
                zs = np.array(roots) * D[i] - s.H
                vals = (ref - level - zs) / eps
                lo[q, i], hi[q, i] = vals.min(), vals.max()
    return HodographField(MultiValuedSample(lo, hi), xn, g.horizontal.x.copy(), s.t, float(eps), mono)


def default_xn_samples(s: InterfaceState, n: int = 8, scale: float = 1.0) -> np.ndarray:
    """Levels x_n = j * h_n with h_n the physical vertical spacing near the front."""
    h = scale * s.grid.h_y * float(np.mean(s.depth))
    return h * np.arange(n)


@dataclass
class BoundaryRelation:
    """Both sides of the boundary relation on interior snapshot times."""

    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    linear_term: np.ndarray
    quadratic_term: np.ndarray
    residual: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    @property
    def max_quadratic(self) -> float:
        return float(np.max(np.abs(self.quadratic_term)))


def boundary_relation_residual(trace: HodographTrace, traj: Trajectory,
                               n_levels: int = 4) -> BoundaryRelation:
    """Residual of d_t ubar = [(a-1)/eps + a d_n ubar - eps |D ubar|^2] / (1 + eps d_n ubar).

    d_t uses the forward difference of the trace in time, which matches the
    explicit stepper exactly when snapshots are taken every step, D ubar a spectral
    derivative in x', and d_n ubar the interior hodograph rows near x_n = 0
    computed from the stored pressure fields.
    """
    if traj.pressures is None:
        raise ValueError("trajectory was run without keep_pressure=True")
    eps = trace.eps
    v = trace.values
    t = trace.t
    n = len(t)
    if n < 3:
        raise ValueError("need at least 3 snapshots")
    k = 2 * np.pi * np.fft.rfftfreq(v.shape[1], d=trace.h_x)
    lhs, rhs, lin, quad = [], [], [], []
    for i in range(1, n - 1):
        dt_u = (v[i + 1] - v[i]) / (t[i + 1] - t[i])
        s = traj.state(i)
        levels = default_xn_samples(s, n_levels)
        hf = interior_hodograph(traj.pressures[i], eps, levels, s)
        dn = hf.normal_derivative_at_boundary()
        vh = np.fft.rfft(v[i])
        dh = 1j * k * vh
        dh[-1] = 0.0
        dx = np.fft.irfft(dh, n=v.shape[1])
        a = float(traj.flux[i])
        den = 1.0 + eps * dn
        r_lin = ((a - 1.0) / eps + a * dn) / den
        r_quad = -eps * dx ** 2 / den
        lhs.append(dt_u)
        rhs.append(r_lin + r_quad)
        lin.append(r_lin)
        quad.append(r_quad)
    lhs, rhs = np.array(lhs), np.array(rhs)
    return BoundaryRelation(t[1:-1], lhs, rhs, np.array(lin), np.array(quad), lhs - rhs)
