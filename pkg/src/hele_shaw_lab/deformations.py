"""Explicit geometry: the radial Hopf-type barrier, the Kelvin-type inversion
and the conformal shear, with hodograph comparisons for the last two.

Static hodographs follow the convention V(x - eps v(x) e_n) = x_n^+ with the
positive phase above the free boundary.  Points are arrays with the last axis
holding (x', x_n); the implementation is for n = 2 unless stated otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline
from scipy.linalg import expm


# ---------------------------------------------------------------------------
# barrier
# ---------------------------------------------------------------------------

def _radial(n: int):
    """Fundamental-solution profile f and its derivative for dimension n."""
    if n == 2:
        return (lambda r: -np.log(r)), (lambda r: -1.0 / r)
    if n == 3:
        return (lambda r: 1.0 / r), (lambda r: -1.0 / r ** 2)
    raise ValueError("dimension must be 2 or 3")


@dataclass(frozen=True)
class BarrierGeometry:
    """Sphere through -r e_n and the rim |x'| = 1/2 of the unit-half disc.

    p = 1/(8r) - r/2 is the centre height and R = 1/(8r) + r/2 the radius.
    """

    r: float
    n: int = 2
    r0: float = 0.05
    eps: float = 0.0

    def __post_init__(self):
        if not 0 < self.r < self.r0:
            raise ValueError(f"r must lie in (0, {self.r0}), got {self.r}")
        if self.n not in (2, 3):
            raise ValueError("dimension must be 2 or 3")

    @property
    def p(self) -> float:
        return 1.0 / (8.0 * self.r) - self.r / 2.0

    @property
    def R(self) -> float:
        return 1.0 / (8.0 * self.r) + self.r / 2.0

    def membership_residuals(self) -> dict:
        """|(-r e_n) - p e_n| - R and |(1/2, 0) - p e_n|^2 - R^2."""
        south = abs(-self.r - self.p) - self.R
        rim = 0.25 + self.p ** 2 - self.R ** 2
        return {"south_pole": south, "rim": rim, "R_minus_p": self.R - self.p - self.r}

    @property
    def K(self) -> float:
        f, _ = _radial(self.n)
        return (1.0 / 16.0 - self.r) / (f(self.R - 1.0 / 16.0) - f(self.R))

    def U(self, x) -> np.ndarray:
        """Comparison function K (f(|x - p e_n|) - f(R)); x has shape (..., 2) as (|x'|, x_n)."""
        x = np.asarray(x, dtype=float)
        f, _ = _radial(self.n)
        rho = np.hypot(x[..., 0], x[..., 1] - self.p)
        return self.K * (f(rho) - f(self.R))

    def dU_dn(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        _, df = _radial(self.n)
        rho = np.hypot(x[..., 0], x[..., 1] - self.p)
        return self.K * df(rho) * (x[..., 1] - self.p) / rho

    def lower_cap(self, n_theta: int = 4001) -> np.ndarray:
        """Points of the sphere with x_n <= 0 (profile in the (|x'|, x_n) half plane)."""
        th_max = math.acos(self.p / self.R)
        th = np.linspace(0.0, th_max, n_theta)
        return np.stack([self.R * np.sin(th), self.p - self.R * np.cos(th)], axis=-1)


@dataclass
class BarrierReport:
    r: float
    n: int
    minimum: float
    argmin: list
    south_pole: float
    fitted_C: float
    U_on_sphere: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def barrier_lower_bound(geom: BarrierGeometry, n_theta: int = 4001) -> BarrierReport:
    """min of d_n U over the lower cap, evaluated on an angular lattice."""
    pts = geom.lower_cap(n_theta)
    d = geom.dU_dn(pts)
    i = int(np.argmin(d))
    m = float(d[i])
    south = float(geom.dU_dn(np.array([0.0, -geom.r])))
    on = float(np.max(np.abs(geom.U(pts))))
    return BarrierReport(geom.r, geom.n, m, pts[i].tolist(), south, (1.0 - m) / geom.r, on)


def barrier_fd_derivative(geom: BarrierGeometry, x, h: float = 1e-5) -> float:
    """Fourth-order central difference of U in x_n (oracle for ``dU_dn``)."""
    x = np.asarray(x, dtype=float)
    e = np.array([0.0, 1.0])
    return float((-geom.U(x + 2 * h * e) + 8 * geom.U(x + h * e) - 8 * geom.U(x - h * e)
                  + geom.U(x - 2 * h * e)) / (12.0 * h))


def fit_barrier_constant(rs: Sequence[float] = (0.01, 0.02, 0.04), n: int = 2) -> dict:
    """Fitted C = (1 - min d_n U) / r per r and its relative variation."""
    reps = [barrier_lower_bound(BarrierGeometry(r, n)) for r in rs]
    Cs = np.array([rep.fitted_C for rep in reps])
    C = float(np.max(Cs))
    var = float((Cs.max() - Cs.min()) / Cs.mean())
    ok = all(rep.minimum >= 1.0 - C * rep.r - 1e-12 for rep in reps)
    return {"r": list(rs), "C_per_r": Cs.tolist(), "C": C, "variation": var,
            "minimum": [rep.minimum for rep in reps], "passed": bool(ok and var < 0.15)}


# ---------------------------------------------------------------------------
# deformations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DeformationParams:
    eps: float
    B: float = 1.0
    p: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.B >= 1:
            raise ValueError(f"B must be >= 1, got {self.B}")
        if self.rho < 10.0 - 1e-12:
            raise ValueError(f"Kelvin radius rho = 1/(eps B) = {self.rho:.4g} must be >= 10")
        if np.linalg.norm(self.eps * shear_matrix(self.p), 2) > 0.2 + 1e-12:
            raise ValueError("shear too large: need ||eps M|| <= 0.2")

    @property
    def rho(self) -> float:
        return 1.0 / (self.eps * self.B)


def kelvin_map(x, rho: float) -> np.ndarray:
    """Phi(x) = rho^2 ((x - 2 x_n e_n) + rho e_n) / |x - rho e_n|^2 - rho e_n."""
    x = np.asarray(x, dtype=float)
    e = np.zeros(x.shape[-1]); e[-1] = 1.0
    refl = x.copy(); refl[..., -1] = -x[..., -1]
    den = np.sum((x - rho * e) ** 2, axis=-1, keepdims=True)
    return rho ** 2 * (refl + rho * e) / den - rho * e


def kelvin_inverse(y, rho: float) -> np.ndarray:
    """Phi^{-1}(y) = rho^2 ((y - 2 y_n e_n) - rho e_n) / |y + rho e_n|^2 + rho e_n."""
    y = np.asarray(y, dtype=float)
    e = np.zeros(y.shape[-1]); e[-1] = 1.0
    refl = y.copy(); refl[..., -1] = -y[..., -1]
    den = np.sum((y + rho * e) ** 2, axis=-1, keepdims=True)
    return rho ** 2 * (refl - rho * e) / den + rho * e


def kelvin_identity_defect(y, rho: float) -> float:
    """max | |y + rho e_n| |x - rho e_n| / rho^2 - 1 | with x = Phi^{-1}(y)."""
    y = np.asarray(y, dtype=float)
    x = kelvin_inverse(y, rho)
    e = np.zeros(y.shape[-1]); e[-1] = 1.0
    prod = np.linalg.norm(y + rho * e, axis=-1) * np.linalg.norm(x - rho * e, axis=-1) / rho ** 2
    return float(np.max(np.abs(prod - 1.0)))


def kelvin_factor(y, rho: float) -> np.ndarray:
    """(rho / |y + rho e_n|)^{n-2}; identically 1 for n = 2."""
    y = np.asarray(y, dtype=float)
    n = y.shape[-1]
    if n == 2:
        return np.ones(y.shape[:-1])
    e = np.zeros(n); e[-1] = 1.0
    return (rho / np.linalg.norm(y + rho * e, axis=-1)) ** (n - 2)


def shear_matrix(p) -> np.ndarray:
    """M = p_n Id + e_n (x) p' - p' (x) e_n."""
    p = np.asarray(p, dtype=float)
    n = p.size
    M = p[-1] * np.eye(n)
    M[-1, :-1] += p[:-1]
    M[:-1, -1] -= p[:-1]
    return M


def shear_exp(p, eps: float, sign: int = -1) -> np.ndarray:
    """e^{sign eps M} by scaling and squaring (scipy.linalg.expm)."""
    return expm(sign * eps * shear_matrix(p))


def shear_closed_form(p, eps: float, sign: int = -1) -> np.ndarray:
    """n = 2: e^{s eps M} = e^{s eps p_n} (cos(s eps p_1) Id + sin(s eps p_1) J), J = [[0,-1],[1,0]]."""
    p1, p2 = float(p[0]), float(p[1])
    a = sign * eps
    J = np.array([[0.0, -1.0], [1.0, 0.0]])
    return math.exp(a * p2) * (math.cos(a * p1) * np.eye(2) + math.sin(a * p1) * J)


def conformality_defect(p, eps: float) -> float:
    E = shear_exp(p, eps, -1)
    n = E.shape[0]
    return float(np.max(np.abs(E @ E.T - math.exp(-2.0 * eps * float(p[-1])) * np.eye(n))))


@dataclass
class SampledField:
    """Values of V on a rectangular (x', x_n) lattice; NaN marks masked nodes."""

    x1: np.ndarray
    xn: np.ndarray
    values: np.ndarray          # shape (len(x1), len(xn))

    @classmethod
    def from_callable(cls, V: Callable, x1, xn) -> "SampledField":
        X, Y = np.meshgrid(x1, xn, indexing="ij")
        return cls(np.asarray(x1, float), np.asarray(xn, float), V(np.stack([X, Y], -1)))

    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x1, self.xn, indexing="ij")
        return np.stack([X, Y], -1)

    def interpolator(self):
        if np.any(np.isnan(self.values)):
            raise ValueError("cannot interpolate a field with masked nodes")
        spl = RectBivariateSpline(self.x1, self.xn, self.values, kx=3, ky=3, s=0)
        lo1, hi1 = self.x1[0], self.x1[-1]
        lon, hin = self.xn[0], self.xn[-1]

        def f(pts):
            pts = np.asarray(pts, dtype=float)
            a, b = pts[..., 0], pts[..., 1]
            out = spl.ev(np.clip(a, lo1, hi1), np.clip(b, lon, hin))
            bad = (a < lo1 - 1e-12) | (a > hi1 + 1e-12) | (b < lon - 1e-12) | (b > hin + 1e-12)
            return np.where(bad, np.nan, out)
        return f

    def laplacian_residual(self) -> float:
        """max |5-point Laplacian| over interior unmasked nodes (uniform spacing assumed)."""
        h1 = self.x1[1] - self.x1[0]
        hn = self.xn[1] - self.xn[0]
        V = self.values
        L = ((V[2:, 1:-1] - 2 * V[1:-1, 1:-1] + V[:-2, 1:-1]) / h1 ** 2
             + (V[1:-1, 2:] - 2 * V[1:-1, 1:-1] + V[1:-1, :-2]) / hn ** 2)
        return float(np.nanmax(np.abs(L)))


def kelvin(V, rho: float):
    """Kelvin-type transform V~(y) = (rho/|y + rho e_n|)^{n-2} V(Phi^{-1}(y)).

    ``V`` is a callable on point arrays or a SampledField; samples are pulled
    back through the bicubic interpolant and nodes whose preimage leaves the
    sampled rectangle come back masked (NaN).
    """
    if rho <= 0:
        raise ValueError("rho must be positive")
    if isinstance(V, SampledField):
        if max(np.max(np.abs(V.x1)), np.max(np.abs(V.xn))) > rho / 4.0:
            raise ValueError("samples must lie within |x| <= rho/4")
        f = V.interpolator()
        pts = V.points()
        vals = kelvin_factor(pts, rho) * f(kelvin_inverse(pts, rho))
        return SampledField(V.x1, V.xn, vals)
    return lambda y: kelvin_factor(y, rho) * V(kelvin_inverse(y, rho))


def shear(V, p, eps: float):
    """V_p with V_p(e^{-eps M} x) = V(x), i.e. V_p(y) = V(e^{eps M} y)."""
    E = shear_exp(p, eps, +1)
    if np.linalg.norm(eps * shear_matrix(p), 2) > 0.2 + 1e-12:
        raise ValueError("shear too large: need ||eps M|| <= 0.2")
    if isinstance(V, SampledField):
        f = V.interpolator()
        pts = V.points()
        return SampledField(V.x1, V.xn, f(pts @ E.T))
    return lambda y: V(np.asarray(y, dtype=float) @ E.T)


# ---------------------------------------------------------------------------
# static hodographs and the comparison lemmas
# ---------------------------------------------------------------------------

def static_hodograph(V: Callable, eps: float, pts, s_max: float = 50.0,
                     tol: float = 1e-13) -> np.ndarray:
    """Solve V(y - eps s e_n) = y_n for s by vectorized bisection.

    V must be non-decreasing along e_n.  The predicate V(y - eps s e_n) > y_n
    moves the bracket right; on x_n = 0 this converges to the free boundary.
    """
    pts = np.asarray(pts, dtype=float)
    lo = np.full(pts.shape[:-1], -s_max)
    hi = np.full(pts.shape[:-1], s_max)
    yn = pts[..., -1]
    n_it = int(math.ceil(math.log2(2 * s_max / tol)))
    for _ in range(n_it):
        mid = 0.5 * (lo + hi)
        q = pts.copy()
        q[..., -1] = yn - eps * mid
        right = V(q) > yn
        lo = np.where(right, mid, lo)
        hi = np.where(right, hi, mid)
    return 0.5 * (lo + hi)


def half_ball_points(n_side: int = 41) -> np.ndarray:
    """Lattice points of the closed unit half disc B_1^+ (n = 2)."""
    x1 = np.linspace(-1.0, 1.0, n_side)
    xn = np.linspace(0.0, 1.0, (n_side + 1) // 2)
    X, Y = np.meshgrid(x1, xn, indexing="ij")
    keep = X ** 2 + Y ** 2 <= 1.0 + 1e-12
    return np.stack([X[keep], Y[keep]], -1)


def planar_V(x):
    x = np.asarray(x, dtype=float)
    return np.maximum(x[..., -1], 0.0)


def V_from_hodograph(v: Callable, eps: float, s_max: float = 10.0) -> Callable:
    """Inverse construction: the V whose hodograph is v, i.e. V(z) = x_n^+ where
    z_n = x_n - eps v(z', x_n).  Requires |eps d_n v| < 1."""
    def V(z):
        z = np.asarray(z, dtype=float)
        lo = np.full(z.shape[:-1], -s_max)
        hi = np.full(z.shape[:-1], s_max)
        zp = z[..., :-1]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            g = mid - eps * v(np.concatenate([zp, np.maximum(mid, 0)[..., None]], -1)) - z[..., -1]
            lo = np.where(g < 0, mid, lo)
            hi = np.where(g < 0, hi, mid)
        return np.maximum(0.5 * (lo + hi), 0.0)
    return V


def kelvin_correction(pts, B: float) -> np.ndarray:
    """Quadratic correction of the Kelvin hodograph for n = 2: +B(|x'|^2 - x_n^2).

    Expanding Phi^{-1} to first order in 1/rho gives this sign; the planar case
    is checked directly in the tests.
    """
    pts = np.asarray(pts, dtype=float)
    return B * (np.sum(pts[..., :-1] ** 2, axis=-1) - pts[..., -1] ** 2)


@dataclass
class DeformationReport:
    kind: str
    eps: float
    N: float
    discrepancy: float
    witness: list
    n_points: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def verify_A6(V: Callable, v: Callable, params: DeformationParams,
              pts: Optional[np.ndarray] = None) -> DeformationReport:
    """sup over B_1^+ of |v~ - (v + B(|x'|^2 - x_n^2))| with v~ the hodograph of the
    Kelvin transform of V at rho = 1/(eps B).  n = 2."""
    pts = half_ball_points() if pts is None else np.asarray(pts, dtype=float)
    if pts.shape[-1] != 2:
        raise NotImplementedError("the Kelvin comparison is implemented for n = 2")
    Vt = kelvin(V, params.rho)
    vt = static_hodograph(Vt, params.eps, pts)
    vv = v(pts)
    d = np.abs(vt - (vv + kelvin_correction(pts, params.B)))
    i = int(np.argmax(d))
    N = float(np.max(np.abs(vv))) + 1.0
    return DeformationReport("kelvin", params.eps, N, float(d[i]), pts[i].tolist(), int(d.size))


def verify_A7(V: Callable, v: Callable, params: DeformationParams,
              pts: Optional[np.ndarray] = None) -> DeformationReport:
    """sup over B_1^+ of |v_p - (v + p.x)| with v_p the hodograph of the shear of V."""
    pts = half_ball_points() if pts is None else np.asarray(pts, dtype=float)
    Vp = shear(V, params.p, params.eps)
    vp = static_hodograph(Vp, params.eps, pts)
    vv = v(pts)
    d = np.abs(vp - (vv + pts @ np.asarray(params.p, dtype=float)))
    i = int(np.argmax(d))
    N = float(np.max(np.abs(vv))) + 1.0
    return DeformationReport("shear", params.eps, N, float(d[i]), pts[i].tolist(), int(d.size))


def sweep_slope(eN: Sequence[float], disc: Sequence[float]) -> float:
    return float(np.polyfit(np.log(eN), np.log(disc), 1)[0])
