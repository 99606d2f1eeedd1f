"""Pressure solve on the fluid layer -H < x_n < gamma(x') mapped to a strip.

The change of variables y = (x_n + H) / D(x'), D = gamma + H turns the
Laplacian into div(G grad u) with

    G = [[D, -y D'], [-y D', (1 + y^2 D'^2) / D]],   det G = 1.

The discretization is the Hessian of a discrete Dirichlet energy (edge terms
for the diagonal of G, cell-centred terms for the off-diagonal), so the matrix
is symmetric positive definite and linear profiles of planar layers are
reproduced exactly.  Solves use preconditioned CG where the preconditioner
is the exact inverse of the planar operator with the mean depth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .field_core import PeriodicGrid1D, StripGrid
from .schedule import SlopeSchedule


class PinchingError(ValueError):
    """The fluid layer has become too thin to resolve."""


class SolverError(RuntimeError):
    """Iterative solve did not reach the requested residual."""

    def __init__(self, msg, history):
        super().__init__(msg)
        self.history = list(history)


@dataclass(frozen=True)
class InterfaceState:
    """Periodic interface graph x_n = gamma(x') over a bottom at x_n = -H.

    ``gamma0`` is the height of the reference planar front at A = 0, so the
    reference front at time t sits at gamma0 + A(t).
    """

    grid: StripGrid
    gamma: np.ndarray
    t: float = 0.0
    H: float = 2.0
    schedule: SlopeSchedule = field(default_factory=SlopeSchedule.constant)
    A: float = 0.0
    gamma0: float = 0.0

    def __post_init__(self):
        g = np.array(self.gamma, dtype=float)
        if g.shape != (self.grid.n_x,):
            raise ValueError(f"gamma must have shape ({self.grid.n_x},), got {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)
        if not self.H > 0:
            raise ValueError(f"depth H must be positive, got {self.H}")

    @classmethod
    def initial(cls, grid: StripGrid, gamma, H=2.0, schedule=None, gamma0=0.0):
        schedule = schedule or SlopeSchedule.constant(1.0)
        return cls(grid, gamma, schedule.t0, H, schedule, 0.0, gamma0)

    @property
    def a(self) -> float:
        return self.schedule.value(self.t)

    @property
    def depth(self) -> np.ndarray:
        return self.gamma + self.H

    @property
    def mean_depth(self) -> float:
        return float(np.mean(self.gamma)) + self.H

    @property
    def reference_height(self) -> float:
        return self.gamma0 + self.A

    def check_pinching(self):
        lim = -self.H + 4.0 * self.grid.h_y * (self.H + float(np.max(self.gamma)))
        gmin = float(np.min(self.gamma))
        if not gmin > lim:
            raise PinchingError(f"fluid layer pinches: min gamma {gmin:.6g} <= {lim:.6g}")


# ---------------------------------------------------------------------------
# mapping
# ---------------------------------------------------------------------------

def spectral_derivative(f: np.ndarray, grid: PeriodicGrid1D) -> np.ndarray:
    k = grid.wavenumbers()
    fh = np.fft.rfft(f)
    dh = 1j * k * fh
    if grid.n_x % 2 == 0:
        dh[-1] = 0.0
    return np.fft.irfft(dh, n=grid.n_x)


def spectral_shift(f: np.ndarray, grid: PeriodicGrid1D, s: float) -> np.ndarray:
    """Trigonometric interpolant of f evaluated at x + s."""
    k = grid.wavenumbers()
    f0 = np.fft.rfft(f)
    fh = f0 * np.exp(1j * k * s)
    if grid.n_x % 2 == 0:
        # the real Nyquist term cos(k_N x) only picks up cos(k_N s) on the lattice
        fh[-1] = f0[-1].real * math.cos(k[-1] * s)
    return np.fft.irfft(fh, n=grid.n_x)


@dataclass
class MappingCoefficients:
    """Coefficients of the mapped operator.

    Node arrays have shape (n_y, n_x); staggered arrays are named by where
    they live: ``g11_xedge`` on (y_j, x_{i+1/2}), ``g22_yedge`` on
    (y_{j+1/2}, x_i), ``g12_cell`` on (y_{j+1/2}, x_{i+1/2}).
    """

    grid: StripGrid
    D: np.ndarray
    dD: np.ndarray
    D_mid: np.ndarray
    dD_mid: np.ndarray
    g11_xedge: np.ndarray
    g22_yedge: np.ndarray
    g12_cell: np.ndarray

    def matrix_at_nodes(self) -> np.ndarray:
        """Full 2x2 coefficient matrix at every node, shape (n_y, n_x, 2, 2)."""
        y = self.grid.y[:, None]
        D, dD = self.D[None, :], self.dD[None, :]
        G = np.empty(self.grid.shape + (2, 2))
        G[..., 0, 0] = D
        G[..., 0, 1] = G[..., 1, 0] = -y * dD
        G[..., 1, 1] = (1.0 + (y * dD) ** 2) / D
        return G

    @property
    def planar(self) -> bool:
        return bool(np.all(self.dD == 0.0))


def build_mapping(s: InterfaceState) -> MappingCoefficients:
    s.check_pinching()
    g = s.grid
    hx = g.horizontal
    D = s.depth
    if np.ptp(D) == 0.0:
        dD = np.zeros_like(D)
        D_mid = D.copy()
        dD_mid = np.zeros_like(D)
    else:
        dD = spectral_derivative(D, hx)
        D_mid = spectral_shift(D, hx, 0.5 * hx.h)
        dD_mid = spectral_shift(dD, hx, 0.5 * hx.h)
    y = g.y
    y_half = 0.5 * (y[1:] + y[:-1])
    g11 = np.broadcast_to(D_mid[None, :], g.shape).copy()
    g22 = (1.0 + (y_half[:, None] * dD[None, :]) ** 2) / D[None, :]
    g12 = -y_half[:, None] * dD_mid[None, :]
    return MappingCoefficients(g, D, dD, D_mid, dD_mid, g11, g22, g12)


# ---------------------------------------------------------------------------
# operator
# ---------------------------------------------------------------------------

class MappedOperator:
    """Matrix-free SPD operator on the unknown rows 0..n_y-2 (top row is Dirichlet)."""

    def __init__(self, coef: MappingCoefficients):
        g = coef.grid
        self.coef = coef
        self.grid = g
        hx, hy = g.h_x, g.h_y
        ny = g.n_y
        w = np.full(ny, hy)
        w[0] = 0.5 * hy
        self.w = w
        # edge weights already multiplied by the geometric factors
        self.cx = (w[:-1, None] * coef.g11_xedge[:-1]) / hx
        self.cy = hx * coef.g22_yedge / hy
        self.cc = coef.g12_cell
        self._cross = not coef.planar

    def apply_full(self, U: np.ndarray) -> np.ndarray:
        """K applied to a full (n_y, n_x) array; returns rows 0..n_y-2."""
        hx, hy = self.grid.h_x, self.grid.h_y
        Ui = U[:-1]
        fx = self.cx * (np.roll(Ui, -1, axis=1) - Ui)
        out = np.roll(fx, 1, axis=1) - fx
        fy = self.cy * (U[1:] - U[:-1])
        out -= fy
        out[1:] += fy[:-1]
        if self._cross:
            Ur = np.roll(U, -1, axis=1)
            dxi = (Ur[:-1] - U[:-1]) + (Ur[1:] - U[1:])
            dy = (U[1:] - U[:-1]) + (Ur[1:] - Ur[:-1])
            # h_y G12 u_y / 2 and h_x G12 u_xi / 2 with cell-averaged differences
            P = 0.25 * self.cc * dy
            Q = 0.25 * self.cc * dxi
            low = (-P - Q) + np.roll(P - Q, 1, axis=1)
            up = (-P + Q) + np.roll(P + Q, 1, axis=1)
            out += low
            out[1:] += up[:-1]
        return out

    def apply(self, u: np.ndarray) -> np.ndarray:
        U = np.zeros(self.grid.shape)
        U[:-1] = u
        return self.apply_full(U)


class PlanarPreconditioner:
    """Exact inverse of the mapped operator for a flat layer of depth Dm."""

    _eig_cache: dict = {}

    def __init__(self, grid: StripGrid, Dm: float):
        self.grid = grid
        ny, nx = grid.n_y, grid.n_x
        hx, hy = grid.h_x, grid.h_y
        key = ny
        if key not in self._eig_cache:
            m = ny - 1
            T = 2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
            T[0, 0] = 1.0
            w = np.full(m, hy)
            w[0] = 0.5 * hy
            s = 1.0 / np.sqrt(w)
            lam, Q = np.linalg.eigh(s[:, None] * T * s[None, :])
            self._eig_cache[key] = (lam, Q, s)
        lam, Q, s = self._eig_cache[key]
        self.Q, self.s = Q, s
        theta = 2.0 * np.pi * np.arange(nx // 2 + 1) / nx
        lam_x = (2.0 - 2.0 * np.cos(theta)) * Dm / hx
        self.inv = 1.0 / (lam_x[None, :] + (hx / (Dm * hy)) * lam[:, None])

    def __call__(self, r: np.ndarray) -> np.ndarray:
        rh = np.fft.rfft(r * self.s[:, None], axis=1)
        zh = self.Q @ ((self.Q.T @ rh) * self.inv)
        return np.fft.irfft(zh, n=self.grid.n_x, axis=1) * self.s[:, None]


@dataclass
class SolveInfo:
    iterations: int
    residuals: list
    converged: bool
    tol: float

    def telemetry(self):
        return [{"iteration": i, "relative_residual": r} for i, r in enumerate(self.residuals)]


def pcg(apply, b, precond, x0=None, tol=1e-10, maxiter=100):
    """Preconditioned conjugate gradients with relative-residual stopping."""
    bnorm = float(np.sqrt(np.sum(b * b)))
    if bnorm == 0.0:
        return np.zeros_like(b), SolveInfo(0, [0.0], True, tol)
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply(x) if x0 is not None else b.copy()
    hist = [float(np.sqrt(np.sum(r * r))) / bnorm]
    if hist[-1] <= tol:
        return x, SolveInfo(0, hist, True, tol)
    z = precond(r)
    p = z.copy()
    rz = float(np.sum(r * z))
    for it in range(1, maxiter + 1):
        Ap = apply(p)
        alpha = rz / float(np.sum(p * Ap))
        x += alpha * p
        r -= alpha * Ap
        hist.append(float(np.sqrt(np.sum(r * r))) / bnorm)
        if hist[-1] <= tol:
            return x, SolveInfo(it, hist, True, tol)
        z = precond(r)
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"PCG did not converge in {maxiter} iterations (residual {hist[-1]:.3e} > {tol:.1e})", hist)


# ---------------------------------------------------------------------------
# pressure
# ---------------------------------------------------------------------------

@dataclass
class ScalarField2D:
    """Pressure on the mapped strip, rows ordered bottom (y = 0) to interface (y = 1)."""

    values: np.ndarray
    state: InterfaceState
    flux: float
    info: Optional[SolveInfo] = None

    @property
    def grid(self) -> StripGrid:
        return self.state.grid

    def physical_z(self) -> np.ndarray:
        """Physical heights x_n of every node, shape (n_y, n_x)."""
        return self.grid.y[:, None] * self.state.depth[None, :] - self.state.H


def iteration_cap(grid: StripGrid) -> int:
    return int(math.ceil(10.0 * math.sqrt(grid.n_x * grid.n_y)))


def solve_pressure(s: InterfaceState, flux: Optional[float] = None, top=None,
                   tol: float = 1e-10, x0: Optional[np.ndarray] = None,
                   coef: Optional[MappingCoefficients] = None) -> ScalarField2D:
    """Solve div(G grad u) = 0 with u = top on y = 1 and -u_z = flux on the bottom.

    ``flux`` defaults to a(t) of the state; ``top`` defaults to 0.
    """
    g = s.grid
    a = s.a if flux is None else float(flux)
    if a < 0:
        raise ValueError(f"bottom flux must be nonnegative, got {a}")
    coef = coef or build_mapping(s)
    op = MappedOperator(coef)
    b = np.zeros((g.n_y - 1, g.n_x))
    b[0] = a * g.h_x
    if top is not None:
        U = np.zeros(g.shape)
        U[-1] = top
        b -= op.apply_full(U)
    M = PlanarPreconditioner(g, float(np.mean(coef.D)))
    u, info = pcg(op.apply, b, M, x0=None if x0 is None else x0[:-1],
                  tol=tol, maxiter=iteration_cap(g))
    U = np.zeros(g.shape)
    U[:-1] = u
    if top is not None:
        U[-1] = top
    return ScalarField2D(U, s, a, info)


def boundary_normal_derivative(u: ScalarField2D) -> np.ndarray:
    """d u / d y on the interface row by the 3-point one-sided stencil."""
    U = u.values
    return (3.0 * U[-1] - 4.0 * U[-2] + U[-3]) / (2.0 * u.grid.h_y)


def boundary_gradient(u: ScalarField2D, s: Optional[InterfaceState] = None,
                      coef: Optional[MappingCoefficients] = None) -> np.ndarray:
    """|Du| on the free boundary, per node."""
    s = s or u.state
    coef = coef or build_mapping(s)
    uy = boundary_normal_derivative(u)
    return np.abs(uy) * np.sqrt(1.0 + coef.dD ** 2) / coef.D


def vertical_speed(u: ScalarField2D, s: Optional[InterfaceState] = None,
                   coef: Optional[MappingCoefficients] = None) -> np.ndarray:
    """Graph speed sqrt(1 + gamma'^2) |Du| of the free boundary."""
    s = s or u.state
    coef = coef or build_mapping(s)
    uy = boundary_normal_derivative(u)
    return np.abs(uy) * (1.0 + coef.dD ** 2) / coef.D
