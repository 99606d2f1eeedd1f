"""The linear model: half-Laplacian on the 2pi-torus, exact-in-time fractional
heat evolution, finite-depth Dirichlet-to-Neumann maps and a harmonic
extension cross-check.

Symbols are fixed as -|k| (half-Laplacian) and -k tanh(k L) (layer of depth L).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate
from scipy.linalg import solve_banded

from .field_core import TWO_PI, PeriodicGrid1D
from .schedule import SlopeSchedule


def _wavenumbers(n: int, L_x: float = TWO_PI) -> np.ndarray:
    return TWO_PI * np.fft.rfftfreq(n, d=L_x / n)


def _apply_multiplier(w, mult_fn, L_x=TWO_PI):
    w = np.asarray(w, dtype=float)
    n = w.shape[-1]
    k = _wavenumbers(n, L_x)
    wh = np.fft.rfft(w, axis=-1)
    return np.fft.irfft(wh * mult_fn(k), n=n, axis=-1)


@dataclass
class SpectralCoeffs:
    """Complex Fourier coefficients for k = -n/2 .. n/2-1 of a real periodic field."""

    k: np.ndarray
    coeffs: np.ndarray

    @classmethod
    def from_field(cls, w) -> "SpectralCoeffs":
        w = np.asarray(w, dtype=float)
        n = w.size
        c = np.fft.fftshift(np.fft.fft(w)) / n
        k = np.arange(-n // 2, n // 2)
        return cls(k, c)

    def to_field(self) -> np.ndarray:
        n = self.coeffs.size
        return np.real(np.fft.ifft(np.fft.ifftshift(self.coeffs) * n))

    def symmetry_defect(self) -> float:
        """max |c(-k) - conj c(k)| over the pairs present (the -n/2 mode is its own partner)."""
        c = self.coeffs
        n = c.size
        pos = c[n // 2 + 1:]
        neg = c[1:n // 2][::-1]
        d = np.max(np.abs(neg - np.conj(pos))) if pos.size else 0.0
        return float(max(d, abs(c[0].imag)))


def half_laplacian(w, L_x: float = TWO_PI) -> np.ndarray:
    """Spectral half-Laplacian: multiplier -|k| along the last axis."""
    return _apply_multiplier(w, lambda k: -k, L_x)


def dtn_strip(w, L: float, L_x: float = TWO_PI) -> np.ndarray:
    """Dirichlet-to-Neumann map of a layer of depth L: multiplier -k tanh(kL)."""
    if not L > 0:
        raise ValueError(f"depth must be positive, got {L}")
    return _apply_multiplier(w, lambda k: -k * np.tanh(k * L), L_x)


def evolve_half_heat(w0, schedule: SlopeSchedule, T: float, t0: Optional[float] = None,
                     L_x: float = TWO_PI) -> np.ndarray:
    """Exact solution of d_t w = a(t) half_laplacian(w) from t0 (default schedule start) to T."""
    _check_schedule(schedule)
    t0 = schedule.t0 if t0 is None else t0
    I = schedule.integral(T, t0)
    return _apply_multiplier(w0, lambda k: np.exp(-k * I), L_x)


def logcosh(x):
    x = np.abs(np.asarray(x, dtype=float))
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


def evolve_strip_heat(w0, schedule: SlopeSchedule, T: float, L0: float,
                      t0: Optional[float] = None, L_x: float = TWO_PI) -> np.ndarray:
    """Exact solution of d_t w = a(t) dtn_strip(w, L(t)) with a deepening layer.

    The layer depth grows with the front, L(t) = L0 + A(t) - A(t0).  Since
    dA = a dt the exponent integrates in closed form:
        int a k tanh(k L) dt = logcosh(k L(T)) - logcosh(k L0).
    """
    _check_schedule(schedule)
    t0 = schedule.t0 if t0 is None else t0
    L1 = L0 + schedule.integral(T, t0)
    return _apply_multiplier(w0, lambda k: np.exp(-(logcosh(k * L1) - logcosh(k * L0))), L_x)


def _check_schedule(schedule):
    if not isinstance(schedule, SlopeSchedule):
        raise TypeError("schedule must be a SlopeSchedule")
    if min(schedule.values) < 0:
        raise ValueError("negative diffusion coefficient")


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def half_laplacian_quadrature(w: Callable, x: float, epsabs: float = 1e-13) -> float:
    """Singular-integral evaluation of the half-Laplacian of a 2pi-periodic callable.

    (1/pi) PV int_R (w(x+y) - w(x)) / y^2 dy, with the image sum over the period
    done in closed form, sum_m (y + 2 pi m)^-2 = 1 / (4 sin^2(y/2)), and the
    principal value taken by symmetrizing in y.
    """
    w0 = w(x)

    def f(y):
        return (w(x + y) + w(x - y) - 2.0 * w0) / (4.0 * math.sin(0.5 * y) ** 2)

    val, _ = integrate.quad(f, 0.0, math.pi, epsabs=epsabs, epsrel=1e-12, limit=400)
    return val / math.pi


@dataclass
class ExtensionReport:
    max_discrepancy: float
    per_mode: dict
    field_discrepancy: float
    passed: bool
    tol: float
    normal_derivative: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {"max_discrepancy": self.max_discrepancy,
                "per_mode": {str(k): v for k, v in self.per_mode.items()},
                "field_discrepancy": self.field_discrepancy, "passed": self.passed, "tol": self.tol}


def _mode_normal_derivative(k: float, height: float, n_z: int) -> float:
    """d_z phi(0) for phi'' = k^2 phi on [0, height], phi(0) = 1, phi' = -k phi on top.

    Second-order finite differences; the Robin row uses a ghost node.
    """
    h = height / n_z
    m = n_z                     # unknowns phi_1..phi_{n_z}
    ab = np.zeros((3, m))
    ab[1, :] = -(2.0 + (k * h) ** 2)
    ab[0, 1:] = 1.0
    ab[2, :-1] = 1.0
    # top: ghost phi_{n+1} = phi_{n-1} - 2 h k phi_n
    ab[1, -1] = -(2.0 + (k * h) ** 2) - 2.0 * h * k
    ab[0, -1] = 0.0
    ab[2, -2] = 2.0
    rhs = np.zeros(m)
    rhs[0] = -1.0
    phi = solve_banded((1, 1), ab, rhs)
    return (-3.0 + 4.0 * phi[0] - phi[1]) / (2.0 * h)


def harmonic_extension_check(w, height: float = TWO_PI, n_z: int = 2048,
                             tol: float = 1e-3, L_x: float = TWO_PI) -> ExtensionReport:
    """Harmonic extension of w into a tall strip, compared with half_laplacian(w).

    Each Fourier mode is extended by finite differences in the vertical with a
    Robin top condition d_z = -|k| (the decaying branch), the normal derivative
    at z = 0 is read off one-sidedly, and two resolutions are Richardson
    extrapolated.
    """
    w = np.asarray(w, dtype=float)
    n = w.size
    k = _wavenumbers(n, L_x)
    wh = np.fft.rfft(w)
    scale = np.abs(wh) * 2.0 / n
    scale[0] = abs(wh[0]) / n
    active = np.nonzero(scale > 1e-14 * max(1.0, scale.max()))[0]
    dn = np.zeros(k.size)
    per_mode = {}
    for j in active:
        if k[j] == 0.0:
            dn[j] = 0.0
        else:
            d1 = _mode_normal_derivative(k[j], height, n_z)
            d2 = _mode_normal_derivative(k[j], height, 2 * n_z)
            dn[j] = (4.0 * d2 - d1) / 3.0
        per_mode[int(round(k[j]))] = float(abs(dn[j] + k[j]))
    deriv = np.fft.irfft(wh * dn, n=n)
    fd = float(np.max(np.abs(deriv - half_laplacian(w, L_x)))) if n else 0.0
    worst = max(per_mode.values()) if per_mode else 0.0
    return ExtensionReport(worst, per_mode, fd, bool(worst <= tol and fd <= tol * max(1.0, np.max(np.abs(w)))),
                           tol, deriv)
