"""Time stepping of the free boundary law and linear-stability tools.

The simulator runs forward in time t in [t0, T] with fluid below the front
x_n = gamma(x', t) and the reference planar front at gamma0 + A(t).  The
normalized frame used by the analysis modules has t <= 0 with t = 0 at the
end of the run (see ``normalized_time``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import List, Optional

import numpy as np

from .laplace_strip import (InterfaceState, ScalarField2D, SolveInfo, boundary_gradient,
                            build_mapping, solve_pressure, vertical_speed)
from .schedule import SlopeSchedule


class StabilityError(ValueError):
    """Time step exceeds the explicit stability bound."""


class SteepnessError(ValueError):
    """Interface slope exceeded the graph guard max|gamma'| <= 1."""


class RunAborted(RuntimeError):
    """A step failed; ``trajectory`` holds everything up to the failure."""

    def __init__(self, msg, trajectory):
        super().__init__(msg)
        self.trajectory = trajectory


def dt_max(s: InterfaceState, t1: Optional[float] = None) -> float:
    """Largest stable explicit step: 0.5 h_x / (a pi) with a the largest flux in the step."""
    a = s.schedule.max_on(s.t, s.t if t1 is None else t1)
    return 0.5 * s.grid.h_x / (a * math.pi)


def dispersion_oracle(k, a, L):
    """Linear decay rate -a k tanh(k L) of a mode cos(k x') on a layer of depth L."""
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or np.any(np.asarray(L) <= 0) or np.any(np.asarray(a) <= 0):
        raise ValueError("dispersion_oracle needs k >= 0, a > 0, L > 0")
    out = -np.asarray(a) * k * np.tanh(k * np.asarray(L))
    return float(out) if out.ndim == 0 else out


def normalized_time(t, t_end: float):
    """Map simulator time to the normalized frame in which the run ends at t = 0."""
    return np.asarray(t, dtype=float) - t_end


@dataclass
class StepResult:
    state: InterfaceState
    grad: np.ndarray
    flux: float
    info: SolveInfo
    pressure: ScalarField2D


def step(s: InterfaceState, dt: float, pressure_guess: Optional[np.ndarray] = None) -> StepResult:
    """Advance the front by one forward Euler step.

    The bottom flux used for the solve is the step average of the schedule,
    (A(t + dt) - A(t)) / dt, so a planar front lands on gamma0 + A(t) for any
    placement of the schedule's jumps.
    """
    if not dt > 0:
        raise StabilityError(f"dt must be positive, got {dt}")
    lim = dt_max(s, s.t + dt)
    if dt > lim * (1 + 1e-12):
        raise StabilityError(f"dt={dt:.6g} exceeds the stability bound dt_max={lim:.6g}")
    coef = build_mapping(s)
    slope = float(np.max(np.abs(coef.dD)))
    if slope > 1.0:
        raise SteepnessError(f"max|gamma'| = {slope:.4g} exceeds the graph guard 1")
    t1 = s.t + dt
    A1 = s.schedule.integral(t1, s.schedule.t0)
    flux = (A1 - s.A) / dt
    u = solve_pressure(s, flux=flux, x0=pressure_guess, coef=coef)
    speed = vertical_speed(u, s, coef)
    grad = boundary_gradient(u, s, coef)
    new = replace(s, gamma=s.gamma + dt * speed, t=t1, A=A1)
    new.check_pinching()
    return StepResult(new, grad, flux, u.info, u)


@dataclass
class Trajectory:
    """Snapshots of a run.

    ``grad`` holds |Du| on the interface from the solve at each snapshot state
    (with the flux applied over the following step).
    """

    grid: object
    H: float
    gamma0: float
    schedule: SlopeSchedule
    dt: float
    times: np.ndarray
    gammas: np.ndarray
    grad: np.ndarray
    A: np.ndarray
    flux: np.ndarray
    iterations: np.ndarray
    pressures: Optional[list] = None
    telemetry: list = field(default_factory=list)

    @property
    def n_snapshots(self) -> int:
        return len(self.times)

    @property
    def x(self) -> np.ndarray:
        return self.grid.horizontal.x

    @property
    def reference(self) -> np.ndarray:
        return self.gamma0 + self.A

    @property
    def mean_depth(self) -> np.ndarray:
        return np.mean(self.gammas, axis=1) + self.H

    def state(self, i: int) -> InterfaceState:
        return InterfaceState(self.grid, self.gammas[i], float(self.times[i]), self.H,
                              self.schedule, float(self.A[i]), self.gamma0)

    def normalized_times(self) -> np.ndarray:
        return normalized_time(self.times, float(self.times[-1]))


def run(s0: InterfaceState, dt: float, n_steps: int, snapshot_every: int = 1,
        keep_pressure: bool = False, telemetry: bool = False) -> Trajectory:
    """Repeated ``step`` with fixed dt; deterministic.

    Snapshots are taken at step indices divisible by ``snapshot_every`` and at
    the final step.  On failure a RunAborted carrying the partial trajectory
    is raised.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    snapshot_every = max(1, int(snapshot_every))
    times, gammas, grads, As, fluxes, its, press, tel = [], [], [], [], [], [], [], []
    s = s0
    guess = None

    def record(st, grad, flux, it, p):
        times.append(st.t); gammas.append(np.array(st.gamma)); grads.append(grad)
        As.append(st.A); fluxes.append(flux); its.append(it)
        if keep_pressure:
            press.append(p)

    def build():
        return Trajectory(s0.grid, s0.H, s0.gamma0, s0.schedule, dt, np.array(times),
                          np.array(gammas).reshape(len(times), s0.grid.n_x),
                          np.array(grads).reshape(len(times), s0.grid.n_x), np.array(As),
                          np.array(fluxes), np.array(its, dtype=int),
                          press if keep_pressure else None, tel)

    try:
        for n in range(n_steps):
            res = step(s, dt, guess)
            if telemetry:
                tel.append({"step": n, "t": s.t, "iterations": res.info.iterations,
                            "residuals": res.info.residuals})
            if n % snapshot_every == 0:
                record(s, res.grad, res.flux, res.info.iterations, res.pressure)
            guess = res.pressure.values
            s = res.state
        # closing snapshot with its own solve
        u = solve_pressure(s, x0=guess)
        record(s, boundary_gradient(u, s), u.flux, u.info.iterations, u)
    except Exception as exc:  # noqa: BLE001 - re-raised with the partial record
        raise RunAborted(f"run aborted at t={s.t:.6g}: {exc}", build()) from exc
    return build()


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def mode_amplitude(gammas: np.ndarray, k: int) -> np.ndarray:
    """Amplitude of cos/sin mode k in each row (2|c_k|/n)."""
    g = np.atleast_2d(gammas)
    c = np.fft.rfft(g, axis=1)[:, k]
    return 2.0 * np.abs(c) / g.shape[1]


def _logcosh(x):
    x = np.abs(np.asarray(x, dtype=float))
    return x + np.log1p(np.exp(-2.0 * x)) - math.log(2.0)


@dataclass
class DispersionFit:
    k: int
    measured: float
    predicted: float
    relative_error: float
    fit_residual: float
    L_mean: float
    a_mean: float
    half_laplacian_rate: float
    relative_error_half_laplacian: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def fit_dispersion(traj: Trajectory, k: int, t_start: Optional[float] = None,
                   t_end: Optional[float] = None) -> DispersionFit:
    """Least-squares decay rate of mode k against the depth-aware oracle.

    The layer deepens at rate a while the mode decays, so the prediction is the
    time average of -a k tanh(k L(t)) over the window.  Because dA = a dt this
    average is exactly -(logcosh(k L_end) - logcosh(k L_start)) / (t_end - t_start).
    """
    t = traj.times
    sel = np.ones_like(t, dtype=bool)
    if t_start is not None:
        sel &= t >= t_start
    if t_end is not None:
        sel &= t <= t_end
    t = t[sel]
    amp = mode_amplitude(traj.gammas[sel], k)
    if len(t) < 3:
        raise ValueError("need at least 3 snapshots in the fit window")
    y = np.log(amp)
    coef = np.polyfit(t, y, 1)
    resid = y - np.polyval(coef, t)
    L = traj.mean_depth[sel]
    span = t[-1] - t[0]
    pred = -(_logcosh(k * L[-1]) - _logcosh(k * L[0])) / span
    a_mean = (traj.A[sel][-1] - traj.A[sel][0]) / span
    half = -a_mean * k
    meas = float(coef[0])
    return DispersionFit(k, meas, float(pred), abs(meas - pred) / abs(pred),
                         float(np.sqrt(np.mean(resid ** 2))), float(np.mean(L)), float(a_mean),
                         float(half), abs(meas - half) / abs(half))


@dataclass
class FlatnessReport:
    ok: bool
    eps: float
    margin: float
    worst_time: float
    worst_node: int

    def to_json(self) -> dict:
        return dict(self.__dict__)


def flatness_check(traj: Trajectory, eps: float, reference: Optional[np.ndarray] = None) -> FlatnessReport:
    """Graph form of the planar sandwich: |gamma - (gamma0 + A(t))| <= eps for every snapshot."""
    ref = traj.reference if reference is None else np.asarray(reference)
    dev = np.abs(traj.gammas - ref[:, None])
    i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
    worst = float(dev[i, j])
    return FlatnessReport(worst <= eps, float(eps), float(eps - worst), float(traj.times[i]), int(j))
