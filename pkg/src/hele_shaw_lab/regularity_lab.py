"""Measurements that turn the regularity statements into numbers.

All routines take hodograph traces (or plain arrays) and return small report
objects with a ``to_json`` method.  Times inside a trace are converted to the
normalized frame (run ends at t = 0) before any cylinder or ball is built.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate

from .field_core import (MultiValuedSample, PeriodicGrid1D, SeminormReport, oscillation,
                         trunc_holder)
from .frac_heat import evolve_half_heat, evolve_strip_heat
from .hodograph import HodographTrace
from .schedule import SlopeSchedule


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else ("-inf" if f < 0 else "nan"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, SeminormReport):
        return obj.to_json()
    return obj


class _Report:
    def to_json(self) -> dict:
        return _jsonable(asdict(self))


def periodic_distance(x, x0, L=2 * np.pi):
    d = np.abs(np.asarray(x) - x0) % L
    return np.minimum(d, L - d)


# ---------------------------------------------------------------------------
# linearization
# ---------------------------------------------------------------------------

@dataclass
class GapReport(_Report):
    eps: float
    gap: float
    t: list
    series: list
    multiplier: str


def linearization_gap(trace: HodographTrace, schedule: Optional[SlopeSchedule] = None,
                      multiplier: str = "strip") -> GapReport:
    """Sup-norm distance between the simulated trace and the exact linear evolution.

    The linear model starts from the first trace slice and is advanced with the
    run's flux schedule, using the finite-depth symbol with the run's initial
    mean depth (``multiplier="strip"``) or the half-space symbol ("half").
    """
    if schedule is not None and schedule != trace.schedule:
        raise ValueError("schedule does not match the one that generated the trace")
    v0 = trace.values[0]
    t0 = float(trace.t[0])
    gaps = []
    for i, t in enumerate(trace.t):
        if multiplier == "strip":
            if trace.L is None:
                raise ValueError("trace carries no depth record; use multiplier='half'")
            w = evolve_strip_heat(v0, trace.schedule, float(t), float(trace.L[0]), t0=t0)
        elif multiplier == "half":
            w = evolve_half_heat(v0, trace.schedule, float(t), t0=t0)
        else:
            raise ValueError(f"unknown multiplier {multiplier!r}")
        gaps.append(float(np.max(np.abs(trace.values[i] - w))))
    return GapReport(trace.eps, max(gaps), list(map(float, trace.t)), gaps, multiplier)


@dataclass
class SweepFit(_Report):
    eps: list
    gaps: list
    slope: float
    intercept: float


def loglog_slope(eps: Sequence[float], gaps: Sequence[float]) -> SweepFit:
    e = np.log(np.asarray(eps, dtype=float))
    g = np.log(np.asarray(gaps, dtype=float))
    slope, icpt = np.polyfit(e, g, 1)
    return SweepFit(list(map(float, eps)), list(map(float, gaps)), float(slope), float(icpt))


# ---------------------------------------------------------------------------
# oscillation decay
# ---------------------------------------------------------------------------

@dataclass
class DecayReport(_Report):
    scales: list
    theta_hat: float
    alpha_hat: float
    mu: float
    truncation: float
    degenerate: bool
    passed: bool


def cylinder_mask(x, t_norm, x0: float, r: float, h_x: float, h_t: float, L_x=2 * np.pi):
    """Lattice realization of B_r(x0) x (-r, 0], radius rounded outward to lattice multiples."""
    rx = math.ceil(r / h_x - 1e-9) * h_x
    rt = math.ceil(r / h_t - 1e-9) * h_t if h_t > 0 else r
    mx = periodic_distance(x, x0, L_x) <= rx + 1e-12
    mt = (t_norm >= -rt - 1e-12) & (t_norm <= 1e-12)
    return mt[:, None] & mx[None, :]


def _snapshot_spacing(t):
    d = np.diff(t)
    return float(np.min(d)) if d.size else 0.0


def oscillation_decay(trace: HodographTrace, eps: Optional[float] = None, mu: float = 0.5,
                      C: float = 4.0, R0: Optional[float] = None, x0: float = 0.0,
                      min_scales: int = 3) -> DecayReport:
    """osc of the trace over nested cylinders Q_{R0 mu^m}, m = 0, 1, ... while radius >= C eps.

    The per-scale contraction factor is osc(Q_{m+1}) / osc(Q_m); theta_hat is
    one minus the largest factor and alpha_hat = ln(1 - theta_hat) / ln(mu).
    """
    eps = trace.eps if eps is None else eps
    tp = trace.t_norm
    h_t = _snapshot_spacing(trace.t)
    h_x = trace.h_x
    if R0 is None:
        R0 = min(-float(tp[0]), math.pi)
    trunc = C * eps
    radii = []
    r = R0
    while r >= trunc - 1e-12:
        radii.append(r)
        r *= mu
    if not radii:
        raise ValueError(f"base radius {R0} is below the truncation scale {trunc}")
    if radii[-1] < max(h_x, h_t):
        raise ValueError(f"cylinder radius {radii[-1]:.4g} is below the lattice spacing")
    if R0 > -float(tp[0]) + 1e-9:
        raise ValueError(f"base radius {R0} exceeds the trace duration {-float(tp[0]):.4g}")
    scales = []
    prev = None
    for m, r in enumerate(radii):
        mask = cylinder_mask(trace.x, tp, x0, r, h_x, h_t)
        osc = oscillation(trace.values[mask])
        factor = None if prev is None or prev == 0 else osc / prev
        scales.append({"m": m, "radius": r, "osc": osc, "factor": factor,
                       "n_samples": int(mask.sum())})
        prev = osc
    factors = [s["factor"] for s in scales[1:] if s["factor"] is not None]
    degenerate = scales[0]["osc"] == 0.0 or not factors
    if degenerate:
        theta, alpha = 0.0, 0.0
    else:
        theta = 1.0 - max(factors)
        alpha = math.log(1.0 - theta) / math.log(mu) if theta < 1 else math.inf
    passed = (not degenerate and len(scales) >= min_scales and theta > 0
              and all(0 < f <= 1 for f in factors))
    return DecayReport(scales, theta, alpha, mu, trunc, degenerate, passed)


# ---------------------------------------------------------------------------
# difference-quotient ladder
# ---------------------------------------------------------------------------

@dataclass
class Rung(_Report):
    k: int
    beta: float
    eta: float
    r_k: float
    radius: float
    truncation: float
    h_values: list
    value: float
    per_h: list
    witness: Optional[list]
    passed: bool


@dataclass
class LadderReport(_Report):
    alpha: float
    beta_final: float
    rungs: list
    n_rungs: int
    requested_rungs: int
    insufficient: bool
    bound: float
    passed: bool


def ladder_schedule(alpha: float) -> list:
    """(k, beta_k, eta_k, r_k) for k = 0 .. floor(1/alpha) - 2 with beta = 1 - alpha/2."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    beta = 1.0 - alpha / 2.0
    M = int(math.floor(1.0 / alpha + 1e-12))
    out = []
    for k in range(0, max(M - 1, 1)):
        out.append((k, alpha / 2.0 + k * alpha, (1.0 - beta) * alpha ** k, 16.0 ** (-(k + 1))))
    return out


def _stride(physical: float, h: float, what: str) -> int:
    m = physical / h
    mi = int(round(m))
    if mi < 1 or abs(m - mi) > 1e-6 * max(1, m):
        raise ValueError(f"{what} {physical} is not a multiple of the lattice spacing {h}")
    return mi


def quotient_seminorm(trace: HodographTrace, beta: float, eta: float, radius: float,
                      trunc: float, h_values: Sequence[float], x0: float = 0.0,
                      sample_dx: Optional[float] = None, sample_dt: Optional[float] = None):
    """max over h of the truncated C^eta seminorm of delta_h ubar / h^beta over B^d_radius.

    The ball is centred at (x0, x_n = 0, t = 0) of the normalized frame; on the
    boundary slice it is the half disc |x' - x0|^2 + t^2 < radius^2, t <= 0.
    Returns (value, witness_report, per_h list).
    """
    x, tp = trace.x, trace.t_norm
    h_x = trace.h_x
    h_t = _snapshot_spacing(trace.t)
    n_x = x.size
    sx = 1 if sample_dx is None else _stride(sample_dx, h_x, "sample_dx")
    t_idx = np.arange(tp.size)
    if sample_dt is not None and h_t > 0:
        st = _stride(sample_dt, h_t, "sample_dt")
        t_idx = t_idx[((tp.size - 1 - t_idx) % st) == 0]
    best, best_rep, per_h = 0.0, None, []
    grid = PeriodicGrid1D(n_x, float(h_x * n_x))
    for h in h_values:
        m = grid.lattice_multiple(h)
        shift_up, shift_dn = m - m // 2, m // 2
        vals = trace.values[t_idx]
        q = (np.roll(vals, -shift_up, axis=1) - np.roll(vals, shift_dn, axis=1)) / (m * h_x) ** beta
        centers = x + (0.5 * h_x if m % 2 else 0.0)
        cx = np.arange(0, n_x, sx)
        dx = periodic_distance(centers[cx], x0, n_x * h_x)
        T = tp[t_idx]
        inside = (dx[None, :] ** 2 + T[:, None] ** 2) < radius ** 2
        xs = np.broadcast_to(centers[cx][None, :], inside.shape)[inside]
        ts = np.broadcast_to(T[:, None], inside.shape)[inside]
        qs = q[:, cx][inside]
        if qs.size < 2:
            per_h.append({"h": h, "value": None})
            continue
        # unwrap x' around x0 so Euclidean distances are the periodic ones
        xs = x0 + ((xs - x0 + 0.5 * n_x * h_x) % (n_x * h_x)) - 0.5 * n_x * h_x
        rep = trunc_holder(qs, (xs, np.zeros_like(xs), ts), eta, trunc)
        per_h.append({"h": h, "value": rep.value})
        if rep.value > best:
            best, best_rep = rep.value, rep
    return best, best_rep, per_h


def bootstrap_ladder(trace: HodographTrace, alpha_cfg: float, eps: Optional[float] = None,
                     C: float = 4.0, rho0: float = 1.6, ratio: float = 0.5,
                     bound: float = 10.0, x0: float = 0.0, sample_dx: Optional[float] = None,
                     sample_dt: Optional[float] = None, h_unit: Optional[float] = None,
                     min_rungs: int = 3) -> LadderReport:
    """Evaluate the difference-quotient ladder beta_k = alpha/2 + k alpha, eta_k = (1-beta) alpha^k.

    The exact radii r_k = 16^-(k+1) are reported, but they fall below the
    truncation scale C eps at any practical eps, so each rung is evaluated on
    the lattice-feasible ball radius rho_k = rho0 * ratio^k with truncation C eps
    and h ranging over lattice multiples of ``h_unit`` in (C eps, rho_k).
    """
    eps = trace.eps if eps is None else eps
    trunc = C * eps
    h_x = trace.h_x
    unit = h_x if h_unit is None else h_unit
    _stride(unit, h_x, "h_unit")
    sched = ladder_schedule(alpha_cfg)
    rungs = []
    insufficient = False
    for k, beta_k, eta_k, r_k in sched:
        rho = rho0 * ratio ** k
        hs = [j * unit for j in range(1, int(rho / unit) + 2) if trunc < j * unit < rho]
        if rho <= trunc or not hs:
            insufficient = True
            break
        val, rep, per_h = quotient_seminorm(trace, beta_k, eta_k, rho, trunc, hs, x0,
                                            sample_dx, sample_dt)
        wit = None if rep is None or rep.witness is None else [p.as_list() for p in rep.witness]
        rungs.append(Rung(k, beta_k, eta_k, r_k, rho, trunc, hs, val, per_h, wit,
                          bool(math.isfinite(val) and val <= bound)))
    n = len(rungs)
    insufficient = insufficient or n < min_rungs
    passed = not insufficient and all(r.passed for r in rungs)
    return LadderReport(alpha_cfg, 1.0 - alpha_cfg / 2.0, rungs, n, len(sched), insufficient,
                        bound, passed)


# ---------------------------------------------------------------------------
# gradient Holder seminorm
# ---------------------------------------------------------------------------

@dataclass
class GradientHolderReport(_Report):
    alpha: float
    exponent: float
    value: float
    resolved: bool
    disagreement: float
    region: str
    witness: Optional[list]


def richardson_derivative(values: np.ndarray, h_x: float):
    """Node-centred x' derivative from steps 2h_x and 4h_x combined to fourth order.

    Returns (extrapolated, finest, coarser).
    """
    v = np.asarray(values, dtype=float)
    d1 = (np.roll(v, -1, axis=-1) - np.roll(v, 1, axis=-1)) / (2.0 * h_x)
    d2 = (np.roll(v, -2, axis=-1) - np.roll(v, 2, axis=-1)) / (4.0 * h_x)
    return (4.0 * d1 - d2) / 3.0, d1, d2


def gradient_holder(trace: HodographTrace, alpha: float, radius: Optional[float] = None,
                    x0: float = 0.0, t_window: Optional[tuple] = None,
                    x_halfwidth: Optional[float] = None, tol: float = 0.05,
                    sample_dx: Optional[float] = None) -> GradientHolderReport:
    """[d_e ubar]_{C^{alpha/2}} over a space-time region.

    With ``radius`` the region is the half-size cylinder B_{R/2}(x0) x (-R/2, 0]
    of the normalized frame; otherwise ``t_window`` (simulator times) and
    ``x_halfwidth`` select it explicitly.
    """
    h_x = trace.h_x
    dR, d1, d2 = richardson_derivative(trace.values, h_x)
    scale = float(np.max(np.abs(dR)))
    dis = float(np.max(np.abs(d1 - d2))) / scale if scale > 0 else 0.0
    tp = trace.t_norm
    if radius is not None:
        half = 0.5 * radius
        mt = tp >= -half - 1e-12
        xw = half
        region = f"B_{half:g}({x0:g}) x (-{half:g}, 0]"
    else:
        lo, hi = t_window if t_window is not None else (trace.t[0], trace.t[-1])
        mt = (trace.t >= lo - 1e-12) & (trace.t <= hi + 1e-12)
        xw = math.pi if x_halfwidth is None else x_halfwidth
        region = f"|x'-{x0:g}|<={xw:g}, t in [{lo:g}, {hi:g}]"
    mx = periodic_distance(trace.x, x0, trace.x.size * h_x) <= xw + 1e-12
    if sample_dx is not None:
        st = _stride(sample_dx, h_x, "sample_dx")
        mx &= (np.arange(trace.x.size) % st) == 0
    vals = dR[np.ix_(mt, mx)]
    L = trace.x.size * h_x
    xs = trace.x[mx]
    xs = x0 + ((xs - x0 + 0.5 * L) % L) - 0.5 * L
    X = np.broadcast_to(xs[None, :], vals.shape)
    T = np.broadcast_to(tp[mt][:, None], vals.shape)
    rep = trunc_holder(vals, (X, np.zeros_like(X), T), alpha / 2.0, 0.0, region)
    wit = None if rep.witness is None else [p.as_list() for p in rep.witness]
    return GradientHolderReport(alpha, alpha / 2.0, rep.value, dis <= tol, dis, region, wit)


def time_derivative_jump(trace: HodographTrace, t_jump: float) -> dict:
    """max|d_t ubar| over the last snapshot interval before and the first after t_jump."""
    t = trace.t
    i = int(np.searchsorted(t, t_jump - 1e-12))
    if i < 1 or i + 1 >= t.size:
        raise ValueError("jump time must be strictly inside the trace")
    before = np.max(np.abs(trace.values[i] - trace.values[i - 1])) / (t[i] - t[i - 1])
    after = np.max(np.abs(trace.values[i + 1] - trace.values[i])) / (t[i + 1] - t[i])
    return {"before": float(before), "after": float(after), "ratio": float(after / before)}


# ---------------------------------------------------------------------------
# interpolation lemmas on [-1, 1]
# ---------------------------------------------------------------------------

def _interval(v):
    v = MultiValuedSample.coerce(v)
    if v.lo.ndim != 1:
        raise ValueError("expected samples on a one-dimensional lattice")
    if v.any_empty:
        raise ValueError("values must be non-empty")
    return v


@dataclass
class A2Result(_Report):
    hypothesis: bool
    conclusion: bool
    consistent: bool
    hypothesis_witness: Optional[dict]
    conclusion_witness: Optional[dict]
    h0: float
    unit_step: bool

    def __bool__(self):
        return self.consistent


def verify_interp_A2(v, h0: float = 0.0, unit_step: bool = True,
                     open_interval: bool = False) -> A2Result:
    """Maximum-principle interpolation check on the lattice x_j = -1 + j*2/(n-1).

    Hypotheses: some value of v(+-1) is <= 0 and every second difference
    v(x+h) + v(x-h) - 2v(x) with lattice h in (h0, 1) and x in [-1+h, 1-h]
    is >= -1.  Conclusion: v <= 1 on [-1+h0, 1-h0].

    ``unit_step=True`` also admits h = 1.  Without it the statement fails at
    x = 0 (the only point whose contradiction argument needs h = 1), and for
    h0 > 0 it fails near the ends; see the tests for explicit counterexamples.
    ``open_interval`` evaluates the conclusion on (-1+h0, 1-h0).
    Returns an object that is truthy unless the hypotheses hold and the
    conclusion fails.
    """
    v = _interval(v)
    n = v.lo.size
    if n < 3 or (n - 1) % 2:
        raise ValueError("need an odd number >= 3 of nodes so that x = 0 is a node")
    dx = 2.0 / (n - 1)
    x = np.linspace(-1.0, 1.0, n)
    hyp_wit = None
    hyp = bool(v.lo[0] <= 0.0 and v.lo[-1] <= 0.0)
    if not hyp:
        hyp_wit = {"kind": "endpoint", "lo_left": float(v.lo[0]), "lo_right": float(v.lo[-1])}
    m_max = (n - 1) // 2
    m0 = h0 / dx
    worst = (math.inf, None, None)
    for m in range(1, m_max + 1):
        if not m > m0 + 1e-12:
            continue
        if m == m_max and not unit_step:
            continue
        d2 = v.lo[2 * m:] + v.lo[:-2 * m] - 2.0 * v.hi[m:-m]
        j = int(np.argmin(d2))
        if d2[j] < worst[0]:
            worst = (float(d2[j]), m, j + m)
    if hyp and worst[1] is not None and worst[0] < -1.0:
        hyp = False
        hyp_wit = {"kind": "second_difference", "value": worst[0], "h": worst[1] * dx,
                   "x": float(x[worst[2]])}
    lo_b, hi_b = -1.0 + h0, 1.0 - h0
    if open_interval:
        mask = (x > lo_b + 1e-12) & (x < hi_b - 1e-12)
    else:
        mask = (x >= lo_b - 1e-12) & (x <= hi_b + 1e-12)
    concl, cw = True, None
    if np.any(mask):
        vals = np.where(mask, v.hi, -np.inf)
        j = int(np.argmax(vals))
        if vals[j] > 1.0:
            concl = False
            cw = {"x": float(x[j]), "value": float(vals[j])}
    return A2Result(hyp, concl, (not hyp) or concl, hyp_wit, cw, h0, unit_step)


def a3_constant(gamma: float) -> float:
    """Constant in the first-difference interpolation bound, from its proof.

    The proof gives |delta_H v| / H^gamma <= 2 osc + S / (1 - 2^-(1-gamma)) for
    H < 1/8 and <= 8 osc otherwise, so 8 + 1/(1 - 2^-(1-gamma)) covers both.
    """
    if not 0 < gamma < 1:
        raise ValueError("beta + alpha must lie in (0, 1)")
    return 8.0 + 1.0 / (1.0 - 2.0 ** (-(1.0 - gamma)))


@dataclass
class A3Result(_Report):
    lhs: float
    rhs: float
    ratio: float
    constant: float
    passed: bool


def a3_terms(values: np.ndarray, gamma: float, h0: float = 0.0):
    """LHS and RHS of the interpolation estimate for one or many fields (last axis = lattice)."""
    V = np.atleast_2d(np.asarray(values, dtype=float))
    n = V.shape[-1]
    dx = 2.0 / (n - 1)
    lhs = np.zeros(V.shape[0])
    sec = np.zeros(V.shape[0])
    for m in range(1, n):
        h = m * dx
        if not h > h0 + 1e-12 or not h < 2.0 - 1e-12:
            continue
        d = np.max(np.abs(V[:, m:] - V[:, :-m]), axis=1) / h ** gamma
        lhs = np.maximum(lhs, d)
        if h < 1.0 - 1e-12 and 2 * m < n:
            d2 = np.max(np.abs(V[:, 2 * m:] + V[:, :-2 * m] - 2.0 * V[:, m:-m]), axis=1) / h ** gamma
            sec = np.maximum(sec, d2)
    osc = np.max(V, axis=1) - np.min(V, axis=1)
    return lhs, osc + sec


def verify_interp_A3(v, alpha: float, beta: float, h0: float = 0.0) -> A3Result:
    """Ratio LHS / RHS of the first-difference interpolation estimate on the lattice."""
    gamma = alpha + beta
    if not gamma < 1:
        raise ValueError("requires beta + alpha < 1")
    w = _interval(v)
    if w.is_singleton():
        lhs, rhs = a3_terms(w.lo, gamma, h0)
        lhs, rhs = float(lhs[0]), float(rhs[0])
    else:
        lhs, rhs = _a3_intervals(w, gamma, h0)
    ratio = 0.0 if rhs == 0 else lhs / rhs
    C = a3_constant(gamma)
    return A3Result(lhs, rhs, ratio, C, bool(ratio <= C))


def _a3_intervals(w, gamma, h0):
    n = w.lo.size
    dx = 2.0 / (n - 1)
    lhs = sec = 0.0
    for m in range(1, n):
        h = m * dx
        if not h > h0 + 1e-12 or not h < 2.0 - 1e-12:
            continue
        d = np.maximum(np.abs(w.hi[m:] - w.lo[:-m]), np.abs(w.lo[m:] - w.hi[:-m]))
        lhs = max(lhs, float(np.max(d)) / h ** gamma)
        if h < 1.0 - 1e-12 and 2 * m < n:
            a = w.hi[2 * m:] + w.hi[:-2 * m] - 2.0 * w.lo[m:-m]
            b = w.lo[2 * m:] + w.lo[:-2 * m] - 2.0 * w.hi[m:-m]
            sec = max(sec, float(np.max(np.maximum(np.abs(a), np.abs(b)))) / h ** gamma)
    return lhs, oscillation(w) + sec


def a5_constant(alpha: float, beta: float) -> float:
    s = alpha + beta - 1.0
    if not s > 0:
        raise ValueError("requires alpha + beta > 1")
    return 4.0 / (2.0 ** s - 1.0)


@dataclass
class A5Result(_Report):
    alpha: float
    beta: float
    hypothesis_value: float
    normalized: bool
    derivative_seminorm: float
    taylor_constant: float
    constant: float
    slack: float
    conclusive: bool
    passed: bool


def _holder_1d(q, x, a):
    """max |q_i - q_j| / |x_i - x_j|^a over all pairs."""
    best = 0.0
    for s in range(1, q.size):
        d = np.abs(q[s:] - q[:-s]) / np.abs(x[s:] - x[:-s]) ** a
        if d.size:
            best = max(best, float(np.max(d)))
    return best


def a5_hypothesis(values: np.ndarray, alpha: float, beta: float) -> float:
    """sup over lattice h in (0, 2) of [delta_h v / h^beta]_{C^alpha} on the centres."""
    v = np.asarray(values, dtype=float)
    n = v.size
    x = np.linspace(-1.0, 1.0, n)
    dx = 2.0 / (n - 1)
    best = 0.0
    for m in range(1, n - 1):
        q = (v[m:] - v[:-m]) / (m * dx) ** beta
        c = 0.5 * (x[m:] + x[:-m])
        best = max(best, _holder_1d(q, c, alpha))
    return best


def verify_interp_A5(v, alpha: float, beta: float, normalize: bool = True,
                     slack: float = 0.05) -> A5Result:
    """Derivative Holder check when alpha + beta > 1.

    The hypothesis value S is measured first.  When S > 1 and ``normalize`` is
    set the field is scaled by 1/S so the hypothesis holds with equality;
    without ``normalize`` S > 1 makes the check inconclusive.  Fields already
    satisfying the hypothesis are left alone, so round-off sized S is never
    amplified.  The conclusion is checked two ways: the
    C^{alpha+beta-1} seminorm of the centred lattice derivative and the Taylor
    remainder constant |v(x) - v(x0) - v'(x0)(x - x0)| / |x - x0|^{alpha+beta},
    both against C = 4 / (2^{alpha+beta-1} - 1) (relative ``slack`` added).
    """
    C = a5_constant(alpha, beta)
    vals = np.asarray(MultiValuedSample.coerce(v).lo if not isinstance(v, np.ndarray) else v, dtype=float)
    if isinstance(v, MultiValuedSample) and not v.is_singleton():
        raise ValueError("the derivative check needs single-valued samples")
    S = a5_hypothesis(vals, alpha, beta)
    norm = False
    if normalize and S > 1.0:
        vals = vals / S
        norm = True
    conclusive = (S <= 1.0 + 1e-12) or norm
    n = vals.size
    x = np.linspace(-1.0, 1.0, n)
    dx = 2.0 / (n - 1)
    dv = (vals[2:] - vals[:-2]) / (2.0 * dx)
    xi = x[1:-1]
    s = alpha + beta - 1.0
    dsemi = _holder_1d(dv, xi, s)
    taylor = 0.0
    for i in range(xi.size):
        j = i + 1
        dxs = x - x[j]
        mask = dxs != 0
        rem = np.abs(vals[mask] - vals[j] - dv[i] * dxs[mask]) / np.abs(dxs[mask]) ** (alpha + beta)
        taylor = max(taylor, float(np.max(rem)))
    limit = C * (1.0 + slack)
    passed = conclusive and dsemi <= limit and taylor <= limit
    return A5Result(alpha, beta, S, norm, dsemi, taylor, C, slack, conclusive, bool(passed))


# ---------------------------------------------------------------------------
# barrier ODE from the oscillation lemma
# ---------------------------------------------------------------------------

@dataclass
class DensitySchedule:
    """0/1 indicator f on (t_start, 0] given by breakpoints and values."""

    breaks: tuple
    values: tuple
    t_start: float = -0.75

    def __post_init__(self):
        if len(self.breaks) != len(self.values):
            raise ValueError("breaks and values must have equal length")
        if any(v not in (0, 1) for v in self.values):
            raise ValueError("density schedule takes values 0 or 1")
        if self.breaks and self.breaks[0] != self.t_start:
            raise ValueError("first break must equal t_start")

    def __call__(self, t):
        i = int(np.searchsorted(self.breaks, t, side="right")) - 1
        return float(self.values[max(i, 0)]) if self.breaks else 0.0

    def density(self, a: float, b: float) -> float:
        """Fraction of (a, b] where f = 1."""
        edges = list(self.breaks) + [math.inf]
        tot = 0.0
        for i, val in enumerate(self.values):
            lo, hi = max(a, edges[i]), min(b, edges[i + 1])
            if hi > lo and val:
                tot += hi - lo
        return tot / (b - a)


def harnack_barrier_ode(f: DensitySchedule, c: float, C: float, eps: float, t) -> np.ndarray:
    """r(t) solving r' + C r = c eps f(t), r(t_start) = 0, by exact per-interval integration."""
    if not (c > 0 and C > 0 and eps > 0):
        raise ValueError("c, C and eps must be positive")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    edges = list(f.breaks) + [math.inf]
    for q, tt in enumerate(t):
        r = 0.0
        for i, val in enumerate(f.values):
            a, b = edges[i], min(edges[i + 1], tt)
            if b <= a:
                break
            decay = math.exp(-C * (b - a))
            r = r * decay + (c * eps * val / C) * (1.0 - decay)
        out[q] = r
    return out


def harnack_barrier_quadrature(f: DensitySchedule, c: float, C: float, eps: float, t) -> np.ndarray:
    """Same quantity by adaptive quadrature of c eps int f(s) e^{-C(t-s)} ds."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    for q, tt in enumerate(t):
        edges = [b for b in f.breaks if b < tt] + [tt]
        tot = 0.0
        for i in range(len(edges) - 1):
            a, b = edges[i], edges[i + 1]
            if f(0.5 * (a + b)):
                val, _ = integrate.quad(lambda s: math.exp(-C * (tt - s)), a, b,
                                        epsabs=1e-15, epsrel=1e-13)
                tot += val
        out[q] = c * eps * tot
    return out


def barrier_theta(c: float, C: float, density: float = 0.5, t_start: float = -0.75,
                  t_mid: float = -0.5) -> float:
    """Largest theta with r(t) >= 4 theta eps on [t_mid, 0] for every schedule of the given
    density on (t_start, t_mid].

    The worst schedule puts its mass as early as possible and is zero afterwards.
    """
    span = t_mid - t_start
    on = density * span
    r_mid = (c / C) * (1.0 - math.exp(-C * on)) * math.exp(-C * (span - on))
    return r_mid * math.exp(-C * (0.0 - t_mid)) / 4.0


# ---------------------------------------------------------------------------
# randomized sweeps for the interpolation lemmas
# ---------------------------------------------------------------------------

def a2_extremals(n: int, h0: float = 0.0, unit_step: bool = True) -> np.ndarray:
    """Fields maximizing v(x_j) at each node j under the hypotheses of ``verify_interp_A2``.

    Rows are LP solutions (scipy HiGHS) with v(+-1) <= 0 and every admissible
    second difference >= -1; they sit on the boundary of the hypothesis set.
    """
    from scipy.optimize import linprog

    dx = 2.0 / (n - 1)
    m_max = (n - 1) // 2
    rows = []
    for m in range(1, m_max + 1):
        if not m * dx > h0 + 1e-12 or (m == m_max and not unit_step):
            continue
        for i in range(m, n - m):
            a = np.zeros(n)
            a[i - m] -= 1.0; a[i + m] -= 1.0; a[i] += 2.0
            rows.append(a)
    A = np.array(rows)
    b = np.ones(len(rows))
    bounds = [(None, None)] * n
    bounds[0] = bounds[-1] = (None, 0.0)
    out = []
    for j in range(n):
        c = np.zeros(n); c[j] = -1.0
        res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
        if res.status != 0:
            raise RuntimeError(f"linear program failed at node {j}: {res.message}")
        out.append(res.x)
    return np.array(out)


def a2_random_fields(n_trials: int, n: int = 33, seed: int = 0):
    """Random piecewise-linear, smooth and adversarial interval fields on [-1, 1]."""
    rng = np.random.default_rng(seed)
    x = np.linspace(-1.0, 1.0, n)
    ext = a2_extremals(n)
    fields = []
    for q in range(n_trials):
        kind = q % 3
        if kind == 0:
            knots = np.sort(rng.uniform(-1, 1, rng.integers(2, 7)))
            kx = np.concatenate([[-1.0], knots, [1.0]])
            ky = rng.uniform(-0.5, 1.5, kx.size)
            ky[0] = min(ky[0], 0.0) if rng.random() < 0.8 else ky[0]
            ky[-1] = min(ky[-1], 0.0) if rng.random() < 0.8 else ky[-1]
            lo = np.interp(x, kx, ky)
        elif kind == 1:
            lo = sum(rng.normal() * np.cos(k * np.pi * (x + 1) / 2) / k for k in range(1, 6))
            lo = lo - lo[[0, -1]].max() + rng.uniform(-0.2, 0.05)
            lo = lo * rng.uniform(0.2, 2.0) / max(1e-12, np.max(np.abs(lo)))
        else:
            w = rng.dirichlet(np.ones(3))
            lo = w @ ext[rng.integers(0, n, 3)]
            lo = lo * rng.uniform(0.95, 1.35) + rng.normal(0, 0.01, n)
        width = np.where(rng.random(n) < 0.2, rng.uniform(0, 0.05, n), 0.0)
        fields.append(MultiValuedSample(lo, lo + width))
    return fields


@dataclass
class SweepReport(_Report):
    trials: int
    violations: int
    conclusion_failures: int
    hypothesis_failures: int
    first_violation: Optional[dict]


def a2_sweep(n_trials: int = 1000, n: int = 33, seed: int = 0, h0: float = 0.0) -> SweepReport:
    """Contrapositive sweep: every conclusion failure must come with a hypothesis witness."""
    viol = concl = hyp = 0
    first = None
    for q, f in enumerate(a2_random_fields(n_trials, n, seed)):
        r = verify_interp_A2(f, h0)
        concl += not r.conclusion
        hyp += not r.hypothesis
        if not r.consistent:
            viol += 1
            if first is None:
                first = {"trial": q, "witness": r.conclusion_witness}
    return SweepReport(n_trials, viol, concl, hyp, first)


def smooth_random_fields(n_trials: int, seed: int = 0, n_modes: int = 8):
    """Coefficients of random smooth fields on [-1, 1]; evaluate with ``eval_smooth``."""
    rng = np.random.default_rng(seed)
    k = np.arange(1, n_modes + 1)
    a = rng.normal(size=(n_trials, n_modes)) / k ** 2
    b = rng.normal(size=(n_trials, n_modes)) / k ** 2
    return a, b


def eval_smooth(coeffs, n: int) -> np.ndarray:
    a, b = coeffs
    x = np.linspace(-1.0, 1.0, n)
    k = np.arange(1, a.shape[1] + 1)
    ph = np.pi * k[:, None] * x[None, :] / 2.0
    return a @ np.cos(ph) + b @ np.sin(ph)


@dataclass
class A3Sweep(_Report):
    alpha: float
    beta: float
    n_coarse: int
    n_fine: int
    max_ratio_coarse: float
    max_ratio_fine: float
    relative_change: float
    constant: float
    passed: bool


def a3_sweep(alpha: float, beta: float, n_trials: int = 1000, n: int = 65, seed: int = 0,
             h0: float = 0.0, tol: float = 0.10) -> A3Sweep:
    """Max LHS/RHS ratio over random smooth fields on two nested lattices."""
    coeffs = smooth_random_fields(n_trials, seed)
    gamma = alpha + beta
    ratios = []
    for m in (n, 2 * n - 1):
        lhs, rhs = a3_terms(eval_smooth(coeffs, m), gamma, h0)
        ratios.append(float(np.max(lhs / rhs)))
    rel = abs(ratios[1] - ratios[0]) / ratios[0]
    C = a3_constant(gamma)
    return A3Sweep(alpha, beta, n, 2 * n - 1, ratios[0], ratios[1], rel, C,
                   bool(rel < tol and max(ratios) <= C))
