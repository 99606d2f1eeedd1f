"""Sup/inf convolutions of hodograph traces and their property battery.

For a trace v(x', t) at fixed x_n the sup-convolution is

    v^{xi,tau}(x', t) = max over |y'| < xi^{1/2}, |s| < tau^{1/2} of
                        v(x' + y', t + s) - 2N (|y'|^2 / xi + s^2 / tau),

evaluated exhaustively over lattice offsets (strict inequalities).  x' is
periodic; in time the output region shrinks by the window so every
evaluation stays inside the trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .field_core import MultiValuedSample


class WindowError(ValueError):
    """Convolution window too small for the lattice or larger than the trace."""


@dataclass(frozen=True)
class ConvolutionParams:
    xi: float
    tau: float
    N: float
    eps: float

    def __post_init__(self):
        errs = []
        if not self.xi > 0:
            errs.append(f"xi must be positive, got {self.xi}")
        if not self.tau > 0:
            errs.append(f"tau must be positive, got {self.tau}")
        if not self.N >= 1:
            errs.append(f"N must be >= 1, got {self.N}")
        if not self.eps > 0:
            errs.append(f"eps must be positive, got {self.eps}")
        elif not 0 < self.eps * self.N < 1:
            errs.append(f"eps*N must lie in (0, 1), got {self.eps * self.N}")
        if errs:
            raise ValueError("; ".join(errs))

    def offsets(self, h_x: float, h_t: float):
        """Lattice offsets (j, i) with |j h_x| < xi^{1/2} and |i h_t| < tau^{1/2}."""
        wx = _strict_count(math.sqrt(self.xi), h_x)
        wt = _strict_count(math.sqrt(self.tau), h_t)
        if wx < 2 or wt < 2:
            raise WindowError(f"windows must span at least 2 lattice cells: got {wx} in x' "
                              f"(sqrt(xi)={math.sqrt(self.xi):.4g}, h_x={h_x:.4g}) and {wt} in t "
                              f"(sqrt(tau)={math.sqrt(self.tau):.4g}, h_t={h_t:.4g})")
        return wx, wt


def _strict_count(half_width: float, h: float) -> int:
    """Largest j with j*h < half_width."""
    j = int(math.ceil(half_width / h - 1e-12)) - 1
    return max(j, 0)


@dataclass
class DualPointRecord:
    """Maximizer offsets per output node; ``value`` is the convolved value."""

    base_t: np.ndarray       # output time indices into the input trace
    dy: np.ndarray           # lattice offsets in x'
    ds: np.ndarray           # lattice offsets in t
    value: np.ndarray
    h_x: float
    h_t: float

    def offsets_physical(self):
        return self.dy * self.h_x, self.ds * self.h_t

    def dual_indices(self, n_x: int):
        """(time index, x index) of the dual point of every output node."""
        ti = self.base_t[:, None] + self.ds
        xi = (np.arange(n_x)[None, :] + self.dy) % n_x
        return ti, xi


@dataclass
class ConvolutionResult:
    values: np.ndarray
    t_index: np.ndarray
    record: DualPointRecord
    params: ConvolutionParams
    window: tuple
    kind: str
    shrunk: int
    variable_slope: bool = False


def _values(v, kind):
    if isinstance(v, MultiValuedSample):
        if v.any_empty:
            raise ValueError("cannot convolve a field with empty values")
        return np.asarray(v.hi if kind == "sup" else v.lo, dtype=float)
    return np.asarray(v, dtype=float)


def _conv(vals, params, h_x, h_t, sign, window=None, penalty_scale=1.0):
    V = np.atleast_2d(vals)
    nt, nx = V.shape
    wx, wt = params.offsets(h_x, h_t) if window is None else window
    if 2 * wt + 1 > nt:
        raise WindowError(f"time window of {2 * wt + 1} samples exceeds the trace ({nt} samples)")
    out_t = np.arange(wt, nt - wt)
    best = np.full((out_t.size, nx), -np.inf)
    by = np.zeros(best.shape, dtype=int)
    bs = np.zeros(best.shape, dtype=int)
    c = 2.0 * params.N * penalty_scale
    W = sign * V
    for i in range(-wt, wt + 1):
        rows = W[out_t + i]
        pt = c * (i * h_t) ** 2 / params.tau
        for j in range(-wx, wx + 1):
            cand = np.roll(rows, -j, axis=1) - (c * (j * h_x) ** 2 / params.xi + pt)
            upd = cand > best
            best = np.where(upd, cand, best)
            by = np.where(upd, j, by)
            bs = np.where(upd, i, bs)
    return sign * best, out_t, by, bs, (wx, wt)


def sup_conv(v, params: ConvolutionParams, h_x: float, h_t: float,
             drift: Optional[np.ndarray] = None) -> ConvolutionResult:
    """Exhaustive-window sup-convolution of a (t, x') trace.

    ``drift`` switches on the variable-slope variant: the per-time offset
    (typically A(t)/eps) is removed so the paraboloids stay fixed in space
    instead of travelling with the planar profile, then restored.
    """
    vals = _values(v, "sup")
    if drift is not None:
        drift = np.asarray(drift, dtype=float)
        vals = vals - drift[:, None]
    out, ti, dy, ds, win = _conv(vals, params, h_x, h_t, +1.0)
    if drift is not None:
        out = out + drift[ti][:, None]
    rec = DualPointRecord(ti, dy, ds, out, h_x, h_t)
    return ConvolutionResult(out, ti, rec, params, win, "sup", win[1], drift is not None)


def inf_conv(v, params: ConvolutionParams, h_x: float, h_t: float,
             drift: Optional[np.ndarray] = None) -> ConvolutionResult:
    """Mirror of ``sup_conv``: window minimum of v + 2N(|y'|^2/xi + s^2/tau)."""
    vals = _values(v, "inf")
    if drift is not None:
        drift = np.asarray(drift, dtype=float)
        vals = vals - drift[:, None]
    out, ti, dy, ds, win = _conv(vals, params, h_x, h_t, -1.0)
    if drift is not None:
        out = out + drift[ti][:, None]
    rec = DualPointRecord(ti, dy, ds, out, h_x, h_t)
    return ConvolutionResult(out, ti, rec, params, win, "inf", win[1], drift is not None)


def window_sup(vals: np.ndarray, window: tuple, t_index: np.ndarray) -> np.ndarray:
    """Plain max of v over the same lattice window (no penalty)."""
    wx, wt = window
    V = np.atleast_2d(vals)
    best = np.full((t_index.size, V.shape[1]), -np.inf)
    for i in range(-wt, wt + 1):
        rows = V[t_index + i]
        for j in range(-wx, wx + 1):
            best = np.maximum(best, np.roll(rows, -j, axis=1))
    return best


# ---------------------------------------------------------------------------
# property battery
# ---------------------------------------------------------------------------

@dataclass
class ItemResult:
    passed: bool
    value: float
    limit: float
    witness: Optional[dict] = None

    def to_json(self):
        return {"passed": bool(self.passed), "value": float(self.value),
                "limit": float(self.limit), "witness": self.witness}


@dataclass
class BatteryReport:
    items: dict
    params: ConvolutionParams
    N_measured: float

    @property
    def passed(self) -> bool:
        return all(it.passed for it in self.items.values())

    def failures(self):
        return {k: v for k, v in self.items.items() if not v.passed}

    def to_json(self):
        return {"passed": self.passed, "N_measured": self.N_measured,
                "params": {"xi": self.params.xi, "tau": self.params.tau, "N": self.params.N,
                           "eps": self.params.eps},
                "items": {k: v.to_json() for k, v in self.items.items()}}


def _argmax_witness(arr, t_index=None):
    i, j = np.unravel_index(int(np.argmax(arr)), arr.shape)
    ti = int(i if t_index is None else t_index[i])
    return {"t_index": ti, "x_index": int(j)}


def _periodic_sep(n):
    d = np.arange(n)
    return np.minimum(d, n - d)


def lipschitz_constant(values: np.ndarray, h_x: float) -> np.ndarray:
    """Per-time max |v(x+h) - v(x)| / h over the periodic lattice."""
    return np.max(np.abs(np.roll(values, -1, axis=1) - values), axis=1) / h_x


def lipschitz_limit(params: ConvolutionParams, h_x: float) -> float:
    """2N / xi^{1/2} plus the lattice slack 2N h_x / xi.

    The continuous bound follows from semiconvexity plus the window
    constraint; on the lattice the one-sided difference of the touching
    paraboloid overshoots the derivative by at most 2N h_x / xi.  The bound
    needs osc v <= N / 2 (otherwise only sqrt(8 N osc v / xi) is available).
    """
    return 2.0 * params.N / math.sqrt(params.xi) + 2.0 * params.N * h_x / params.xi


def check_lemma52(v, params: ConvolutionParams, h_x: float, h_t: float,
                  taus: Sequence[float] = (0.04, 0.01, 0.0025), atol: float = 1e-12,
                  drift: Optional[np.ndarray] = None) -> BatteryReport:
    """Lattice-exhaustive check of the geometric sup-convolution properties.

    (a) flatness: |v^{xi,tau}| <= N - 1.
    (b) dual points: a doubled-window search finds the same maximum, attained
        strictly inside the original window.
    (e) the touching paraboloid at every dual point minorizes v^{xi,tau} on
        the whole output region.
    (f) per-time Lipschitz constant <= 2N / xi^{1/2} + slack.
    (g) v <= v^{xi,tau} <= window sup, and v^{xi,tau} decreases pointwise as
        tau runs through ``taus`` (compared on the region common to all).
    Also recorded: semiconvexity in x' and the double-application bound.
    """
    vals = _values(v, "sup")
    Nm = float(np.max(np.abs(vals))) + 1.0
    items = {}
    res = sup_conv(vals, params, h_x, h_t, drift)
    out, ti = res.values, res.t_index
    nt, nx = vals.shape
    base = vals if drift is None else vals - np.asarray(drift)[:, None]
    bout = out if drift is None else out - np.asarray(drift)[ti][:, None]
    bN = float(np.max(np.abs(base))) + 1.0
    flat_lim = params.N - 1.0 if drift is None else bN - 1.0

    # (a)
    m = float(np.max(np.abs(bout)))
    items["a_flatness"] = ItemResult(m <= flat_lim + atol, m, flat_lim,
                                     _argmax_witness(np.abs(bout), ti))
    # (b)
    wx, wt = res.window
    wide = (2 * wx + 1, 2 * wt + 1)
    tcut = wide[1] - wt
    if nt - 2 * wide[1] >= 1:
        sub = slice(tcut, out.shape[0] - tcut)
        w_out, w_ti, w_dy, w_ds, _ = _conv(base, params, h_x, h_t, +1.0, window=wide)
        diff = np.abs(w_out - bout[sub])
        outside = (np.abs(w_dy) > wx) | (np.abs(w_ds) > wt)
        ok = bool(np.max(diff) <= atol and not np.any(outside))
        wit = _argmax_witness(diff + outside, w_ti)
        items["b_dual_point"] = ItemResult(ok, float(np.max(diff)), atol, wit)
    else:
        inside = (np.abs(res.record.dy) <= wx) & (np.abs(res.record.ds) <= wt)
        items["b_dual_point"] = ItemResult(bool(np.all(inside)), 0.0, atol, None)
    # (e)
    dti, dxi = res.record.dual_indices(nx)
    sep = _periodic_sep(nx)
    T = ti.astype(float) * h_t
    worst, wit = -np.inf, None
    cols = np.arange(nx)
    for a in range(out.shape[0]):
        dxv = sep[(cols[None, :] - dxi[a][:, None]) % nx] * h_x           # (base b, x)
        dtv = T[None, :] - dti[a][:, None] * h_t                            # (base b, t)
        top = base[dti[a], dxi[a]]
        P = (top[:, None, None] - 2.0 * params.N * (dxv[:, None, :] ** 2 / params.xi
                                                    + dtv[:, :, None] ** 2 / params.tau))
        gap = P - bout[None]
        g = float(np.max(gap))
        if g > worst:
            worst = g
            b, i, j = np.unravel_index(int(np.argmax(gap)), gap.shape)
            wit = {"base": {"t_index": int(ti[a]), "x_index": int(b)},
                   "t_index": int(ti[i]), "x_index": int(j)}
    items["e_paraboloid"] = ItemResult(worst <= atol, worst, atol, wit)
    # (f)
    lip = lipschitz_constant(bout, h_x)
    lim = lipschitz_limit(params, h_x)
    k = int(np.argmax(lip))
    items["f_lipschitz"] = ItemResult(float(lip[k]) <= lim, float(lip[k]), lim,
                                      {"t_index": int(ti[k])})
    # (g)
    below = float(np.max(base[ti] - bout))
    ws = window_sup(base, res.window, ti)
    above = float(np.max(bout - ws))
    g_ok = below <= atol and above <= atol
    mono_val = -np.inf
    mono_wit = None
    sweeps = []
    for tau in taus:
        p = ConvolutionParams(params.xi, tau, params.N, params.eps)
        r = sup_conv(base, p, h_x, h_t)
        sweeps.append(r)
    if sweeps:
        lo = max(r.t_index[0] for r in sweeps)
        hi = min(r.t_index[-1] for r in sweeps)
        if hi >= lo:
            cuts = [r.values[lo - r.t_index[0]: hi - r.t_index[0] + 1] for r in sweeps]
            order = np.argsort(taus)[::-1]
            for q in range(len(order) - 1):
                d = cuts[order[q + 1]] - cuts[order[q]]
                dm = float(np.max(d))
                if dm > mono_val:
                    mono_val = dm
                    mono_wit = {"tau_pair": [taus[order[q]], taus[order[q + 1]]],
                                **_argmax_witness(d, np.arange(lo, hi + 1))}
    mono_ok = mono_val <= atol
    items["g_rate"] = ItemResult(g_ok, max(below, above), atol,
                                 {"below": below, "above": above})
    items["g_tau_monotone"] = ItemResult(mono_ok, mono_val if math.isfinite(mono_val) else 0.0,
                                         atol, mono_wit)
    # semiconvexity along x'
    sc = semiconvexity_defect(bout, params, h_x)
    items["semiconvex"] = ItemResult(sc <= atol, sc, atol)
    # double application
    try:
        dbl = composition_check(base, params, h_x, h_t)
        items["composition"] = ItemResult(dbl["passed"], dbl["excess"], atol, dbl)
    except WindowError:
        pass
    return BatteryReport(items, params, Nm)


def semiconvexity_defect(out: np.ndarray, params: ConvolutionParams, h_x: float) -> float:
    """max over lattice steps of -(delta^2_h v + 4N h^2/xi); <= 0 means semiconvex."""
    worst = -np.inf
    nx = out.shape[1]
    for m in range(1, nx // 2):
        h = m * h_x
        d2 = np.roll(out, -m, axis=1) + np.roll(out, m, axis=1) - 2.0 * out
        worst = max(worst, float(np.max(-(d2 + 4.0 * params.N * h * h / params.xi))))
    return worst


def composition_check(vals: np.ndarray, params: ConvolutionParams, h_x: float, h_t: float) -> dict:
    """v^{xi,tau} <= (v^{xi,tau})^{xi,tau} <= max over the doubled window of
    v - N(|y|^2/xi + s^2/tau).

    The upper bound uses |y1|^2 + |y2|^2 >= |y1 + y2|^2 / 2.
    """
    first = sup_conv(vals, params, h_x, h_t)
    second = sup_conv(first.values, params, h_x, h_t)
    wx, wt = first.window
    t_abs = first.t_index[second.t_index]
    bound, _, _, _, _ = _conv(vals, params, h_x, h_t, +1.0, window=(2 * wx, 2 * wt),
                              penalty_scale=0.5)
    # align: bound output starts at 2*wt, which equals t_abs[0]
    b = bound[t_abs - 2 * wt]
    f = first.values[second.t_index]
    low = float(np.max(f - second.values))
    high = float(np.max(second.values - b))
    return {"passed": bool(low <= 1e-12 and high <= 1e-12), "excess": max(low, high),
            "lower_excess": low, "upper_excess": high}


def cone_value(xi: float, N: float) -> tuple:
    """Closed form of the sup-convolution of |x'| at 0: (xi / (8N), argmax xi / (4N))."""
    return xi / (8.0 * N), xi / (4.0 * N)
