"""Experiment configs, runners and reproducibility manifests.

A config is a TOML file with a top-level ``kind`` and the typed sections
[grid], [physics], [time], [initial], [analysis] and [output].  Every key is
optional except ``kind``; defaults are the acceptance-grade settings of the
corresponding experiment.  Unknown sections or keys are rejected.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from . import convolution_lab as CL
from . import deformations as DF
from . import io as IO
from . import regularity_lab as RL
from .field_core import PeriodicGrid1D, StripGrid
from .hele_shaw import fit_dispersion, flatness_check, run
from .hodograph import trace_from_interface
from .laplace_strip import InterfaceState
from .schedule import SlopeSchedule

KINDS = ("simulate", "linearize", "harnack", "ladder", "supconv", "deform", "barrier", "interp")
ENV_OUTPUT_ROOT = "HSLAB_OUTPUT_ROOT"


class ConfigError(ValueError):
    """Config could not be read or failed validation; ``violations`` lists every problem."""

    def __init__(self, violations: List[str]):
        super().__init__("\n".join(violations))
        self.violations = violations


class AssertionFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

_num = (int, float)
_SCHEMA: Dict[str, Dict[str, tuple]] = {
    "": {"kind": (str, None), "seed": (int, 7), "description": (str, "")},
    "grid": {"n_x": (int, 128), "n_y": (int, 64), "refine": (bool, False)},
    "physics": {"H": (_num, 2.0), "eps": ("eps", 0.05), "schedule": ("schedule", [[0.0, 1.0]])},
    "time": {"T": (_num, 1.0), "dt": (_num, 1e-3), "snapshot_every": (int, 1)},
    "initial": {"shape": (str, "multimode"), "amplitude": (_num, 1.0), "k": (int, 2),
                "kmax": (int, 4), "seed": (int, 7)},
    "analysis": {
        "mu": (_num, 0.5), "C": (_num, 4.0), "R0": (_num, 1.6), "x0": (_num, 0.0),
        "alpha_cfg": ((int, float, str), "auto"), "bound": (_num, 10.0),
        "sample_dx": ((int, float, str), "auto"), "sample_dt": (_num, 0.05),
        "h_unit": ((int, float, str), "auto"), "refine_tol": (_num, 0.10),
        "theta_min": (_num, 0.05), "slope_range": ("pair", [0.8, 1.2]),
        "t_jump": (_num, 0.5), "window": (_num, 0.03),
        "trials": (int, 100), "xi": (_num, 0.09), "tau": (_num, 0.01), "N": (_num, 4.0 / 3.0),
        "taus": ("floats", [0.04, 0.01, 0.0025]), "trace_nx": (int, 64), "trace_nt": (int, 60),
        "trace_dt": (_num, 0.01),
        "B": (_num, 1.0), "p": ("floats", [0.5, 0.3]), "eN_sweep": ("floats", [0.1, 0.03, 0.01]),
        "sigma": (_num, 0.05), "identity_points": (int, 10000),
        "r_values": ("floats", [0.01, 0.02, 0.04]), "c": (_num, 1.0), "C_ode": (_num, 4.0),
        "a2_trials": (int, 1000), "a2_nodes": (int, 33), "a3_trials": (int, 1000),
        "a3_nodes": (int, 65), "a3_pair": ("pair", [0.2, 0.5]),
        "a5_pairs": ("pairs", [[0.5, 0.7], [0.7, 0.8]]), "a5_nodes": (int, 201),
    },
    "output": {"dir": (str, ""), "binary": (bool, False)},
}

# per-experiment default overrides (acceptance-grade settings)
_DEFAULTS = {
    "simulate": {"initial": {"shape": "planar"}, "time": {"T": 1.0, "dt": 1e-3, "snapshot_every": 10},
                 "physics": {"schedule": [[0.0, 1.0], [0.5, 2.0]]}},
    "linearize": {"physics": {"eps": [0.1, 0.05, 0.025]},
                  "time": {"T": 0.5, "dt": 1e-3, "snapshot_every": 10}},
    "harnack": {"time": {"T": 1.6, "dt": 0.0025, "snapshot_every": 1}},
    "ladder": {"grid": {"refine": True}, "time": {"T": 1.6, "dt": 0.0025, "snapshot_every": 1}},
    "supconv": {"grid": {"n_x": 64, "n_y": 32}, "time": {"T": 0.6, "dt": 0.005, "snapshot_every": 2}},
    "deform": {},
    "barrier": {"analysis": {"trials": 200}},
    "interp": {},
}


@dataclass
class RunConfig:
    kind: str
    data: dict
    source: Optional[str] = None

    def get(self, section: str, key: str):
        return self.data[section][key] if section else self.data[key]

    @property
    def canonical(self) -> dict:
        d = copy.deepcopy(self.data)
        d.pop("output", None)
        return d

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _locate(text: str, section: str, key: str):
    cur = ""
    for n, line in enumerate(text.splitlines(), 1):
        m = re.match(r"^\s*\[([^\]]+)\]\s*(#.*)?$", line)
        if m:
            cur = m.group(1).strip()
            if key is None and cur == section:
                return n, line.index("[") + 1
            continue
        if key is not None and cur == section:
            m = re.match(r"^(\s*)" + re.escape(key) + r"\s*=", line)
            if m:
                return n, len(m.group(1)) + 1
    return None


def _where(text, section, key=None):
    loc = _locate(text, section, key) if text is not None else None
    name = f"{section}.{key}" if section and key else (key or f"[{section}]")
    return f"{name} (line {loc[0]}, column {loc[1]})" if loc else name


def _check_type(kind, val):
    if kind == "eps":
        return (isinstance(val, _num) and not isinstance(val, bool)) or (
            isinstance(val, list) and val and all(isinstance(v, _num) and not isinstance(v, bool) for v in val))
    if kind == "schedule":
        return isinstance(val, list) and val and all(
            isinstance(p, list) and len(p) == 2 and all(isinstance(q, _num) for q in p) for p in val)
    if kind in ("floats", "pair"):
        ok = isinstance(val, list) and all(isinstance(v, _num) and not isinstance(v, bool) for v in val)
        return ok and (kind != "pair" or len(val) == 2)
    if kind == "pairs":
        return isinstance(val, list) and all(_check_type("pair", v) for v in val)
    if kind is bool:
        return isinstance(val, bool)
    if isinstance(val, bool):
        return False
    return isinstance(val, kind)


def _is_pow2(n):
    return n >= 8 and (n & (n - 1)) == 0


def default_config(kind: str) -> dict:
    if kind not in KINDS:
        raise ConfigError([f"kind: unknown experiment {kind!r}; expected one of {', '.join(KINDS)}"])
    d = {}
    for sec, keys in _SCHEMA.items():
        vals = {k: copy.deepcopy(v[1]) for k, v in keys.items()}
        if sec == "":
            d.update(vals)
        else:
            d[sec] = vals
    d["kind"] = kind
    for sec, over in _DEFAULTS[kind].items():
        d[sec].update(copy.deepcopy(over))
    return d


def build_config(raw: dict, text: Optional[str] = None, source: Optional[str] = None) -> RunConfig:
    """Validate a parsed TOML mapping; all violations are collected before raising."""
    errs: List[str] = []
    kind = raw.get("kind")
    if kind is None:
        errs.append("kind: required key missing")
    elif kind not in KINDS:
        errs.append(f"{_where(text, '', 'kind')}: unknown experiment {kind!r}; "
                    f"expected one of {', '.join(KINDS)}")
    data = default_config(kind if kind in KINDS else "simulate")
    for key, val in raw.items():
        if isinstance(val, dict):
            if key not in _SCHEMA or key == "":
                errs.append(f"{_where(text, key)}: unknown section [{key}]")
                continue
            for k2, v2 in val.items():
                if k2 not in _SCHEMA[key]:
                    errs.append(f"{_where(text, key, k2)}: unknown key")
                elif not _check_type(_SCHEMA[key][k2][0], v2):
                    errs.append(f"{_where(text, key, k2)}: bad type {type(v2).__name__}")
                else:
                    data[key][k2] = v2
        else:
            if key not in _SCHEMA[""]:
                errs.append(f"{_where(text, '', key)}: unknown key")
            elif not _check_type(_SCHEMA[""][key][0], val):
                errs.append(f"{_where(text, '', key)}: bad type {type(val).__name__}")
            else:
                data[key] = val
    errs += _validate_values(data, text)
    if errs:
        raise ConfigError(errs)
    return RunConfig(data["kind"], data, source)


def _validate_values(d, text) -> List[str]:
    e = []
    w = lambda s, k: _where(text, s, k)
    g = d["grid"]
    if not _is_pow2(g["n_x"]):
        e.append(f"{w('grid', 'n_x')}: must be a power of two >= 8, got {g['n_x']}")
    if g["n_y"] < 8:
        e.append(f"{w('grid', 'n_y')}: must be >= 8, got {g['n_y']}")
    ph = d["physics"]
    eps = ph["eps"] if isinstance(ph["eps"], list) else [ph["eps"]]
    if any(not x > 0 for x in eps):
        e.append(f"{w('physics', 'eps')}: must be positive, got {ph['eps']}")
    if isinstance(ph["eps"], list) and d["kind"] != "linearize":
        e.append(f"{w('physics', 'eps')}: a sweep list is only accepted by kind = \"linearize\"")
    if not ph["H"] > 0:
        e.append(f"{w('physics', 'H')}: must be positive, got {ph['H']}")
    try:
        SlopeSchedule.from_pairs(ph["schedule"])
    except (ValueError, TypeError) as exc:
        e.append(f"{w('physics', 'schedule')}: {exc}")
    t = d["time"]
    if not t["dt"] > 0:
        e.append(f"{w('time', 'dt')}: must be positive, got {t['dt']}")
    if not t["T"] >= 0:
        e.append(f"{w('time', 'T')}: must be >= 0, got {t['T']}")
    if t["snapshot_every"] < 1:
        e.append(f"{w('time', 'snapshot_every')}: must be >= 1")
    ini = d["initial"]
    if ini["shape"] not in ("planar", "mode", "multimode"):
        e.append(f"{w('initial', 'shape')}: expected planar, mode or multimode, got {ini['shape']!r}")
    if ini["k"] < 1 or ini["kmax"] < 1:
        e.append(f"{w('initial', 'k')}: wavenumbers must be >= 1")
    a = d["analysis"]
    for key in ("alpha_cfg", "sample_dx", "h_unit"):
        if isinstance(a[key], str) and a[key] != "auto":
            e.append(f"{w('analysis', key)}: expected a number or \"auto\"")
    if isinstance(a["alpha_cfg"], _num) and not isinstance(a["alpha_cfg"], str) and not 0 < a["alpha_cfg"] <= 0.25:
        e.append(f"{w('analysis', 'alpha_cfg')}: must lie in (0, 1/4]")
    if not 0 < a["mu"] < 1:
        e.append(f"{w('analysis', 'mu')}: must lie in (0, 1)")
    for key in ("C", "R0", "bound", "xi", "tau", "N", "sigma", "c", "C_ode", "trace_dt", "sample_dt"):
        if not a[key] > 0:
            e.append(f"{w('analysis', key)}: must be positive")
    if a["trials"] < 1:
        e.append(f"{w('analysis', 'trials')}: must be >= 1")
    if any(not 0 < r < 0.05 for r in a["r_values"]):
        e.append(f"{w('analysis', 'r_values')}: each r must lie in (0, 0.05)")
    if a["a2_nodes"] < 3 or a["a2_nodes"] % 2 == 0:
        e.append(f"{w('analysis', 'a2_nodes')}: must be odd and >= 3")
    return e


def parse_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError([f"{path}: config file not found"])
    text = p.read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return build_config(raw, text, str(p))


# ---------------------------------------------------------------------------
# experiment helpers
# ---------------------------------------------------------------------------

def multimode_profile(x, kmax: int = 4, seed: int = 7) -> np.ndarray:
    """Fixed-seed random combination of modes 1..kmax normalized to sup norm 1."""
    rng = np.random.default_rng(seed)
    w = np.zeros_like(x)
    for k in range(1, kmax + 1):
        w += rng.normal() * np.cos(k * x) + rng.normal() * np.sin(k * x)
    return w / np.max(np.abs(w))


def initial_front(cfg_initial: dict, x: np.ndarray, eps: float) -> np.ndarray:
    """gamma(x', 0) = -eps * amplitude * w(x'), so ubar starts at amplitude * w."""
    shape = cfg_initial["shape"]
    if shape == "planar":
        return np.zeros_like(x)
    if shape == "mode":
        w = np.cos(cfg_initial["k"] * x)
    else:
        w = multimode_profile(x, cfg_initial["kmax"], cfg_initial["seed"])
    return -eps * cfg_initial["amplitude"] * w


def simulate_trace(d: dict, eps: float, n_x: Optional[int] = None, n_y: Optional[int] = None,
                   keep_pressure: bool = False, telemetry: bool = False):
    n_x = n_x or d["grid"]["n_x"]
    n_y = n_y or d["grid"]["n_y"]
    g = StripGrid(PeriodicGrid1D(n_x), n_y)
    sched = SlopeSchedule.from_pairs(d["physics"]["schedule"])
    gamma = initial_front(d["initial"], g.horizontal.x, eps)
    s0 = InterfaceState.initial(g, gamma, H=float(d["physics"]["H"]), schedule=sched)
    dt = float(d["time"]["dt"])
    n = int(round(float(d["time"]["T"]) / dt))
    traj = run(s0, dt, n, d["time"]["snapshot_every"], keep_pressure=keep_pressure,
               telemetry=telemetry)
    return traj, trace_from_interface(traj, eps)


@dataclass
class ExperimentResult:
    kind: str
    checks: Dict[str, bool] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    datasets: List[str] = field(default_factory=list)
    stages: Dict[str, float] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    diagnostics: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


class _Out:
    """Writes only inside ``root``; records relative dataset names."""

    def __init__(self, root: Path, res: ExperimentResult, prefix: str = ""):
        self.root = Path(root).resolve()
        self.res = res
        self.prefix = prefix

    def path(self, name: str) -> Path:
        p = (self.root / name).resolve()
        if self.root not in p.parents and p != self.root:
            raise ValueError(f"refusing to write outside the output directory: {name}")
        self.res.datasets.append(self.prefix + name)
        return p


class _Stage:
    def __init__(self, res, name):
        self.res, self.name = res, name

    def __enter__(self):
        self.t = time.perf_counter()

    def __exit__(self, *a):
        self.res.stages[self.name] = self.res.stages.get(self.name, 0.0) + time.perf_counter() - self.t


def _scalar_eps(d):
    e = d["physics"]["eps"]
    return float(e[0] if isinstance(e, list) else e)


def run_simulate(d, out: _Out, res: ExperimentResult, threads: int = 1):
    eps = _scalar_eps(d)
    with _Stage(res, "simulate"):
        traj, trace = simulate_trace(d, eps, telemetry=True)
    IO.write_trajectory_csv(out.path("trajectory.csv"), traj)
    IO.write_trace_csv(out.path("trace.csv"), trace)
    IO.write_jsonl(out.path("telemetry.jsonl"), traj.telemetry)
    mono = bool(np.all(np.diff(traj.gammas, axis=0) >= -1e-12))
    res.checks["monotone_expansion"] = mono
    flat = flatness_check(traj, eps)
    summary = {"final_time": traj.times[-1], "snapshots": traj.n_snapshots,
               "flatness": flat.to_json(), "max_iterations": int(np.max(traj.iterations))}
    if d["initial"]["shape"] == "planar":
        err = float(np.max(np.abs(traj.gammas - traj.reference[:, None])))
        summary["planar_error"] = err
        res.checks["planar_exact"] = err <= 1e-8
    else:
        res.checks["flatness"] = flat.ok
    if d["initial"]["shape"] == "mode":
        fit = fit_dispersion(traj, d["initial"]["k"])
        summary["dispersion"] = fit.to_json()
        res.checks["dispersion"] = fit.relative_error <= 0.02
    if d["output"]["binary"]:
        IO.write_field_binary(out.path("front.hhf"), traj.gammas)
    IO.write_json(out.path("summary.json"), summary)
    res.summary = summary


def run_linearize(d, out, res, threads: int = 1):
    eps_list = d["physics"]["eps"]
    eps_list = eps_list if isinstance(eps_list, list) else [eps_list]

    def member(eps):
        _, tr = simulate_trace(d, float(eps))
        return RL.linearization_gap(tr)

    with _Stage(res, "sweep"):
        if threads > 1:
            with ThreadPoolExecutor(threads) as ex:
                gaps = list(ex.map(member, eps_list))
        else:
            gaps = [member(e) for e in eps_list]
    IO.write_csv(out.path("gaps.csv"), ["eps", "gap"], [[g.eps, g.gap] for g in gaps])
    report = {"members": [g.to_json() for g in gaps]}
    lo, hi = d["analysis"]["slope_range"]
    if len(gaps) >= 2:
        fit = RL.loglog_slope([g.eps for g in gaps], [g.gap for g in gaps])
        report["regression"] = fit.to_json()
        res.checks["slope_in_range"] = lo <= fit.slope <= hi
        res.summary["slope"] = fit.slope
    else:
        res.warnings.append("single eps: no regression")
    IO.write_json(out.path("regression.json"), report)


def _decay(d, trace):
    a = d["analysis"]
    return RL.oscillation_decay(trace, mu=a["mu"], C=a["C"], R0=a["R0"], x0=a["x0"])


def run_harnack(d, out, res, threads: int = 1):
    eps = _scalar_eps(d)
    with _Stage(res, "simulate"):
        _, trace = simulate_trace(d, eps)
    with _Stage(res, "decay"):
        rep = _decay(d, trace)
    IO.write_csv(out.path("decay.csv"), ["m", "radius", "osc", "factor"],
                 [[s["m"], s["radius"], s["osc"], "" if s["factor"] is None else IO.fmt(s["factor"])]
                  for s in rep.scales])
    IO.write_json(out.path("decay.json"), rep)
    if rep.degenerate:
        res.warnings.append("degenerate decay fit (zero oscillation)")
    res.checks["at_least_3_scales"] = len(rep.scales) >= 3
    res.checks["theta_min"] = rep.theta_hat >= d["analysis"]["theta_min"]
    res.checks["alpha_positive"] = rep.alpha_hat > 0
    res.summary = {"theta_hat": rep.theta_hat, "alpha_hat": rep.alpha_hat}


def _ladder_defaults(d, n_x):
    a = d["analysis"]
    hx = 2 * math.pi / n_x
    sdx = 4 * hx if a["sample_dx"] == "auto" else float(a["sample_dx"])
    hu = 2 * hx if a["h_unit"] == "auto" else float(a["h_unit"])
    return sdx, hu


def run_ladder(d, out, res, threads: int = 1):
    eps = _scalar_eps(d)
    a = d["analysis"]
    n_x, n_y = d["grid"]["n_x"], d["grid"]["n_y"]
    grids = [(n_x, n_y)] + ([(2 * n_x, 2 * n_y)] if d["grid"]["refine"] else [])
    traces = []
    with _Stage(res, "simulate"):
        for gx, gy in grids:
            traces.append(simulate_trace(d, eps, gx, gy)[1])
    if a["alpha_cfg"] == "auto":
        with _Stage(res, "decay"):
            try:
                rep = _decay(d, traces[0])
                alpha = min(rep.alpha_hat, 0.25) if rep.alpha_hat > 0 else 0.25
            except ValueError as exc:
                res.warnings.append(f"decay fit unavailable ({exc}); alpha_cfg = 1/4")
                alpha = 0.25
    else:
        alpha = float(a["alpha_cfg"])
    sdx, hu = _ladder_defaults(d, n_x)
    reports = []
    with _Stage(res, "ladder"):
        for tr in traces:
            reports.append(RL.bootstrap_ladder(tr, alpha, C=a["C"], rho0=a["R0"], ratio=a["mu"],
                                               bound=a["bound"], x0=a["x0"], sample_dx=sdx,
                                               sample_dt=a["sample_dt"], h_unit=hu))
    rows = []
    for (gx, gy), rep in zip(grids, reports):
        for r in rep.rungs:
            rows.append([f"{gx}x{gy}", r.k, r.beta, r.eta, r.r_k, r.radius, r.value])
    IO.write_csv(out.path("rungs.csv"), ["grid", "k", "beta", "eta", "r_k", "radius", "value"], rows)
    IO.write_json(out.path("ladder.json"), {"alpha_cfg": alpha,
                                            "reports": [r.to_json() for r in reports]})
    base = reports[0]
    if base.insufficient:
        res.diagnostics.append(f"insufficient rungs: {base.n_rungs} of {base.requested_rungs} "
                               f"resolved above the truncation scale {a['C'] * eps:g} "
                               f"at grid {n_x}x{n_y}")
    res.checks["at_least_3_rungs"] = not base.insufficient
    res.checks["rungs_bounded"] = all(r.passed for r in base.rungs) and bool(base.rungs)
    if len(reports) == 2:
        fine = reports[1]
        k = min(base.n_rungs, fine.n_rungs)
        changes = [abs(fine.rungs[i].value - base.rungs[i].value) / base.rungs[i].value
                   for i in range(k) if base.rungs[i].value > 0]
        res.summary["refinement_change"] = changes
        res.checks["refinement_stable"] = bool(changes) and max(changes) < a["refine_tol"] \
            and fine.n_rungs >= base.n_rungs
    res.summary["alpha_cfg"] = alpha
    res.summary["values"] = [r.value for r in base.rungs]


def random_flat_traces(trials: int, n_x: int, n_t: int, h_t: float, seed: int, amp: float = 1.0 / 3.0):
    """Smooth decaying modes, white noise and random walks, scaled to sup norm ``amp``."""
    rng = np.random.default_rng(seed)
    x = np.arange(n_x) * 2 * np.pi / n_x
    t = np.arange(n_t) * h_t
    out = []
    for q in range(trials):
        kind = q % 3
        if kind == 0:
            v = sum(rng.normal() * np.cos(k * x[None, :] + rng.uniform(0, 2 * np.pi))
                    * np.exp(-k * t[:, None]) for k in range(1, 5))
        elif kind == 1:
            v = rng.uniform(-1, 1, (n_t, n_x))
        else:
            v = np.cumsum(rng.normal(size=(n_t, n_x)), axis=1)
            v = v - np.linspace(0, 1, n_x)[None, :] * v[:, -1:]
        out.append(amp * v / np.max(np.abs(v)))
    return out


def run_supconv(d, out, res, threads: int = 1):
    a = d["analysis"]
    eps = _scalar_eps(d)
    params = CL.ConvolutionParams(a["xi"], a["tau"], a["N"], eps)
    nx, nt, ht = a["trace_nx"], a["trace_nt"], a["trace_dt"]
    hx = 2 * math.pi / nx
    fields = random_flat_traces(a["trials"], nx, nt, ht, d["seed"])
    rows, worst = [], {}
    with _Stage(res, "battery"):
        for q, v in enumerate(fields):
            rep = CL.check_lemma52(v, params, hx, ht, taus=a["taus"])
            for k, it in rep.items.items():
                worst[k] = max(worst.get(k, -math.inf), it.value - it.limit)
            rows.append([q, int(rep.passed)] + [rep.items[k].value for k in sorted(rep.items)])
            if not rep.passed:
                res.diagnostics.append(f"trial {q}: {sorted(rep.failures())}")
        names = sorted(rep.items)
    IO.write_csv(out.path("battery.csv"), ["trial", "passed"] + names, rows)
    # one simulated trace; N is raised to 2 osc so the Lipschitz item applies
    with _Stage(res, "simulated"):
        _, tr = simulate_trace(d, eps)
        h_t = float(tr.t[1] - tr.t[0])
        osc = float(np.ptp(tr.values))
        N = max(float(np.max(np.abs(tr.values))) + 1.0, 2.0 * osc)
        sim = None
        if eps * N < 1:
            sp = CL.ConvolutionParams(a["xi"], a["tau"], N, eps)
            sim = CL.check_lemma52(tr.values, sp, tr.h_x, h_t, taus=a["taus"])
            res.checks["simulated_trace"] = sim.passed
        else:
            res.warnings.append("simulated trace skipped: eps*N >= 1")
    IO.write_json(out.path("battery.json"), {"trials": a["trials"], "worst_margin": worst,
                                             "all_passed": all(r[1] for r in rows),
                                             "simulated": None if sim is None else sim.to_json()})
    res.checks["random_traces"] = all(r[1] for r in rows)
    res.summary = {"worst_margin": worst}


def _planar_zero(x):
    return np.zeros(np.asarray(x).shape[:-1])


def _mode_v(x):
    x = np.asarray(x, dtype=float)
    return 0.5 * np.cos(x[..., 0]) * np.exp(-x[..., 1])


def run_deform(d, out, res, threads: int = 1):
    a = d["analysis"]
    rng = np.random.default_rng(d["seed"])
    with _Stage(res, "identities"):
        rho = 1.0 / (a["eN_sweep"][-1] * a["B"])
        y = rng.uniform(-1, 1, (a["identity_points"], 2))
        y[:, 1] = np.abs(y[:, 1])
        inv = float(np.max(np.abs(DF.kelvin_map(DF.kelvin_inverse(y, rho), rho) - y)))
        ident = DF.kelvin_identity_defect(y, rho)
        conf = DF.conformality_defect(a["p"], a["eN_sweep"][-1])
        cf = float(np.max(np.abs(DF.shear_exp(a["p"], 0.01) - DF.shear_closed_form(a["p"], 0.01))))
    ids = {"kelvin_roundtrip": inv, "kelvin_product": ident, "shear_conformality": conf,
           "shear_closed_form": cf}
    res.checks["identities"] = max(ids.values()) <= 1e-10
    rows = []
    alpha_cfg = 0.25 if a["alpha_cfg"] == "auto" else float(a["alpha_cfg"])
    fields = {"planar": (lambda e: DF.planar_V, _planar_zero),
              "mode": (lambda e: DF.V_from_hodograph(_mode_v, e), _mode_v)}
    slopes = {}
    with _Stage(res, "sweep"):
        for fname, (mkV, v) in fields.items():
            k6, k7 = [], []
            for eN in a["eN_sweep"]:
                P = DF.DeformationParams(eN, a["B"], tuple(a["p"]))
                V = mkV(eN)
                r6 = DF.verify_A6(V, v, P, DF.half_ball_points(21))
                r7 = DF.verify_A7(V, v, P, DF.half_ball_points(21))
                k6.append(r6.discrepancy)
                k7.append(r7.discrepancy)
                rows.append([fname, eN, r6.discrepancy, r7.discrepancy])
            for name, ks in (("kelvin", k6), ("shear", k7)):
                s_ = DF.sweep_slope(a["eN_sweep"], ks)
                slopes[f"{fname}_{name}"] = {"discrepancy": ks, "slope": s_}
                res.checks[f"{fname}_{name}_monotone"] = all(ks[i + 1] <= ks[i] for i in range(len(ks) - 1))
                res.checks[f"{fname}_{name}_sigma"] = ks[-1] <= a["sigma"]
                res.checks[f"{fname}_{name}_slope"] = s_ >= alpha_cfg
    IO.write_csv(out.path("deform_sweep.csv"), ["field", "eN", "kelvin", "shear"], rows)
    IO.write_json(out.path("deform.json"), {"identities": ids, "sweeps": slopes, "alpha_cfg": alpha_cfg})
    res.summary = {"identities": ids, "sweeps": slopes}


def random_density_schedule(rng, t_start=-0.75, t_mid=-0.5, cells=10):
    """Random 0/1 schedule on equal cells; at least half of (t_start, t_mid] is switched on."""
    w = (t_mid - t_start) / cells
    early = np.zeros(cells, dtype=int)
    early[rng.choice(cells, int(rng.integers(cells // 2, cells + 1)), replace=False)] = 1
    late = rng.integers(0, 2, 2 * cells)
    vals = np.concatenate([early, late])
    breaks = np.concatenate([t_start + w * np.arange(cells), t_mid + (-t_mid / (2 * cells)) * np.arange(2 * cells)])
    return RL.DensitySchedule(tuple(float(b) for b in breaks), tuple(int(v) for v in vals), t_start)


def run_barrier(d, out, res, threads: int = 1):
    a = d["analysis"]
    eps = _scalar_eps(d)
    with _Stage(res, "barrier"):
        fit = DF.fit_barrier_constant(a["r_values"])
        geo = [DF.BarrierGeometry(r).membership_residuals() for r in a["r_values"]]
    res.checks["barrier_fit"] = fit["passed"]
    res.checks["geometry"] = max(abs(v) for g in geo for v in g.values()) <= 1e-12
    rng = np.random.default_rng(d["seed"])
    c, C = a["c"], a["C_ode"]
    theta = RL.barrier_theta(c, C)
    worst_q, worst_up, worst_lo = 0.0, -math.inf, math.inf
    rows = []
    with _Stage(res, "ode"):
        ts = np.linspace(-0.75, 0.0, 61)
        late = ts[ts >= -0.5]
        for q in range(a["trials"]):
            f = random_density_schedule(rng)
            r1 = RL.harnack_barrier_ode(f, c, C, eps, ts)
            r2 = RL.harnack_barrier_quadrature(f, c, C, eps, ts)
            dq = float(np.max(np.abs(r1 - r2)))
            up = float(np.max(r1)) / (c * eps)
            lo = float(np.min(RL.harnack_barrier_ode(f, c, C, eps, late))) / (4 * theta * eps)
            worst_q, worst_up, worst_lo = max(worst_q, dq), max(worst_up, up), min(worst_lo, lo)
            rows.append([q, f.density(-0.75, -0.5), dq, up, lo])
    IO.write_csv(out.path("barrier_ode.csv"),
                 ["trial", "density", "quadrature_error", "r_over_ceps", "r_over_4thetaeps"], rows)
    res.checks["ode_quadrature"] = worst_q <= 1e-10
    res.checks["ode_upper"] = worst_up <= 1.0
    res.checks["ode_lower"] = worst_lo >= 1.0 - 1e-9
    IO.write_json(out.path("barrier.json"), {"fit": fit, "geometry": geo, "theta": theta,
                                             "ode": {"max_quadrature_error": worst_q,
                                                     "max_r_over_ceps": worst_up,
                                                     "min_r_over_4thetaeps": worst_lo}})
    res.summary = {"C": fit["C"], "variation": fit["variation"], "theta": theta}


def run_interp(d, out, res, threads: int = 1):
    a = d["analysis"]
    with _Stage(res, "A2"):
        a2 = RL.a2_sweep(a["a2_trials"], a["a2_nodes"], d["seed"])
        ext = RL.a2_extremals(a["a2_nodes"], unit_step=False)
        mid = a["a2_nodes"] // 2
        literal = RL.verify_interp_A2(ext[mid], unit_step=False)
    res.checks["A2_no_violation"] = a2.violations == 0
    with _Stage(res, "A3"):
        al, be = a["a3_pair"]
        a3 = RL.a3_sweep(al, be, a["a3_trials"], a["a3_nodes"], d["seed"])
    res.checks["A3_refinement"] = a3.passed
    a5 = []
    with _Stage(res, "A5"):
        x = np.linspace(-1, 1, a["a5_nodes"])
        for al5, be5 in a["a5_pairs"]:
            r = RL.verify_interp_A5(np.abs(x) ** (al5 + be5), al5, be5)
            a5.append(r)
            res.checks[f"A5_{al5:g}_{be5:g}"] = r.passed
    IO.write_json(out.path("interp.json"), {
        "A2": a2, "A2_open_step_range": {"value_at_0": float(ext[mid][mid]),
                                         "result": literal},
        "A3": a3, "A5": a5})
    res.summary = {"A2_violations": a2.violations, "A3_change": a3.relative_change,
                   "A5_constants": [r.constant for r in a5]}


RUNNERS: Dict[str, Callable] = {
    "simulate": run_simulate, "linearize": run_linearize, "harnack": run_harnack,
    "ladder": run_ladder, "supconv": run_supconv, "deform": run_deform,
    "barrier": run_barrier, "interp": run_interp,
}


# ---------------------------------------------------------------------------
# dispatch and manifest
# ---------------------------------------------------------------------------

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSERT = 0, 2, 3, 4


def resolve_output(cfg: Optional[RunConfig], kind: str, out: Optional[str]) -> Path:
    if out:
        return Path(out)
    if cfg is not None and cfg.data["output"]["dir"]:
        return Path(cfg.data["output"]["dir"])
    root = os.environ.get(ENV_OUTPUT_ROOT)
    return Path(root or "hslab-out") / kind


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def execute(cfg: RunConfig, out_dir, threads: int = 1, strict: bool = False,
            prefix: str = "") -> tuple:
    """Run one experiment; returns (exit_code, ExperimentResult, manifest dict)."""
    from .hele_shaw import RunAborted, StabilityError, SteepnessError
    from .laplace_strip import PinchingError, SolverError
    from .field_core import LatticeError

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = ExperimentResult(cfg.kind)
    started = _now()
    code, error = EXIT_OK, None
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            RUNNERS[cfg.kind](cfg.data, _Out(out_dir, res, prefix), res, threads)
    except (RunAborted, SolverError, PinchingError, StabilityError, SteepnessError,
            FloatingPointError, LatticeError, CL.WindowError) as exc:
        code, error = EXIT_NUMERIC, f"{type(exc).__name__}: {exc}"
    if code == EXIT_OK:
        if not res.passed or (strict and res.warnings):
            code = EXIT_ASSERT
    manifest = {
        "kind": cfg.kind, "config_hash": cfg.hash, "config": cfg.canonical, "version": __version__,
        "python": sys.version.split()[0], "numpy": np.__version__,
        "started": started, "finished": _now(), "stages": res.stages,
        "checks": res.checks, "warnings": res.warnings, "diagnostics": res.diagnostics,
        "datasets": sorted(res.datasets), "passed": code == EXIT_OK, "exit_code": code,
        "error": error, "strict": strict,
    }
    IO.write_json(out_dir / "manifest.json", manifest)
    return code, res, manifest


def execute_all(out_dir, threads: int = 1, strict: bool = False) -> tuple:
    """Every experiment at its default (acceptance) settings, each in its own subdirectory."""
    out_dir = Path(out_dir)
    cfgs = [build_config({"kind": k}) for k in KINDS]

    def one(cfg):
        return execute(cfg, out_dir / cfg.kind, 1, strict, prefix=cfg.kind + "/")

    started = _now()
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(one, cfgs))
    else:
        results = [one(c) for c in cfgs]
    codes = [r[0] for r in results]
    worst = max(codes) if any(codes) else 0
    if EXIT_NUMERIC in codes:
        worst = EXIT_NUMERIC
    manifest = {"kind": "all", "version": __version__, "started": started, "finished": _now(),
                "experiments": {c.kind: {"exit_code": r[0], "config_hash": c.hash,
                                         "checks": r[1].checks, "stages": r[1].stages}
                                for c, r in zip(cfgs, results)},
                "passed": worst == 0, "exit_code": worst}
    IO.write_json(out_dir / "manifest.json", manifest)
    return worst, results, manifest
