import numpy as np
import pytest

from hele_shaw_lab.hele_shaw import run
from hele_shaw_lab.hodograph import (
    boundary_relation_residual, interior_hodograph, trace_from_interface,
)
from hele_shaw_lab.laplace_strip import solve_pressure
from hele_shaw_lab.schedule import SlopeSchedule

from conftest import make_state


def test_planar_trace_is_zero():
    tr = trace_from_interface(run(make_state(16, 8), 0.01, 4), 0.1)
    assert np.all(np.abs(tr.values) < 1e-9)


def test_shifted_planar_trace_is_constant():
    eps, c = 0.05, 0.7
    tr = trace_from_interface(run(make_state(16, 8, lambda x: -eps * c + 0 * x), 0.01, 4), eps)
    assert np.allclose(tr.values, c, atol=1e-8)


def test_decaying_mode_trace(mode_run):
    traj, tr = mode_run
    x = traj.x
    amp = (traj.gammas - traj.reference[:, None]) @ np.cos(2 * x) / (len(x) / 2)
    want = -amp[:, None] / tr.eps * np.cos(2 * x)[None, :]
    assert np.allclose(tr.values, want, atol=2e-3 * np.max(np.abs(want)))
    # gamma = -eps cos(2x) lags the reference at the crests, so ubar = +cos(2x)
    assert tr.values[0] == pytest.approx(np.cos(2 * x))
    assert np.all(np.diff(np.max(tr.values, axis=1)) < 0)


def test_interior_hodograph_planar_shift():
    eps, c = 0.05, 0.4
    s = make_state(16, 16, lambda x: -eps * c + 0 * x)
    xn = np.linspace(0, 1, 5)
    hf = interior_hodograph(solve_pressure(s), eps, xn)
    assert np.allclose(hf.values.lo, c, atol=1e-8) and np.all(hf.values.singleton_mask)


def test_interior_hodograph_planar_slope():
    eps, c, a = 0.05, 0.4, 1.6
    s = make_state(16, 16, lambda x: -eps * c + 0 * x, schedule=SlopeSchedule.constant(a))
    xn = np.linspace(0, 1, 5)
    hf = interior_hodograph(solve_pressure(s), eps, xn)
    want = c + xn * (1 - a) / (eps * a)
    assert np.allclose(hf.values.lo, want[:, None], atol=1e-7)


def test_interior_boundary_limit_matches_trace(mode_run):
    traj, tr = mode_run
    i = 10
    hf = interior_hodograph(traj.pressures[i], tr.eps, np.array([0.0, 0.01]), traj.state(i))
    assert np.allclose(hf.values.lo[0], tr.values[i], atol=1e-8)


def test_boundary_relation_planar_variable_slope():
    sched = SlopeSchedule.from_pairs([[0.0, 1.0], [0.05, 2.0]])
    traj = run(make_state(32, 16, schedule=sched), 0.01, 10, keep_pressure=True)
    rel = boundary_relation_residual(trace_from_interface(traj, 0.1), traj)
    assert rel.max_residual < 1e-6
    assert np.max(np.abs(rel.lhs)) < 1e-6


def _mode_relation(n_x, eps, dt, steps):
    s = make_state(n_x, n_x // 2, lambda x: -eps * np.cos(2 * x))
    traj = run(s, dt, steps, 1, keep_pressure=True)
    return boundary_relation_residual(trace_from_interface(traj, eps), traj)


def test_boundary_relation_mode_refinement():
    coarse = _mode_relation(32, 0.05, 0.02, 10)
    fine = _mode_relation(64, 0.05, 0.01, 20)
    scale = np.max(np.abs(fine.lhs))
    assert fine.max_residual < 0.05 * scale
    assert fine.max_residual < 0.5 * coarse.max_residual


def test_quadratic_term_scales_with_eps():
    a = _mode_relation(64, 0.05, 0.01, 5)
    b = _mode_relation(64, 0.025, 0.01, 5)
    assert b.max_quadratic / a.max_quadratic == pytest.approx(0.5, rel=0.1)
