import numpy as np
import pytest

from hele_shaw_lab.laplace_strip import (
    PinchingError, boundary_gradient, build_mapping, solve_pressure,
)
from hele_shaw_lab.schedule import SlopeSchedule

from conftest import make_state


def test_planar_mapping_is_diagonal():
    s = make_state(32, 16, lambda x: 0.3 + 0 * x)
    c = build_mapping(s)
    G = c.matrix_at_nodes()
    D = 2.3
    assert c.planar
    assert np.allclose(G[..., 0, 0], D) and np.allclose(G[..., 1, 1], 1 / D)
    assert np.all(G[..., 0, 1] == 0.0)


def test_mapping_matches_symbolic_chain_rule():
    sp = pytest.importorskip("sympy")
    xs, ys = sp.symbols("x y")
    H, eps = 2.0, 0.1
    D = eps * sp.cos(xs) + H
    # (x, z) -> (x, y) with y = (z + H) / D; G = det(dX/dY) * J J^T
    zs = sp.Symbol("z")
    yexpr = (zs + H) / D
    J = sp.Matrix([[1, 0], [sp.diff(yexpr, xs), sp.diff(yexpr, zs)]])
    G = sp.simplify((J * J.T) * D)
    G = G.subs(zs, ys * D - H)
    f = sp.lambdify((xs, ys), G, "numpy")
    s = make_state(64, 32, lambda x: eps * np.cos(x))
    Gn = build_mapping(s).matrix_at_nodes()
    rng = np.random.default_rng(0)
    for _ in range(16):
        j, i = rng.integers(0, 32), rng.integers(0, 64)
        want = np.array(f(s.grid.horizontal.x[i], s.grid.y[j]), dtype=float)
        assert np.allclose(Gn[j, i], want, atol=1e-12)


def test_mapping_eigenvalue_bounds():
    s = make_state(64, 32, lambda x: 0.3 * np.sin(2 * x))
    c = build_mapping(s)
    ev = np.linalg.eigvalsh(c.matrix_at_nodes())
    m = np.max(np.abs(c.dD))
    K = (np.max(c.D) + 1 / np.min(c.D)) * (1 + m ** 2)
    assert ev.min() >= 1 / K - 1e-14 and ev.max() <= K + 1e-14


def test_planar_pressure_exact():
    s = make_state(32, 16, lambda x: 0.25 + 0 * x, schedule=SlopeSchedule.constant(1.7))
    u = solve_pressure(s)
    assert u.info.converged
    assert np.max(np.abs(u.values - 1.7 * (0.25 - u.physical_z()))) < 1e-9
    assert np.allclose(boundary_gradient(u), 1.7, atol=1e-9)


def test_auxiliary_mode_solve():
    k, H = 2, 2.0
    errs = []
    for n in (32, 64):
        s = make_state(n, n, H=H)
        x = s.grid.horizontal.x
        u = solve_pressure(s, flux=0.0, top=np.cos(k * x))
        z = u.physical_z()
        exact = np.cosh(k * (z + H)) / np.cosh(k * H) * np.cos(k * x)[None, :]
        errs.append(np.max(np.abs(u.values - exact)))
    assert errs[1] < 1e-3
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_curved_strip_second_order():
    # manufactured harmonic field with the prescribed bottom flux a
    a, k, c, H = 1.0, 2, 0.1, 2.0

    def exact(x, z):
        return -a * z + c * np.cosh(k * (z + H)) * np.cos(k * x)

    errs = []
    for n in (32, 64, 128):
        s = make_state(n, n // 2, lambda x: 0.08 * np.cos(x) + 0.05 * np.sin(3 * x), H=H)
        x = s.grid.horizontal.x
        u = solve_pressure(s, flux=a, top=exact(x, s.gamma))
        errs.append(np.max(np.abs(u.values - exact(x[None, :], u.physical_z()))))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.8), (errs, rates)


def test_boundary_gradient_linearized_mode():
    delta, k, H = 0.05, 1, 2.0
    s = make_state(128, 64, lambda x: delta * np.cos(k * x), H=H)
    g = boundary_gradient(solve_pressure(s))
    pred = 1 - delta * k * np.tanh(k * H) * np.cos(k * s.grid.horizontal.x)
    crest, trough = 0, 64
    assert abs(g[crest] - pred[crest]) < 0.1 * delta * k * np.tanh(k * H)
    assert abs(g[trough] - pred[trough]) < 0.1 * delta * k * np.tanh(k * H)
    assert g[crest] < 1 < g[trough]


def test_pinching_detected():
    with pytest.raises(PinchingError):
        build_mapping(make_state(32, 16, lambda x: -1.9 + 1.5 * (1 + np.cos(x))))
