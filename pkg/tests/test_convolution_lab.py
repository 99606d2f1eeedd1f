import math

import numpy as np
import pytest

from hele_shaw_lab import convolution_lab as CL
from hele_shaw_lab.harness import random_flat_traces
from hele_shaw_lab.regularity_lab import periodic_distance

NX, HT = 64, 0.025
HX = 2 * np.pi / NX


def test_params_collect_all_errors():
    with pytest.raises(ValueError) as exc:
        CL.ConvolutionParams(-1.0, 0.0, 0.5, 0.1)
    msg = str(exc.value)
    assert "xi" in msg and "tau" in msg and "N" in msg
    with pytest.raises(ValueError, match="eps\\*N"):
        CL.ConvolutionParams(0.1, 0.1, 20.0, 0.1)


def test_window_too_small():
    p = CL.ConvolutionParams(1e-4, 0.01, 2.0, 0.1)
    with pytest.raises(CL.WindowError):
        CL.sup_conv(np.zeros((20, NX)), p, HX, HT)


def test_constant_is_fixed_with_zero_dual_offset():
    p = CL.ConvolutionParams(0.5, 0.01, 2.0, 0.1)
    v = np.full((16, NX), 0.3)
    for f in (CL.sup_conv, CL.inf_conv):
        r = f(v, p, HX, HT)
        assert np.all(r.values == 0.3)
        assert np.all(r.record.dy == 0) and np.all(r.record.ds == 0)


def test_cone_closed_form():
    N = 2.0
    xi = 4 * N * 3 * HX
    p = CL.ConvolutionParams(xi, 0.01, N, 0.1)
    cone = np.tile(periodic_distance(np.arange(NX) * HX, 0.0), (12, 1))
    val, arg = CL.cone_value(xi, N)
    r = CL.sup_conv(cone, p, HX, HT)
    assert r.values[0, 0] == pytest.approx(val, abs=1e-14)
    assert abs(r.record.dy[0, 0]) * HX == pytest.approx(arg)
    m = CL.inf_conv(-cone, p, HX, HT)
    assert m.values[0, 0] == pytest.approx(-val, abs=1e-14)


def test_inf_sup_duality():
    rng = np.random.default_rng(0)
    p = CL.ConvolutionParams(0.09, 0.01, 4 / 3, 0.05)
    for _ in range(100):
        v = rng.uniform(-1, 1, (12, NX))
        a = CL.inf_conv(-v, p, HX, 0.04).values
        b = CL.sup_conv(v, p, HX, 0.04).values
        assert np.array_equal(a, -b)


def test_sandwich_on_mode_trace():
    t = np.arange(30) * HT
    v = np.cos(2 * np.arange(NX) * HX)[None, :] * np.exp(-2 * t)[:, None]
    p = CL.ConvolutionParams(0.09, 0.01, 2.0, 0.05)
    r = CL.sup_conv(v, p, HX, HT)
    assert np.all(v[r.t_index] <= r.values)
    assert np.all(r.values <= CL.window_sup(v, r.window, r.t_index))


def test_planar_trace_passes():
    p = CL.ConvolutionParams(0.09, 0.01, 4 / 3, 0.05)
    rep = CL.check_lemma52(np.full((40, NX), 0.2), p, HX, 0.01)
    assert rep.passed
    assert rep.items["a_flatness"].value == pytest.approx(0.2)


def test_random_flat_traces_pass():
    p = CL.ConvolutionParams(0.09, 0.01, 4 / 3, 0.05)
    for v in random_flat_traces(9, 64, 60, 0.01, seed=3):
        rep = CL.check_lemma52(v, p, HX, 0.01)
        assert rep.passed, rep.failures()
        assert rep.items["g_tau_monotone"].passed


def test_drift_variant_cancels_planar_motion():
    p = CL.ConvolutionParams(0.09, 0.01, 4 / 3, 0.05)
    t = np.arange(30) * 0.01
    drift = np.where(t < 0.15, t, 0.15 + 2 * (t - 0.15)) / 0.05
    v = np.tile(drift[:, None], (1, NX)) + 0.1 * np.cos(np.arange(NX) * HX)[None, :]
    r = CL.sup_conv(v, p, HX, 0.01, drift=drift)
    base = CL.sup_conv(v - drift[:, None], p, HX, 0.01)
    assert np.allclose(r.values - drift[r.t_index][:, None], base.values, atol=1e-13)
    assert r.variable_slope


def test_lipschitz_limit_formula():
    p = CL.ConvolutionParams(0.09, 0.01, 4 / 3, 0.05)
    assert CL.lipschitz_limit(p, HX) == pytest.approx(2 * p.N / math.sqrt(p.xi) + 2 * p.N * HX / p.xi)
