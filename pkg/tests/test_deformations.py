import numpy as np
import pytest

from hele_shaw_lab import deformations as DF


# -- barrier -----------------------------------------------------------------

def test_barrier_geometry_membership():
    for r in (0.01, 0.02, 0.04):
        res = DF.BarrierGeometry(r).membership_residuals()
        assert max(abs(v) for v in res.values()) < 1e-12


def test_barrier_flat_limit():
    mins = [DF.barrier_lower_bound(DF.BarrierGeometry(r)).minimum for r in (0.04, 0.01, 0.0025)]
    assert mins[0] < mins[1] < mins[2] < 1.0
    assert 1 - mins[2] < 0.05


def test_barrier_fd_oracle_and_south_pole():
    g = DF.BarrierGeometry(0.02)
    rep = DF.barrier_lower_bound(g)
    assert rep.minimum == pytest.approx(DF.barrier_fd_derivative(g, rep.argmin), abs=1e-8)
    assert rep.argmin == pytest.approx([0.5, 0.0], abs=1e-9)
    # south pole: K f'(R) (p - x_n)/R at x = -r e_n, i.e. K / R for n = 2
    assert rep.south_pole == pytest.approx(g.K / g.R, rel=1e-12)
    assert rep.south_pole == pytest.approx(DF.barrier_fd_derivative(g, [0.0, -0.02]), abs=1e-8)
    assert rep.U_on_sphere < 1e-12


@pytest.mark.parametrize("n,tol", [(2, 0.15), (3, 0.15)])
def test_barrier_constant_fit(n, tol):
    fit = DF.fit_barrier_constant((0.01, 0.02, 0.04), n)
    assert fit["passed"] and fit["variation"] < tol


# -- Kelvin and shear --------------------------------------------------------

def test_kelvin_identities():
    rng = np.random.default_rng(0)
    y = rng.uniform(-1, 1, (10000, 2))
    y[:, 1] = np.abs(y[:, 1])
    rho = 20.0
    assert np.max(np.abs(DF.kelvin_map(DF.kelvin_inverse(y, rho), rho) - y)) < 1e-10
    assert DF.kelvin_identity_defect(y, rho) < 1e-10


def test_kelvin_preserves_harmonicity():
    x1 = np.linspace(-1.5, 1.5, 61)
    xn = np.linspace(0, 3.0, 61)

    def V(p):
        return np.exp(p[..., 1] - 1.0) * np.cos(p[..., 0])

    F = DF.SampledField.from_callable(V, x1, xn)
    K = DF.kelvin(F, 20.0)
    inner = DF.SampledField(x1[5:-5], xn[5:-5], K.values[5:-5, 5:-5])
    assert np.all(np.isfinite(inner.values))
    assert inner.laplacian_residual() <= 10 * F.laplacian_residual()


def test_kelvin_sampled_domain_guard():
    F = DF.SampledField.from_callable(DF.planar_V, np.linspace(-3, 3, 5), np.linspace(0, 3, 5))
    with pytest.raises(ValueError):
        DF.kelvin(F, 10.0)


def test_shear_identities():
    assert np.allclose(DF.shear_exp((0.0, 0.0), 0.1), np.eye(2))
    V = DF.shear(DF.planar_V, (0.0, 0.0), 0.1)
    pts = DF.half_ball_points(11)
    assert np.array_equal(V(pts), DF.planar_V(pts))
    assert DF.conformality_defect((0.4, -0.3), 0.1) < 1e-12
    assert np.allclose(DF.shear_exp((0.3, 0.2), 0.1), DF.shear_closed_form((0.3, 0.2), 0.1), atol=1e-15)


def test_shear_series_third_order():
    M = DF.shear_matrix((1.0, 0.0))
    errs = []
    for e in (0.02, 0.01):
        series = np.eye(2) - e * M + 0.5 * e ** 2 * M @ M
        errs.append(np.max(np.abs(DF.shear_exp((1.0, 0.0), e) - series)))
    assert errs[1] < 1e-6
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.05)


def test_deformation_params_guards():
    with pytest.raises(ValueError):
        DF.DeformationParams(0.2, 1.0)
    with pytest.raises(ValueError):
        DF.DeformationParams(0.01, 0.5)
    assert DF.DeformationParams(0.1, 1.0).rho == pytest.approx(10.0)


# -- comparison lemmas -------------------------------------------------------

def zero(x):
    return np.zeros(np.asarray(x).shape[:-1])


def mode_v(x):
    return 0.5 * np.cos(x[..., 0]) * np.exp(-x[..., 1])


def test_kelvin_correction_boundary_slice():
    pts = np.array([[0.3, 0.0], [-0.8, 0.0]])
    assert np.allclose(DF.kelvin_correction(pts, 2.0), 2.0 * pts[:, 0] ** 2)


def test_A6_planar_small_eps():
    rep = DF.verify_A6(DF.planar_V, zero, DF.DeformationParams(1e-3, 1.0), DF.half_ball_points(21))
    assert rep.discrepancy <= 0.05


def test_A6_planar_linear_in_eps():
    eN = [0.1, 0.03, 0.01]
    d = [DF.verify_A6(DF.planar_V, zero, DF.DeformationParams(e), DF.half_ball_points(21)).discrepancy
         for e in eN]
    assert DF.sweep_slope(eN, d) == pytest.approx(1.0, abs=0.1)


def test_A7_zero_shift():
    for e in (0.1, 0.01):
        V = DF.V_from_hodograph(mode_v, e)
        pts = DF.half_ball_points(15)
        assert np.max(np.abs(DF.static_hodograph(V, e, pts) - mode_v(pts))) < 1e-10
        assert DF.verify_A7(V, mode_v, DF.DeformationParams(e), pts).discrepancy < 1e-10


def test_A7_sweep_slope():
    eN = [0.1, 0.03, 0.01]
    p = (0.5, 0.3)
    d = [DF.verify_A7(DF.V_from_hodograph(mode_v, e), mode_v, DF.DeformationParams(e, 1.0, p),
                      DF.half_ball_points(21)).discrepancy for e in eN]
    assert d[0] > d[1] > d[2]
    assert DF.sweep_slope(eN, d) >= 0.25
