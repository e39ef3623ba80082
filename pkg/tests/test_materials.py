import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ewod import materials as mat
from ewod.materials import MaterialParams, PhysicalScales, PinningParams

finite = st.floats(-50, 50, allow_nan=False)


def mp_slave(v1, v2, d, x):
    return float(mp.mpf(v1 - v2) / 2 * (2 / mp.pi) * mp.atan(mp.mpf(x) / d) + mp.mpf(v1 + v2) / 2)


def test_slave_examples():
    assert mat.slave_eval(100, 1, 0.05, 0.0) == pytest.approx(50.5)
    assert mat.slave_eval(100, 1, 0.05, 1e12) == pytest.approx(100.0)
    assert mat.slave_eval(100, 1, 0.05, -1e12) == pytest.approx(1.0)
    assert abs(float(mat.slave_eval(100, 1, 0.05, 1.0)) - 98.43) <= 0.01
    assert float(mat.slave_eval(100, 1, 0.05, 1.0)) == pytest.approx(mp_slave(100, 1, 0.05, 1.0), rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(finite, st.floats(0.01, 1.0), st.floats(0.1, 100), st.floats(0.1, 100))
def test_slave_bounded_and_monotone(phi, d, v1, v2):
    v = float(mat.slave_eval(v1, v2, d, phi))
    assert min(v1, v2) <= v <= max(v1, v2)
    dv = float(mat.slave_deriv(v1, v2, d, phi))
    assert np.sign(dv) == np.sign(v1 - v2) or dv == 0.0 or v1 == v2


def test_double_well_examples():
    for p in (-1.0, 1.0):
        W, dW, _ = mat.double_well(p)
        assert W == 0 and dW == 0
    assert tuple(map(float, mat.double_well(0.0))) == (0.25, 0.0, -1.0)
    assert tuple(map(float, mat.double_well(2.0))) == (1.0, 2.0, 2.0)
    # C1 at the junctions
    for p in (-1.0, 1.0):
        lo, hi = mat.double_well(p - 1e-9), mat.double_well(p + 1e-9)
        assert abs(lo[0] - hi[0]) < 1e-15 and abs(lo[1] - hi[1]) < 1e-8


def test_theta_examples():
    T, dT, _ = mat.theta_fs(0.0, 2 * math.pi / 3)
    assert T == 0 and dT == pytest.approx(math.pi * math.cos(2 * math.pi / 3) / 4)
    T, dT, _ = mat.theta_fs(1.0, 2 * math.pi / 3)
    assert T == pytest.approx(-0.25) and abs(dT) < 1e-15
    T, dT, d2T = mat.theta_fs(np.linspace(-3, 3, 11), math.pi / 2)
    assert np.allclose(T, 0) and np.allclose(dT, 0) and np.allclose(d2T, 0)
    T, dT, _ = mat.theta_fs(3.0, 2 * math.pi / 3)
    assert T == pytest.approx(-0.25) and dT == 0.0


def test_psi_examples():
    assert float(mat.psi_eval(0.0, 0.05)) == pytest.approx(20.0)
    assert float(mat.psi_eval(1.0, 0.05)) == pytest.approx(20 * math.exp(-10), rel=1e-12)
    assert float(mat.psi_eval(1.0, 0.05)) == pytest.approx(9.08e-4, rel=1e-3)
    x = np.linspace(-2, 2, 17)
    assert np.array_equal(mat.psi_eval(x, 0.1), mat.psi_eval(-x, 0.1))


def test_slip_examples():
    p = MaterialParams()
    assert np.all(mat.slip_coefficient(np.array([-2.0, 0.0, 0.7]), np.array([0.0, 1e3, 5.0]), p) == 10.0)
    q = p.with_(delta=0.05, pinning=PinningParams(T_p=2.0))
    assert float(mat.slip_coefficient(0.9, 0.0, q)) == pytest.approx(float(q.eta(0.9)) / 0.05)
    assert float(mat.slip_coefficient(0.0, 8.0, q)) == pytest.approx(float(q.eta(0.0)) * 0.05)
    assert float(mat.slip_coefficient(0.0, 1.0, q)) == pytest.approx(float(q.eta(0.0)) / 0.05)
    assert float(mat.slip_coefficient(0.0, 2.0, q)) == pytest.approx(float(q.eta(0.0)))


def test_slip_monotone_in_stress():
    q = MaterialParams(delta=0.05, pinning=PinningParams(T_p=1.0))
    s = np.geomspace(1e-3, 1e3, 400)
    beta = mat.slip_coefficient(np.zeros_like(s), s, q)
    assert np.all(np.diff(beta) <= 1e-12)


def test_perm_quotient():
    p = MaterialParams(eps1=5.0, eps2=1.0, delta=0.05)
    assert float(mat.perm_diff_quotient(0.0, 0.0, p)) == pytest.approx(4 / (math.pi * 0.05))
    # high-precision oracle: (eps(1) - eps(-1)) / 2
    exact = (mp_slave(5, 1, 0.05, 1.0) - mp_slave(5, 1, 0.05, -1.0)) / 2
    assert float(mat.perm_diff_quotient(1.0, -1.0, p)) == pytest.approx(exact, rel=1e-13)
    assert exact == pytest.approx(1.9363, abs=1e-4)


@settings(max_examples=200, deadline=None)
@given(finite, finite)
def test_perm_cancellation(a, b):
    p = MaterialParams()
    lhs = float(mat.perm_diff_quotient(a, b, p)) * (a - b)
    rhs = float(p.eps(a) - p.eps(b))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(rhs))


def test_stabilization_bounds():
    A, B = mat.stabilization_bounds(MaterialParams())
    assert A == 1.0 and B == pytest.approx(math.pi ** 2 / 32) and B == pytest.approx(0.3084, abs=1e-4)
    assert mat.stabilization_bounds(MaterialParams(theta_s=math.pi / 2))[1] == pytest.approx(0.0, abs=1e-16)


def test_params_validation():
    with pytest.raises(ValueError):
        MaterialParams(gamma=0.0)
    with pytest.raises(ValueError):
        PinningParams(T_p=-1.0)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        MaterialParams(delta=0.3).check_scale(1.0)
    assert w


def water_scales(**kw):
    base = dict(rho_scale=996.93, eta_scale=8.68e-4, L_scale=1e-4, u_scale=0.01, V_scale=20.0,
                eps_scale=78.36 * 8.854e-12, M_scale=1.0, K_scale=1.0, gamma=0.07199, lam=1.0,
                alpha=1.0)
    base.update(kw)
    return PhysicalScales(**base)


def test_nondim_examples():
    g = mat.nondim_groups(water_scales())
    assert g.Re == pytest.approx(1.149, rel=1e-3)
    assert g.Ca == pytest.approx(1.206e-4, rel=1e-3)
    assert g.We == pytest.approx(1.385e-4, rel=1e-3)
    assert g.Bo_EW == pytest.approx(0.0386, rel=2e-3)
    with pytest.raises(ValueError):
        water_scales(gamma=0.0)


@settings(max_examples=50, deadline=None)
@given(*(st.floats(1e-3, 1e3) for _ in range(4)))
def test_we_is_re_times_ca(rho, eta, L, u):
    g = mat.nondim_groups(water_scales(rho_scale=rho, eta_scale=eta, L_scale=L, u_scale=u))
    assert g.We == pytest.approx(g.Re * g.Ca, rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_convex_splitting_wall(a, b):
    """Theta(a) - Theta(b) <= Theta'(b)(a-b) + B_min (a-b)^2 (concave part controlled)."""
    p = MaterialParams()
    B = mat.stabilization_bounds(p)[1]
    Ta, _, _ = mat.theta_fs(a, p.theta_s)
    Tb, dTb, _ = mat.theta_fs(b, p.theta_s)
    assert Ta - Tb <= dTb * (a - b) + B * (a - b) ** 2 + 1e-12
