import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.integrate import quad

from annulus.sinh_gordon_lab import (
    AbreschParams,
    NotASolution,
    OmegaField,
    closed_form_flows,
    fit_onto,
    jacobi_apply,
    lame_basis,
    lsg_residual,
    omega_from_profiles,
    pinkall_sterling,
    shiffman_field,
    sign_changes,
    sinh_gordon_residual,
    solve_profile,
)

from conftest import LAB_PARAMS, lab


def quartic_period(params, axis):
    """4 * integral of df / sqrt(-(f^4 + k f^2 + c0)) by weighted Gauss quadrature."""
    d1, d2, _ = params.deltas(axis)
    r = np.sqrt(d1)
    val, _ = quad(lambda t: 1 / np.sqrt((r + t) * (t * t - d2)), 0, r,
                  weight="alg", wvar=(0, -0.5), epsabs=1e-14, epsrel=1e-14)
    return 4 * val


def test_params_reject_positive():
    with pytest.raises(ValueError):
        AbreschParams(0.1, -0.2)


def test_flat_profile_is_zero():
    f = solve_profile(AbreschParams(0.0, 0.0), "x", 32)
    assert f.degenerate
    assert np.all(f.f == 0)
    om = omega_from_profiles(f, solve_profile(AbreschParams(0.0, 0.0), "y", 32))
    assert np.all(om.values == 0)
    assert sinh_gordon_residual(om) == 0


def test_turning_value_reference():
    d1, d2, disc = LAB_PARAMS.deltas("x")
    assert_allclose(disc, 1.61, rtol=1e-15)
    assert_allclose(d1, (-1.1 + np.sqrt(1.61)) / 2, rtol=1e-14)
    f = solve_profile(LAB_PARAMS, "x", 64)
    assert_allclose(np.max(np.abs(f.f)), 0.2906, atol=1e-4)
    assert_allclose(f.f[0], np.sqrt(d1), rtol=1e-15)


@pytest.mark.parametrize("axis", ["x", "y"])
def test_period_matches_quadrature(axis):
    f = solve_profile(LAB_PARAMS, axis, 64)
    assert abs(f.period - quartic_period(LAB_PARAMS, axis)) < 1e-6
    assert f.energy_residual() <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.0, -0.01), st.floats(-1.0, -0.01))
def test_energy_and_period_random(c, d):
    p = AbreschParams(c, d)
    for axis in ("x", "y"):
        f = solve_profile(p, axis, 32)
        assert f.energy_residual() <= 1e-9
        assert abs(f.period - quartic_period(p, axis)) < 1e-6


def test_sinh_gordon_residual_quadratic_decay():
    r = [sinh_gordon_residual(lab(n)[2]) for n in (32, 64, 128)]
    for a, b in zip(r, r[1:]):
        assert abs(a / b - 4) <= 0.5


def test_sinh_gordon_residual_of_non_solution():
    n, h = 9, 0.1
    x = h * np.arange(n)
    om = OmegaField(np.tile(x, (n, 1)), h, h)
    xmax = x[-2]
    assert_allclose(sinh_gordon_residual(om), abs(np.sinh(xmax) * np.cosh(xmax)), rtol=1e-12)


def test_residual_needs_5x5():
    with pytest.raises(ValueError):
        sinh_gordon_residual(OmegaField(np.zeros((4, 6)), 1.0, 1.0))


@pytest.mark.parametrize("n", [32, 64, 128])
def test_abresch_shiffman_small(n):
    om = lab(n)[2]
    h = max(om.hx, om.hy)
    assert np.max(np.abs(shiffman_field(om))) <= 5 * h**2


def test_shiffman_of_xy():
    n, h = 12, 0.05
    x = h * np.arange(n)
    X, Y = np.meshgrid(x, x)
    om = OmegaField(X * Y, h, h)
    s = shiffman_field(om)[2:-2, 2:-2]
    XY = (X * Y)[2:-2, 2:-2]
    # centered differences of xy: exact for omega_xy and the first derivatives
    assert_allclose(s, 1 - np.tanh(XY) * XY, atol=1e-12)


def test_omega_field_dump_round_trip():
    om = lab(32)[2]
    back = OmegaField.load(om.dump(), om.hx, om.hy)
    assert np.array_equal(back.values, om.values)


def test_lsg_examples():
    n, h = 64, 2 * np.pi / 64
    x = h * np.arange(n)
    om = OmegaField(np.zeros((n, n)), h, h)
    assert lsg_residual(np.zeros((n, n)), om) == 0
    u = np.tile(np.sin(x), (n, 1))
    assert lsg_residual(u, om) < h**2 / 12 * 1.01
    with pytest.raises(ValueError):
        lsg_residual(np.zeros((3, 3)), om)


def test_jacobi_flat_sine():
    n, h = 64, 2 * np.pi / 64
    om = OmegaField(np.zeros((n, n)), h, h, y_periodic=True)
    u = np.tile(np.sin(np.arange(n) * h), (n, 1))
    assert np.max(np.abs(jacobi_apply(u, om))) < h**2 / 12 * 1.01


def test_jacobi_tanh_quadratic_decay():
    r = []
    for n in (32, 64, 128):
        om = lab(n)[2]
        r.append(np.max(np.abs(jacobi_apply(np.tanh(om.values), om))))
    for a, b in zip(r, r[1:]):
        assert abs(a / b - 4) <= 0.5


def test_hierarchy_flat_vanishes():
    om = OmegaField(np.zeros((16, 16)), 0.2, 0.2, y_periodic=True)
    st_ = pinkall_sterling(om, 1.0, 2)
    assert np.max(np.abs(st_.u[0])) == 0
    assert np.max(np.abs(st_.u[1])) == 0
    assert_allclose(st_.tau[-1], 0.25)


def test_hierarchy_u1_fixed_multiple_of_closed_form():
    # u_1 = -4 conj(gamma) (omega_zzz - 2 omega_z^3) + m u_0 with residual O(h^2)
    res = []
    for n in (64, 128):
        om = lab(n)[2]
        s = pinkall_sterling(om, 1.0, 1)
        cf = closed_form_flows(om)
        _, r = fit_onto(s.u[1] + 4 * cf[1], [cf[0]])
        res.append(r)
        coef, _ = fit_onto(s.u[1], [cf[1], cf[0]])
        assert abs(coef[0] + 4) < 0.05
    assert abs(res[0] / res[1] - 4) <= 0.5


def test_hierarchy_u2_closed_form_decay():
    res = []
    for n in (64, 128):
        om = lab(n)[2]
        s = pinkall_sterling(om, 1.0, 2)
        cf = closed_form_flows(om, 2)
        _, r = fit_onto(s.u[2], [cf[2], cf[1], cf[0]])
        res.append(r)
    assert abs(res[0] / res[1] - 4) <= 0.5


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_hierarchy_lsg_decay(k):
    r = []
    for n in (64, 128):
        s = pinkall_sterling(lab(n)[2], 1.0, 3)
        r.append(max(lsg_residual(s.u[k].real, lab(n)[2]), lsg_residual(s.u[k].imag, lab(n)[2])))
    assert abs(r[0] / r[1] - 4) <= 0.5


def test_hierarchy_rejects_non_solution():
    n, h = 32, 0.2
    y, x = np.mgrid[0:n, 0:n] * h
    om = OmegaField(0.3 * np.sin(2 * np.pi * x / (n * h)) * (1 + y), h, h)
    with pytest.raises(NotASolution):
        pinkall_sterling(om, 1.0, 2, compat_tol=1e-3)


def test_lame_reference():
    L = lame_basis(LAB_PARAMS, 256)
    d1, d2, _ = LAB_PARAMS.deltas("x")
    assert_allclose(L.eigenvalues, [-d1, 1.1, -d2], rtol=1e-14)
    assert L.eigenvalues[0] < L.eigenvalues[1] < L.eigenvalues[2]
    assert np.min(L.functions[0]) > 0
    assert sign_changes(L.functions[1]) == 2
    assert_allclose(L.rayleigh_eigenvalues(), L.eigenvalues, atol=1e-3)


def test_lame_residual_decay():
    r1 = np.array(lame_basis(LAB_PARAMS, 64).residuals())
    r2 = np.array(lame_basis(LAB_PARAMS, 128).residuals())
    assert np.all(np.abs(r1 / r2 - 4) <= 0.5)


def test_lame_rejects_degenerate():
    with pytest.raises(ValueError):
        lame_basis(AbreschParams(0.0, -0.2))


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.0, -0.01), st.floats(-1.0, -0.01))
def test_lame_ordering_random(c, d):
    lam = lame_basis(AbreschParams(c, d), 64).eigenvalues
    assert lam[0] < lam[1] < lam[2]
