import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose
from scipy.linalg import expm

from annulus.lax_frame import (
    LambdaGrid,
    alpha_from_zeta,
    commutator_residual,
    integrate_frame,
    integrate_grid,
    integrate_lax,
    line_path,
    monodromy,
    monodromy_direct,
    omega_from_zeta,
    potential_from_jet,
)
from annulus.poly_core import a_from_potential, flat_potential, offdiagonal_potential, validate_potential
from annulus.sinh_gordon_lab import OmegaField, sinh_gordon_residual

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)


def test_lambda_grid_contains_one():
    g = LambdaGrid.build(7, extra=[0.5])
    assert g.index(1.0) == 0
    assert g.unit_mask.sum() == 7
    with pytest.raises(ValueError):
        LambdaGrid.build(4, extra=[0.0])
    with pytest.raises(KeyError):
        g.index(0.3)


def test_alpha_flat_seed():
    az, azb = alpha_from_zeta(flat_potential().matrix)
    assert_allclose(az[0], [[0, 0.25j], [0, 0]])
    assert_allclose(az[1], [[0, 0], [0.25j, 0]])
    assert_allclose(azb[0], [[0, 0.25j], [0, 0]])
    assert_allclose(azb[1], [[0, 0], [0.25j, 0]])
    assert omega_from_zeta(flat_potential().matrix.coeffs) == 0


def test_alpha_rejects_bad_beta():
    c = np.array(flat_potential().matrix.coeffs)
    c[0, 0, 1] = 0.25
    with pytest.raises(ValueError):
        alpha_from_zeta(c)


def test_flat_killing_field_constant():
    kf = integrate_lax(flat_potential(), line_path(0, 3 + 2j, 10))
    assert np.max(np.abs(kf.zeta - flat_potential().matrix.coeffs)) < 1e-15


def test_flat_frame_is_exponential():
    xs = np.linspace(0, 2 * np.pi, 9)
    fr = integrate_frame(flat_potential(), LambdaGrid.build(8), xs)
    for x, F in zip(xs, fr.at_lambda(1.0)):
        assert_allclose(F, expm(0.5j * x * SIGMA1), atol=1e-9)
    assert_allclose(fr.at_lambda(1.0)[4], [[0, 1j], [1j, 0]], atol=1e-9)
    assert_allclose(fr.at_lambda(1.0)[-1], -np.eye(2), atol=1e-9)


def test_flat_monodromy_eigenvalues():
    M = monodromy(integrate_frame(flat_potential(), LambdaGrid.build(16), [0, 2 * np.pi]), 2 * np.pi)
    assert_allclose(M.at_lambda(1.0), -np.eye(2), atol=1e-9)
    ev = np.linalg.eigvals(M.at_lambda(-1.0))
    assert_allclose(ev, [1, 1], atol=1e-6)
    tr = np.trace(M.M[M.grid.unit_mask], axis1=-2, axis2=-1)
    assert np.max(np.abs(tr.imag)) < 1e-9
    with pytest.raises(ValueError):
        monodromy(integrate_frame(flat_potential(), LambdaGrid.build(4), [0, 1.0]), 2.0)


SEEDS = [offdiagonal_potential([0.3 + 0.2j]), offdiagonal_potential([0.5, -0.4j]),
         potential_from_jet(0.3, 0.1 + 0.2j, 0.05j, 0.7)]


@pytest.mark.parametrize("xi", SEEDS)
def test_isospectral_killing_field(xi):
    path = [0, 4.0, 4 + 3j, -2 + 3j, -2 - 5j]
    kf = integrate_lax(xi, path)
    lam = LambdaGrid.build(32, extra=[0.4, 2.5, 0.2 + 0.3j]).points
    assert kf.det_drift(lam) <= 1e-8


@pytest.mark.parametrize("xi", SEEDS)
def test_frame_reality_and_unitarity(xi):
    extra = [0.5, 2.0, 0.3 + 0.4j, 1 / np.conj(0.3 + 0.4j)]
    grid = LambdaGrid.build(16, extra=extra)
    fr = integrate_frame(xi, grid, [0, 2.0, 2 + 1.5j])
    assert fr.unitarity_drift() <= 1e-8
    assert fr.det_drift() <= 1e-8
    for lam in extra:
        Fa = fr.at_lambda(lam)
        Fb = fr.at_lambda(1 / np.conj(lam))
        assert np.max(np.abs(np.conj(np.swapaxes(Fb, -1, -2)) @ Fa - np.eye(2))) <= 1e-8


def test_two_alpha0_is_omega_z():
    xi = SEEDS[0]
    h = 0.02
    for k, hh in enumerate((h, h / 2)):
        m = 20 * (k + 1)
        xs = hh * np.arange(2 * m + 1)
        zeta, _, _ = integrate_grid(xi, xs, xs, max_step=hh / 2)
        w = omega_from_zeta(zeta)
        wx = (w[m, m + 1] - w[m, m - 1]) / (2 * hh)
        wy = (w[m + 1, m] - w[m - 1, m]) / (2 * hh)
        err = abs(0.5 * (wx - 1j * wy) - zeta[m, m, 1, 0, 0])
        if hh == h:
            e1 = err
    assert e1 < 1e-3
    assert abs(e1 / err - 4) < 0.5


def test_pipeline_omega_solves_sinh_gordon():
    xi = SEEDS[1]
    res = []
    for n in (20, 40):
        h = 1.0 / n
        xs = h * np.arange(n + 1)
        zeta, _, _ = integrate_grid(xi, xs, xs, max_step=h / 4)
        res.append(sinh_gordon_residual(OmegaField(omega_from_zeta(zeta), h, h)))
    assert abs(res[0] / res[1] - 4) < 0.5


def test_potential_from_jet_reproduces_jet():
    w, wz, wzz, th = 0.4, 0.1 - 0.3j, 0.07 + 0.02j, 1.1
    xi = potential_from_jet(w, wz, wzz, th)
    assert validate_potential(xi).valid
    assert_allclose(omega_from_zeta(xi.matrix.coeffs), w, rtol=1e-15)
    h = 1e-3
    zeta, _, _ = integrate_grid(xi, np.array([0.0, h]), np.array([0.0]), max_step=h / 4)
    z2, _, _ = integrate_grid(xi, np.array([0.0]), np.array([0.0, h]), max_step=h / 4)
    # Killing field derivatives: alpha_0 tracks omega_z, its z-derivative omega_zz
    a0x = (zeta[0, 1, 1, 0, 0] - zeta[0, 0, 1, 0, 0]) / h
    a0y = (z2[1, 0, 1, 0, 0] - z2[0, 0, 1, 0, 0]) / h
    assert abs(0.5 * (a0x - 1j * a0y) - wzz) < 1e-2 * (1 + abs(wzz))
    with pytest.raises(ValueError):
        potential_from_jet(0.0, 0.1, 0.1)


def test_flat_monodromy_commutes_with_seed():
    M = monodromy_direct(flat_potential(), [1.0, -1.0, 1j, 0.5], 2 * np.pi)
    assert commutator_residual(M, flat_potential()) < 1e-9


def test_monodromy_fourth_order():
    xi = SEEDS[0]
    lam = [0.5, 1j]
    vals = [monodromy_direct(xi, lam, 1.5 + 0.5j, max_step=s).M for s in (0.2, 0.1, 0.05)]
    r = np.max(np.abs(vals[0] - vals[1])) / np.max(np.abs(vals[1] - vals[2]))
    assert 12 < r < 20


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(-np.pi, np.pi), st.floats(-3, 3), st.floats(-3, 3))
def test_isospectral_random(r, t, x, y):
    xi = offdiagonal_potential([r * np.exp(1j * t)])
    kf = integrate_lax(xi, [0, x, x + 1j * y], max_step=0.02)
    lam = LambdaGrid.build(8, extra=[0.3]).points
    assert kf.det_drift(lam) <= 1e-8
    a = a_from_potential(xi)
    assert a.degree == 2
