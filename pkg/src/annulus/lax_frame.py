"""Lax flow of polynomial Killing fields, extended frames and monodromy.

Killing fields are carried as coefficient stacks of shape (..., g + 2, 2, 2)
for the powers lambda^-1 .. lambda^g.  Every path in the z-plane is a chain of
straight segments; along a segment with velocity ``e`` (dz = e ds) the flow is

    d zeta / ds = [zeta, e alpha_z + conj(e) alpha_zbar],
    d F / ds    = F (e alpha_z + conj(e) alpha_zbar).

The 1-form carries half of the diagonal of the lambda^0 coefficient of zeta;
with that choice 2 * alpha_0 = omega_z and omega solves the sinh-Gordon
equation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .poly_core import ComplexPoly, MatrixLaurent, Potential, a_from_potential, eval_poly

logger = logging.getLogger(__name__)

MAX_STEP = 0.01
DET_RENORM_TOL = 1e-10


class LaxBlowUp(RuntimeError):
    """Raised when the Lax or frame integration leaves the admissible region."""


# ---------------------------------------------------------------- 1-form


def alpha_parts(zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(alpha_0, beta_-1, gamma_0) read from Killing field coefficients."""
    half_diag = 0.5 * zeta[..., 1, 0, 0]
    return half_diag, zeta[..., 0, 0, 1], zeta[..., 1, 1, 0]


def alpha_from_zeta(zeta: MatrixLaurent | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the dz and dzbar parts of the 1-form.

    Returns two arrays of shape (..., 2, 2, 2).  The dz part holds the
    lambda^-1 and lambda^0 coefficients, the dzbar part the lambda^0 and
    lambda^1 coefficients.
    """
    c = zeta.coeffs if isinstance(zeta, MatrixLaurent) else np.asarray(zeta)
    a0, bm1, c0 = alpha_parts(c)
    if np.any(np.abs(np.real(bm1)) > 1e-8 * np.abs(bm1)) or np.any(np.imag(bm1) <= 0):
        raise ValueError("beta_-1 must lie in i R_+")
    shape = c.shape[:-3]
    az = np.zeros(shape + (2, 2, 2), dtype=complex)
    azb = np.zeros(shape + (2, 2, 2), dtype=complex)
    az[..., 0, 0, 1] = bm1
    az[..., 1, 0, 0] = a0
    az[..., 1, 1, 1] = -a0
    az[..., 1, 1, 0] = c0
    azb[..., 0, 0, 0] = -np.conj(a0)
    azb[..., 0, 1, 1] = np.conj(a0)
    azb[..., 0, 0, 1] = -np.conj(c0)
    azb[..., 1, 1, 0] = -np.conj(bm1)
    return az, azb


def omega_from_zeta(zeta: np.ndarray) -> np.ndarray:
    """omega from 4 beta_-1 = i e^omega."""
    return np.log(4.0 * np.imag(zeta[..., 0, 0, 1]))


def _direction_form(zeta: np.ndarray, e: complex) -> np.ndarray:
    """Coefficients (lambda^-1, lambda^0, lambda^1) of e alpha_z + conj(e) alpha_zbar."""
    a0, bm1, c0 = alpha_parts(zeta)
    out = np.zeros(zeta.shape[:-3] + (3, 2, 2), dtype=complex)
    ec = np.conj(e)
    out[..., 0, 0, 1] = e * bm1
    out[..., 1, 0, 0] = e * a0 - ec * np.conj(a0)
    out[..., 1, 1, 1] = -out[..., 1, 0, 0]
    out[..., 1, 1, 0] = e * c0
    out[..., 1, 0, 1] = -ec * np.conj(c0)
    out[..., 2, 1, 0] = -ec * np.conj(bm1)
    return out


def _lax_rhs(zeta: np.ndarray, e: complex) -> np.ndarray:
    """[zeta, A] truncated to the powers lambda^-1 .. lambda^g."""
    A = _direction_form(zeta, e)
    n = zeta.shape[-3]
    out = np.zeros_like(zeta)
    # zeta_j A_k lands in power (j-1)+(k-1); keep indices 0..n-1 of the -1 based list
    for k in range(3):
        shift = k - 1
        Ak = A[..., k, :, :][..., None, :, :]
        prod = zeta @ Ak - Ak @ zeta
        lo = max(0, -shift)
        hi = min(n, n - shift)
        out[..., lo + shift : hi + shift, :, :] += prod[..., lo:hi, :, :]
    return out


def _eval_direction(A: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """Evaluate direction forms (..., 3, 2, 2) at lam (L,) -> (..., L, 2, 2)."""
    pw = np.stack([1.0 / lam, np.ones_like(lam), lam], axis=0)  # (3, L)
    return np.einsum("...kij,kl->...lij", A, pw)


# ---------------------------------------------------------------- grids and fields


@dataclass(frozen=True)
class LambdaGrid:
    points: np.ndarray
    unit_mask: np.ndarray

    @classmethod
    def build(cls, n_circle: int = 64, extra: Sequence[complex] = ()) -> "LambdaGrid":
        pts = list(np.exp(2j * np.pi * np.arange(n_circle) / n_circle)) if n_circle else []
        if not any(abs(p - 1) < 1e-14 for p in pts):
            pts.insert(0, 1.0 + 0j)
        for e in extra:
            if abs(e) == 0:
                raise ValueError("lambda = 0 cannot be sampled")
            if not any(abs(p - e) < 1e-14 for p in pts):
                pts.append(complex(e))
        pts = np.array(pts, dtype=complex)
        return cls(pts, np.abs(np.abs(pts) - 1.0) < 1e-12)

    @classmethod
    def of(cls, points: Sequence[complex]) -> "LambdaGrid":
        pts = np.atleast_1d(np.asarray(points, dtype=complex))
        if np.any(pts == 0):
            raise ValueError("lambda = 0 cannot be sampled")
        return cls(pts, np.abs(np.abs(pts) - 1.0) < 1e-12)

    def index(self, lam: complex) -> int:
        d = np.abs(self.points - lam)
        i = int(np.argmin(d))
        if d[i] > 1e-12:
            raise KeyError(f"lambda = {lam} not in grid")
        return i


@dataclass
class KillingField:
    """Killing field samples along a z-path."""

    z: np.ndarray
    zeta: np.ndarray  # (len(z), g + 2, 2, 2)
    seed: Potential

    def at(self, i: int) -> MatrixLaurent:
        return MatrixLaurent(self.zeta[i], self.seed.g)

    @property
    def omega(self) -> np.ndarray:
        return omega_from_zeta(self.zeta)

    def det_drift(self, lam: np.ndarray) -> float:
        """max |(-lambda det zeta(z)) - a(lambda)| over the path and ``lam``."""
        a = eval_poly(a_from_potential(self.seed), lam)
        pw = lam[None, :] ** np.arange(-1, self.seed.g + 1)[:, None]
        vals = np.einsum("zkij,kl->zlij", self.zeta, pw)
        det = vals[..., 0, 0] * vals[..., 1, 1] - vals[..., 0, 1] * vals[..., 1, 0]
        return float(np.max(np.abs(-lam * det - a)))


@dataclass
class FrameField:
    """Extended frame on a z-path for every point of a lambda grid."""

    z: np.ndarray
    grid: LambdaGrid
    F: np.ndarray  # z.shape + (len(grid), 2, 2)
    killing: KillingField | None
    log: list[str] = field(default_factory=list)

    def at_lambda(self, lam: complex) -> np.ndarray:
        return self.F[..., self.grid.index(lam), :, :]

    def unitarity_drift(self) -> float:
        U = self.F[..., self.grid.unit_mask, :, :]
        if U.size == 0:
            return 0.0
        eye = np.eye(2)
        return float(np.max(np.abs(np.conj(np.swapaxes(U, -1, -2)) @ U - eye)))

    def det_drift(self) -> float:
        d = self.F[..., 0, 0] * self.F[..., 1, 1] - self.F[..., 0, 1] * self.F[..., 1, 0]
        return float(np.max(np.abs(d - 1)))


# ---------------------------------------------------------------- integrators


def _n_steps(length: float, step: float) -> int:
    return max(1, int(np.ceil(length / step - 1e-12)))


def _segment_rk4(zeta, F, lam, e, n, h, record=None):
    """RK4 for n steps of size h along direction e.  F may be None."""
    for _ in range(n):
        if F is None:
            k1 = _lax_rhs(zeta, e)
            k2 = _lax_rhs(zeta + 0.5 * h * k1, e)
            k3 = _lax_rhs(zeta + 0.5 * h * k2, e)
            k4 = _lax_rhs(zeta + h * k3, e)
            zeta = zeta + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        else:
            def rhs(zt, Ft):
                return _lax_rhs(zt, e), Ft @ _eval_direction(_direction_form(zt, e), lam)

            k1z, k1f = rhs(zeta, F)
            k2z, k2f = rhs(zeta + 0.5 * h * k1z, F + 0.5 * h * k1f)
            k3z, k3f = rhs(zeta + 0.5 * h * k2z, F + 0.5 * h * k2f)
            k4z, k4f = rhs(zeta + h * k3z, F + h * k3f)
            zeta = zeta + (h / 6.0) * (k1z + 2 * k2z + 2 * k3z + k4z)
            F = F + (h / 6.0) * (k1f + 2 * k2f + 2 * k3f + k4f)
        if not np.all(np.isfinite(zeta)):
            raise LaxBlowUp("non-finite Killing field")
    return zeta, F


def _renormalize_det(F: np.ndarray, log: list[str], where: str) -> np.ndarray:
    det = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    drift = np.max(np.abs(det - 1))
    if drift > DET_RENORM_TOL:
        msg = f"det drift {drift:.2e} at {where}; renormalized"
        logger.info(msg)
        log.append(msg)
        F = F / np.sqrt(det)[..., None, None]
    return F


def integrate_path(
    xi: Potential,
    z_path: Sequence[complex],
    grid: LambdaGrid | None = None,
    max_step: float = MAX_STEP,
    zeta0: np.ndarray | None = None,
    F0: np.ndarray | None = None,
):
    """Integrate along the polygon through ``z_path`` (which should start at 0).

    Returns (zeta samples, F samples or None, log).  Samples are taken at the
    vertices of the path.  ``zeta0``/``F0`` override the initial values, which
    may carry extra leading batch axes.
    """
    z = np.asarray(z_path, dtype=complex)
    zeta = np.array(xi.matrix.coeffs if zeta0 is None else zeta0, dtype=complex)
    lam = None if grid is None else grid.points
    F = None
    if grid is not None:
        F = np.broadcast_to(np.eye(2, dtype=complex), zeta.shape[:-3] + (len(lam), 2, 2)).copy() if F0 is None else np.array(F0)
    log: list[str] = []
    zs = [zeta.copy()]
    Fs = [None if F is None else F.copy()]
    for k in range(1, len(z)):
        dz = z[k] - z[k - 1]
        length = abs(dz)
        if length == 0:
            zs.append(zeta.copy())
            Fs.append(None if F is None else F.copy())
            continue
        n = _n_steps(length, max_step)
        e = dz / length
        zeta, F = _segment_rk4(zeta, F, lam, e, n, length / n)
        if F is not None:
            F = _renormalize_det(F, log, f"z={z[k]:.6g}")
        zs.append(zeta.copy())
        Fs.append(None if F is None else F.copy())
    zeta_arr = np.stack(zs, axis=-4) if zeta.ndim > 3 else np.stack(zs)
    F_arr = None
    if F is not None:
        F_arr = np.stack(Fs, axis=-4) if F.ndim > 3 else np.stack(Fs)
    return zeta_arr, F_arr, log


def integrate_lax(xi: Potential, z_path: Sequence[complex], max_step: float = MAX_STEP) -> KillingField:
    """Killing field with zeta(z_path[0]) = xi along the polygon ``z_path``."""
    zeta, _, _ = integrate_path(xi, z_path, None, max_step)
    return KillingField(np.asarray(z_path, dtype=complex), zeta, xi)


def integrate_frame(
    xi: Potential, grid: LambdaGrid, z_path: Sequence[complex], max_step: float = MAX_STEP
) -> FrameField:
    """Frame with F(z_path[0]) = identity at every lambda of ``grid``."""
    zeta, F, log = integrate_path(xi, z_path, grid, max_step)
    z = np.asarray(z_path, dtype=complex)
    return FrameField(z, grid, F, KillingField(z, zeta, xi), log)


def line_path(z0: complex, z1: complex, n: int) -> np.ndarray:
    """n + 1 equally spaced points from z0 to z1."""
    return z0 + (z1 - z0) * np.linspace(0.0, 1.0, n + 1)


# ---------------------------------------------------------------- monodromy


@dataclass(frozen=True)
class Monodromy:
    M: np.ndarray  # (len(grid), 2, 2)
    tau: complex
    grid: LambdaGrid

    def at_lambda(self, lam: complex) -> np.ndarray:
        return self.M[self.grid.index(lam)]


def monodromy(F: FrameField, tau: complex) -> Monodromy:
    """M = F(0)^-1 F(tau), read from a frame whose path ends at ``tau``."""
    idx = np.nonzero(np.abs(F.z - tau) < 1e-12 * max(1.0, abs(tau)))[0]
    if idx.size == 0:
        raise ValueError(f"z-path does not reach tau = {tau}")
    i = int(idx[-1])
    M = np.linalg.solve(F.F[0], F.F[i])
    return Monodromy(M, complex(tau), F.grid)


def monodromy_direct(
    xi: Potential, lam: Sequence[complex], tau: complex, max_step: float | None = None
) -> Monodromy:
    """Monodromy along the straight segment [0, tau] at the given lambdas."""
    grid = LambdaGrid.of(lam)
    step = min(MAX_STEP, abs(tau) / 2048) if max_step is None else max_step
    _, F, _ = integrate_path(xi, [0.0, tau], grid, step)
    return Monodromy(F[-1], complex(tau), grid)


def commutator_residual(M: Monodromy, xi: Potential) -> float:
    X = xi(M.grid.points)
    return float(np.max(np.abs(M.M @ X - X @ M.M)))


# ---------------------------------------------------------------- grids of samples


def potential_from_jet(omega: float, omega_z: complex, omega_zz: complex, theta: float = 0.0) -> Potential:
    """Genus-two potential whose Killing field reproduces the given 2-jet of omega.

    The lambda^0 diagonal of the Lax equation gives
    omega_zz = (i/4) e^{-omega} (e^{i theta} B + e^{2 omega} conj(B)) for the
    upper-right entry B, a real-linear equation solved in closed form.
    """
    if abs(omega) < 1e-8:
        raise ValueError("the jet does not determine the potential where omega = 0")
    gam = np.exp(1j * theta)
    rhs = -4j * omega_zz * np.exp(omega)
    B = (np.conj(rhs) - np.conj(gam) * rhs * np.exp(-2 * omega)) / (np.exp(2 * omega) - np.exp(-2 * omega))
    beta = 0.25j * np.exp(omega)
    gamma0 = 0.25j * gam * np.exp(-omega)
    c_m1 = np.array([[0, beta], [0, 0]], dtype=complex)
    c_0 = np.array([[omega_z, B], [gamma0, -omega_z]], dtype=complex)
    return Potential.from_coeffs([c_m1, c_0, -np.conj(c_0).T, -np.conj(c_m1).T])


def integrate_grid(xi: Potential, xs: np.ndarray, ys: np.ndarray, grid: LambdaGrid | None = None,
                   max_step: float = MAX_STEP, direction: complex = 1.0):
    """Killing field (and frame) on the tensor grid z = direction * (x + i y).

    Integrates along the first row, then along every column.  Returns
    (zeta (ny, nx, g+2, 2, 2), F (ny, nx, nlam, 2, 2) or None, log).  The path
    starts at z = 0, so xs[0] and ys[0] should be 0.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    row = direction * (xs + 1j * ys[0])
    path = np.concatenate([[0.0], row]) if abs(row[0]) > 0 else row
    zr, Fr, log = integrate_path(xi, path, grid, max_step)
    if abs(row[0]) > 0:
        zr = zr[1:]
        Fr = None if Fr is None else Fr[1:]
    col = direction * (xs[0] + 1j * ys)
    zc, Fc, log2 = integrate_path(xi, col, grid, max_step, zeta0=zr, F0=Fr)
    zeta = np.swapaxes(zc, 0, 1)
    F = None if Fc is None else np.swapaxes(Fc, 0, 1)
    return zeta, F, log + log2
