"""Closed-form Abresch solutions and finite-difference checks for sinh-Gordon.

This module is deliberately independent of the loop-group code: every quantity
is built from the two elliptic profiles and second-order stencils, so it can
serve as an oracle for the spectral pipeline.

Grids are stored with rows indexed by y and columns by x, the x direction
always periodic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

logger = logging.getLogger(__name__)

PROFILE_STEPS = 4096


class NotASolution(ValueError):
    """The Pinkall-Sterling system for tau_n is not compatible."""


@dataclass(frozen=True)
class AbreschParams:
    c: float
    d: float

    def __post_init__(self):
        if self.c > 0 or self.d > 0:
            raise ValueError("Abresch constants need c <= 0 and d <= 0")

    def quartic(self, axis: Literal["x", "y"] = "x") -> tuple[float, float]:
        """(k, c0) with profile energy -(f')^2 = f^4 + k f^2 + c0."""
        if axis == "x":
            return 1.0 + self.c - self.d, self.c
        return 1.0 + self.d - self.c, self.d

    def deltas(self, axis: Literal["x", "y"] = "x") -> tuple[float, float, float]:
        """(delta_1, delta_2, discriminant) for the chosen axis."""
        k, c0 = self.quartic(axis)
        disc = k * k - 4.0 * c0
        if disc < 0:
            raise ValueError(f"negative discriminant {disc}")
        r = np.sqrt(disc)
        return 0.5 * (-k + r), 0.5 * (-k - r), disc


@dataclass(frozen=True)
class EllipticProfile:
    x: np.ndarray
    f: np.ndarray
    fx: np.ndarray
    period: float
    k: float
    c0: float
    delta1: float
    delta2: float

    @property
    def fxx(self) -> np.ndarray:
        return -2.0 * self.f**3 - self.k * self.f

    @property
    def fxxx(self) -> np.ndarray:
        return -6.0 * self.f**2 * self.fx - self.k * self.fx

    @property
    def degenerate(self) -> bool:
        return self.delta1 <= 0.0

    def energy_residual(self) -> float:
        e = self.fx**2 + self.f**4 + self.k * self.f**2 + self.c0
        return float(np.max(np.abs(e)))


def quarter_period_quadrature(delta1: float, delta2: float, n: int = 64) -> float:
    """Integral of dphi / sqrt(delta1 sin^2 phi - delta2) over [0, pi/2].

    The substitution f = sqrt(delta1) sin(phi) removes the turning-point
    singularity; the integrand is smooth and even-periodic, so the midpoint rule
    converges geometrically.
    """
    phi = (np.arange(n) + 0.5) * (np.pi / 2) / n
    return float(np.sum(1.0 / np.sqrt(delta1 * np.sin(phi) ** 2 - delta2)) * (np.pi / 2) / n)


def _rk4_profile(f0, v0, k, h, n):
    f = np.empty(n + 1)
    v = np.empty(n + 1)
    f[0], v[0] = f0, v0

    def acc(y):
        return -2.0 * y**3 - k * y

    for i in range(n):
        y, w = f[i], v[i]
        k1f, k1v = w, acc(y)
        k2f, k2v = w + 0.5 * h * k1v, acc(y + 0.5 * h * k1f)
        k3f, k3v = w + 0.5 * h * k2v, acc(y + 0.5 * h * k2f)
        k4f, k4v = w + h * k3v, acc(y + h * k3f)
        f[i + 1] = y + h / 6.0 * (k1f + 2 * k2f + 2 * k3f + k4f)
        v[i + 1] = w + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    return f, v


def _locate_return(f, v, k, h, start):
    """First step after ``start`` where f_x crosses from + to -; refine by Hermite-Newton."""
    for i in range(start, len(v) - 1):
        if v[i] > 0 and v[i + 1] <= 0:
            a0, a1 = v[i], v[i + 1]
            d0 = -2.0 * f[i] ** 3 - k * f[i]
            d1 = -2.0 * f[i + 1] ** 3 - k * f[i + 1]
            s = a0 / (a0 - a1)
            for _ in range(30):
                h00 = 2 * s**3 - 3 * s**2 + 1
                h10 = s**3 - 2 * s**2 + s
                h01 = -2 * s**3 + 3 * s**2
                h11 = s**3 - s**2
                val = h00 * a0 + h10 * h * d0 + h01 * a1 + h11 * h * d1
                der = ((6 * s**2 - 6 * s) * a0 + (3 * s**2 - 4 * s + 1) * h * d0
                       + (-6 * s**2 + 6 * s) * a1 + (3 * s**2 - 2 * s) * h * d1)
                step = val / der
                s -= step
                if abs(step) < 1e-15:
                    break
            return (i + s) * h
    raise RuntimeError("profile did not return to its turning point")


def solve_profile(params: AbreschParams, axis: Literal["x", "y"] = "x", n_samples: int = 64) -> EllipticProfile:
    """One period of the Abresch profile starting at the turning point."""
    k, c0 = params.quartic(axis)
    d1, d2, _ = params.deltas(axis)
    if d1 <= 0.0:
        # only the zero solution is real; the period is the small-oscillation limit
        period = 2 * np.pi / np.sqrt(k)
        x = np.arange(n_samples) * period / n_samples
        return EllipticProfile(x, np.zeros(n_samples), np.zeros(n_samples), period, k, c0, 0.0, d2)
    f0 = np.sqrt(d1)
    estimate = 4.0 * quarter_period_quadrature(d1, d2)
    h = estimate / PROFILE_STEPS
    nsteps = int(PROFILE_STEPS * 1.05) + 2
    f, v = _rk4_profile(f0, 0.0, k, h, nsteps)
    period = _locate_return(f, v, k, h, PROFILE_STEPS // 2)
    m = int(np.ceil(PROFILE_STEPS / n_samples))
    hs = period / (n_samples * m)
    f, v = _rk4_profile(f0, 0.0, k, hs, n_samples * m)
    x = np.arange(n_samples) * period / n_samples
    prof = EllipticProfile(x, f[:-1:m].copy(), v[:-1:m].copy(), period, k, c0, d1, d2)
    logger.debug("profile axis=%s period=%.12g energy residual=%.2e", axis, period, prof.energy_residual())
    return prof


# ---------------------------------------------------------------- grids and stencils


@dataclass
class OmegaField:
    """omega samples with rows indexed by y and columns by x."""

    values: np.ndarray
    hx: float
    hy: float
    x0: float = 0.0
    y0: float = 0.0
    y_periodic: bool = False

    @property
    def period(self) -> float:
        return self.hx * self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.hx * np.arange(self.values.shape[1])

    @property
    def y(self) -> np.ndarray:
        return self.y0 + self.hy * np.arange(self.values.shape[0])

    def dump(self) -> str:
        """Plain-text grid, one row per y value."""
        return "\n".join(" ".join(repr(float(v)) for v in row) for row in self.values) + "\n"

    @classmethod
    def load(cls, text: str, hx: float, hy: float, **kw) -> "OmegaField":
        rows = [list(map(float, ln.split())) for ln in text.strip().splitlines()]
        return cls(np.array(rows), hx, hy, **kw)


def grid_dx(u: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(u, -1, axis=1) - np.roll(u, 1, axis=1)) / (2 * h)


def grid_dy(u: np.ndarray, h: float, periodic: bool = False) -> np.ndarray:
    if periodic:
        return (np.roll(u, -1, axis=0) - np.roll(u, 1, axis=0)) / (2 * h)
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - u[:-2]) / (2 * h)
    out[0] = (-3 * u[0] + 4 * u[1] - u[2]) / (2 * h)
    out[-1] = (3 * u[-1] - 4 * u[-2] + u[-3]) / (2 * h)
    return out


def grid_dxx(u: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(u, -1, axis=1) - 2 * u + np.roll(u, 1, axis=1)) / h**2


def grid_dyy(u: np.ndarray, h: float, periodic: bool = False) -> np.ndarray:
    if periodic:
        return (np.roll(u, -1, axis=0) - 2 * u + np.roll(u, 1, axis=0)) / h**2
    out = np.empty_like(u)
    out[1:-1] = (u[2:] - 2 * u[1:-1] + u[:-2]) / h**2
    out[0] = (2 * u[0] - 5 * u[1] + 4 * u[2] - u[3]) / h**2
    out[-1] = (2 * u[-1] - 5 * u[-2] + 4 * u[-3] - u[-4]) / h**2
    return out


def _dz(u, om: OmegaField):
    return 0.5 * (grid_dx(u, om.hx) - 1j * grid_dy(u, om.hy, om.y_periodic))


def _dzb(u, om: OmegaField):
    return 0.5 * (grid_dx(u, om.hx) + 1j * grid_dy(u, om.hy, om.y_periodic))


def _dzz(u, om: OmegaField):
    """Second z-derivative from compact three-point stencils."""
    uxx = grid_dxx(u, om.hx)
    uyy = grid_dyy(u, om.hy, om.y_periodic)
    uxy = grid_dy(grid_dx(u, om.hx), om.hy, om.y_periodic)
    return 0.25 * (uxx - uyy - 2j * uxy)


def _laplacian(u, om: OmegaField):
    return grid_dxx(u, om.hx) + grid_dyy(u, om.hy, om.y_periodic)


def _interior(a: np.ndarray) -> np.ndarray:
    return a[1:-1, 1:-1]


# ---------------------------------------------------------------- omega and residuals


def omega_from_profiles(f: EllipticProfile, g: EllipticProfile) -> OmegaField:
    """sinh(omega) = (f_x + g_y) / (1 + f^2 + g^2) on the tensor grid."""
    num = f.fx[None, :] + g.fx[:, None]
    den = 1.0 + f.f[None, :] ** 2 + g.f[:, None] ** 2
    hx = f.period / len(f.x)
    hy = g.period / len(g.x)
    return OmegaField(np.arcsinh(num / den), hx, hy, y_periodic=True)


def omega_jet(f: EllipticProfile, g: EllipticProfile, i: int, j: int) -> dict[str, float]:
    """Exact omega and its derivatives up to order two at profile samples (x_i, y_j)."""
    F, Fx, Fxx, Fxxx = f.f[i], f.fx[i], f.fxx[i], f.fxxx[i]
    G, Gy, Gyy, Gyyy = g.f[j], g.fx[j], g.fxx[j], g.fxxx[j]
    N = Fx + Gy
    D = 1 + F**2 + G**2
    Nx, Ny, Nxx, Nyy = Fxx, Gyy, Fxxx, Gyyy
    Dx, Dy = 2 * F * Fx, 2 * G * Gy
    Dxx, Dyy = 2 * Fx**2 + 2 * F * Fxx, 2 * Gy**2 + 2 * G * Gyy
    S = N / D
    Sx = Nx / D - N * Dx / D**2
    Sy = Ny / D - N * Dy / D**2
    Sxx = Nxx / D - 2 * Nx * Dx / D**2 - N * Dxx / D**2 + 2 * N * Dx**2 / D**3
    Syy = Nyy / D - 2 * Ny * Dy / D**2 - N * Dyy / D**2 + 2 * N * Dy**2 / D**3
    Sxy = -Nx * Dy / D**2 - Ny * Dx / D**2 + 2 * N * Dx * Dy / D**3
    R = np.sqrt(1 + S**2)
    return {
        "omega": float(np.arcsinh(S)),
        "x": Sx / R,
        "y": Sy / R,
        "xx": Sxx / R - S * Sx**2 / R**3,
        "yy": Syy / R - S * Sy**2 / R**3,
        "xy": Sxy / R - S * Sx * Sy / R**3,
    }


def sinh_gordon_residual(om: OmegaField) -> float:
    """max over interior points of |Laplacian_h omega + sinh omega cosh omega|."""
    w = om.values
    if min(w.shape) < 5:
        raise ValueError("grid must be at least 5x5")
    lap = (grid_dxx(w, om.hx)[1:-1, 1:-1]
           + (w[2:, 1:-1] - 2 * w[1:-1, 1:-1] + w[:-2, 1:-1]) / om.hy**2)
    return float(np.max(np.abs(lap + np.sinh(_interior(w)) * np.cosh(_interior(w)))))


def lsg_residual(u: np.ndarray, om: OmegaField) -> float:
    """max interior |Laplacian_h u + u cosh(2 omega)|."""
    w = om.values
    u = np.asarray(u)
    if u.shape != w.shape:
        raise ValueError("shape mismatch")
    lap = grid_dxx(u, om.hx)[1:-1, 1:-1] + (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / om.hy**2
    return float(np.max(np.abs(lap + _interior(u) * np.cosh(2 * _interior(w)))))


def jacobi_apply(u: np.ndarray, om: OmegaField) -> np.ndarray:
    """Jacobi operator for the normalization 4|Q| = 1."""
    w = om.values
    wx = grid_dx(w, om.hx)
    wy = grid_dy(w, om.hy, om.y_periodic)
    ch2 = np.cosh(w) ** 2
    return (_laplacian(u, om) + u + 2 * (wx**2 + wy**2) / ch2 * u) / ch2


def shiffman_field(om: OmegaField) -> np.ndarray:
    """omega_xy - tanh(omega) omega_x omega_y."""
    w = om.values
    wx = grid_dx(w, om.hx)
    wy = grid_dy(w, om.hy, om.y_periodic)
    wxy = grid_dy(wx, om.hy, om.y_periodic)
    return wxy - np.tanh(w) * wx * wy


# ---------------------------------------------------------------- Pinkall-Sterling


@dataclass
class HierarchyState:
    u: dict[int, np.ndarray]
    tau: dict[int, np.ndarray]
    sigma: dict[int, np.ndarray]
    gamma: complex
    compatibility: dict[int, float] = field(default_factory=dict)


def _antiderivative(a: np.ndarray, h: float, axis: int, periodic: bool) -> tuple[np.ndarray, float]:
    """Antiderivative along ``axis`` vanishing at index 0.

    Periodic directions use the FFT antiderivative of the mean-free part and
    report the dropped mean, which must vanish for a periodic primitive.
    Other directions use cumulative trapezoid sums.
    """
    a = np.moveaxis(a, axis, 0)
    n = a.shape[0]
    if periodic:
        A = np.fft.fft(a, axis=0)
        mean = A[0] / n
        k = 2j * np.pi * np.fft.fftfreq(n, d=h)
        k[0] = 1.0
        A = A / k.reshape((-1,) + (1,) * (a.ndim - 1))
        A[0] = 0.0
        if n % 2 == 0:
            A[n // 2] = 0.0
        out = np.fft.ifft(A, axis=0)
        out = out - out[:1]
        drift = float(np.max(np.abs(mean)))
    else:
        out = np.zeros_like(a, dtype=complex)
        out[1:] = np.cumsum(0.5 * h * (a[1:] + a[:-1]), axis=0)
        drift = 0.0
    return np.moveaxis(out, 0, axis), drift


def _integrate_gradient(px: np.ndarray, py: np.ndarray, om: OmegaField) -> tuple[np.ndarray, float]:
    """Recover a function from its x and y derivatives by line integration.

    Integrates along the first row and then up every column; the mismatch with
    the opposite order (up the first column, then along every row) plus any
    nonzero period mean of a derivative is returned as the closure residual.
    """
    row, d1 = _antiderivative(px[:1, :], om.hx, 1, True)
    cols, d2 = _antiderivative(py, om.hy, 0, om.y_periodic)
    first = row + cols
    col, d3 = _antiderivative(py[:, :1], om.hy, 0, om.y_periodic)
    rows, d4 = _antiderivative(px, om.hx, 1, True)
    second = col + rows
    return first, float(np.max(np.abs(first - second))) + max(d1, d2, d3, d4)


def pinkall_sterling(om: OmegaField, gamma: complex = 1.0, n_max: int = 3,
                     compat_tol: float | None = 0.25) -> HierarchyState:
    """Run the iteration from u_-1 = 0, sigma_-1 = 0, tau_-1 = 1/4, u_0 = omega_z.

    tau_n comes from its z and zbar derivatives by line integration, with the
    constant fixed by a zero mean over the first x-period row.
    """
    gamma = complex(gamma)
    gb = np.conj(gamma)
    w = om.values
    wz = _dz(w, om)
    shape = w.shape
    state = HierarchyState(u={-1: np.zeros(shape, complex)}, tau={-1: np.full(shape, 0.25 + 0j)},
                           sigma={-1: np.zeros(shape, complex)}, gamma=gamma)
    state.u[0] = wz.astype(complex)
    state.sigma[0] = gamma * np.exp(2 * w) * state.tau[-1] + 4j * gamma * _dzb(state.u[0], om)
    for n in range(0, n_max):
        un = state.u[n]
        un_z = _dz(un, om)
        t_zb = 0.5j * gb * np.exp(-2 * w) * un
        t_z = -2j * gb * _dzz(un, om) + 4j * gb * wz * un_z
        px = t_z + t_zb
        py = 1j * (t_z - t_zb)
        tn, mismatch = _integrate_gradient(px, py, om)
        tn = tn - np.mean(tn[0])
        scale = 1.0 + float(np.max(np.abs(tn)))
        state.compatibility[n] = mismatch / scale
        if compat_tol is not None and mismatch / scale > compat_tol:
            raise NotASolution(f"tau_{n} system incompatible: closure residual {mismatch / scale:.3e}")
        state.tau[n] = tn
        state.u[n + 1] = -2j * t_z - 4j * wz * tn
        state.sigma[n + 1] = gamma * np.exp(2 * w) * tn + 4j * gamma * _dzb(state.u[n + 1], om)
    return state


def closed_form_flows(om: OmegaField, u2_power: int = 2) -> dict[int, np.ndarray]:
    """Printed closed forms of u_0, u_1, u_2 computed with grid stencils.

    ``u2_power`` selects the power of omega_z in the second term of u_2.
    """
    w = om.values
    w1 = _dz(w, om)
    w2 = _dz(w1, om)
    w3 = _dz(w2, om)
    w4 = _dz(w3, om)
    w5 = _dz(w4, om)
    return {
        0: w1,
        1: w3 - 2 * w1**3,
        2: w5 - 10 * w3 * w1**u2_power - 10 * w2**2 * w1 + 6 * w1**5,
    }


def fit_onto(target: np.ndarray, basis: list[np.ndarray], trim: int = 2) -> tuple[np.ndarray, float]:
    """Complex least-squares fit of ``target`` on ``basis``; returns (coeffs, relative residual)."""
    sl = (slice(trim, -trim or None), slice(None))
    A = np.stack([b[sl].ravel() for b in basis], axis=1)
    t = target[sl].ravel()
    coef, *_ = np.linalg.lstsq(A, t, rcond=None)
    resid = np.linalg.norm(A @ coef - t) / max(np.linalg.norm(t), 1e-300)
    return coef, float(resid)


# ---------------------------------------------------------------- Lame basis


@dataclass(frozen=True)
class LameBasis:
    x: np.ndarray
    functions: tuple[np.ndarray, np.ndarray, np.ndarray]
    eigenvalues: tuple[float, float, float]
    profile: EllipticProfile

    def residuals(self) -> tuple[float, ...]:
        """max |e'' + 2 f^2 e + lambda e| for each basis function (periodic stencil)."""
        h = self.profile.period / len(self.x)
        out = []
        for e, lam in zip(self.functions, self.eigenvalues):
            epp = (np.roll(e, -1) - 2 * e + np.roll(e, 1)) / h**2
            out.append(float(np.max(np.abs(epp + 2 * self.profile.f**2 * e + lam * e))))
        return tuple(out)

    def rayleigh_eigenvalues(self) -> tuple[float, ...]:
        h = self.profile.period / len(self.x)
        out = []
        for e in self.functions:
            epp = (np.roll(e, -1) - 2 * e + np.roll(e, 1)) / h**2
            out.append(float(-np.dot(e, epp + 2 * self.profile.f**2 * e) / np.dot(e, e)))
        return tuple(out)


def lame_basis(params: AbreschParams, n_samples: int = 256) -> LameBasis:
    """e_0 = sqrt(f^2 - delta_2), e_1 = f, e_2 = f_x / e_0."""
    if params.c == 0:
        raise ValueError("c = 0 gives a degenerate f-profile")
    f = solve_profile(params, "x", n_samples)
    e0 = np.sqrt(f.f**2 - f.delta2)
    # the smooth signed branch of sqrt(delta_1 - f^2)
    e2 = f.fx / e0
    return LameBasis(f.x, (e0, f.f.copy(), e2), (-f.delta1, f.k, -f.delta2), f)


def sign_changes(e: np.ndarray) -> int:
    s = np.sign(e)
    s = s[s != 0]
    return int(np.sum(s != np.roll(s, 1)))
