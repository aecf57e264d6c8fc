"""Whitham deformation of spectral data (a, b), flux control and double points.

A deformation polynomial c (degree g + 1, kind-C reality) moves the data by

    -2 bdot a + b adot = -2 lambda a c' + a c + lambda a' c,

with adot fixed at the roots of a by adot(alpha) = alpha a'(alpha) c(alpha) / b(alpha)
and by keeping |a(0)| constant; bdot then follows by exact polynomial division.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Callable, Iterator, Sequence

import numpy as np

from .poly_core import ComplexPoly, RealityClass, RealityKind, eval_poly, reality_residual, roots
from .spectral_data import (
    SpectralDataAB,
    closing_report,
    dist_to_lattice,
    h_integral,
    nu_value,
    safe_path,
)

logger = logging.getLogger(__name__)

EVENT_TOL = 1e-3


class SingularEvent(Exception):
    """Raised or reported when a flow reaches a singular configuration."""

    def __init__(self, location: complex, kind: str, t: float, distance: float):
        super().__init__(f"{kind} at lambda = {location:.6g} (t = {t:.6g}, distance {distance:.2e})")
        self.location = complex(location)
        self.kind = kind
        self.t = float(t)
        self.distance = float(distance)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "location": [self.location.real, self.location.imag],
                "t": self.t, "distance": self.distance}


COMMON_ROOT = "common-root-of-a-and-b"
ROOT_COLLISION = "root-collision-of-a"
TOUCHING_CIRCLE = "root-touching-S1"


# ---------------------------------------------------------------- deformation polynomials


@dataclass(frozen=True)
class DeformationPoly:
    c: ComplexPoly
    g: int

    def reality_residual(self) -> float:
        return reality_residual(self.c, RealityClass(RealityKind.C, self.g))

    def closes_at_one(self, tol: float = 1e-12) -> bool:
        return abs(eval_poly(self.c, 1.0)) <= tol

    def flux_ratio(self, b: ComplexPoly) -> complex:
        return complex(self.c.coeffs[0] / b.coeffs[0])


def zero_deformation(data: SpectralDataAB) -> DeformationPoly:
    return DeformationPoly(ComplexPoly(np.zeros(data.g + 2)), data.g)


def c_flux_increasing(data: SpectralDataAB) -> DeformationPoly:
    """c = (lambda - 1)(b(0) - conj(b(0)) lambda^g), which raises |tau|."""
    g = data.g
    if g == 0:
        logger.info("genus zero: the flux-increasing deformation is zero")
        return zero_deformation(data)
    b0 = complex(data.b.coeffs[0])
    inner = np.zeros(g + 1, dtype=complex)
    inner[0] = b0
    inner[g] = -np.conj(b0)
    return DeformationPoly(ComplexPoly([-1.0, 1.0]) * ComplexPoly(inner), g)


CHOOSERS: dict[str, Callable[[SpectralDataAB], DeformationPoly]] = {
    "zero": zero_deformation,
    "flux": c_flux_increasing,
}


# ---------------------------------------------------------------- right-hand side


def integrability_rhs(a: ComplexPoly, c: ComplexPoly) -> ComplexPoly:
    """-2 lambda a c' + a c + lambda a' c."""
    lam = ComplexPoly([0.0, 1.0])
    return (lam * a * c.derivative()) * -2.0 + a * c + lam * a.derivative() * c


def integrability_residual(a, b, adot, bdot, c) -> float:
    """Coefficient norm of -2 bdot a + b adot - rhs, relative to the largest term."""
    lhs = bdot * a * -2.0 + b * adot
    rhs = integrability_rhs(a, c)
    n = max(len(lhs.coeffs), len(rhs.coeffs))
    diff = lhs.padded(n) - rhs.padded(n)
    scale = max(np.max(np.abs(rhs.coeffs)), np.max(np.abs((b * adot).coeffs)), 1e-300)
    return float(np.max(np.abs(diff)) / scale)


def _closest_pair(u: Sequence[complex], v: Sequence[complex] | None = None) -> tuple[float, complex]:
    best, loc = np.inf, 0j
    if v is None:
        for i in range(len(u)):
            for j in range(i + 1, len(u)):
                d = abs(u[i] - u[j])
                if d < best:
                    best, loc = d, 0.5 * (u[i] + u[j])
    else:
        for x in u:
            for y in v:
                d = abs(x - y)
                if d < best:
                    best, loc = d, 0.5 * (x + y)
    return best, loc


def adot_from_roots(a: ComplexPoly, b: ComplexPoly, c: ComplexPoly, g: int,
                    a_roots: Sequence[complex]) -> ComplexPoly:
    """Kind-A polynomial matching the root velocities with Re(conj(a(0)) adot(0)) = 0."""
    n = 2 * g + 1
    rows, rhs = [], []
    da = a.derivative()

    def add(coef_row: np.ndarray, value: complex):
        # complex equation sum coef_row * x = value in real unknowns (Re x, Im x)
        rows.append(np.concatenate([coef_row.real, -coef_row.imag]))
        rhs.append(value.real)
        rows.append(np.concatenate([coef_row.imag, coef_row.real]))
        rhs.append(value.imag)

    for r in a_roots:
        target = r * eval_poly(da, r) * eval_poly(c, r) / eval_poly(b, r)
        add(r ** np.arange(n), complex(target))
    for k in range(n):
        # x_k - conj(x_{n-1-k}) = 0
        row_re = np.zeros(2 * n)
        row_im = np.zeros(2 * n)
        row_re[k] += 1
        row_re[n - 1 - k] -= 1
        row_im[n + k] += 1
        row_im[n + n - 1 - k] += 1
        rows += [row_re, row_im]
        rhs += [0.0, 0.0]
    a0 = complex(a.coeffs[0])
    row = np.zeros(2 * n)
    row[0], row[n] = a0.real, a0.imag
    rows.append(row)
    rhs.append(0.0)
    A = np.array(rows)
    sol, *_ = np.linalg.lstsq(A, np.array(rhs), rcond=None)
    return ComplexPoly(sol[:n] + 1j * sol[n:])


def whitham_rhs(data: SpectralDataAB, c: DeformationPoly, t: float = 0.0,
                event_tol: float = EVENT_TOL) -> tuple[ComplexPoly, ComplexPoly]:
    """(adot, bdot) for the deformation c; raises SingularEvent on common roots."""
    g = data.g
    n_a, n_b = 2 * g + 1, g + 2
    if np.max(np.abs(c.c.coeffs)) == 0 or g == 0:
        return ComplexPoly(np.zeros(n_a)), ComplexPoly(np.zeros(n_b))
    a, b = data.a, data.b
    ra = roots(a)
    rb = roots(b)
    d, loc = _closest_pair(ra, rb)
    if d < event_tol:
        raise SingularEvent(loc, COMMON_ROOT, t, d)
    d, loc = _closest_pair(ra)
    if d < event_tol:
        raise SingularEvent(loc, ROOT_COLLISION, t, d)
    adot = adot_from_roots(a, b, c.c, g, ra)
    num = b * adot - integrability_rhs(a, c.c)
    q, r = num.divmod(a * 2.0)
    scale = max(np.max(np.abs(num.coeffs)), 1e-300)
    if len(r.coeffs) and np.max(np.abs(r.coeffs)) > 1e-8 * scale:
        logger.warning("division remainder %.2e in the b update", np.max(np.abs(r.coeffs)) / scale)
    return adot, ComplexPoly(q.padded(n_b)[:n_b])


# ---------------------------------------------------------------- flow


@dataclass(frozen=True)
class FlowState:
    data: SpectralDataAB
    t: float = 0.0
    a_roots: tuple[complex, ...] = ()
    b_roots: tuple[complex, ...] = ()
    projection: float = 0.0  # size of the last b(0) re-projection
    integrability: float = 0.0  # worst residual of the last step
    root_drift: float = 0.0  # root ODE vs coefficient flow, last step

    @classmethod
    def of(cls, data: SpectralDataAB, t: float = 0.0, **kw) -> "FlowState":
        ra = tuple(roots(data.a)) if data.g else ()
        rb = tuple(roots(data.b)) if len(data.b.trimmed().coeffs) > 1 else ()
        return cls(data, t, ra, rb, **kw)

    def summary(self) -> dict:
        return {"t": self.t, "abs_tau": abs(self.data.tau), "projection": self.projection,
                "integrability": self.integrability, "root_drift": self.root_drift}


@dataclass
class Trajectory:
    states: list[FlowState]
    event: SingularEvent | None = None
    notes: list[str] = field(default_factory=list)

    def ndjson(self) -> Iterator[str]:
        from .spectral_data import dumps

        for s in self.states:
            rec = s.data.to_dict()
            rec.update(s.summary())
            yield dumps(rec)
        if self.event is not None:
            yield dumps({"event": self.event.to_dict()})


def _normalize(a: ComplexPoly, b: ComplexPoly, g: int, theta_prev: float) -> tuple[SpectralDataAB, float]:
    a, _ = RealityClass(RealityKind.A, g).symmetrize(a)
    b, _ = RealityClass(RealityKind.B, g).symmetrize(b)
    a = a * ((1.0 / 16) / abs(a.coeffs[0]))
    theta = float(np.angle(-16 * a.coeffs[0]))
    theta += 2 * np.pi * round((theta_prev - theta) / (2 * np.pi))
    rot = np.exp(-0.5j * theta)
    b0 = b.coeffs[0] * rot
    proj = abs(b0.imag)
    coeffs = b.coeffs.copy()
    coeffs[0] = b0.real / rot
    coeffs[-1] = -np.conj(coeffs[0])  # keep kind-B reality of the end coefficients
    b = ComplexPoly(coeffs)
    tau = -32 * b.coeffs[0] * np.exp(-1j * theta)
    return SpectralDataAB(a, b, complex(tau), theta, g), proj


def _root_velocity(rts: np.ndarray, b: ComplexPoly, c: ComplexPoly) -> np.ndarray:
    return -rts * eval_poly(c, rts) / eval_poly(b, rts)


def _match(old: Sequence[complex], new: Sequence[complex]) -> np.ndarray:
    new = list(new)
    out = []
    for r in old:
        j = int(np.argmin([abs(r - s) for s in new]))
        out.append(new.pop(j))
    return np.array(out)


def rk4_step(state: FlowState, chooser: Callable[[SpectralDataAB], DeformationPoly], dt: float,
             event_tol: float = EVENT_TOL) -> FlowState:
    d0 = state.data
    g = d0.g

    def stage(data, t):
        c = chooser(data)
        ad, bd = whitham_rhs(data, c, t, event_tol)
        res = integrability_residual(data.a, data.b, ad, bd, c.c) if g else 0.0
        return c, ad, bd, res

    def shifted(k_a, k_b, h):
        a = d0.a + k_a * h
        b = d0.b + k_b * h
        data, _ = _normalize(a, b, g, d0.theta)
        return data

    c1, a1, b1, r1 = stage(d0, state.t)
    s2 = shifted(a1, b1, dt / 2)
    c2, a2, b2, r2 = stage(s2, state.t + dt / 2)
    s3 = shifted(a2, b2, dt / 2)
    c3, a3, b3, r3 = stage(s3, state.t + dt / 2)
    s4 = shifted(a3, b3, dt)
    c4, a4, b4, r4 = stage(s4, state.t + dt)
    a_new = d0.a + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (dt / 6)
    b_new = d0.b + (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (dt / 6)
    data, proj = _normalize(a_new, b_new, g, d0.theta)
    drift = 0.0
    if g:
        # independent route: integrate the root ODE with the same stage data
        r0 = np.array(state.a_roots if state.a_roots else roots(d0.a))
        k1 = _root_velocity(r0, d0.b, c1.c)
        k2 = _root_velocity(r0 + k1 * dt / 2, s2.b, c2.c)
        k3 = _root_velocity(r0 + k2 * dt / 2, s3.b, c3.c)
        k4 = _root_velocity(r0 + k3 * dt, s4.b, c4.c)
        r_pred = r0 + (k1 + 2 * k2 + 2 * k3 + k4) * (dt / 6)
        r_new = _match(r_pred, roots(data.a))
        drift = float(np.max(np.abs(r_new - r_pred)))
        new_roots = tuple(r_new)
    else:
        new_roots = ()
    rb = tuple(roots(data.b)) if len(data.b.trimmed().coeffs) > 1 else ()
    return FlowState(data, state.t + dt, new_roots, rb, proj, max(r1, r2, r3, r4), drift)


def detect_singularity(state: FlowState, tol: float = EVENT_TOL) -> SingularEvent | None:
    """Nearest approaches of roots of a to roots of b, to each other and to S^1."""
    data = state.data
    if data.g == 0:
        return None
    ra = roots(data.a)
    rb = roots(data.b) if len(data.b.trimmed().coeffs) > 1 else []
    d, loc = _closest_pair(ra, rb) if rb else (np.inf, 0j)
    if d < tol:
        return SingularEvent(loc, COMMON_ROOT, state.t, d)
    d, loc = _closest_pair(ra)
    if d < tol:
        return SingularEvent(loc, ROOT_COLLISION, state.t, d)
    dists = [abs(abs(r) - 1) for r in ra]
    k = int(np.argmin(dists))
    if dists[k] < tol:
        return SingularEvent(ra[k] / abs(ra[k]), TOUCHING_CIRCLE, state.t, dists[k])
    return None


def flow(state: FlowState | SpectralDataAB, chooser: Callable[[SpectralDataAB], DeformationPoly] | str,
         T: float, dt: float, event_tol: float = EVENT_TOL, max_halvings: int = 6,
         reality_limit: float = 1e-8) -> Trajectory:
    """RK4 trajectory to time T, stopping at the first singular event."""
    if isinstance(state, SpectralDataAB):
        state = FlowState.of(state)
    if isinstance(chooser, str):
        chooser = CHOOSERS[chooser]
    traj = Trajectory([state])
    ev = detect_singularity(state, event_tol)
    if ev is not None:
        traj.event = ev
        return traj
    n = max(1, int(round(T / dt)))
    h = T / n
    cur = state
    for _ in range(n):
        step, halvings, target = h, 0, cur.t + h
        while True:
            try:
                nxt = cur
                sub = int(round(h / step))
                for _ in range(sub):
                    nxt = rk4_step(nxt, chooser, step, event_tol)
            except SingularEvent as e:
                traj.event = e
                return traj
            real = max(reality_residual(nxt.data.a, RealityClass(RealityKind.A, nxt.data.g)),
                       reality_residual(nxt.data.b, RealityClass(RealityKind.B, nxt.data.g)))
            if real <= reality_limit:
                break
            halvings += 1
            if halvings > max_halvings:
                traj.notes.append(f"reality residual {real:.2e} at t = {target:.6g}; aborted")
                return traj
            step /= 2
        cur = FlowState(nxt.data, target, nxt.a_roots, nxt.b_roots, nxt.projection, nxt.integrability,
                        nxt.root_drift)
        traj.states.append(cur)
        ev = detect_singularity(cur, event_tol)
        if ev is not None:
            traj.event = ev
            return traj
    return traj


# ---------------------------------------------------------------- double points


def log_mu_at(data: SpectralDataAB, lam: complex, tol: float = 1e-13) -> complex:
    """h(lam) in the closing-report normalization (h(alpha_1) = 0 for the first simple root)."""
    branch = data.branch()
    rts = data.curve.all_roots
    pts = rts + [0.0]
    dmin = min([abs(p - q) for i, p in enumerate(pts) for q in pts[i + 1:]] + [1.0])
    if lam not in pts:
        dmin = min(dmin, min(abs(lam - p) for p in pts))
    margin = 0.3 * dmin
    nu1 = nu_value(branch, 1.0, "limit")
    if branch.pairs:
        base = branch.pairs[0][0]
        h1 = -h_integral(data, branch, safe_path(1.0, base, pts, margin), nu1, tol)
    else:
        h1 = 0.5 * h_integral(data, branch, list(np.exp(2j * np.pi * np.arange(65) / 64)), nu1, tol)
    if abs(lam - 1) < 1e-14:
        return h1
    return h1 + h_integral(data, branch, safe_path(1.0, lam, pts, margin), nu1, tol)


def add_double_point(data: SpectralDataAB, alpha0: complex, tol: float = 1e-6) -> SpectralDataAB:
    """Insert the double point alpha0 (and its reflection) into the spectral data.

    a~ = q^2 a / |alpha0|^2 and b~ = q b / |alpha0| with q = (lambda - alpha0)(1 - conj(alpha0) lambda).
    The stored phase becomes Theta + 2 arg(alpha0) + 2 pi, which keeps the nu
    convention consistent with d ln mu, so tau~ = tau e^{-i arg alpha0}.
    """
    alpha0 = complex(alpha0)
    if abs(abs(alpha0) - 1) < 1e-12:
        raise ValueError("alpha0 on the unit circle: one-sided opening is not supported")
    if alpha0 == 0:
        raise ValueError("alpha0 must be nonzero")
    h = log_mu_at(data, alpha0)
    if dist_to_lattice(h, np.pi) > tol:
        raise ValueError(f"mu(alpha0)^2 != 1: distance of ln mu to i pi Z is {dist_to_lattice(h, np.pi):.2e}")
    q = ComplexPoly([-alpha0, 1.0]) * ComplexPoly([1.0, -np.conj(alpha0)])
    m = abs(alpha0)
    a = q * q * data.a * (1 / m**2)
    b = q * data.b * (1 / m)
    theta = data.theta + 2 * np.angle(alpha0) + 2 * np.pi
    tau = -32 * b.coeffs[0] * np.exp(-1j * theta)
    return SpectralDataAB(a, b, complex(tau), float(theta), data.g + 2)


def scan_double_points(data: SpectralDataAB, radii: Sequence[float], angles: Sequence[float]) -> list[complex]:
    """Grid points where ln mu is within the scan spacing of i pi Z (coarse candidates)."""
    out = []
    for r in radii:
        for th in angles:
            lam = r * np.exp(1j * th)
            try:
                h = log_mu_at(data, lam)
            except ValueError:
                continue
            out.append((dist_to_lattice(h, np.pi), lam))
    return [lam for d, lam in sorted(out, key=lambda x: x[0])]


# ---------------------------------------------------------------- qhat


def qhat(ell: int) -> list[Fraction]:
    """Polynomial part of w^ell (1 - 2/w)^{-1/2}, constant coefficient first."""
    if ell < 1:
        raise ValueError("ell must be at least 1")
    coeffs = [Fraction(0)] * (ell + 1)
    for k in range(ell + 1):
        coeffs[ell - k] = Fraction(comb(2 * k, k), 2**k)
    return coeffs


def _pmul(p: list[Fraction], q: list[Fraction]) -> list[Fraction]:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, x in enumerate(p):
        for j, y in enumerate(q):
            out[i + j] += x * y
    return out


def _padd(*ps: list[Fraction]) -> list[Fraction]:
    n = max(len(p) for p in ps)
    out = [Fraction(0)] * n
    for p in ps:
        for i, x in enumerate(p):
            out[i] += x
    return out


def qhat_identity(ell: int) -> list[Fraction]:
    """(2 ell + 1)(w - 2) q - w q - 2 w (w - 2) q', trimmed; should be a constant."""
    q = qhat(ell)
    dq = [i * q[i] for i in range(1, len(q))]
    w = [Fraction(0), Fraction(1)]
    wm2 = [Fraction(-2), Fraction(1)]
    t1 = [(2 * ell + 1) * x for x in _pmul(wm2, q)]
    t2 = [-x for x in _pmul(w, q)]
    t3 = [-2 * x for x in _pmul(_pmul(w, wm2), dq)]
    out = _padd(t1, t2, t3)
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def qhat_constant(ell: int) -> Fraction:
    """(1 * 3 * ... * (2 ell + 1) / ell!) * (-2)."""
    prod = 1
    for k in range(1, 2 * ell + 2, 2):
        prod *= k
    return Fraction(prod, factorial(ell)) * -2
