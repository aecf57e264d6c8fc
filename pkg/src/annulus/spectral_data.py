"""Spectral curves, the nu branch, monodromy eigenvalues and closing conditions.

Sign convention for nu (stored through the phase Theta):

    nu(lambda) ~ -(i/4) e^{i Theta/2} lambda^{-1/2}   as lambda -> 0,

with Theta taken as stored on the data (not recomputed mod 2 pi).  The
eigenvalue mu(lambda, nu) is the eigenvalue of the monodromy on the kernel of
xi_lambda + nu.  With these two choices d ln mu = b dlambda / (nu lambda^2)
holds with b(0) = -tau e^{i Theta} / 32.

Point evaluation of nu uses the factored form

    nu = K lambda^{-1/2} prod_i (lambda - alpha_i) sqrt((lambda - 1/conj(alpha_i)) / (lambda - alpha_i))

whose cuts are the straight segments [alpha_i, 1/conj(alpha_i)] and the
negative real axis.  Path integrals ignore cuts and continue nu along the path.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .lax_frame import Monodromy
from .poly_core import (
    ComplexPoly,
    Potential,
    RealityClass,
    RealityKind,
    eval_poly,
    group_roots,
    reality_residual,
    roots,
)
from .workers import worker_count

logger = logging.getLogger(__name__)

GAUSS_NODES = 16
MAX_PANELS = 4096


class CutError(ValueError):
    """Raised when nu is requested on a cut."""


class CatalogError(RuntimeError):
    pass


# ---------------------------------------------------------------- curves and branches


@dataclass(frozen=True)
class SpectralCurve:
    a: ComplexPoly
    g: int
    roots: tuple[tuple[complex, int], ...]  # (root, multiplicity)

    @classmethod
    def from_a(cls, a: ComplexPoly, g: int | None = None) -> "SpectralCurve":
        a = a.trimmed()
        deg = len(a.coeffs) - 1
        if g is None:
            if deg % 2:
                raise ValueError("a must have even degree")
            g = deg // 2
        rts = roots(a) if deg >= 1 else []
        return cls(a, g, tuple(group_roots(rts)))

    @property
    def branch_points(self) -> list[complex]:
        return [r for r, m in self.roots if m % 2 == 1]

    @property
    def all_roots(self) -> list[complex]:
        return [r for r, _ in self.roots]

    def theta(self) -> float:
        """Principal Theta from a(0) = -e^{i Theta}/16."""
        return float(np.angle(-16.0 * self.a.coeffs[0]))


@dataclass(frozen=True)
class NuBranch:
    """Factored square root of a/lambda with a stored sign."""

    K: complex
    pairs: tuple[tuple[complex, complex], ...]  # branch point pairs (alpha, 1/conj(alpha))
    evens: tuple[tuple[complex, int], ...]  # roots of even multiplicity, half multiplicity
    theta: float

    @classmethod
    def build(cls, curve: SpectralCurve, theta: float) -> "NuBranch":
        branch = [r for r, m in curve.roots if m % 2]
        inside = sorted((r for r in branch if abs(r) < 1), key=lambda z: (abs(z), np.angle(z)))
        outside = [r for r in branch if abs(r) > 1]
        pairs = []
        for r in inside:
            partner = 1.0 / np.conj(r)
            j = int(np.argmin([abs(o - partner) for o in outside])) if outside else -1
            if j < 0 or abs(outside[j] - partner) > 1e-6 * (1 + abs(partner)):
                raise ValueError(f"branch point {r} has no reflected partner")
            pairs.append((r, outside.pop(j)))
        if outside or any(abs(abs(r) - 1) < 1e-12 for r in branch):
            raise ValueError("unpaired branch points; a violates the reality condition")
        evens = tuple((r, m // 2) for r, m in curve.roots if m % 2 == 0)
        # fix K from the behaviour at lambda -> 0+
        at0 = complex(np.prod([s_factor(0.0, p, q) for p, q in pairs]) if pairs else 1.0)
        at0 *= complex(np.prod([(-r) ** k for r, k in evens]) if evens else 1.0)
        K = -0.25j * np.exp(0.5j * theta) / at0
        return cls(complex(K), tuple(pairs), evens, float(theta))

    def on_cut(self, lam: complex, tol: float = 1e-13) -> bool:
        lam = complex(lam)
        if lam.imag == 0 and lam.real < 0:
            return True
        for p, q in self.pairs:
            d = q - p
            t = ((lam - p) * np.conj(d)).real / abs(d) ** 2
            if 0 < t < 1 and abs(lam - (p + t * d)) <= tol * (1 + abs(lam)):
                return True
        return False


def s_factor(lam, p, q):
    """(lambda - p) sqrt((lambda - q)/(lambda - p)); its square is (lambda-p)(lambda-q)."""
    lam = np.asarray(lam, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = (lam - q) / (lam - p)
        out = (lam - p) * np.sqrt(ratio)
    return np.where(lam == p, 0.0, out)


def nu_value(branch: NuBranch, lam, on_cut: str = "reject"):
    """nu at ``lam`` with the stored sign convention.

    ``on_cut`` is "reject" (raise CutError) or "limit" (one-sided value given by
    the principal square roots).
    """
    lam_arr = np.asarray(lam, dtype=complex)
    if on_cut == "reject":
        for v in np.atleast_1d(lam_arr):
            if v == 0:
                raise CutError("nu is singular at lambda = 0")
            if branch.on_cut(v):
                raise CutError(f"lambda = {v} lies on a cut")
    out = branch.K / np.sqrt(lam_arr)
    for p, q in branch.pairs:
        out = out * s_factor(lam_arr, p, q)
    for r, k in branch.evens:
        out = out * (lam_arr - r) ** k
    return out if out.ndim else complex(out)


def nu(curve: SpectralCurve, branch: NuBranch, lam):
    return nu_value(branch, lam, "reject")


def continue_nu(a: ComplexPoly, lam: np.ndarray, nu_start: complex, lam_start: complex,
                cand: np.ndarray | None = None) -> np.ndarray:
    """Continue a square root of a/lambda along the ordered points ``lam``.

    ``cand`` may supply the values up to sign; by default they are the
    principal roots of a/lambda.
    """
    if cand is None:
        cand = np.sqrt(eval_poly(a, lam) / lam)
    out = np.empty_like(cand)
    prev_l, prev_v = complex(lam_start), complex(nu_start)
    slope = None
    for k in range(len(lam)):
        if slope is None:
            pred = prev_v
        else:
            pred = prev_v + slope * (lam[k] - prev_l)
        c = cand[k]
        v = c if abs(c - pred) <= abs(-c - pred) else -c
        if lam[k] != prev_l:
            slope = (v - prev_v) / (lam[k] - prev_l)
        prev_l, prev_v = lam[k], v
        out[k] = v
    return out


# ---------------------------------------------------------------- spectral data


@dataclass(frozen=True)
class SpectralDataAB:
    a: ComplexPoly
    b: ComplexPoly
    tau: complex
    theta: float
    g: int

    @property
    def curve(self) -> SpectralCurve:
        return SpectralCurve.from_a(self.a, self.g)

    def branch(self) -> NuBranch:
        return NuBranch.build(self.curve, self.theta)

    def with_(self, **kw) -> "SpectralDataAB":
        return replace(self, **kw)

    # serialization -----------------------------------------------------
    def to_dict(self, branch_points: bool = False) -> dict:
        d = {
            "genus": self.g,
            "theta": float(self.theta),
            "tau": [float(self.tau.real), float(self.tau.imag)],
            "a_coeffs": [[float(c.real), float(c.imag)] for c in self.a.coeffs],
            "b_coeffs": [[float(c.real), float(c.imag)] for c in self.b.coeffs],
        }
        if branch_points and self.g > 0:
            d["branch_points"] = [[float(r.real), float(r.imag)] for r in self.curve.branch_points]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpectralDataAB":
        known = {"genus", "theta", "tau", "a_coeffs", "b_coeffs", "branch_points"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown fields: {sorted(extra)}")
        a = ComplexPoly([complex(re, im) for re, im in d["a_coeffs"]])
        b = ComplexPoly([complex(re, im) for re, im in d["b_coeffs"]])
        g = int(d["genus"])
        if len(a.coeffs) != 2 * g + 1 or len(b.coeffs) != g + 2:
            raise ValueError("coefficient counts do not match the genus")
        return cls(a, b, complex(*d["tau"]), float(d["theta"]), g)


def format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite value cannot be serialized")
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int | None = None) -> str:
    """JSON with every float printed at 17 significant digits."""

    def enc(o, level):
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        sep = ", " if indent is None else ","
        if isinstance(o, bool) or o is None:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return format_float(float(o))
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [pad + json.dumps(str(k)) + ": " + enc(v, level + 1) for k, v in o.items()]
            return "{" + sep.join(items) + end + "}"
        if isinstance(o, (list, tuple, np.ndarray)):
            if len(o) == 0:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[" + sep.join(pad + enc(v, level + 1) for v in o) + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0)


def data_to_json(data: SpectralDataAB, indent: int | None = 2) -> str:
    return dumps(data.to_dict(branch_points=True), indent)


def data_from_json(text: str) -> SpectralDataAB:
    return SpectralDataAB.from_dict(json.loads(text))


# ---------------------------------------------------------------- path integrals


def _segment_param(p: complex, q: complex, singular_end: bool):
    """lambda(u) and lambda'(u) for u in [0, 1], squeezing toward q if singular."""
    if singular_end:
        return (lambda u: q + (p - q) * (1 - u) ** 2), (lambda u: -2 * (p - q) * (1 - u))
    return (lambda u: p + (q - p) * u), (lambda u: np.full(np.shape(u), q - p, dtype=complex))


def _is_root(lam: complex, curve: SpectralCurve) -> bool:
    return any(abs(lam - r) < 1e-9 * (1 + abs(r)) for r in curve.all_roots)


def _integrate_chain(data: SpectralDataAB, verts: Sequence[complex], nu0: complex, tol: float) -> complex:
    """Integral of b dlambda/(nu lambda^2) along a polygon starting at a regular point."""
    curve = data.curve
    branch = None
    if any(m > 1 for _, m in curve.roots):
        branch = NuBranch.build(curve, data.theta)
    segs = []
    for k in range(len(verts) - 1):
        p, q = complex(verts[k]), complex(verts[k + 1])
        if p != q:
            segs.append((p, q, _is_root(q, curve)))
    x, w = leggauss(GAUSS_NODES)
    x = 0.5 * (x + 1)
    w = 0.5 * w
    n = 4
    prev = None
    while True:
        lam_all, dl_all, wt_all = [], [], []
        for p, q, sing in segs:
            lf, dlf = _segment_param(p, q, sing)
            u = ((np.arange(n)[:, None] + x[None, :]) / n).ravel()
            lam_all.append(lf(u))
            dl_all.append(dlf(u))
            wt_all.append(np.tile(w, n) / n)
        lam = np.concatenate(lam_all)
        dl = np.concatenate(dl_all)
        wt = np.concatenate(wt_all)
        # factored values keep even roots exact; rounded coefficients split them
        cand = nu_value(branch, lam, "limit") if branch is not None and branch.evens else None
        nv = continue_nu(data.a, lam, nu0, verts[0], cand)
        terms = wt * eval_poly(data.b, lam) / (nv * lam**2) * dl
        total = complex(np.sum(terms))
        floor = 1024 * np.finfo(float).eps * float(np.sum(np.abs(terms)))
        if prev is not None and abs(total - prev) <= max(tol * max(1.0, abs(total)), floor):
            return total
        if n >= MAX_PANELS:
            logger.warning("path integral not converged: change %.2e", abs(total - prev))
            return total
        prev = total
        n *= 2


def h_integral(data: SpectralDataAB, branch: NuBranch | None, path: Sequence[complex],
               nu_start: complex | None = None, tol: float = 1e-13) -> complex:
    """Integral of dh = b dlambda / (nu lambda^2) along a polygonal path.

    nu starts from ``nu_start`` or from the branch value at the first vertex
    and is continued along the path.  Paths may start or end at roots of a;
    a path starting at a root is integrated backwards from its other end.
    """
    verts = [complex(v) for v in path]
    if any(v == 0 for v in verts):
        raise ValueError("path passes through lambda = 0")
    curve = data.curve
    if _is_root(verts[0], curve):
        if nu_start is not None:
            raise ValueError("nu_start cannot be given at a root")
        if _is_root(verts[-1], curve):
            # split at the midpoint of the first segment
            mid = 0.5 * (verts[0] + verts[1])
            nu_mid = nu_value(branch or data.branch(), mid, "limit")
            return (-h_integral(data, branch, [mid, verts[0]], nu_mid, tol)
                    + h_integral(data, branch, [mid] + verts[1:], nu_mid, tol))
        return -h_integral(data, branch, verts[::-1], None, tol)
    if nu_start is None:
        nu_start = nu_value(branch or data.branch(), verts[0], "reject")
    return _integrate_chain(data, verts, complex(nu_start), tol)


def segment_integral(data: SpectralDataAB, p: complex, q: complex, tol: float = 1e-13) -> complex:
    """Integral along the straight segment [p, q], started from the principal root at its midpoint."""
    mid = 0.5 * (p + q)
    nu_mid = complex(np.sqrt(eval_poly(data.a, mid) / mid))
    return (-h_integral(data, None, [mid, p], nu_mid, tol) + h_integral(data, None, [mid, q], nu_mid, tol))


def polygon_circle(n: int = 64, radius: float = 1.0, start: float = 0.0) -> list[complex]:
    """Closed polygon inscribed in |lambda| = radius, starting at angle ``start``."""
    t = start + 2 * np.pi * np.arange(n + 1) / n
    return list(radius * np.exp(1j * t))


def safe_path(start: complex, end: complex, obstacles: Sequence[complex], margin: float) -> list[complex]:
    """Polygon from start to end keeping ``margin`` away from ``obstacles`` (end excluded)."""
    obstacles = [o for o in obstacles if abs(o - end) > 1e-12 and abs(o - start) > 1e-12]

    def clear(poly):
        for k in range(len(poly) - 1):
            p, q = poly[k], poly[k + 1]
            d = q - p
            for o in obstacles:
                t = min(1.0, max(0.0, ((o - p) * np.conj(d)).real / abs(d) ** 2))
                if abs(o - (p + t * d)) < margin:
                    return False
        return True

    direct = [start, end]
    if clear(direct):
        return direct
    d = end - start
    normal = 1j * d / abs(d)
    for s in (0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0):
        mid = start + 0.5 * d + s * abs(d) * normal
        poly = [start, mid, end]
        if clear(poly):
            return poly
    raise ValueError(f"no clear path from {start} to {end}")


# ---------------------------------------------------------------- closing report


@dataclass
class ClosingReport:
    residuals: dict[str, float]
    h_values: dict[str, complex] = field(default_factory=dict)
    mu_values: dict[str, complex] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def max_residual(self, keys: Sequence[str] | None = None) -> float:
        ks = self.residuals.keys() if keys is None else keys
        vals = [self.residuals[k] for k in ks if k in self.residuals]
        return max(vals) if vals else 0.0

    def condition(self, tag: str) -> float:
        """Worst residual among entries of condition ``tag`` (e.g. "iv")."""
        vals = [v for k, v in self.residuals.items() if k.split(":")[0] == tag]
        return max(vals) if vals else 0.0

    def to_dict(self) -> dict:
        return {
            "residuals": dict(self.residuals),
            "h_values": {k: [v.real, v.imag] for k, v in self.h_values.items()},
            "mu_values": {k: [v.real, v.imag] for k, v in self.mu_values.items()},
            "notes": list(self.notes),
        }


def dist_to_lattice(z: complex, step: float) -> float:
    """Distance from z to the lattice i * step * Z."""
    k = round(z.imag / step)
    return abs(z - 1j * step * k)


def closing_report(data: SpectralDataAB, potential: Potential | None = None,
                   n_circle: int = 64, tol: float = 1e-13) -> ClosingReport:
    """Residuals of every closing condition, each entry keyed "<condition>:<detail>"."""
    g = data.g
    res: dict[str, float] = {}
    rep = ClosingReport(res)
    a, b = data.a, data.b
    # (i) reality and sign of a on the unit circle
    res["i:reality"] = reality_residual(a, RealityClass(RealityKind.A, g))
    lam = np.exp(2j * np.pi * (np.arange(n_circle) + 0.5) / n_circle)
    vals = eval_poly(a, lam) * lam ** (-g)
    scale = max(1.0, float(np.max(np.abs(vals))))
    res["i:sign"] = float(max(np.max(np.abs(vals.imag)), np.max(np.maximum(vals.real, 0.0)))) / scale
    res["i:a0_modulus"] = abs(abs(a.coeffs[0]) - 1.0 / 16.0)
    res["i:theta"] = abs(a.coeffs[0] + np.exp(1j * data.theta) / 16.0)
    # (ii) reality of b
    res["ii:reality"] = reality_residual(b, RealityClass(RealityKind.B, g))
    # (iii) b(0) against the period
    res["iii:b0"] = abs(b.coeffs[0] + data.tau * np.exp(1j * data.theta) / 32.0)
    res["iii:ray"] = abs((b.coeffs[0] * np.exp(-0.5j * data.theta)).imag)

    curve = data.curve
    branch = NuBranch.build(curve, data.theta)
    rts = curve.all_roots
    pts = rts + [0.0]
    dmin = min([abs(p - q) for i, p in enumerate(pts) for q in pts[i + 1:]] + [1.0])
    margin = 0.3 * dmin

    # (iv) real parts along the straight segments
    jobs = {}
    with ThreadPoolExecutor(max_workers=worker_count()) as ex:
        for k, (p, q) in enumerate(branch.pairs):
            jobs[f"iv:{k}"] = ex.submit(segment_integral, data, p, q, tol)
        start = 1.0 + 0j
        nu1 = nu_value(branch, start, "limit")
        for k, r in enumerate(rts):
            path = safe_path(start, r, pts, margin)
            jobs[f"to_root:{k}"] = ex.submit(h_integral, data, branch, path, nu1, tol)
        jobs["loop"] = ex.submit(h_integral, data, branch, polygon_circle(n_circle), nu1, tol)
        out = {k: f.result() for k, f in jobs.items()}
    for k in range(len(branch.pairs)):
        res[f"iv:{k}"] = abs(out[f"iv:{k}"].real)
    loop = out["loop"]
    if branch.pairs:
        base = branch.pairs[0][0]
        kb = rts.index(min(rts, key=lambda r: abs(r - base)))
        h1 = -out[f"to_root:{kb}"]
    else:
        h1 = 0.5 * loop
    rep.h_values["1"] = h1
    rep.mu_values["1"] = complex(np.exp(h1))
    res["v:h(1)"] = dist_to_lattice(h1, np.pi)
    for k, r in enumerate(rts):
        hr = h1 + out[f"to_root:{k}"]
        key = f"{r.real:.12g}{r.imag:+.12g}j"
        rep.h_values[key] = hr
        rep.mu_values[key] = complex(np.exp(hr))
        res[f"v:root{k}"] = dist_to_lattice(hr, np.pi)
    res["v:loop"] = dist_to_lattice(loop, 2 * np.pi)
    rep.h_values["loop"] = loop

    # (vi)
    mults = [m for _, m in curve.roots]
    if all(m == 1 for m in mults):
        rep.notes.append("(vi) follows from (i)-(v) for simple roots")
    elif potential is not None:
        from .lax_frame import monodromy_direct

        worst = 0.0
        for r, m in curve.roots:
            if m > 1:
                M = monodromy_direct(potential, [r], data.tau).M[0]
                worst = max(worst, min(np.max(np.abs(M - np.eye(2))), np.max(np.abs(M + np.eye(2)))))
        res["vi:monodromy"] = float(worst)
    else:
        rep.notes.append("(vi) not checked: multiple roots and no potential supplied")
    return rep


# ---------------------------------------------------------------- monodromy eigenvalues


@dataclass
class MuSamples:
    lam: np.ndarray
    nu: np.ndarray
    mu: np.ndarray
    flagged: np.ndarray


def mu_at(M: np.ndarray, xi_lam: np.ndarray, nu_val: complex) -> complex:
    """Eigenvalue of M on the kernel of xi_lambda + nu."""
    X = xi_lam + nu_val * np.eye(2)
    # kernel vector of a rank-one 2x2 matrix: take the larger row
    r = X[0] if np.abs(X[0]).sum() >= np.abs(X[1]).sum() else X[1]
    v = np.array([-r[1], r[0]])
    if np.linalg.norm(v) == 0:
        raise ValueError("degenerate eigenline")
    v = v / np.linalg.norm(v)
    Mv = M @ v
    return complex(np.vdot(v, Mv))


def mu_from_monodromy(M: Monodromy, xi: Potential, branch: NuBranch, ambiguity: float = 1e-6) -> MuSamples:
    """mu on the kernel of xi + nu at every grid point of the monodromy."""
    lam = M.grid.points
    nus = np.array([nu_value(branch, l, "limit") for l in lam])
    X = xi(lam)
    mu = np.array([mu_at(M.M[k], X[k], nus[k]) for k in range(len(lam))])
    flagged = np.abs(nus) < ambiguity
    return MuSamples(lam, nus, mu, flagged)


def b_from_monodromy(xi: Potential, tau: complex, theta: float, lam_fit: Sequence[complex] | None = None,
                     dlam: float = 1e-4, max_step: float | None = None) -> tuple[ComplexPoly, float]:
    """Fit b(lambda) = nu lambda^2 d ln mu / d lambda from frame monodromies.

    d mu / d lambda comes from a central difference of the monodromy at
    lambda +- dlam.  Returns the fitted polynomial of degree g + 1 and the fit
    residual relative to max|b|.
    """
    from .lax_frame import monodromy_direct
    from .poly_core import a_from_potential

    g = xi.g
    a = a_from_potential(xi)
    branch = NuBranch.build(SpectralCurve.from_a(a, g), theta)
    if lam_fit is None:
        n = 2 * (g + 2) + 4
        lam_fit = 0.8 * np.exp(2j * np.pi * (np.arange(n) + 0.25) / n)
    lam_fit = np.asarray(lam_fit, dtype=complex)
    pts = np.concatenate([lam_fit, lam_fit + dlam, lam_fit - dlam])
    M = monodromy_direct(xi, pts, tau, max_step).M
    n = len(lam_fit)
    vals = []
    for k, l in enumerate(lam_fit):
        nv = nu_value(branch, l, "limit")
        X = xi(l) + nv * np.eye(2)
        r = X[0] if np.abs(X[0]).sum() >= np.abs(X[1]).sum() else X[1]
        v = np.array([-r[1], r[0]])
        v = v / np.linalg.norm(v)
        # left eigenvector of M (same eigenvalue) for the derivative formula
        mu = np.vdot(v, M[k] @ v)
        evals, levecs = np.linalg.eig(M[k].T)
        j = int(np.argmin(np.abs(evals - mu)))
        wl = levecs[:, j]
        dM = (M[n + k] - M[2 * n + k]) / (2 * dlam)
        dmu = (wl @ dM @ v) / (wl @ v)
        vals.append(nv * l**2 * dmu / mu)
    vals = np.array(vals)
    V = lam_fit[:, None] ** np.arange(g + 2)[None, :]
    coef, *_ = np.linalg.lstsq(V, vals, rcond=None)
    resid = float(np.max(np.abs(V @ coef - vals)) / max(np.max(np.abs(vals)), 1e-300))
    return ComplexPoly(coef), resid


# ---------------------------------------------------------------- catalog


def flat_data() -> SpectralDataAB:
    return SpectralDataAB(ComplexPoly([-1.0 / 16]), ComplexPoly([-np.pi / 16, np.pi / 16]), 2 * np.pi, 0.0, 0)


def _period_from_b0(b0: complex, theta: float) -> complex:
    return -32.0 * b0 * np.exp(-1j * theta)


def _gamma_from_segment(a: ComplexPoly, theta: float, g: int, alpha: float, extra: ComplexPoly,
                        tol: float) -> float:
    """Root gamma in (alpha, 1) of the integral of extra*(l-gamma)(gamma l-1)/(nu l^2) over [alpha, 1]."""
    probe = SpectralDataAB(a, ComplexPoly([1.0]), 0j, theta, g)

    def moment(poly):
        d = probe.with_(b=poly)
        return h_integral(d, None, [1.0, alpha], complex(np.sqrt(eval_poly(a, 1.0 + 0j))), tol)

    lam_poly = ComplexPoly([0.0, 1.0])
    I1 = moment(extra * lam_poly)
    I2 = moment(extra * ComplexPoly([1.0, 0.0, 1.0]))
    # -gamma^2 I1 + gamma I2 - I1 = 0
    disc = np.sqrt(I2 * I2 - 4 * I1 * I1)
    cands = [(I2 + disc) / (2 * I1), (I2 - disc) / (2 * I1)]
    good = [c.real for c in cands if abs(c.imag) < 1e-8 and alpha < c.real < 1]
    if len(good) != 1:
        raise CatalogError(f"gamma root not unique in ({alpha}, 1): candidates {cands}")
    return good[0]


def _scale_b(data_unit: SpectralDataAB, condition: str, root: complex | None, tol: float) -> float:
    """Positive s with b = s * b_unit satisfying the named lattice condition with the smallest nonzero integer."""
    branch = data_unit.branch()
    nu1 = nu_value(branch, 1.0, "limit")
    if condition == "loop":
        J = h_integral(data_unit, branch, polygon_circle(), nu1, tol)
        step = 2 * np.pi
    else:
        rts = data_unit.curve.all_roots + [0.0]
        dmin = min(abs(p - q) for i, p in enumerate(rts) for q in rts[i + 1:])
        base = branch.pairs[0][0]
        J = -h_integral(data_unit, branch, safe_path(1.0, base, rts, 0.3 * dmin), nu1, tol)
        if root is not None:
            J = J + h_integral(data_unit, branch, safe_path(1.0, root, rts, 0.3 * dmin), nu1, tol)
        step = np.pi
    if abs(J.real) > 1e-8 * abs(J):
        raise CatalogError(f"lattice condition is not imaginary: {J}")
    return step / abs(J.imag)


def abresch_catalog(genus: int, alpha: float | None = None, beta: float | None = None,
                    tol: float = 1e-13) -> SpectralDataAB:
    """Explicit spectral data of the Abresch family with the free constants solved.

    genus 1 with ``alpha``: roots {alpha, 1/alpha}, Theta = pi.
    genus 1 with ``beta``: roots {-beta, -1/beta}, Theta = 0.
    genus 2 with both: roots {alpha, 1/alpha, -beta, -1/beta}, Theta = pi.
    The sign of b(0) is chosen so that e^{-i Theta/2} b(0) < 0, which makes the
    rotated period e^{i Theta/2} tau positive.
    """
    if genus == 0:
        return flat_data()
    if genus == 1 and alpha is not None and beta is None:
        if not 0 < alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        a = ComplexPoly.from_roots([alpha, 1 / alpha], 1.0 / 16)
        theta = np.pi
        gam = _gamma_from_segment(a, theta, 1, alpha, ComplexPoly([1.0]), tol)
        unit = ComplexPoly.from_roots([gam, 1 / gam], -1j)  # b(0) = -i
        data = SpectralDataAB(a, unit, 0j, theta, 1)
        s = _scale_b(data, "loop", None, tol)
    elif genus == 1 and beta is not None and alpha is None:
        if not 0 < beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        a = ComplexPoly.from_roots([-beta, -1 / beta], -1.0 / 16)
        theta = 0.0
        unit = ComplexPoly([-1.0, 0.0, 1.0])  # b0 (1 - l^2) with b0 = -1
        data = SpectralDataAB(a, unit, 0j, theta, 1)
        s = _scale_b(data, "root", None, tol)
    elif genus == 2 and alpha is not None and beta is not None:
        if not (0 < alpha < 1 and 0 < beta < 1):
            raise ValueError("alpha and beta must lie in (0, 1)")
        a = ComplexPoly.from_roots([alpha, 1 / alpha, -beta, -1 / beta], 1.0 / 16)
        theta = np.pi
        gam = _gamma_from_segment(a, theta, 2, alpha, ComplexPoly([1.0, 1.0]), tol)
        unit = ComplexPoly.from_roots([gam, 1 / gam, -1.0], 1.0)
        unit = unit * (-1j / eval_poly(unit, 0.0))
        data = SpectralDataAB(a, unit, 0j, theta, 2)
        s = _scale_b(data, "root", -beta, tol)
    else:
        raise ValueError("unsupported catalog parameters")
    b = data.b * s
    tau = _period_from_b0(b.coeffs[0], theta)
    return SpectralDataAB(a, b, complex(tau), theta, genus)


def flux(data: SpectralDataAB) -> float:
    """Vertical flux |tau|."""
    return float(abs(data.tau))
