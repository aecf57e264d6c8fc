"""Polynomials, 2x2 matrix Laurent polynomials, reality symmetries and potentials.

Coefficient lists always run from the constant term upward.  Matrix Laurent
polynomials store the coefficients of lambda^-1 .. lambda^g as an array of
shape (g + 2, 2, 2).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

#: Relative distance below which two roots are treated as one.
MULTIPLICITY_RTOL = 1e-7


def roots_coincide(u: complex, v: complex) -> bool:
    """Return True when ``u`` and ``v`` count as the same root."""
    return abs(u - v) < MULTIPLICITY_RTOL * (1.0 + abs(u))


@dataclass(frozen=True)
class ComplexPoly:
    """Polynomial in lambda with complex coefficients, constant term first."""

    coeffs: np.ndarray

    def __init__(self, coeffs: Iterable[complex]):
        arr = np.atleast_1d(np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs,
                                       dtype=complex)).copy()
        if arr.size == 0:
            arr = np.zeros(1, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def from_roots(cls, roots: Sequence[complex], lead: complex = 1.0) -> "ComplexPoly":
        p = np.array([lead], dtype=complex)
        for r in roots:
            p = np.convolve(p, [-r, 1.0])
        return cls(p)

    @property
    def degree(self) -> int:
        nz = np.nonzero(self.coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    def trimmed(self, tol: float = 0.0) -> "ComplexPoly":
        c = self.coeffs
        scale = np.max(np.abs(c)) if c.size else 0.0
        n = len(c)
        while n > 1 and abs(c[n - 1]) <= tol * scale:
            n -= 1
        return ComplexPoly(c[:n])

    def padded(self, length: int) -> np.ndarray:
        out = np.zeros(max(length, len(self.coeffs)), dtype=complex)
        out[: len(self.coeffs)] = self.coeffs
        return out

    def __call__(self, lam):
        return eval_poly(self, lam)

    def __add__(self, other: "ComplexPoly") -> "ComplexPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        return ComplexPoly(self.padded(n) + other.padded(n))

    def __sub__(self, other: "ComplexPoly") -> "ComplexPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        return ComplexPoly(self.padded(n) - other.padded(n))

    def __mul__(self, other) -> "ComplexPoly":
        if isinstance(other, ComplexPoly):
            return ComplexPoly(np.convolve(self.coeffs, other.coeffs))
        return ComplexPoly(self.coeffs * complex(other))

    __rmul__ = __mul__

    def __neg__(self) -> "ComplexPoly":
        return ComplexPoly(-self.coeffs)

    def derivative(self) -> "ComplexPoly":
        if len(self.coeffs) == 1:
            return ComplexPoly([0.0])
        return ComplexPoly(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def shift_up(self, k: int = 1) -> "ComplexPoly":
        """Multiply by lambda**k."""
        return ComplexPoly(np.concatenate([np.zeros(k, dtype=complex), self.coeffs]))

    def divmod(self, other: "ComplexPoly") -> tuple["ComplexPoly", "ComplexPoly"]:
        """Polynomial long division, returning (quotient, remainder)."""
        num = list(self.trimmed().coeffs)
        den = other.trimmed().coeffs
        dd = len(den) - 1
        if len(num) - 1 < dd:
            return ComplexPoly([0.0]), ComplexPoly(num)
        quot = np.zeros(len(num) - dd, dtype=complex)
        for k in range(len(num) - 1, dd - 1, -1):
            q = num[k] / den[-1]
            quot[k - dd] = q
            for j in range(dd + 1):
                num[k - dd + j] -= q * den[j]
        rem = num[:dd] if dd > 0 else [0.0]
        return ComplexPoly(quot), ComplexPoly(rem)

    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


def eval_poly(p: ComplexPoly, lam):
    """Horner evaluation of ``p`` at a scalar or array ``lam``."""
    lam = np.asarray(lam, dtype=complex)
    acc = np.zeros_like(lam)
    for c in p.coeffs[::-1]:
        acc = acc * lam + c
    return acc if acc.ndim else complex(acc)


class RootFindingError(RuntimeError):
    pass


def roots(p: ComplexPoly, tol: float = 1e-10) -> list[complex]:
    """All roots of ``p`` with multiplicity.

    Companion-matrix eigenvalues followed by one Newton polish per root.  The
    polished value is kept only when it lowers the residual, which protects
    clustered roots from being pushed apart.
    """
    q = p.trimmed()
    deg = len(q.coeffs) - 1
    if deg < 1:
        raise ValueError("roots needs a polynomial of degree >= 1")
    c = q.coeffs
    comp = np.zeros((deg, deg), dtype=complex)
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -c[:-1] / c[-1]
    est = np.linalg.eigvals(comp)
    dq = q.derivative()
    scale = np.max(np.abs(c))
    out = []
    worst = 0.0
    for r in est:
        val = eval_poly(q, r)
        d = eval_poly(dq, r)
        if d != 0:
            cand = r - val / d
            if abs(eval_poly(q, cand)) < abs(val):
                r = cand
                val = eval_poly(q, r)
        resid = abs(val) / scale
        worst = max(worst, resid / max(1.0, abs(r)) ** deg)
        out.append(complex(r))
    if worst > tol:
        raise RootFindingError(f"root residual {worst:.3e} exceeds tolerance {tol:.1e}")
    return sorted(out, key=lambda z: (round(abs(z), 12), np.angle(z)))


def group_roots(rts: Sequence[complex]) -> list[tuple[complex, int]]:
    """Cluster roots under the multiplicity threshold; returns (mean, multiplicity)."""
    groups: list[list[complex]] = []
    for r in rts:
        for grp in groups:
            if roots_coincide(grp[0], r):
                grp.append(r)
                break
        else:
            groups.append([r])
    return [(complex(np.mean(grp)), len(grp)) for grp in groups]


class RealityKind(str, Enum):
    A = "A"  # lambda^{2g} conj(p(1/conj lambda)) =  p
    B = "B"  # lambda^{g+1} conj(p(1/conj lambda)) = -p
    C = "C"  # lambda^{g+1} conj(p(1/conj lambda)) =  p


@dataclass(frozen=True)
class RealityClass:
    kind: RealityKind
    g: int

    @property
    def degree(self) -> int:
        return 2 * self.g if self.kind == RealityKind.A else self.g + 1

    @property
    def sign(self) -> int:
        return -1 if self.kind == RealityKind.B else 1

    def image(self, p: ComplexPoly) -> ComplexPoly:
        """The symmetry image; an involution on coefficient lists."""
        n = self.degree
        if p.trimmed().degree > n:
            raise ValueError(f"degree {p.degree} exceeds {n} for class {self.kind.value}, g={self.g}")
        c = p.padded(n + 1)[: n + 1]
        return ComplexPoly(self.sign * np.conj(c[::-1]))

    def symmetrize(self, p: ComplexPoly) -> tuple[ComplexPoly, float]:
        img = self.image(p)
        n = self.degree
        resid = float(np.max(np.abs(img.coeffs - p.padded(n + 1)[: n + 1])))
        return ComplexPoly(0.5 * (img.coeffs + p.padded(n + 1)[: n + 1])), resid


def reality_residual(p: ComplexPoly, cls: RealityClass) -> float:
    """Max coefficient mismatch between ``p`` and its symmetry image."""
    n = cls.degree
    if p.trimmed().degree > n:
        raise ValueError(f"degree {p.trimmed().degree} incompatible with class {cls.kind.value}, g={cls.g}")
    img = cls.image(p)
    return float(np.max(np.abs(img.coeffs - p.padded(n + 1)[: n + 1])))


@dataclass(frozen=True)
class MatrixLaurent:
    """Traceless 2x2 matrix Laurent polynomial with powers -1..g."""

    coeffs: np.ndarray
    g: int

    def __init__(self, coeffs, g: int | None = None):
        arr = np.array(coeffs, dtype=complex)
        if arr.ndim != 3 or arr.shape[1:] != (2, 2):
            raise ValueError("coefficients must have shape (g+2, 2, 2)")
        if g is None:
            g = arr.shape[0] - 2
        if arr.shape[0] != g + 2:
            raise ValueError(f"expected {g + 2} coefficients, got {arr.shape[0]}")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)
        object.__setattr__(self, "g", int(g))

    def coeff(self, d: int) -> np.ndarray:
        return self.coeffs[d + 1]

    def __call__(self, lam):
        """Evaluate at scalar or array ``lam``; result has shape lam.shape + (2, 2)."""
        lam = np.asarray(lam, dtype=complex)
        powers = lam[..., None] ** np.arange(-1, self.g + 1)
        return np.einsum("...k,kij->...ij", powers, self.coeffs)

    def scaled(self, s: complex) -> "MatrixLaurent":
        return MatrixLaurent(self.coeffs * s, self.g)

    def trace_residual(self) -> float:
        return float(np.max(np.abs(self.coeffs[:, 0, 0] + self.coeffs[:, 1, 1])))


@dataclass(frozen=True)
class Potential:
    """A seed xi in the class P_g."""

    matrix: MatrixLaurent

    @property
    def g(self) -> int:
        return self.matrix.g

    def __call__(self, lam):
        return self.matrix(lam)

    @classmethod
    def from_coeffs(cls, coeffs) -> "Potential":
        return cls(MatrixLaurent(coeffs))


def flat_potential() -> Potential:
    """The genus-zero seed of the flat cylinder."""
    return Potential.from_coeffs([[[0, 0.25j], [0, 0]], [[0, 0], [0.25j, 0]]])


def pairing_residual(m: MatrixLaurent) -> float:
    """Max mismatch of xi_d = -conj(xi_{g-1-d})^T over all d."""
    g = m.g
    worst = 0.0
    for d in range(-1, g + 1):
        partner = m.coeff(g - 1 - d)
        worst = max(worst, float(np.max(np.abs(m.coeff(d) + partner.conj().T))))
    return worst


@dataclass
class ValidationReport:
    violations: dict[str, float] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid


def validate_potential(xi: Potential, tol: float = 1e-10) -> ValidationReport:
    """Check every defining property of P_g; each failure becomes a report entry."""
    rep = ValidationReport()
    m = xi.matrix
    tr = m.trace_residual()
    if tr > tol:
        rep.violations["traceless"] = tr
    lead = m.coeff(-1)
    shape = float(max(abs(lead[0, 0]), abs(lead[1, 0]), abs(lead[1, 1]), abs(lead[0, 1].real)))
    if shape > tol:
        rep.violations["leading_shape"] = shape
    if lead[0, 1].imag <= tol:
        rep.violations["leading_positive"] = float(-lead[0, 1].imag)
    tr01 = abs(np.trace(lead @ m.coeff(0)))
    if tr01 <= tol:
        rep.violations["trace_condition"] = float(tr01)
    pr = pairing_residual(m)
    if pr > tol:
        rep.violations["conjugate_pairing"] = pr
    return rep


def a_from_potential(xi: Potential) -> ComplexPoly:
    """a(lambda) = -lambda det xi_lambda, a polynomial of degree 2g."""
    c = xi.matrix.coeffs
    g = xi.g
    # det of traceless X is -(x00^2 + x01 x10); products of Laurent series
    x00 = c[:, 0, 0]
    x01 = c[:, 0, 1]
    x10 = c[:, 1, 0]
    det = -(np.convolve(x00, x00) + np.convolve(x01, x10))  # powers -2 .. 2g
    a = -det[1:]  # lambda * det shifts powers to -1..2g-1 ... then drop the vanishing lambda^-1 term
    if abs(det[0]) > 1e-14 * max(1.0, np.max(np.abs(det))):
        raise ValueError("lambda^-2 term of det does not vanish; potential has the wrong leading shape")
    a = ComplexPoly(a[: 2 * g + 1])
    if abs(a.coeffs[0]) == 0:
        raise ValueError("a(0) vanishes; trace condition violated")
    return a


def offdiagonal_potential(roots_: Sequence[complex]) -> Potential:
    """Off-diagonal potential whose off-diagonal entries are built from ``roots_``.

    beta = i/(4 lambda sqrt(prod|alpha|)) prod(1 - conj(alpha) lambda),
    gamma = i/(4 sqrt(prod|alpha|)) prod(lambda - alpha).
    """
    roots_ = [complex(r) for r in roots_]
    for r in roots_:
        if abs(r) == 0 or abs(abs(r) - 1) < 1e-12:
            raise ValueError(f"root {r} lies at 0 or on the unit circle")
    g = len(roots_)
    s = np.sqrt(np.prod([abs(r) for r in roots_])) if roots_ else 1.0
    beta = np.array([1.0 + 0j])
    gamma = np.array([1.0 + 0j])
    for r in roots_:
        beta = np.convolve(beta, [1.0, -np.conj(r)])
        gamma = np.convolve(gamma, [-r, 1.0])
    beta *= 1j / (4 * s)
    gamma *= 1j / (4 * s)
    coeffs = np.zeros((g + 2, 2, 2), dtype=complex)
    coeffs[:-1, 0, 1] = beta  # beta carries lambda^-1 .. lambda^{g-1}
    coeffs[1:, 1, 0] = gamma  # gamma carries lambda^0 .. lambda^g
    return Potential(MatrixLaurent(coeffs, g))


def omega_at_origin(xi: Potential) -> float:
    """omega read from 4 beta_{-1} = i e^omega."""
    return float(np.log(4 * xi.matrix.coeff(-1)[0, 1].imag))


def potential_norm(xi: Potential, n: int = 64) -> float:
    """Max over n points of the unit circle of the largest singular value."""
    lam = np.exp(2j * np.pi * np.arange(n) / n)
    return float(np.max(np.linalg.norm(xi(lam), ord=2, axis=(-2, -1))))


def poly_to_pairs(p: ComplexPoly) -> list[list[float]]:
    return [[float(c.real), float(c.imag)] for c in p.coeffs]


def poly_from_pairs(pairs) -> ComplexPoly:
    return ComplexPoly([complex(re, im) for re, im in pairs])
