"""Loop-group Iwasawa splitting, the isospectral group action and simple factors.

Loops are stored by their samples on the unit circle at n equally spaced
points.  The Iwasawa splitting phi = F B (F unitary on the circle, B extending
holomorphically into the disc with B(0) upper triangular and positive real
diagonal) is computed from the Hermitian loop W = phi^* phi = B^* B: the
inverse C = B^{-1} solves a block-Toeplitz system and the diagonal
normalization of B(0) comes from a Cholesky factor.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .lax_frame import FrameField, LambdaGrid
from .poly_core import MatrixLaurent, Potential, a_from_potential, roots, roots_coincide
from .workers import worker_count

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 64
TAIL_TOL = 1e-10
MAX_ORDER = 1024
COND_LIMIT = 1e12


class IwasawaError(RuntimeError):
    pass


class TruncationError(IwasawaError):
    pass


# ---------------------------------------------------------------- loops


def circle_points(n: int, r: float = 1.0) -> np.ndarray:
    return r * np.exp(2j * np.pi * np.arange(n) / n)


@dataclass(frozen=True)
class LoopElement:
    """Loop with Fourier coefficients for powers -N..N on |lambda| = r."""

    coeffs: np.ndarray  # (2N + 1, 2, 2), index k <-> power k - N
    order: int
    radius: float = 1.0

    @classmethod
    def from_samples(cls, samples: np.ndarray, order: int, radius: float = 1.0) -> "LoopElement":
        n = samples.shape[0]
        if n < 2 * order + 1:
            raise ValueError("need at least 2N + 1 samples")
        c = np.fft.fft(samples, axis=0) / n
        idx = np.arange(-order, order + 1) % n
        scale = radius ** (-np.arange(-order, order + 1, dtype=float))
        return cls(c[idx] * scale[:, None, None], order, radius)

    @classmethod
    def from_function(cls, f, order: int = DEFAULT_ORDER, radius: float = 1.0) -> "LoopElement":
        lam = circle_points(4 * order + 2, radius)
        return cls.from_samples(np.asarray(f(lam)), order, radius)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        pw = lam[..., None] ** np.arange(-self.order, self.order + 1)
        return np.einsum("...k,kij->...ij", pw, self.coeffs)

    def samples(self, n: int | None = None) -> np.ndarray:
        return self(circle_points(n or 2 * self.order + 1, self.radius))

    def tail_fraction(self) -> float:
        """Share of coefficient mass in the top quartile of |powers|."""
        mags = np.abs(self.coeffs).sum(axis=(1, 2))
        powers = np.abs(np.arange(-self.order, self.order + 1))
        top = powers > 0.75 * self.order
        return float(mags[top].sum() / max(mags.sum(), 1e-300))

    def det_residual(self, n: int | None = None) -> float:
        s = self.samples(n)
        return float(np.max(np.abs(np.linalg.det(s) - 1)))


@dataclass(frozen=True)
class PlusFactor:
    """Loop with powers 0..N, holomorphic in the disc."""

    coeffs: np.ndarray  # (N + 1, 2, 2)

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex)
        pw = lam[..., None] ** np.arange(self.coeffs.shape[0])
        return np.einsum("...k,kij->...ij", pw, self.coeffs)

    @property
    def at_zero(self) -> np.ndarray:
        return self.coeffs[0]


@dataclass
class IwasawaResult:
    lam: np.ndarray
    F: np.ndarray  # unitary factor at lam
    B: np.ndarray  # plus factor at lam
    plus: PlusFactor
    condition: float
    unitarity_residual: float
    product_residual: float


def iwasawa_samples(phi: np.ndarray, order: int) -> IwasawaResult:
    """Iwasawa splitting of a loop given by samples on the unit circle.

    ``phi`` has shape (n, 2, 2) at the points circle_points(n); n must be at
    least 4 * order + 1 so that every coefficient of phi^* phi needed by the
    Toeplitz system is resolved.
    """
    n = phi.shape[0]
    if n < 4 * order + 1:
        raise ValueError("need at least 4N + 1 samples")
    lam = circle_points(n)
    W = np.conj(np.swapaxes(phi, -1, -2)) @ phi
    Wc = np.fft.fft(W, axis=0) / n
    N1 = order + 1
    T = np.empty((2 * N1, 2 * N1), dtype=complex)
    for m in range(N1):
        for k in range(N1):
            T[2 * m:2 * m + 2, 2 * k:2 * k + 2] = Wc[(m - k) % n]
    cond = float(np.linalg.cond(T))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IwasawaError(f"ill-conditioned Toeplitz system: condition number {cond:.3e}")
    rhs = np.zeros((2 * N1, 2), dtype=complex)
    rhs[:2] = np.eye(2)
    X = np.linalg.solve(T, rhs).reshape(N1, 2, 2)
    X0 = 0.5 * (X[0] + np.conj(X[0]).T)
    S = np.linalg.cholesky(np.linalg.inv(X0))  # lower triangular, positive diagonal
    C = X @ S  # coefficients of B^{-1}
    Cl = np.einsum("lk,kij->lij", lam[:, None] ** np.arange(N1), C)
    B = np.linalg.inv(Cl)
    F = phi @ Cl
    Bc = np.fft.fft(B, axis=0) / n
    plus = PlusFactor(Bc[:N1].copy())
    eye = np.eye(2)
    unit = float(np.max(np.abs(np.conj(np.swapaxes(F, -1, -2)) @ F - eye)))
    prod = float(np.max(np.abs(F @ B - phi)) / max(1.0, np.max(np.abs(phi))))
    return IwasawaResult(lam, F, B, plus, cond, unit, prod)


def iwasawa(phi: LoopElement) -> IwasawaResult:
    """Unitary and plus factors of ``phi`` (unit circle only)."""
    if phi.radius != 1.0:
        raise NotImplementedError("only the unit-circle splitting is implemented")
    n = 4 * phi.order + 2
    return iwasawa_samples(phi.samples(n), phi.order)


# ---------------------------------------------------------------- isospectral action


def exp_traceless(A: np.ndarray) -> np.ndarray:
    """exp of traceless 2x2 matrices: cosh(s) I + sinh(s)/s A with s^2 = -det A."""
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    s = np.sqrt(-det + 0j)
    small = np.abs(s) < 1e-8
    safe = np.where(small, 1.0, s)
    shc = np.where(small, 1 + s * s / 6, np.sinh(safe) / safe)
    return np.cosh(s)[..., None, None] * np.eye(2) + shc[..., None, None] * A


def _slots(t) -> dict[int, complex]:
    if isinstance(t, Mapping):
        return {int(k): complex(v) for k, v in t.items()}
    return {i: complex(v) for i, v in enumerate(np.atleast_1d(np.asarray(t, dtype=complex)))}


def action_loop(xi: Potential, t) -> callable:
    """lambda -> exp(xi_lambda * sum_i lambda^{-i} t_i); ``t`` is a vector or {slot: value}."""
    slots = _slots(t)

    def f(lam):
        lam = np.asarray(lam, dtype=complex)
        w = sum(v * lam ** (-i) for i, v in slots.items()) if slots else np.zeros_like(lam)
        return exp_traceless(xi(lam) * np.asarray(w)[..., None, None])

    return f


def _split_adaptive(f, order: int) -> tuple[IwasawaResult, int]:
    while True:
        loop = LoopElement.from_function(f, order)
        if loop.tail_fraction() <= TAIL_TOL:
            return iwasawa(loop), order
        if order >= MAX_ORDER:
            raise TruncationError(f"loop not resolved at N = {order}; increase the truncation order")
        order *= 2


def _coeffs_from_samples(vals: np.ndarray, lam: np.ndarray, g: int) -> np.ndarray:
    n = lam.shape[0]
    c = np.fft.fft(vals, axis=0) / n
    return np.stack([c[d % n] for d in range(-1, g + 1)])


def isospectral_action(t, xi: Potential, order: int = DEFAULT_ORDER) -> Potential:
    """pi(t) xi = F^{-1} xi F where exp(xi sum lambda^{-i} t_i) = F B."""
    res, _ = _split_adaptive(action_loop(xi, t), order)
    lam = res.lam
    B = res.B
    vals = B @ xi(lam) @ np.linalg.inv(B)
    coeffs = _coeffs_from_samples(vals, lam, xi.g)
    return Potential(MatrixLaurent(coeffs, xi.g))


def action_frame(t, xi: Potential, lam: Sequence[complex], order: int = DEFAULT_ORDER) -> np.ndarray:
    """Unitary factor F(t) evaluated at points of the unit circle via its Fourier series."""
    res, N = _split_adaptive(action_loop(xi, t), order)
    Fc = np.fft.fft(res.F, axis=0) / res.F.shape[0]
    n = res.F.shape[0]
    powers = np.arange(-2 * N, 2 * N + 1)
    lam = np.asarray(lam, dtype=complex)
    return np.einsum("lk,kij->lij", lam[:, None] ** powers, Fc[powers % n])


def actions_at(ts: Sequence, xi: Potential, order: int = DEFAULT_ORDER) -> list[Potential]:
    """Independent actions evaluated concurrently."""
    with ThreadPoolExecutor(max_workers=worker_count()) as ex:
        return list(ex.map(lambda t: isospectral_action(t, xi, order), ts))


def unitary_combination(g: int, slot: int, t: complex) -> dict[int, complex]:
    """t in ``slot`` and conj(t) in the mirrored slot g - 1 - slot (added if equal)."""
    out = {slot: complex(t)}
    mirror = g - 1 - slot
    out[mirror] = out.get(mirror, 0) + complex(np.conj(t))
    return out


# ---------------------------------------------------------------- simple factors


def normalize_line(v: Sequence[complex]) -> np.ndarray:
    """Unit representative with its first nonzero component real positive."""
    v = np.asarray(v, dtype=complex)
    nrm = np.linalg.norm(v)
    if nrm == 0:
        raise ValueError("zero vector does not define a line")
    v = v / nrm
    k = 0 if abs(v[0]) > 1e-14 else 1
    return v * np.exp(-1j * np.angle(v[k]))


@dataclass(frozen=True)
class SimpleFactorSpec:
    line: np.ndarray
    alpha0: complex

    def __post_init__(self):
        a = complex(self.alpha0)
        if abs(a) == 0 or abs(abs(a) - 1) < 1e-12 or abs(a) > 1:
            raise ValueError("alpha0 must satisfy 0 < |alpha0| < 1")
        object.__setattr__(self, "line", normalize_line(self.line))
        object.__setattr__(self, "alpha0", a)


def _rotation(line: np.ndarray) -> np.ndarray:
    """SU(2) matrix whose first column is the line."""
    u, v = line
    return np.array([[u, -np.conj(v)], [v, np.conj(u)]])


def _ratio(lam, a):
    return (lam - a) / (1 - np.conj(a) * lam)


def pi_rational(line: np.ndarray, a: complex, lam, inverse: bool = False) -> np.ndarray:
    """Projector form: ratio on the line, 1 on its orthogonal complement (inverse: 1/ratio)."""
    lam = np.asarray(lam, dtype=complex)
    r = _ratio(lam, a)
    if inverse:
        r = 1 / r
    P = np.outer(line, np.conj(line))
    Q = np.eye(2) - P
    return r[..., None, None] * P + Q


@dataclass(frozen=True)
class SimpleFactor:
    """h(lambda) = Q1 pi_{L',alpha0}^{-1}(lambda) with h(0) upper triangular."""

    spec: SimpleFactorSpec
    Q1: np.ndarray

    def rational(self, lam, inverse: bool = False) -> np.ndarray:
        """h up to the scalar square root; poles at alpha0 (h) and 1/conj(alpha0) (h^{-1})."""
        s, a = self.spec, self.spec.alpha0
        if inverse:
            return pi_rational(s.line, a, lam) @ np.conj(self.Q1).T
        return self.Q1 @ pi_rational(s.line, a, lam, inverse=True)

    def __call__(self, lam) -> np.ndarray:
        """Determinant-one value using the principal square root of the ratio."""
        lam = np.asarray(lam, dtype=complex)
        return np.sqrt(_ratio(lam, self.spec.alpha0))[..., None, None] * self.rational(lam)

    def inverse(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=complex)
        return np.sqrt(1 / _ratio(lam, self.spec.alpha0))[..., None, None] * self.rational(lam, inverse=True)


def simple_factor(spec: SimpleFactorSpec) -> SimpleFactor:
    a = spec.alpha0
    R = _rotation(spec.line)
    # pi^{-1} at 0 (SL normalization): diag on the line basis
    d = np.sqrt(_ratio(0.0, a) + 0j)
    M0 = R @ np.diag([1 / d, d]) @ np.conj(R).T
    Q, Rr = np.linalg.qr(M0)
    D = np.diag(Rr.diagonal() / np.abs(Rr.diagonal()))
    Q1 = np.conj(Q @ D).T  # special unitary since det(h(0)) = 1 with positive diagonal
    return SimpleFactor(spec, Q1)


def _regular_grid(grid: LambdaGrid, a: complex) -> tuple[LambdaGrid, np.ndarray]:
    keep = (np.abs(grid.points - a) > 1e-12) & (np.abs(grid.points - 1 / np.conj(a)) > 1e-12)
    return LambdaGrid(grid.points[keep], grid.unit_mask[keep]), keep


def _moving_lines(frame: FrameField, spec: SimpleFactorSpec) -> np.ndarray:
    Fa = frame.F[..., frame.grid.index(spec.alpha0), :, :]
    return np.einsum("...ji,j->...i", np.conj(Fa), spec.line)


def _apply_factors(F: np.ndarray, lines: np.ndarray, lam: np.ndarray, spec: SimpleFactorSpec,
                   inverse: bool) -> np.ndarray:
    h = simple_factor(spec)
    H = h.rational(lam, inverse=inverse)
    flat_F = F.reshape((-1,) + F.shape[-3:])
    flat_l = lines.reshape(-1, 2)
    out = np.empty_like(flat_F)
    for k in range(flat_F.shape[0]):
        hz = simple_factor(SimpleFactorSpec(flat_l[k], spec.alpha0))
        out[k] = H @ flat_F[k] @ hz.rational(lam, inverse=not inverse)
    return out.reshape(F.shape)


def dress(frame: FrameField, spec: SimpleFactorSpec) -> FrameField:
    """Dressed frame h F h_{L'(z)}^{-1} with L'(z) = F(alpha0)(z)^* L'.

    The frame grid must contain lambda = alpha0; the returned frame lives on
    the grid with alpha0 and 1/conj(alpha0) removed.  The dressed frame has no
    Killing field attached.
    """
    lines = _moving_lines(frame, spec)
    grid, keep = _regular_grid(frame.grid, spec.alpha0)
    out = _apply_factors(frame.F[..., keep, :, :], lines, grid.points, spec, inverse=False)
    return FrameField(frame.z, grid, out, None, list(frame.log) + [f"dressed at {spec.alpha0:.6g}"])


def undress(frame: FrameField, spec: SimpleFactorSpec, original: FrameField) -> FrameField:
    """Inverse of ``dress``; ``original`` supplies the moving line."""
    lines = _moving_lines(original, spec)
    out = _apply_factors(frame.F, lines, frame.grid.points, spec, inverse=True)
    return FrameField(frame.z, frame.grid, out, original.killing, list(frame.log))


def dress_array(F: np.ndarray, F_alpha: np.ndarray, lam: np.ndarray, spec: SimpleFactorSpec) -> np.ndarray:
    """Dress frames of any leading shape; F_alpha holds the undressed frame at alpha0."""
    lines = np.einsum("...ji,j->...i", np.conj(F_alpha), spec.line)
    return _apply_factors(F, lines, np.asarray(lam, dtype=complex), spec, inverse=False)


# ---------------------------------------------------------------- root removal


@dataclass
class ReductionResult:
    potential: Potential
    divisor: np.ndarray  # coefficients of p, constant first
    zeros: list[complex]
    notice: str = ""


def common_zeros(xi: Potential, tol: float = 1e-8) -> list[complex]:
    """Zeros in C* shared by every entry of lambda * xi_lambda."""
    g = xi.g
    C = xi.matrix.coeffs  # powers -1..g; lambda*xi has powers 0..g+1
    entries = [C[:, i, j] for i in range(2) for j in range(2)]
    entries = [e for e in entries if np.max(np.abs(e)) > 0]
    from .poly_core import ComplexPoly

    cand = []
    for e in entries:
        p = ComplexPoly(e).trimmed()
        if len(p.coeffs) > 1:
            cand.extend(roots(p))
    scale = max(np.max(np.abs(C)), 1e-300)
    out: list[complex] = []
    for z in cand:
        if abs(z) < 1e-12:
            continue
        pw = z ** np.arange(g + 2)
        val = np.einsum("k,kij->ij", pw, C)
        if np.max(np.abs(val)) <= tol * scale * max(1.0, abs(z)) ** (g + 1):
            if not any(roots_coincide(z, w) or abs(z - w) < 1e-6 for w in out):
                out.append(complex(z))
    return out


def reduce_potential(xi: Potential, tol: float = 1e-8) -> ReductionResult:
    """Divide out common zeros with a reality-preserving polynomial p.

    p = c prod(lambda - z_k) with real c fixed by |p(0)| = 4 sqrt(|a(0)|) so
    that the reduced potential keeps |a(0)| = 1/16.  The surface of the
    reduced potential is reparametrized by z -> p(0) z.
    """
    zs = common_zeros(xi, tol)
    if not zs:
        return ReductionResult(xi, np.array([1.0 + 0j]), [], "no common zero above tolerance")
    from .poly_core import ComplexPoly

    base = ComplexPoly.from_roots(zs)
    # reality: lambda^d conj(p(1/conj lambda)) = p requires the phase of the leading coefficient
    d = len(zs)
    img = np.conj(base.coeffs[::-1])
    k = int(np.argmax(np.abs(base.coeffs)))
    # p = c base with c conj-ratio fixed: c base = conj(c) img  ->  c / conj(c) = img_k / base_k
    ratio = img[k] / base.coeffs[k]
    c = np.sqrt(ratio)
    a0 = abs(a_from_potential(xi).coeffs[0])
    p = base * c
    p = p * (4 * np.sqrt(a0) / abs(p.coeffs[0]))
    notice = ""
    beta = xi.matrix.coeff(-1)[0, 1]
    if (beta / p.coeffs[0] / 1j).real < 0:
        p = p * -1.0
    if abs(np.angle(beta / p.coeffs[0] / 1j)) > 1e-8:
        notice = "reduced lower-order term is not on the positive imaginary axis"
    C = xi.matrix.coeffs  # lambda * xi coefficients, powers 0..g+1
    newg = xi.g - d
    out = np.zeros((newg + 2, 2, 2), dtype=complex)
    worst = 0.0
    for i in range(2):
        for j in range(2):
            q, r = ComplexPoly(C[:, i, j]).divmod(p)
            qc = q.padded(newg + 2)
            out[:, i, j] = qc[: newg + 2]
            worst = max(worst, float(np.max(np.abs(r.coeffs))) if len(r.coeffs) else 0.0)
    if worst > tol * max(np.max(np.abs(C)), 1.0) * 1e3:
        notice = (notice + "; " if notice else "") + f"division remainder {worst:.2e}"
    return ReductionResult(Potential(MatrixLaurent(out, newg)), p.coeffs, zs, notice)
