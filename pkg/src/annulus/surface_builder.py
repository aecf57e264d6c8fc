"""Sym-Bobenko reconstruction, surface diagnostics, embeddedness and mesh export.

Surfaces are sampled in the rotated coordinate w = x + i y = e^{i theta/2} z
in which the height is h = y and the period of a closed annulus is real.
Grids are stored with rows indexed by y and columns by x, as in OmegaField.

The su(2) chart is M = [[Z, X - iY], [X + iY, -Z]], so sigma_3 maps to
(0, 0, 1).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .lax_frame import (
    MAX_STEP,
    FrameField,
    KillingField,
    LambdaGrid,
    _direction_form,
    integrate_frame,
    integrate_grid,
    omega_from_zeta,
)
from .poly_core import Potential, a_from_potential, offdiagonal_potential
from .sinh_gordon_lab import OmegaField, grid_dx, grid_dy

SIGMA3 = np.diag([1.0, -1.0]).astype(complex)
CONFORMAL_TOL = 1e-5
CLOSURE_TOL = 1e-5
MARGIN_FACTOR = 5.0
POLE_TOL = 1e-3
SIDE_TOL = 1e-8


# ---------------------------------------------------------------- frames on grids


def sample_grid(period: float, nx: int, ny: int | None = None, hy: float | None = None):
    """x over one period (nx samples) and y centred on 0 with spacing hy."""
    ny = nx if ny is None else ny
    hx = period / nx
    hy = hx if hy is None else hy
    xs = hx * np.arange(nx)
    ys = hy * (np.arange(ny) - ny // 2)
    return xs, ys


def frame_on_grid(xi: Potential, theta: float, xs: np.ndarray, ys: np.ndarray,
                  grid: LambdaGrid | None = None, max_step: float = MAX_STEP,
                  closed: bool = False) -> FrameField:
    """Frame on z = e^{-i theta/2} (x + i y) for the tensor grid xs, ys.

    With ``closed`` an extra column at x = xs[-1] + (xs[1] - xs[0]) is
    integrated so that periodicity can be checked by ``sym_bobenko``.
    """
    grid = LambdaGrid.build(16) if grid is None else grid
    xs = np.asarray(xs, dtype=float)
    if closed:
        xs = np.append(xs, xs[-1] + (xs[1] - xs[0]))
    direction = np.exp(-0.5j * theta)
    zeta, F, log = integrate_grid(xi, xs, ys, grid, max_step, direction)
    z = direction * (xs[None, :] + 1j * np.asarray(ys)[:, None])
    return FrameField(z, grid, F, KillingField(z, zeta, xi), log)


def omega_on_grid(frame: FrameField, theta: float) -> OmegaField:
    """omega read from the frame's Killing field, aligned with the w-grid."""
    if frame.killing is None:
        raise ValueError("frame carries no Killing field")
    w = np.exp(0.5j * theta) * frame.z
    hx = float(np.real(w[0, 1] - w[0, 0]))
    hy = float(np.imag(w[1, 0] - w[0, 0]))
    return OmegaField(omega_from_zeta(frame.killing.zeta), hx, hy,
                      x0=float(np.real(w[0, 0])), y0=float(np.imag(w[0, 0])))


# ---------------------------------------------------------------- Sym-Bobenko


def chart_vector(M: np.ndarray) -> np.ndarray:
    """Hermitian traceless [[Z, X - iY], [X + iY, -Z]] -> (X, Y, Z)."""
    X = 0.5 * np.real(M[..., 1, 0] + M[..., 0, 1])
    Y = 0.5 * np.imag(M[..., 1, 0] - M[..., 0, 1])
    Z = 0.5 * np.real(M[..., 0, 0] - M[..., 1, 1])
    return np.stack([X, Y, Z], axis=-1)


def _adjugate(F: np.ndarray) -> np.ndarray:
    out = np.empty_like(F)
    out[..., 0, 0] = F[..., 1, 1]
    out[..., 1, 1] = F[..., 0, 0]
    out[..., 0, 1] = -F[..., 0, 1]
    out[..., 1, 0] = -F[..., 1, 0]
    return out


@dataclass
class ImmersionSample:
    """Samples of X = (G, h) on the w-grid; tangents are (ny, nx, 4) when known."""

    x: np.ndarray
    y: np.ndarray
    theta: float
    G: np.ndarray
    h: np.ndarray
    Xx: np.ndarray | None = None
    Xy: np.ndarray | None = None
    closure: float | None = None
    tau: complex | None = None
    notes: list[str] = field(default_factory=list)

    @property
    def shape(self) -> tuple[int, int]:
        return self.h.shape

    @property
    def unit_residual(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.G, axis=-1) - 1)))

    @property
    def height_residual(self) -> float:
        z = np.exp(-0.5j * self.theta) * (self.x[None, :] + 1j * self.y[:, None])
        return float(np.max(np.abs(self.h - np.real(-1j * np.exp(0.5j * self.theta) * z))))

    def tangents(self) -> tuple[np.ndarray, np.ndarray, bool]:
        """(X_x, X_y, exact); finite differences when the frame gave none."""
        if self.Xx is not None:
            return self.Xx, self.Xy, True
        hx = self.x[1] - self.x[0]
        hy = self.y[1] - self.y[0]
        X = np.concatenate([self.G, self.h[..., None]], axis=-1)
        periodic = self.closure is not None and self.closure <= CLOSURE_TOL
        if periodic:
            Xx = (np.roll(X, -1, axis=1) - np.roll(X, 1, axis=1)) / (2 * hx)
        else:
            Xx = np.stack([grid_dy(X[..., k].T, hx).T for k in range(4)], axis=-1)
        Xy = np.stack([grid_dy(X[..., k], hy) for k in range(4)], axis=-1)
        return Xx, Xy, False

    def conformality(self) -> tuple[float, float]:
        """(max |cos angle(X_x, X_y)|, max | |X_x| - |X_y| |)."""
        Xx, Xy, _ = self.tangents()
        nx = np.linalg.norm(Xx, axis=-1)
        ny = np.linalg.norm(Xy, axis=-1)
        cos = np.sum(Xx * Xy, axis=-1) / (nx * ny)
        return float(np.max(np.abs(cos))), float(np.max(np.abs(nx - ny)))


def _exact_tangents(frame: FrameField, F1: np.ndarray, G_shape, theta: float):
    k = frame.killing
    if k is None or k.zeta.shape[:-3] != frame.z.shape:
        return None, None
    adj = _adjugate(F1)
    out = []
    for e, dh in ((np.exp(-0.5j * theta), 0.0), (1j * np.exp(-0.5j * theta), 1.0)):
        A = _direction_form(k.zeta, e).sum(axis=-3)  # lambda = 1
        dM = F1 @ (A @ SIGMA3 - SIGMA3 @ A) @ adj
        out.append(np.concatenate([chart_vector(dM), np.full(G_shape[:-1] + (1,), dh)], axis=-1))
    return out


def sym_bobenko(frame: FrameField, theta: float, periodic: bool = False,
                tau: complex | None = None) -> ImmersionSample:
    """Immersion G = F_1 sigma_3 F_1^{-1}, h = Re(-i e^{i theta/2} z).

    The frame must sit on a 2-d grid built by ``frame_on_grid``.  With
    ``periodic`` the last column is the copy of the first one shifted by one
    period; its mismatch is stored as ``closure`` and the column is dropped.
    """
    try:
        idx = frame.grid.index(1.0)
    except KeyError:
        raise ValueError("the frame grid does not contain lambda = 1") from None
    if frame.z.ndim != 2:
        raise ValueError("sym_bobenko expects a frame on a 2-d grid")
    F1 = frame.F[..., idx, :, :]
    G = chart_vector(F1 @ SIGMA3 @ _adjugate(F1))
    w = np.exp(0.5j * theta) * frame.z
    x = np.real(w[0])
    y = np.imag(w[:, 0])
    h = np.real(-1j * np.exp(0.5j * theta) * frame.z)
    Xx, Xy = _exact_tangents(frame, F1, G.shape, theta)
    closure = None
    if periodic:
        closure = float(np.max(np.abs(G[:, -1] - G[:, 0])))
        G, h, x = G[:, :-1], h[:, :-1], x[:-1]
        if Xx is not None:
            Xx, Xy = Xx[:, :-1], Xy[:, :-1]
    return ImmersionSample(x, y, theta, G, h, Xx, Xy, closure, tau)


def potential_from_data(data, tol: float = 1e-8) -> Potential:
    """Off-diagonal seed whose spectral polynomial is data.a.

    Uses the roots of a inside the unit disc, with multiplicity.
    """
    inside = [r for r, m in data.curve.roots if abs(r) < 1 for _ in range(m)]
    if len(inside) != data.g:
        raise ValueError(f"expected {data.g} roots inside the unit disc, found {len(inside)}")
    xi = offdiagonal_potential(inside)
    a = a_from_potential(xi).coeffs
    err = float(np.max(np.abs(a - data.a.padded(len(a)))))
    if err > tol * max(1.0, float(np.max(np.abs(a)))):
        raise ValueError(f"seed does not reproduce a (mismatch {err:.3g})")
    return xi


def build_surface(xi: Potential, theta: float, period: float, nx: int = 64, ny: int | None = None,
                  hy: float | None = None, grid: LambdaGrid | None = None,
                  max_step: float | None = None) -> tuple[ImmersionSample, FrameField]:
    """Frame and immersion over one period in x, with the closing column checked."""
    xs, ys = sample_grid(period, nx, ny, hy)
    step = min(MAX_STEP * 5, (xs[1] - xs[0]) / 4) if max_step is None else max_step
    frame = frame_on_grid(xi, theta, xs, ys, grid, step, closed=True)
    imm = sym_bobenko(frame, theta, periodic=True, tau=period * np.exp(-0.5j * theta))
    frame = FrameField(frame.z[:, :-1], frame.grid, frame.F[:, :-1],
                       KillingField(frame.z[:, :-1], frame.killing.zeta[:, :-1], xi), frame.log)
    return imm, frame


# ---------------------------------------------------------------- geometry


@dataclass
class GeometryReport:
    omega: np.ndarray
    K: np.ndarray
    n3: np.ndarray
    n3_formula: np.ndarray
    k_g: np.ndarray
    shiffman: np.ndarray
    flux: float
    normal_residual: float
    metric_residual: float
    kg_row_std: float
    exact_tangents: bool

    def summary(self) -> dict:
        out = {}
        for name in ("omega", "K", "n3", "k_g", "shiffman"):
            v = getattr(self, name)
            out[name] = {"min": float(v.min()), "max": float(v.max()), "mean": float(v.mean())}
        out.update(flux=self.flux, normal_residual=self.normal_residual,
                   metric_residual=self.metric_residual, kg_row_std=self.kg_row_std,
                   exact_tangents=self.exact_tangents)
        return out


def unit_normal(G: np.ndarray, Xx: np.ndarray, Xy: np.ndarray) -> np.ndarray:
    """Unit normal in T_G S^2 + R, realized in R^3 by (v, t) -> v + t G."""
    ex = Xx[..., :3] + Xx[..., 3:] * G
    ey = Xy[..., :3] + Xy[..., 3:] * G
    N = np.cross(ey, ex)
    return N / np.linalg.norm(N, axis=-1, keepdims=True)


def geometry(om: OmegaField, imm: ImmersionSample) -> GeometryReport:
    """Curvature, normal, geodesic curvature of level curves, Shiffman field and flux."""
    w = om.values
    if w.shape != imm.shape:
        raise ValueError(f"grids not aligned: {w.shape} vs {imm.shape}")
    wx = grid_dx(w, om.hx)
    wy = grid_dy(w, om.hy, om.y_periodic)
    ch = np.cosh(w)
    K = np.tanh(w) ** 2 - (wx**2 + wy**2) / ch**4
    k_g = -wy / ch
    u = ch**2 * grid_dx(k_g, om.hx)
    Xx, Xy, exact = imm.tangents()
    n3 = np.sum(unit_normal(imm.G, Xx, Xy) * imm.G, axis=-1)
    metric = np.sum(Xx * Xx, axis=-1)
    j = int(np.argmin(np.abs(imm.y)))
    dx = imm.x[1] - imm.x[0]
    flux = float(np.sum(Xy[j, :, 3] / np.linalg.norm(Xy[j], axis=-1) * np.linalg.norm(Xx[j], axis=-1)) * dx)
    return GeometryReport(
        omega=w, K=K, n3=n3, n3_formula=np.tanh(w), k_g=k_g, shiffman=u, flux=flux,
        normal_residual=float(np.max(np.abs(n3 - np.tanh(w)))),
        metric_residual=float(np.max(np.abs(metric - ch**2))),
        kg_row_std=float(np.max(np.std(k_g, axis=1))),
        exact_tangents=exact,
    )


def omega_from_immersion(imm: ImmersionSample) -> OmegaField:
    """omega from the samples alone: sinh(omega) = n_3 |X_x|, using the metric cosh^2(omega)."""
    Xx, Xy, _ = imm.tangents()
    n3 = np.sum(unit_normal(imm.G, Xx, Xy) * imm.G, axis=-1)
    speed = np.sqrt(np.linalg.norm(Xx, axis=-1) * np.linalg.norm(Xy, axis=-1))
    return OmegaField(np.arcsinh(n3 * speed), imm.x[1] - imm.x[0], imm.y[1] - imm.y[0],
                      x0=float(imm.x[0]), y0=float(imm.y[0]))


# ---------------------------------------------------------------- embeddedness


@dataclass
class LevelReport:
    y: float
    crossings: int
    min_distance: float
    edge: float
    verdict: str

    def to_dict(self) -> dict:
        return {"y": self.y, "crossings": self.crossings, "min_distance": self.min_distance,
                "edge": self.edge, "verdict": self.verdict}


@dataclass
class EmbeddingReport:
    levels: list[LevelReport]
    verdict: str
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "levels": [lv.to_dict() for lv in self.levels], "notes": self.notes}


def arc_crossings(P: np.ndarray) -> int:
    """Number of crossing pairs of non-adjacent short great-circle arcs of a closed polygon on S^2."""
    A = P
    B = np.roll(P, -1, axis=0)
    n = len(P)
    normal = np.cross(A, B)
    sC = normal @ A.T  # sC[k, m] = side of P_m with respect to arc k
    sD = normal @ B.T
    # vertices on an arc's own great circle are not crossings
    eps = SIDE_TOL * np.max(np.linalg.norm(B - A, axis=1))
    strict = (np.abs(sC) > eps) & (np.abs(sD) > eps)
    opposite = (sC * sD < 0) & strict & ((sC * sD < 0) & strict).T
    same_side = (A + B) @ (A + B).T > 0
    k, m = np.indices((n, n))
    sep = np.abs(k - m)
    sep = np.minimum(sep, n - sep)
    hits = opposite & same_side & (sep >= 2)
    return int(np.count_nonzero(np.triu(hits)))


def level_report(P: np.ndarray, y: float) -> LevelReport:
    edges = np.linalg.norm(np.roll(P, -1, axis=0) - P, axis=1)
    edge = float(edges.max())
    crossings = arc_crossings(P)
    arclen = np.concatenate([[0.0], np.cumsum(edges)[:-1]])
    total = float(edges.sum())
    gap = np.abs(arclen[:, None] - arclen[None, :])
    gap = np.minimum(gap, total - gap)
    d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    far = gap >= total / 4
    min_distance = float(d[far].min()) if np.any(far) else float("inf")
    if crossings:
        verdict = "self-intersecting"
    elif min_distance > MARGIN_FACTOR * edge:
        verdict = "embedded"
    else:
        verdict = "inconclusive"
    return LevelReport(float(y), crossings, min_distance, edge, verdict)


def embeddedness(imm: ImmersionSample, n_levels: int = 8) -> EmbeddingReport:
    """Simple-curve test for n_levels horizontal curves h = const.

    Only horizontal slices are probed; contact between different levels is
    not searched for.
    """
    if imm.closure is None or imm.closure > CLOSURE_TOL:
        raise ValueError(f"immersion is not periodic in x (closure {imm.closure})")
    rows = np.unique(np.linspace(0, imm.shape[0] - 1, n_levels).round().astype(int))
    levels = [level_report(imm.G[j], imm.y[j]) for j in rows]
    verdicts = {lv.verdict for lv in levels}
    if "self-intersecting" in verdicts:
        verdict = "self-intersecting"
    elif verdicts == {"embedded"}:
        verdict = "embedded"
    else:
        verdict = "inconclusive"
    notes = ["level curves only; contact between different heights is not tested"]
    return EmbeddingReport(levels, verdict, notes)


# ---------------------------------------------------------------- Sym point


def normalized_potential(xi: Potential, theta: float) -> Potential:
    """Seed of the frame with Sym point moved from e^{i theta} to 1."""
    g = xi.g
    c = np.exp(0.5j * (1 - g) * theta)
    coeffs = xi.matrix.coeffs
    scale = c * np.exp(1j * theta * np.arange(-1, g + 1))
    return Potential.from_coeffs(coeffs * scale[:, None, None])


def hopf_phase(xi: Potential) -> float:
    """Phase of -4 beta_-1 gamma_0, the Hopf differential at lambda = 1."""
    c = xi.matrix.coeffs
    return float(np.angle(-4 * c[0, 0, 1] * c[1, 1, 0]))


def sym_point_normalize(frame: FrameField, theta: float, g: int) -> FrameField:
    """F~_lambda(z) = F_{e^{i theta} lambda}(e^{i(1-g) theta/2} z) on the frame's own grid and path.

    The rotated lambda values are sampled afresh by integrating the seed along
    the rotated path, so the input grid need not be rotation invariant.
    """
    if frame.killing is None:
        raise ValueError("frame carries no seed")
    if theta == 0:
        return frame
    xi = frame.killing.seed
    if xi.g != g:
        raise ValueError(f"genus mismatch: seed has g = {xi.g}")
    c = np.exp(0.5j * (1 - g) * theta)
    rot = LambdaGrid.of(np.exp(1j * theta) * frame.grid.points)
    z = np.asarray(frame.z).ravel()
    lengths = np.abs(np.diff(z))
    step = min(MAX_STEP, float(lengths[lengths > 0].min()) if np.any(lengths > 0) else MAX_STEP)
    moved = integrate_frame(xi, rot, c * z, step)
    scale = c * np.exp(1j * theta * np.arange(-1, g + 1))
    zeta = moved.killing.zeta * scale[:, None, None]
    seed = normalized_potential(xi, theta)
    F = moved.F.reshape(np.shape(frame.z) + moved.F.shape[1:])
    killing = KillingField(frame.z, zeta.reshape(np.shape(frame.z) + zeta.shape[1:]), seed)
    return FrameField(frame.z, frame.grid, F, killing, moved.log)


# ---------------------------------------------------------------- export


def stereographic(G: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Projection from (0, 0, -1); returns (chart points (.., 2), distance to the pole)."""
    d = np.linalg.norm(G - np.array([0.0, 0.0, -1.0]), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        P = G[..., :2] / (1 + G[..., 2:3])
    return P, d


def mesh_csv(imm: ImmersionSample) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["x", "y", "G1", "G2", "G3", "h"])
    ny, nx = imm.shape
    for j in range(ny):
        for i in range(nx):
            row = [imm.x[i], imm.y[j], *imm.G[j, i], imm.h[j, i]]
            wr.writerow([f"{float(v):.17g}" for v in row])
    return buf.getvalue()


def mesh_obj(imm: ImmersionSample) -> tuple[str, int]:
    """OBJ text and the number of vertices flagged near the projection pole."""
    P, d = stereographic(imm.G)
    near = d < POLE_TOL
    ny, nx = imm.shape
    lines = ["# chart: stereographic projection of G from (0, 0, -1), third coordinate h",
             f"# theta {imm.theta:.17g}"]
    if imm.tau is not None:
        lines.append(f"# tau {np.real(imm.tau):.17g} {np.imag(imm.tau):.17g}")
    lines.append(f"# grid {ny} {nx}")
    if np.any(near):
        lines.append(f"# pole_flagged {int(near.sum())}")
    for j in range(ny):
        for i in range(nx):
            if near[j, i]:
                lines.append(f"# pole vertex {j * nx + i + 1}")
            lines.append(f"v {P[j, i, 0]:.17g} {P[j, i, 1]:.17g} {imm.h[j, i]:.17g}")
    periodic = imm.closure is not None and imm.closure <= CLOSURE_TOL
    ncols = nx if periodic else nx - 1
    for j in range(ny - 1):
        for i in range(ncols):
            a = j * nx + i + 1
            b = j * nx + (i + 1) % nx + 1
            lines.append(f"f {a} {b} {b + nx} {a + nx}")
    return "\n".join(lines) + "\n", int(near.sum())


def export_mesh(imm: ImmersionSample, fmt: str, path) -> int:
    """Write CSV or OBJ; returns the number of pole-flagged vertices (0 for CSV)."""
    if fmt == "csv":
        text, flagged = mesh_csv(imm), 0
    elif fmt == "obj":
        text, flagged = mesh_obj(imm)
    else:
        raise ValueError(f"unknown mesh format {fmt!r}")
    with open(path, "w") as fh:
        fh.write(text)
    return flagged


def read_obj_vertices(text: str) -> np.ndarray:
    return np.array([[float(t) for t in ln.split()[1:4]] for ln in text.splitlines() if ln.startswith("v ")])


# ---------------------------------------------------------------- seed files


def potential_to_dict(xi: Potential, theta: float, period: float) -> dict:
    """Seed file: coefficients for lambda^-1 .. lambda^g as row-major [re, im] pairs."""
    coeffs = [[[float(v.real), float(v.imag)] for v in c.ravel()] for c in xi.matrix.coeffs]
    return {"genus": xi.g, "theta": float(theta), "period": float(period), "potential": coeffs}


def potential_from_dict(d: dict) -> tuple[Potential, float, float]:
    known = {"genus", "theta", "period", "potential"}
    extra = set(d) - known
    if extra:
        raise ValueError(f"unknown fields: {sorted(extra)}")
    g = int(d["genus"])
    rows = d["potential"]
    if len(rows) != g + 2 or any(len(r) != 4 for r in rows):
        raise ValueError("potential needs g + 2 matrices of four [re, im] entries")
    c = np.array([[complex(re, im) for re, im in r] for r in rows]).reshape(g + 2, 2, 2)
    return Potential.from_coeffs(c), float(d["theta"]), float(d["period"])
