"""Command-line front end: catalog, surface, validate, flow, dress, hierarchy, describe.

Exit status is 0 on success, 1 on validation or numeric failure and 2 on usage
errors (bad flags, unknown config keys, malformed JSON).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields

import numpy as np

from .poly_core import flat_potential
from .spectral_data import (
    CatalogError,
    CutError,
    SpectralDataAB,
    abresch_catalog,
    closing_report,
    data_to_json,
    dist_to_lattice,
    dumps,
)

VALIDATE_TOL = 1e-8


class UsageError(Exception):
    pass


class NumericFailure(Exception):
    pass


# ---------------------------------------------------------------- configuration


@dataclass
class RunConfig:
    """Every knob of every subcommand, with its default."""

    command: str = ""
    input: str = ""
    output: str = "-"
    mesh: str = ""
    format: str = "csv"
    nx: int = 64
    ny: int = 64
    n_circle: int = 64
    levels: int = 8
    dt: float = 0.01
    T: float = 0.5
    order: int = 64
    tol: float = VALIDATE_TOL
    event_tol: float = 1e-3
    chooser: str = "flux"
    genus: int = 0
    alpha: float | None = None
    beta: float | None = None
    c: float = -0.1
    d: float = -0.2
    alpha0: complex | None = None
    line: tuple[complex, complex] = (1.0 + 0j, 0j)
    sizes: tuple[int, ...] = (32, 64, 128)
    overrides: set = field(default_factory=set, repr=False)

    @classmethod
    def knobs(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "overrides"]

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        unknown = set(values) - set(cls.knobs())
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg = cls()
        for k, v in values.items():
            setattr(cfg, k, _coerce(k, v))
            cfg.overrides.add(k)
        return cfg


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, value):
    if value is None:
        return None
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(value)
        if kind in ("float", "float | None"):
            return float(value)
        if kind == "complex | None":
            return _complex(value)
        if key == "line":
            parts = value.split(",") if isinstance(value, str) else list(value)
            if len(parts) != 2:
                raise ValueError("line needs two components")
            return tuple(_complex(p) for p in parts)
        if key == "sizes":
            parts = value.split(",") if isinstance(value, str) else list(value)
            return tuple(int(p) for p in parts)
        return str(value)
    except (TypeError, ValueError) as e:
        raise UsageError(f"bad value for {key}: {value!r} ({e})") from None


def _complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(str(v).replace(" ", "").replace("i", "j"))


def _show(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return f"{v.real!r}{v.imag:+}j"
    if isinstance(v, tuple):
        return ",".join(_show(x) for x in v)
    return "" if v is None else str(v)


def describe(config: RunConfig) -> str:
    """Deterministic table of every knob; overridden values are flagged with '*'."""
    names = RunConfig.knobs()
    width = max(map(len, names))
    lines = []
    for name in names:
        flag = "*" if name in config.overrides else " "
        lines.append(f"{flag} {name.ljust(width)}  {_show(getattr(config, name))}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- I/O helpers


def _read_text(path: str) -> str:
    if path in ("", "-"):
        return sys.stdin.read()
    with open(path) as fh:
        return fh.read()


def _load_json(path: str) -> dict:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise UsageError(f"malformed JSON in {path or 'stdin'}: line {e.lineno} column {e.colno}: {e.msg}") from None


def _write(path: str, text: str) -> None:
    if path in ("", "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load_data(path: str) -> SpectralDataAB:
    obj = _load_json(path)
    try:
        return SpectralDataAB.from_dict(obj)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"not a spectral data file: {e}") from None


def _load_seed(path: str):
    """(potential, theta, period, data or None) from a data or potential file."""
    from .surface_builder import potential_from_data, potential_from_dict

    obj = _load_json(path)
    if "potential" in obj:
        try:
            xi, theta, period = potential_from_dict(obj)
        except (KeyError, TypeError, ValueError) as e:
            raise UsageError(f"not a potential file: {e}") from None
        return xi, theta, period, None
    try:
        data = SpectralDataAB.from_dict(obj)
    except (KeyError, TypeError, ValueError) as e:
        raise UsageError(f"not a spectral data file: {e}") from None
    xi = flat_potential() if data.g == 0 else potential_from_data(data)
    return xi, data.theta, abs(data.tau), data


# ---------------------------------------------------------------- commands


def cmd_catalog(cfg: RunConfig) -> int:
    data = abresch_catalog(cfg.genus, cfg.alpha, cfg.beta)
    _write(cfg.output, data_to_json(data) + "\n")
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    data = _load_data(cfg.input)
    rep = closing_report(data, n_circle=cfg.n_circle)
    worst = rep.max_residual()
    out = rep.to_dict()
    out["max_residual"] = worst
    out["tolerance"] = cfg.tol
    out["passed"] = bool(worst <= cfg.tol)
    _write(cfg.output, dumps(out, 2) + "\n")
    return 0 if out["passed"] else 1


def cmd_surface(cfg: RunConfig) -> int:
    from .surface_builder import CLOSURE_TOL, build_surface, embeddedness, export_mesh, geometry, omega_on_grid

    xi, theta, period, _ = _load_seed(cfg.input)
    imm, frame = build_surface(xi, theta, period, cfg.nx, cfg.ny)
    geo = geometry(omega_on_grid(frame, theta), imm)
    out = geo.summary()
    cos, dlen = imm.conformality()
    closed = imm.closure <= CLOSURE_TOL
    out.update(theta=theta, period=period, closure=imm.closure, unit_residual=imm.unit_residual,
               conformality_angle=cos, conformality_length=dlen)
    if closed:
        out["embedding"] = embeddedness(imm, cfg.levels).to_dict()
    else:
        out["embedding"] = {"verdict": "not-closed",
                            "notes": [f"frame does not close over the period (closure {imm.closure:.3g})"]}
    if cfg.mesh:
        out["pole_flagged"] = export_mesh(imm, cfg.format, cfg.mesh)
    _write(cfg.output, dumps(out, 2) + "\n")
    return 0 if closed else 1


def cmd_flow(cfg: RunConfig) -> int:
    from .whitham_flow import CHOOSERS, flow

    if cfg.chooser not in CHOOSERS:
        raise UsageError(f"unknown chooser {cfg.chooser!r}; choose from {sorted(CHOOSERS)}")
    data = _load_data(cfg.input)
    traj = flow(data, cfg.chooser, cfg.T, cfg.dt, event_tol=cfg.event_tol)
    lines = list(traj.ndjson())
    for note in traj.notes:
        lines.append(dumps({"note": note}))
    _write(cfg.output, "\n".join(lines) + "\n")
    return 0 if not traj.notes else 1


def cmd_dress(cfg: RunConfig) -> int:
    from .iwasawa_action import SimpleFactorSpec, dress
    from .lax_frame import LambdaGrid
    from .surface_builder import embeddedness, export_mesh, frame_on_grid, sample_grid, sym_bobenko
    from .whitham_flow import log_mu_at

    if cfg.alpha0 is None:
        raise UsageError("dress needs --alpha0")
    xi, theta, period, data = _load_seed(cfg.input)
    spec = SimpleFactorSpec(np.array(cfg.line, dtype=complex), cfg.alpha0)
    if data is not None:
        h = log_mu_at(data, spec.alpha0)
        if dist_to_lattice(h, np.pi) > 1e-6:
            raise NumericFailure(f"alpha0 is not a double point: ln mu = {h:.6g}")
    xs, ys = sample_grid(period, cfg.nx, cfg.ny)
    grid = LambdaGrid.build(8, extra=[spec.alpha0])
    frame = frame_on_grid(xi, theta, xs, ys, grid, min(0.05, (xs[1] - xs[0]) / 4), closed=True)
    imm = sym_bobenko(dress(frame, spec), theta, periodic=True, tau=period * np.exp(-0.5j * theta))
    out = {"alpha0": [spec.alpha0.real, spec.alpha0.imag],
           "line": [[v.real, v.imag] for v in spec.line],
           "closure": imm.closure, "unit_residual": imm.unit_residual,
           "embedding": embeddedness(imm, cfg.levels).to_dict()}
    if cfg.mesh:
        out["pole_flagged"] = export_mesh(imm, cfg.format, cfg.mesh)
    _write(cfg.output, dumps(out, 2) + "\n")
    return 0


def cmd_hierarchy(cfg: RunConfig) -> int:
    from .sinh_gordon_lab import (
        AbreschParams,
        closed_form_flows,
        fit_onto,
        lsg_residual,
        omega_from_profiles,
        pinkall_sterling,
        solve_profile,
    )

    params = AbreschParams(cfg.c, cfg.d)
    rows = []
    for n in cfg.sizes:
        om = omega_from_profiles(solve_profile(params, "x", n), solve_profile(params, "y", n))
        st = pinkall_sterling(om, 1.0, 3, compat_tol=None)
        cf = closed_form_flows(om)
        _, u1_fit = fit_onto(st.u[1] + 4 * cf[1], [st.u[0]])
        rows.append({"n": n, "hx": om.hx, "hy": om.hy,
                     "lsg": [lsg_residual(st.u[k], om) for k in range(4)],
                     "u1_closed_form": u1_fit,
                     "compatibility": [st.compatibility[k] for k in sorted(st.compatibility)]})
    ratios = [[a / b for a, b in zip(r0["lsg"], r1["lsg"])] for r0, r1 in zip(rows, rows[1:])]
    _write(cfg.output, dumps({"c": cfg.c, "d": cfg.d, "rows": rows, "ratios": ratios}, 2) + "\n")
    return 0


def cmd_describe(cfg: RunConfig) -> int:
    _write(cfg.output, describe(cfg))
    return 0


COMMANDS = {
    "catalog": cmd_catalog,
    "validate": cmd_validate,
    "surface": cmd_surface,
    "flow": cmd_flow,
    "dress": cmd_dress,
    "hierarchy": cmd_hierarchy,
    "describe": cmd_describe,
}


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="annulus", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, needs_input: bool):
        if needs_input:
            sp.add_argument("input", help="input JSON file ('-' for stdin)")
        sp.add_argument("-o", "--output", help="output file (default stdout)")
        sp.add_argument("--config", help="JSON file of RunConfig overrides")

    sp = sub.add_parser("catalog", help="spectral data of the Abresch catalog")
    common(sp, False)
    sp.add_argument("--genus", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--beta", type=float)

    sp = sub.add_parser("validate", help="closing-condition report")
    common(sp, True)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--n-circle", dest="n_circle", type=int)

    for name, helptext in (("surface", "immersion, geometry report and mesh"),
                           ("dress", "bubbleton by simple-factor dressing")):
        sp = sub.add_parser(name, help=helptext)
        common(sp, True)
        sp.add_argument("--nx", type=int)
        sp.add_argument("--ny", type=int)
        sp.add_argument("--levels", type=int)
        sp.add_argument("--mesh", help="mesh output path")
        sp.add_argument("--format", choices=["csv", "obj"])
        if name == "dress":
            sp.add_argument("--alpha0", help="double point, e.g. 0.0718 or 0.1+0.2j")
            sp.add_argument("--line", help="line L' as 'u,v' with complex entries")

    sp = sub.add_parser("flow", help="Whitham trajectory as NDJSON")
    common(sp, True)
    sp.add_argument("--chooser")
    sp.add_argument("--T", type=float)
    sp.add_argument("--dt", type=float)
    sp.add_argument("--event-tol", dest="event_tol", type=float)

    sp = sub.add_parser("hierarchy", help="Pinkall-Sterling residual table")
    common(sp, False)
    sp.add_argument("--c", type=float)
    sp.add_argument("--d", type=float)
    sp.add_argument("--sizes", help="comma separated grid sizes")

    sp = sub.add_parser("describe", help="print the resolved configuration")
    common(sp, False)
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return p


def resolve(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if getattr(args, "config", None):
        values.update(_load_json(args.config))
    for key, val in vars(args).items():
        if key in ("config", "set") or val is None:
            continue
        values[key] = val
    for item in getattr(args, "set", []) or []:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        values[k] = v
    cfg = RunConfig.from_mapping(values)
    cfg.overrides.discard("command")
    return cfg


def main(argv=None) -> int:
    try:
        cfg = resolve(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.command](cfg)
    except UsageError as e:
        print(f"annulus: {e}", file=sys.stderr)
        return 2
    except (NumericFailure, CatalogError, CutError, ArithmeticError, RuntimeError, ValueError,
            np.linalg.LinAlgError) as e:
        print(f"annulus: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"annulus: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
