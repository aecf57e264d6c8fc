import json
import subprocess
import sys

import numpy as np
import pytest

from annulus.cli import RunConfig, UsageError, describe, main, resolve
from annulus.poly_core import offdiagonal_potential
from annulus.surface_builder import potential_to_dict

A0 = 7 - 4 * np.sqrt(3)


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def flat_file(tmp_path, capsys):
    path = tmp_path / "flat.json"
    assert main(["catalog", "--genus", "0", "-o", str(path)]) == 0
    return path


def test_catalog_flat(capsys):
    code, out, _ = run(["catalog", "--genus", "0"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["tau"] == [6.283185307179586, 0.0]
    assert d["b_coeffs"][0][0] == pytest.approx(-np.pi / 16, rel=1e-15)


def test_catalog_deterministic(capsys):
    a = run(["catalog", "--genus", "1", "--alpha", "0.25"], capsys)[1]
    b = run(["catalog", "--genus", "1", "--alpha", "0.25"], capsys)[1]
    assert a == b


def test_catalog_bad_parameters(capsys):
    code, _, err = run(["catalog", "--genus", "1", "--alpha", "1.5"], capsys)
    assert code == 1 and "ValueError" in err


def test_validate_flat(flat_file, capsys):
    code, out, _ = run(["validate", str(flat_file)], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and rep["max_residual"] <= 1e-8


def test_validate_failure_exit_one(tmp_path, flat_file, capsys):
    d = json.loads(flat_file.read_text())
    d["b_coeffs"][0][0] += 1e-3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(d))
    code, out, _ = run(["validate", str(bad)], capsys)
    assert code == 1 and not json.loads(out)["passed"]


def test_usage_errors(tmp_path, flat_file, capsys):
    assert run(["nonsense"], capsys)[0] == 2
    assert run(["validate", str(flat_file), "--bogus"], capsys)[0] == 2
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    code, _, err = run(["validate", str(broken)], capsys)
    assert code == 2 and "malformed JSON" in err
    extra = tmp_path / "extra.json"
    extra.write_text(json.dumps({**json.loads(flat_file.read_text()), "colour": 1}))
    assert run(["validate", str(extra)], capsys)[0] == 2
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"nope": 1}))
    assert run(["describe", "--config", str(cfg)], capsys)[0] == 2


def test_missing_file_exit_one(tmp_path, capsys):
    assert run(["validate", str(tmp_path / "missing.json")], capsys)[0] == 1


def test_surface_flat_with_mesh(tmp_path, flat_file, capsys):
    mesh = tmp_path / "m.obj"
    code, out, _ = run(["surface", str(flat_file), "--nx", "32", "--ny", "16", "--mesh", str(mesh),
                        "--format", "obj"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["embedding"]["verdict"] == "embedded"
    assert abs(rep["flux"] - 2 * np.pi) < 1e-6
    assert rep["pole_flagged"] == 16
    assert mesh.read_text().startswith("# chart")


def test_surface_from_seed_file(tmp_path, capsys):
    seed = tmp_path / "seed.json"
    seed.write_text(json.dumps(potential_to_dict(offdiagonal_potential([0.3]), 0.0, 3.0)))
    code, out, _ = run(["surface", str(seed), "--nx", "16", "--ny", "8"], capsys)
    rep = json.loads(out)
    # an arbitrary period does not close the frame: geometry is reported, exit status 1
    assert code == 1
    assert "conformality_angle" in rep and rep["embedding"]["verdict"] == "not-closed"


def test_flow_rate(tmp_path, capsys):
    data = tmp_path / "c2.json"
    main(["catalog", "--genus", "1", "--alpha", "0.05", "-o", str(data)])
    code, out, _ = run(["flow", str(data), "--T", "0.5", "--dt", "0.01"], capsys)
    recs = [json.loads(ln) for ln in out.splitlines()]
    assert code == 0
    assert len(recs) == 51
    assert abs(recs[-1]["abs_tau"] / recs[0]["abs_tau"] - np.exp(0.25)) < 1e-3


def test_flow_stops_at_event(tmp_path, capsys):
    data = tmp_path / "c2.json"
    main(["catalog", "--genus", "1", "--alpha", "0.25", "-o", str(data)])
    code, out, _ = run(["flow", str(data), "--T", "0.5", "--dt", "0.01"], capsys)
    last = json.loads(out.splitlines()[-1])
    assert code == 0
    assert last["event"]["kind"] in ("root-touching-S1", "root-collision-of-a")
    assert last["event"]["t"] < 0.5


def test_flow_unknown_chooser(flat_file, capsys):
    assert run(["flow", str(flat_file), "--chooser", "magic"], capsys)[0] == 2


def test_dress_bubbleton(flat_file, capsys):
    code, out, _ = run(["dress", str(flat_file), "--alpha0", str(float(A0)), "--nx", "64", "--ny", "32",
                        "--levels", "16"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert rep["closure"] < 1e-6
    assert rep["embedding"]["verdict"] == "self-intersecting"


def test_dress_rejects_non_double_point(flat_file, capsys):
    code, _, err = run(["dress", str(flat_file), "--alpha0", "0.3"], capsys)
    assert code == 1 and "double point" in err
    assert run(["dress", str(flat_file)], capsys)[0] == 2


def test_hierarchy_table(capsys):
    code, out, _ = run(["hierarchy", "--sizes", "64,128"], capsys)
    rep = json.loads(out)
    assert code == 0
    assert len(rep["rows"]) == 2 and len(rep["ratios"]) == 1
    assert all(abs(r - 4) < 0.5 for r in rep["ratios"][0])


def test_describe_defaults_and_overrides(capsys):
    code, plain, _ = run(["describe"], capsys)
    assert code == 0
    for key in RunConfig.knobs():
        if key != "command":
            assert key in plain
    assert "*" not in plain
    _, over, _ = run(["describe", "--set", "dt=0.005"], capsys)
    line = [ln for ln in over.splitlines() if ln[2:].split()[0] == "dt"][0]
    assert line.startswith("*") and line.split()[-1] == "0.005"
    again = run(["describe", "--set", "dt=0.005"], capsys)[1]
    assert again == over


def test_resolve_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"dt": 0.02, "nx": 16}))
    rc = resolve(["describe", "--config", str(cfg)])
    assert rc.dt == 0.02 and rc.nx == 16
    assert {"dt", "nx"} <= rc.overrides
    assert describe(rc) == describe(resolve(["describe", "--config", str(cfg)]))
    with pytest.raises(UsageError):
        resolve(["describe", "--set", "dt"])


def test_console_script_exit_code(tmp_path):
    r = subprocess.run([sys.executable, "-m", "annulus.cli", "catalog", "--genus", "0"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["genus"] == 0
    r = subprocess.run([sys.executable, "-m", "annulus.cli", "frobnicate"], capture_output=True, text=True)
    assert r.returncode == 2
