import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest

from additive_lab import __version__, hamel
from additive_lab.cli import main
from additive_lab.core import GridSpec, Parallelepiped, midpoint_nodes

WILD = {"basis": [{"label": "e1", "embedding": 1.0}, {"label": "e2", "embedding": math.sqrt(2)}],
        "assignments": {"e2": "1/1"}, "scale": 2 * math.pi}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    payload = json.loads(out)
    assert {"command", "version", "diagnostics"} <= set(payload)
    assert "verdict" in payload or "value" in payload
    return code, payload


@pytest.fixture
def wild_json(tmp_path):
    p = tmp_path / "wild.json"
    p.write_text(json.dumps(WILD))
    return p


def test_construct_echoes_canonical(capsys, tmp_path):
    p = tmp_path / "f.json"
    p.write_text(json.dumps({"basis": WILD["basis"], "assignments": {"e2": "2/2"}}))
    code, payload = run(capsys, "construct", str(p))
    assert code == 0
    assert payload["version"] == __version__
    assert payload["value"]["assignments"] == {"e2": "1/1"}
    assert payload["diagnostics"]["self_test"] == {"passed": True, "checked": 1000}


def test_construct_round_trip_byte_identical(capsys, tmp_path, wild_json):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert run(capsys, "construct", str(wild_json), "--output", str(a))[0] == 0
    assert run(capsys, "construct", str(a), "--output", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text() == hamel.dumps(hamel.loads(a.read_text()))


def test_construct_duplicate_label(capsys, tmp_path):
    p = tmp_path / "dup.json"
    p.write_text(json.dumps({"basis": [{"label": "e1", "embedding": 1}, {"label": "e1", "embedding": 2}]}))
    code, payload = run(capsys, "construct", str(p))
    assert code == 2 and "'e1'" in payload["diagnostics"]["error"]
    assert payload["diagnostics"]["location"] == "basis[1].label"


def test_construct_zero_denominator(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({"basis": WILD["basis"], "assignments": {"e1": "2/0"}}))
    code, payload = run(capsys, "construct", str(p))
    assert code == 2 and "denominator must be positive" in payload["diagnostics"]["error"]


def test_classify_linear_expression(capsys):
    code, payload = run(capsys, "classify", "--expr", "3*x", "--interval", "0", "1")
    assert code == 0 and payload["verdict"] == "linear"
    assert payload["c"] == pytest.approx([3.0], abs=1e-12)


def test_classify_hamel_witness(capsys, wild_json):
    code, payload = run(capsys, "classify", "--hamel", str(wild_json), "--interval", "0", "1", "--probes", "auto")
    assert code == 1 and payload["verdict"] == "nonlinear"
    w = payload["witness"]
    assert w["point"] == {"e2": "1/7"} and w["alpha"] == "1/1"
    assert w["phase_distance"] == pytest.approx(abs(np.exp(2j * np.pi / 7) - 1), abs=1e-12)


def test_classify_hamel_deterministic(capsys, wild_json, monkeypatch):
    monkeypatch.setenv("ADDITIVE_LAB_SEED", "11")
    first = run(capsys, "classify", "--hamel", str(wild_json), "--interval", "0", "1")
    second = run(capsys, "classify", "--hamel", str(wild_json), "--interval", "0", "1")
    assert first == second


def _write_samples(path, I, grid, func, drop=None):
    nodes = list(midpoint_nodes(I, grid)) + list(I.generator_matrix())
    lines = ["x1,value"]
    for k, x in enumerate(nodes):
        if k != drop:
            lines.append(f"{float(x[0])!r},{float(func(x[0]))!r}")
    path.write_text("\n".join(lines) + "\n")


def test_classify_csv(capsys, tmp_path):
    I, grid = Parallelepiped.interval(0.0, 1.0), GridSpec.uniform(1, 64)
    p = tmp_path / "s.csv"
    _write_samples(p, I, grid, lambda x: -4.0 * x)
    code, payload = run(capsys, "classify", "--csv", str(p), "--grid", "64", "--interval", "0", "1")
    assert code == 0 and payload["c"] == pytest.approx([-4.0])


def test_classify_csv_mismatch(capsys, tmp_path):
    I, grid = Parallelepiped.interval(0.0, 1.0), GridSpec.uniform(1, 64)
    p = tmp_path / "s.csv"
    _write_samples(p, I, grid, lambda x: x, drop=5)
    code, payload = run(capsys, "classify", "--csv", str(p), "--grid", "64", "--interval", "0", "1")
    assert code == 2 and "missing grid node (0.0859375,)" in payload["diagnostics"]["error"]


def test_classify_needs_one_source(capsys):
    code, _ = run(capsys, "classify", "--expr", "x", "--hamel", "f.json")
    assert code == 2


def test_classify_vec(capsys):
    code, payload = run(capsys, "classify-vec", "--component", "expr:x1+x2", "--component", "expr:x1-x2",
                        "--box", "0", "1", "0", "1", "--grid", "16")
    assert code == 0 and np.allclose(payload["A"], [[1, 1], [1, -1]])


def test_classify_vec_hamel_component(capsys, wild_json):
    code, payload = run(capsys, "classify-vec", "--component", "expr:2*x", "--component",
                        f"hamel:{wild_json}", "--interval", "0", "1")
    assert code == 1 and payload["component"] == 1 and payload["verdict"] == "nonlinear"


def test_density_writes_points(capsys, tmp_path, wild_json):
    pts = tmp_path / "pts.csv"
    p = tmp_path / "w.json"
    p.write_text(json.dumps({**WILD, "scale": 1.0}))
    code, payload = run(capsys, "density", "--hamel", str(p), "--window", "0", "1", "-5", "5",
                        "--cells", "10", "--height", "6", "--points-out", str(pts))
    assert code == 0 and payload["value"]["coverage"] == 0.95
    rows = pts.read_text().splitlines()
    assert rows[0] == "x,y,cell_i,cell_j" and len(rows) == 96


def test_torus_check_zero_table(capsys, tmp_path):
    p = tmp_path / "grid.csv"
    p.write_text("x1,value\n0/1,0\n1/4,0\n1/2,0\n3/4,0\n")
    code, payload = run(capsys, "torus-check", "--values", str(p), "--q", "4")
    assert code == 0 and payload["verdict"] == "zero" and payload["torsion"] == {"verdict": "zero"}


def test_torus_check_violation(capsys, tmp_path):
    p = tmp_path / "grid.csv"
    p.write_text("x1,value\n0/1,0\n1/2,0.5\n")
    code, payload = run(capsys, "torus-check", "--values", str(p), "--q", "2")
    assert code == 1 and payload["torsion"]["verdict"] == "additivity_violation"
    assert payload["torsion"]["x"] == ["1/2"]


def test_torus_check_incomplete(capsys, tmp_path):
    p = tmp_path / "grid.csv"
    p.write_text("x1,value\n0/1,0\n")
    assert run(capsys, "torus-check", "--values", str(p), "--q", "3")[0] == 2


def test_axioms(capsys):
    code, payload = run(capsys, "axioms", "--functional", "point-eval", "--interval", "0", "1")
    assert code == 1
    status = {a["axiom"]: a["status"] for a in payload["axioms"]}
    assert status == {"a": "pass", "b": "pass", "c": "pass", "d": "fail", "e": "pass"}
    assert run(capsys, "axioms", "--interval", "0", "1", "--grid", "512")[0] == 0


def test_mean_value_and_exp_integral(capsys):
    code, payload = run(capsys, "mean-value", "--expr", "5*x", "--y", "2", "--interval", "0", "1", "--grid", "1024")
    assert code == 0 and payload["value"] == pytest.approx(10.0, abs=1e-9)
    code, payload = run(capsys, "exp-integral", "--expr", "2*pi*x", "--alpha", "1/2", "--interval", "0", "1")
    assert code == 0 and payload["value"] == pytest.approx([0.0, 2 / math.pi], abs=1e-6)


@pytest.mark.parametrize("argv", [
    ["classify", "--expr", "__import__('os')", "--interval", "0", "1"],
    ["classify", "--expr", "x", "--interval", "1", "0"],
    ["exp-integral", "--expr", "x", "--alpha", "1/0"],
    ["nonsense"],
])
def test_input_errors(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_bad_seed(capsys, monkeypatch):
    monkeypatch.setenv("ADDITIVE_LAB_SEED", "abc")
    assert run(capsys, "classify", "--expr", "x", "--interval", "0", "1")[0] == 2


def test_console_script(wild_json):
    exe = shutil.which("additive-lab")
    cmd = [exe] if exe else [sys.executable, "-m", "additive_lab"]
    proc = subprocess.run(cmd + ["classify", "--hamel", str(wild_json), "--interval", "0", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and json.loads(proc.stdout)["verdict"] == "nonlinear"
