import json
import math
import subprocess
import sys

import numpy as np
import pytest

from conftest import ann_doc, gp_doc, tree_doc

ASSETS = "assets/models"


def run_cli(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "embedopt.cli", *args],
                          capture_output=True, text=True, cwd=cwd)


@pytest.fixture
def workdir(tmp_path):
    def write(name, doc):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)
    return tmp_path, write


def test_evaluate_identity(workdir, tmp_path):
    _, write = workdir
    doc = ann_doc([1, 1], "identity", seed=0)
    doc["payload"] = [{"weights": [[1.0]], "bias": [0.0], "activation": "identity"}]
    model = write("m.json", doc)
    pts = tmp_path / "p.txt"
    pts.write_text("0.5\n")
    r = run_cli("evaluate", "--model", model, "--points", str(pts))
    assert r.returncode == 0
    assert r.stdout == "0.5\n"


def test_evaluate_gp_mean_and_variance(workdir, tmp_path):
    _, write = workdir
    doc = gp_doc(1)
    doc["payload"].update(X=[[0.0]], y=[1.0], lengthscales=[1.0], signal_variance=1.0,
                          noise_variance=0.0, prior_mean=0.0)
    model = write("gp.json", doc)
    pts = tmp_path / "p.txt"
    pts.write_text("1\n")
    r = run_cli("evaluate", "--model", model, "--points", str(pts))
    mean, var = map(float, r.stdout.split())
    assert mean == pytest.approx(math.exp(-0.5), abs=1e-9)
    assert var == pytest.approx(1 - math.exp(-1), abs=1e-9)


def test_evaluate_malformed_row_reports_line(workdir, tmp_path):
    _, write = workdir
    model = write("m.json", ann_doc([1, 1], "identity", seed=0))
    pts = tmp_path / "p.txt"
    pts.write_text("0.5\na b\n")
    r = run_cli("evaluate", "--model", model, "--points", str(pts))
    assert r.returncode == 2
    assert "row 2" in r.stderr


def test_evaluate_dimension_mismatch_reports_row(workdir, tmp_path):
    _, write = workdir
    model = write("m.json", ann_doc([2, 1], "identity", seed=0))
    pts = tmp_path / "p.txt"
    pts.write_text("0.5 0.5\n0.25\n")
    r = run_cli("evaluate", "--model", model, "--points", str(pts))
    assert r.returncode == 2
    assert "row 2" in r.stderr


def test_solve_relu_fullspace(workdir):
    _, write = workdir
    doc = {
        "format_version": "1", "kind": "ann", "input_dim": 1, "output_dim": 1,
        "input_box": [[-1, 1]],
        "payload": [
            {"weights": [[1.0]], "bias": [0.0], "activation": "relu"},
            {"weights": [[1.0]], "bias": [-0.5], "activation": "identity"},
        ],
    }
    model = write("relu.json", doc)
    r = run_cli("solve", "--model", model, "--formulation", "fullspace")
    assert r.returncode == 0
    kv = dict(line.split("=", 1) for line in r.stdout.strip().splitlines())
    assert float(kv["optimum"]) == pytest.approx(-0.5, abs=1e-9)
    assert "wall_time" in r.stderr


def test_solve_gp_reduced(workdir):
    _, write = workdir
    doc = gp_doc(1)
    doc["payload"].update(X=[[0.0]], y=[-1.0], lengthscales=[1.0], signal_variance=1.0,
                          noise_variance=0.0, prior_mean=0.0)
    doc["input_box"] = [[-3.0, 3.0]]
    model = write("gp.json", doc)
    r = run_cli("solve", "--model", model, "--formulation", "reduced")
    kv = dict(line.split("=", 1) for line in r.stdout.strip().splitlines())
    assert float(kv["optimum"]) == pytest.approx(-1.0, abs=1e-6)
    assert float(kv["point"]) == pytest.approx(0.0, abs=1e-3)


def test_reduced_tree_is_config_error(workdir):
    _, write = workdir
    model = write("t.json", tree_doc(2, 2, seed=1))
    r = run_cli("solve", "--model", model, "--formulation", "reduced")
    assert r.returncode == 2
    assert "reduced" in r.stderr


def test_solve_max_sense(workdir):
    _, write = workdir
    doc = gp_doc(1)
    doc["payload"].update(X=[[0.0]], y=[-1.0], lengthscales=[1.0], signal_variance=1.0,
                          noise_variance=0.0, prior_mean=0.0)
    doc["input_box"] = [[-3.0, 3.0]]
    model = write("gp.json", doc)
    r = run_cli("solve", "--model", model, "--formulation", "reduced", "--sense", "max")
    kv = dict(line.split("=", 1) for line in r.stdout.strip().splitlines())
    # mean -exp(-x^2/2) peaks at the box edge: -exp(-4.5)
    assert float(kv["optimum"]) == pytest.approx(-math.exp(-4.5), abs=1e-4)


def test_compare_identity_ann(workdir):
    _, write = workdir
    doc = ann_doc([1, 1], "identity", seed=0)
    doc["payload"] = [{"weights": [[2.0]], "bias": [1.0], "activation": "identity"}]
    model = write("lin.json", doc)
    r = run_cli("compare", "--model", model)
    assert r.returncode == 0
    kv = dict(line.split("=", 1) for line in r.stdout.strip().splitlines())
    assert float(kv["reduced_optimum"]) == pytest.approx(-3.0, abs=1e-6)
    assert float(kv["fullspace_optimum"]) == pytest.approx(-3.0, abs=1e-9)
    assert kv["agree"] == "yes"


def test_compare_gp(workdir):
    _, write = workdir
    model = write("gp3.json", gp_doc(3, seed=41, noise=1e-6))
    r = run_cli("compare", "--model", model, "--abs-gap", "1e-5", "--rel-gap", "1e-6")
    assert r.returncode == 0
    kv = dict(line.split("=", 1) for line in r.stdout.strip().splitlines())
    assert float(kv["delta"]) <= 1e-4


def test_formulate_gp_rejected(workdir):
    _, write = workdir
    model = write("gp.json", gp_doc(2, seed=42))
    r = run_cli("formulate", "--model", model)
    assert r.returncode == 2
    assert "nonlinear" in r.stderr


def test_formulate_relu_writes_lp(workdir, tmp_path):
    _, write = workdir
    model = write("relu.json", ann_doc([1, 3, 1], "relu", seed=43))
    out = tmp_path / "m.lp"
    r = run_cli("formulate", "--model", model, "--out", str(out))
    assert r.returncode == 0
    text = out.read_text()
    assert text.startswith("Minimize")
    assert "Binaries" in text


def test_bo_budget_equals_design(tmp_path):
    out = tmp_path / "hist.txt"
    r = run_cli("bo", "--objective", "quadratic", "--budget", "3", "--init", "3",
                "--out", str(out))
    assert r.returncode == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(lines) == 3


def test_hull_constrained_solve(workdir, tmp_path):
    _, write = workdir
    doc = ann_doc([2, 2], "identity", seed=0)
    doc["payload"] = [{"weights": [[1.0, 1.0]], "bias": [0.0], "activation": "identity"}]
    doc["output_dim"] = 1
    doc["input_box"] = [[-2.0, 2.0], [-2.0, 2.0]]
    model = write("lin2.json", doc)
    data = tmp_path / "data.txt"
    data.write_text("0 0\n1 0\n0 1\n")
    r = run_cli("solve", "--model", model, "--formulation", "fullspace",
                "--validity", "hull", "--data", str(data))
    assert r.returncode == 0
    kv = dict(line.split("=", 1) for line in r.stdout.strip().splitlines())
    # x + y over the simplex hull has minimum 0 at the origin, not the box corner
    assert float(kv["optimum"]) == pytest.approx(0.0, abs=1e-7)


def test_penalty_requires_reduced(workdir):
    _, write = workdir
    model = write("relu.json", ann_doc([1, 3, 1], "relu", seed=44))
    r = run_cli("solve", "--model", model, "--formulation", "fullspace",
                "--validity", "penalty")
    assert r.returncode == 2


@pytest.mark.parametrize("argv", [
    ("evaluate", "--model", f"{ASSETS}/identity_1d.json", "--points", "assets/points_1d.txt"),
    ("solve", "--model", f"{ASSETS}/relu_step.json"),
    ("solve", "--model", f"{ASSETS}/gp_n1_neg.json", "--formulation", "reduced"),
    ("compare", "--model", f"{ASSETS}/tanh_1_8_1.json",
     "--abs-gap", "1e-5", "--rel-gap", "1e-6"),
    ("formulate", "--model", f"{ASSETS}/relu_step.json"),
])
def test_repository_assets_round(argv, request):
    root = request.config.rootpath
    r = run_cli(*argv, cwd=str(root))
    assert r.returncode == 0, r.stderr


def test_solve_dump_graph(workdir, tmp_path):
    _, write = workdir
    model = write("gp.json", gp_doc(2, seed=45))
    dump = tmp_path / "graph.txt"
    r = run_cli("solve", "--model", model, "--formulation", "reduced",
                "--dump-graph", str(dump))
    assert r.returncode == 0
    text = dump.read_text()
    assert text.startswith("graph:")
    assert "sekernel" in text


def test_hull_constrained_fullspace_nlp(workdir, tmp_path):
    _, write = workdir
    doc = gp_doc(1)
    doc["payload"].update(X=[[0.0]], y=[-1.0], lengthscales=[1.0], signal_variance=1.0,
                          noise_variance=0.0, prior_mean=0.0)
    doc["input_box"] = [[-3.0, 3.0]]
    model = write("gp.json", doc)
    data = tmp_path / "data.txt"
    data.write_text("1.0\n2.0\n")
    r = run_cli("solve", "--model", model, "--formulation", "fullspace",
                "--validity", "hull", "--data", str(data))
    assert r.returncode == 0, r.stderr
    kv = dict(line.split("=", 1) for line in r.stdout.strip().splitlines())
    # the GP mean -exp(-x^2/2) restricted to hull([1,2]) is minimized at x = 1
    assert float(kv["optimum"]) == pytest.approx(-math.exp(-0.5), abs=1e-4)
    assert float(kv["point"].split()[0]) == pytest.approx(1.0, abs=1e-3)
