import re

import numpy as np
import pytest
from scipy.optimize import milp as scipy_milp
from scipy.optimize import Bounds, LinearConstraint

from conftest import ann_doc, load
from embedopt.encoders import encode_relu_milp
from embedopt.milp import solve_milp
from embedopt.problem import BINARY, ProblemIR, export_lp


def test_smallest_lp_exact_text():
    ir = ProblemIR()
    x = ir.add_variable("x", 0.0, 1.0)
    ir.objective_linear = [(x, 1.0)]
    assert export_lp(ir).rstrip("\n") == (
        "Minimize\n obj: x0\nSubject To\nBounds\n 0 <= x0 <= 1\nEnd")


def test_binaries_section_present():
    doc = {
        "format_version": "1", "kind": "ann", "input_dim": 1, "output_dim": 1,
        "input_box": [[-1, 1]],
        "payload": [
            {"weights": [[1.0]], "bias": [0.0], "activation": "relu"},
            {"weights": [[1.0]], "bias": [0.0], "activation": "identity"},
        ],
    }
    text = export_lp(encode_relu_milp(load(doc)))
    assert "Binaries" in text
    assert re.search(r"Binaries\n x3", text)


def test_export_byte_stable():
    ir = encode_relu_milp(load(ann_doc([2, 3, 1], "relu", seed=5)))
    assert export_lp(ir) == export_lp(ir)


def test_nonlinear_content_rejected():
    from embedopt.encoders import encode_fullspace_nlp
    ir = encode_fullspace_nlp(load(ann_doc([1, 3, 1], "tanh", seed=6)))
    with pytest.raises(ValueError, match="linear"):
        export_lp(ir)


def test_binary_bounds_enforced():
    ir = ProblemIR()
    with pytest.raises(ValueError, match="bounds"):
        ir.add_variable("b", 0.0, 2.0, BINARY)


def _parse_lp(text):
    """Minimal reader for the exported dialect, for the external round-trip."""
    lines = [l.rstrip() for l in text.strip().splitlines()]
    sense = lines[0]
    assert sense in ("Minimize", "Maximize")
    sections = {"obj": [], "cons": [], "bounds": [], "bins": []}
    mode = None
    for line in lines[1:]:
        if line == "Subject To":
            mode = "cons"
        elif line == "Bounds":
            mode = "bounds"
        elif line == "Binaries":
            mode = "bins"
        elif line == "End":
            break
        elif line.startswith(" obj:"):
            sections["obj"] = line.split(":", 1)[1].strip()
        elif mode:
            sections[mode].append(line.strip())
    def parse_row(expr):
        terms = {}
        toks = expr.split()
        sign = 1.0
        pending = None
        for tok in toks:
            if tok == "+":
                sign = 1.0
            elif tok == "-":
                sign = -1.0
            elif tok.startswith("x"):
                coef = pending if pending is not None else 1.0
                terms[int(tok[1:])] = terms.get(int(tok[1:]), 0.0) + sign * coef
                pending, sign = None, 1.0
            else:
                v = float(tok)
                if tok.startswith("-"):
                    sign, v = -1.0 if sign > 0 else 1.0, abs(v)
                pending = v
        return terms
    obj = parse_row(sections["obj"])
    cons = []
    for line in sections["cons"]:
        body = line.split(":", 1)[1].strip()
        m = re.match(r"(.*?)\s*(<=|>=|=)\s*(-?[0-9.eE+-]+)$", body)
        cons.append((parse_row(m.group(1)), m.group(2), float(m.group(3))))
    bounds = {}
    for line in sections["bounds"]:
        m = re.match(r"(-?[0-9.eE+-]+) <= x(\d+) <= (-?[0-9.eE+-]+)$", line)
        bounds[int(m.group(2))] = (float(m.group(1)), float(m.group(3)))
    bins = {int(l.strip()[1:]) for l in sections["bins"]}
    return sense, obj, cons, bounds, bins


def test_relu_export_round_trip_through_external_solver():
    tm = load(ann_doc([2, 4, 1], "relu", seed=7))
    ir = encode_relu_milp(tm)
    ours = solve_milp(ir)
    sense, obj, cons, bounds, bins = _parse_lp(export_lp(ir))

    n = max(bounds) + 1
    c = np.zeros(n)
    for j, w in obj.items():
        c[j] = w
    A, lo_c, hi_c = [], [], []
    for terms, op, rhs in cons:
        row = np.zeros(n)
        for j, w in terms.items():
            row[j] = w
        A.append(row)
        lo_c.append(rhs if op in (">=", "=") else -np.inf)
        hi_c.append(rhs if op in ("<=", "=") else np.inf)
    integrality = np.array([1 if j in bins else 0 for j in range(n)])
    lb = np.array([bounds[j][0] for j in range(n)])
    ub = np.array([bounds[j][1] for j in range(n)])
    res = scipy_milp(c, constraints=LinearConstraint(np.array(A), lo_c, hi_c),
                     integrality=integrality, bounds=Bounds(lb, ub))
    assert res.status == 0
    assert ours.objective == pytest.approx(res.fun, abs=1e-6)
