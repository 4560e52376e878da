import itertools
import math

import numpy as np
import pytest

from conftest import ann_doc, load
from embedopt.encoders import encode_relu_milp
from embedopt.milp import solve_milp
from embedopt.models import eval_ann
from embedopt.problem import BINARY, ProblemIR
from embedopt.sampling import grid_points


def test_integral_relaxation_at_root():
    ir = ProblemIR()
    s = ir.add_variable("s", 0.0, 1.0, BINARY)
    ir.objective_linear = [(s, 1.0)]
    sol = solve_milp(ir)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.0)
    assert sol.nodes == 1


def test_knapsack_matches_enumeration():
    ir = ProblemIR()
    a = ir.add_variable("a", 0.0, 1.0, BINARY)
    b = ir.add_variable("b", 0.0, 1.0, BINARY)
    ir.add_linear([(a, 2.0), (b, 3.0)], "<=", 4.0)
    ir.objective_linear = [(a, -3.0), (b, -4.0)]
    best = min(-3 * av - 4 * bv for av in (0, 1) for bv in (0, 1) if 2 * av + 3 * bv <= 4)
    sol = solve_milp(ir)
    assert sol.objective == pytest.approx(best)
    assert (sol.x[0], sol.x[1]) == (0.0, 1.0)


def test_relu_net_matches_grid_oracle():
    tm = load(ann_doc([1, 4, 1], "relu", seed=20, box_half=2.0))
    doc_net = tm.model
    sol = solve_milp(encode_relu_milp(tm))
    grid = np.linspace(-2, 2, 401)
    oracle = min(eval_ann(doc_net, [x])[0] for x in grid)
    assert sol.objective == pytest.approx(oracle, abs=1e-4)


def _random_binary_ir(rng, n_bin, n_rows):
    ir = ProblemIR()
    idx = [ir.add_variable(f"b{i}", 0.0, 1.0, BINARY) for i in range(n_bin)]
    A = rng.normal(size=(n_rows, n_bin))
    rhs = rng.normal(size=n_rows) + 0.5 * A.sum(axis=1)
    for r in range(n_rows):
        ir.add_linear([(idx[j], float(A[r, j])) for j in range(n_bin)], "<=", float(rhs[r]))
    c = rng.normal(size=n_bin)
    ir.objective_linear = [(idx[j], float(c[j])) for j in range(n_bin)]
    return ir, A, rhs, c


def _enumerate_binary(A, rhs, c):
    best = math.inf
    n = len(c)
    for bits in itertools.product((0.0, 1.0), repeat=n):
        x = np.array(bits)
        if np.all(A @ x <= rhs + 1e-9):
            best = min(best, float(c @ x))
    return best


def test_anytime_bracketing_and_optimality(rng):
    for trial in range(25):
        n_bin = int(rng.integers(3, 9))
        ir, A, rhs, c = _random_binary_ir(rng, n_bin, int(rng.integers(1, 5)))
        truth = _enumerate_binary(A, rhs, c)
        trace = []
        sol = solve_milp(ir, on_node=lambda k, bound, inc: trace.append((bound, inc)))
        if truth is math.inf:
            assert sol.status == "infeasible"
            continue
        assert sol.objective == pytest.approx(truth, abs=1e-7)
        assert sol.best_bound <= sol.objective + 1e-9
        for bound, inc in trace:
            assert bound <= truth + 1e-7
            if np.isfinite(inc):
                assert inc >= truth - 1e-7


def test_node_limit_status():
    rng = np.random.default_rng(3)
    ir, *_ = _random_binary_ir(rng, 12, 3)
    sol = solve_milp(ir, node_limit=2)
    assert sol.status in ("node-limit", "optimal", "gap-limit")
    full = solve_milp(ir)
    assert full.status in ("optimal", "gap-limit")
    if sol.status == "node-limit" and sol.objective is not None:
        assert sol.best_bound <= full.objective + 1e-9 <= sol.objective + 2e-9


def test_determinism(rng):
    ir, *_ = _random_binary_ir(rng, 8, 4)
    s1 = solve_milp(ir)
    s2 = solve_milp(ir)
    assert s1.objective == s2.objective
    assert s1.nodes == s2.nodes
    assert np.array_equal(s1.x, s2.x)


def test_infeasible_instance():
    ir = ProblemIR()
    a = ir.add_variable("a", 0.0, 1.0, BINARY)
    ir.add_linear([(a, 1.0)], ">=", 2.0)
    ir.objective_linear = [(a, 1.0)]
    assert solve_milp(ir).status == "infeasible"
