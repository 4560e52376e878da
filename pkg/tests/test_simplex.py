import itertools

import numpy as np
import pytest

from embedopt.problem import ProblemIR
from embedopt.simplex import solve_dense_lp, solve_lp


def test_bound_attained_optimum():
    sol = solve_dense_lp([1.0], np.zeros((0, 1)), [], [], [0.0], [1.0])
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(0.0, abs=1e-9)


def test_vertex_optimum():
    sol = solve_dense_lp([-1.0, -1.0], [[1.0, 1.0]], ["<="], [1.0], [0, 0], [1, 1])
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)


def test_contradictory_bounds_infeasible():
    sol = solve_dense_lp([-1.0], [[1.0]], [">="], [2.0], [0.0], [1.0])
    assert sol.status == "infeasible"


def test_unbounded_detected():
    sol = solve_dense_lp([-1.0], np.zeros((0, 1)), [], [], [0.0], [np.inf])
    assert sol.status == "unbounded"


def _enumerate_vertices(c, A, senses, b, lo, hi):
    """Brute-force optimum: intersect every n-subset of tight constraints."""
    n = len(c)
    rows, rhs = [], []
    for i, s in enumerate(senses):
        rows.append(np.asarray(A)[i])
        rhs.append(b[i])
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        rows.append(e.copy())
        rhs.append(lo[j])
        rows.append(e)
        rhs.append(hi[j])
    rows = np.array(rows)
    rhs = np.array(rhs)
    best = None
    for comb in itertools.combinations(range(len(rows)), n):
        M = rows[list(comb)]
        r = rhs[list(comb)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, r)
        ok = np.all(x >= np.asarray(lo) - 1e-9) and np.all(x <= np.asarray(hi) + 1e-9)
        for i, s in enumerate(senses):
            v = float(np.asarray(A)[i] @ x)
            if s == "<=" and v > b[i] + 1e-9:
                ok = False
            if s == ">=" and v < b[i] - 1e-9:
                ok = False
            if s == "=" and abs(v - b[i]) > 1e-9:
                ok = False
        if ok:
            val = float(np.dot(c, x))
            if best is None or val < best:
                best = val
    return best


def test_matches_vertex_enumeration(rng):
    for trial in range(120):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(0, 5))
        c = rng.normal(size=n)
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        senses = [str(rng.choice(["<=", ">="])) for _ in range(m)]
        lo = rng.uniform(-2, 0, n)
        hi = lo + rng.uniform(0.5, 2, n)
        sol = solve_dense_lp(c, A, senses, b, lo, hi)
        ref = _enumerate_vertices(c, A, senses, b, lo, hi)
        if ref is None:
            assert sol.status == "infeasible"
        else:
            assert sol.status == "optimal"
            assert sol.objective == pytest.approx(ref, abs=1e-7)
            # returned point satisfies every row
            for i, s in enumerate(senses):
                v = float(A[i] @ sol.x)
                if s == "<=":
                    assert v <= b[i] + 1e-7
                else:
                    assert v >= b[i] - 1e-7
            assert np.all(sol.x >= lo - 1e-7) and np.all(sol.x <= hi + 1e-7)


def test_equality_rows(rng):
    for _ in range(40):
        n = int(rng.integers(2, 5))
        c = rng.normal(size=n)
        a = rng.normal(size=n)
        lo = np.zeros(n)
        hi = np.ones(n)
        target = float(a @ rng.uniform(0, 1, n))
        sol = solve_dense_lp(c, [a], ["="], [target], lo, hi)
        assert sol.status == "optimal"
        assert float(a @ sol.x) == pytest.approx(target, abs=1e-7)


def test_determinism():
    rng = np.random.default_rng(7)
    c = rng.normal(size=5)
    A = rng.normal(size=(4, 5))
    b = rng.normal(size=4)
    lo = -np.ones(5)
    hi = np.ones(5)
    s1 = solve_dense_lp(c, A, ["<="] * 4, b, lo, hi)
    s2 = solve_dense_lp(c, A, ["<="] * 4, b, lo, hi)
    assert s1.iterations == s2.iterations
    assert np.array_equal(s1.x, s2.x)
    assert s1.objective == s2.objective


def test_solve_lp_on_ir_with_max_sense():
    ir = ProblemIR()
    x = ir.add_variable("x", 0.0, 2.0)
    ir.add_linear([(x, 1.0)], "<=", 1.5)
    ir.objective_linear = [(x, 1.0)]
    ir.objective_sense = "max"
    sol = solve_lp(ir)
    assert sol.status == "optimal"
    assert sol.objective == pytest.approx(1.5, abs=1e-9)
