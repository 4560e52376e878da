import math

import numpy as np
import pytest

from conftest import ann_doc, gp_doc, load
from embedopt.encoders import encode_fullspace_nlp, ir_to_hybrid
from embedopt.globalopt import grid_oracle, local_search, solve_global
from embedopt.graphs import GraphBuilder, HybridProblem, embed_reduced_space, eval_graph

TIGHT = dict(abs_tol=1e-5, rel_tol=1e-6)


def _tanh_graph(box=(-2.0, 2.0)):
    b = GraphBuilder(1, [list(box)])
    return b.finish(b.unary("tanh", b.var(0)))


def test_monotone_1d_analytic():
    sol = solve_global(HybridProblem(_tanh_graph()), **TIGHT)
    assert sol.status == "converged"
    assert sol.objective == pytest.approx(-math.tanh(2.0), abs=1e-9)
    assert sol.x[0] == pytest.approx(-2.0, abs=1e-6)


def test_gp_mean_analytic_minimum():
    doc = gp_doc(1)
    doc["payload"].update(X=[[0.0]], y=[-1.0], lengthscales=[1.0], signal_variance=1.0,
                          noise_variance=0.0, prior_mean=0.0)
    doc["input_box"] = [[-3.0, 3.0]]
    g = embed_reduced_space(load(doc))
    sol = solve_global(HybridProblem(g), **TIGHT)
    assert sol.objective == pytest.approx(-1.0, abs=1e-9)
    assert sol.x[0] == pytest.approx(0.0, abs=1e-4)


def test_random_tanh_net_matches_grid():
    g = embed_reduced_space(load(ann_doc([2, 3, 1], "tanh", seed=30)))
    sol = solve_global(HybridProblem(g), **TIGHT)
    _, oracle = grid_oracle(g, g.box, 201)
    # the incumbent brackets the sampled minimum within the convergence gap
    assert sol.objective <= oracle + sol.abs_gap + 1e-9
    assert abs(sol.objective - oracle) <= 1e-3
    assert sol.lower_bound <= oracle + 1e-9


def test_local_search_convex_quadratic():
    b = GraphBuilder(1, [[-1, 1]])
    g = b.finish(b.square(b.var(0)))
    x = local_search(g, g.box, [0.5])
    assert abs(x[0]) <= 1e-4


def test_local_search_stationary_start():
    b = GraphBuilder(1, [[-1, 1]])
    g = b.finish(b.square(b.var(0)))
    x = local_search(g, g.box, [0.0])
    assert x[0] == 0.0


def test_local_search_stays_in_basin_multistart_escapes():
    from embedopt.bayesopt import build_ei_graph
    from embedopt.encoders import splice_graph

    # three observations leave two interior acquisition bumps between them,
    # the right one higher (its neighbor has the lower target)
    doc = gp_doc(1)
    doc["payload"].update(X=[[-1.5], [0.0], [1.5]], y=[0.2, 0.0, -0.3], lengthscales=[2.0],
                          signal_variance=1.0, noise_variance=1e-10, prior_mean=0.0)
    doc["input_box"] = [[-1.5, 1.5]]
    gp = load(doc).model
    ei = build_ei_graph(gp, float(np.min(gp.y)))
    b = GraphBuilder(1, ei.box)
    (o,) = splice_graph(b, ei)
    neg = b.finish(b.affine([(o, -1.0)]))

    # dense sampling locates the two acquisition bumps
    xs = np.linspace(-1.5, 1.5, 3001)
    vals = np.array([eval_graph(ei, [x]) for x in xs])
    lower_bump = xs[xs < 0][np.argmax(vals[xs < 0])]
    global_bump = xs[xs > 0][np.argmax(vals[xs > 0])]
    assert vals.max() == pytest.approx(eval_graph(ei, [global_bump]))

    x_loc = local_search(neg, neg.box, [lower_bump + 0.05])
    assert abs(x_loc[0] - lower_bump) < 0.1

    sol = solve_global(HybridProblem(neg), abs_tol=1e-9, rel_tol=1e-3, node_limit=100000)
    assert abs(sol.x[0] - global_bump) < 0.05
    assert sol.status in ("converged", "gap-limit")  # acquisition gap closes at 1e-3
    assert sol.nodes < 100000


def test_grid_oracle_examples():
    g = _tanh_graph()
    pt, val = grid_oracle(g, g.box, 5)
    assert pt[0] == -2.0 and val == pytest.approx(-math.tanh(2.0))

    b = GraphBuilder(1, [[0, 1]])
    g = b.finish(b.const(3.0))
    pt, val = grid_oracle(g, g.box, 7)
    assert pt[0] == 0.0 and val == 3.0

    with pytest.raises(ValueError, match="3 dimensions"):
        grid_oracle(_tanh_graph(), np.zeros((4, 2)), 3)


def test_bound_validity_and_incumbent_monotonicity(rng):
    g = embed_reduced_space(load(ann_doc([1, 6, 1], "tanh", seed=31)))
    samples = rng.uniform(-2, 2, size=(200, 1))
    from embedopt.graphs import eval_graph_batch
    sample_vals = eval_graph_batch(g, samples)
    trace = []
    sol = solve_global(HybridProblem(g), on_node=lambda k, b, inc: trace.append((b, inc)), **TIGHT)
    incs = [inc for _, inc in trace if np.isfinite(inc)]
    assert all(a >= b - 1e-12 for a, b in zip(incs, incs[1:]))
    for bound, _ in trace:
        assert bound <= sample_vals.min() + 1e-9


def test_constrained_problem_inequality():
    # min x^2 s.t. 0.5 - x <= 0 over [-1, 1] -> optimum at x = 0.5
    b = GraphBuilder(1, [[-1, 1]])
    obj = b.finish(b.square(b.var(0)))
    b2 = GraphBuilder(1, [[-1, 1]])
    con = b2.finish(b2.affine([(b2.var(0), -1.0)], offset=0.5))
    sol = solve_global(HybridProblem(obj, inequalities=[con]), **TIGHT)
    assert sol.objective == pytest.approx(0.25, abs=1e-4)
    assert sol.x[0] >= 0.5 - 1e-6


def test_equality_constrained_lifted_problem():
    tm = load(ann_doc([1, 4, 1], "tanh", seed=32))
    hp = ir_to_hybrid(encode_fullspace_nlp(tm))
    sol = solve_global(hp, **TIGHT)
    g = embed_reduced_space(tm)
    _, oracle = grid_oracle(g, g.box, 401)
    assert sol.objective == pytest.approx(oracle, abs=1e-3)
    # lifted incumbent satisfies every defining equality
    for eq in hp.equalities:
        assert abs(eval_graph(eq, sol.x)) <= 1e-6


def test_cross_formulation_agreement():
    tm = load(ann_doc([1, 5, 1], "tanh", seed=33))
    rs = solve_global(HybridProblem(embed_reduced_space(tm)), **TIGHT)
    fs = solve_global(ir_to_hybrid(encode_fullspace_nlp(tm)), **TIGHT)
    assert abs(rs.objective - fs.objective) <= 1e-4


def test_hybrid_composition_model_of_inner_function():
    # y is the decision variable; the network input is an inner function of y:
    # minimize m(tanh(y)) + 0.1 y^2 subject to m(tanh(y)) >= lower cap
    tm = load(ann_doc([1, 4, 1], "tanh", seed=35))
    b = GraphBuilder(1, [[-2.0, 2.0]])
    inner = b.unary("tanh", b.var(0))
    (m_out,) = b.embed_ann(tm.model, [inner])
    obj = b.finish(b.affine([(m_out, 1.0), (b.square(b.var(0)), 0.1)]))

    b2 = GraphBuilder(1, [[-2.0, 2.0]])
    inner2 = b2.unary("tanh", b2.var(0))
    (m_out2,) = b2.embed_ann(tm.model, [inner2])
    floor_val = eval_graph(b2.finish(m_out2), [0.0]) - 0.05
    bc = GraphBuilder(1, [[-2.0, 2.0]])
    inner3 = bc.unary("tanh", bc.var(0))
    (m3,) = bc.embed_ann(tm.model, [inner3])
    con = bc.finish(bc.affine([(m3, -1.0)], offset=floor_val))  # floor - m <= 0

    sol = solve_global(HybridProblem(obj, inequalities=[con]), **TIGHT)
    assert sol.status in ("converged", "gap-limit")
    # verify against a dense scan of the same composition
    xs = np.linspace(-2, 2, 4001)

    def model_of(y):
        from embedopt.models import eval_ann
        return eval_ann(tm.model, [math.tanh(y)])[0]

    feas = [(model_of(y) + 0.1 * y * y, y) for y in xs if model_of(y) >= floor_val - 1e-9]
    best = min(feas)[0]
    assert sol.objective == pytest.approx(best, abs=1e-3)


def test_empty_box_rejected():
    g = _tanh_graph()
    bad = np.array([[1.0, -1.0]])
    with pytest.raises(ValueError, match="box"):
        solve_global(HybridProblem(g, box=bad))


def test_infeasible_constraints_detected():
    b = GraphBuilder(1, [[-1, 1]])
    obj = b.finish(b.var(0))
    b2 = GraphBuilder(1, [[-1, 1]])
    con = b2.finish(b2.affine([(b2.square(b2.var(0)), 1.0)], offset=1.0))  # x^2 + 1 <= 0
    sol = solve_global(HybridProblem(obj, inequalities=[con]), node_limit=50)
    assert sol.status == "infeasible"


def test_determinism():
    g = embed_reduced_space(load(ann_doc([2, 3, 1], "tanh", seed=34)))
    s1 = solve_global(HybridProblem(g), **TIGHT)
    s2 = solve_global(HybridProblem(g), **TIGHT)
    assert s1.objective == s2.objective
    assert s1.nodes == s2.nodes
    assert np.array_equal(s1.x, s2.x)
