"""Spatial branch-and-bound for reduced-space graph problems.

Lower bounds come from a small node LP assembled from subgradient cuts of the
McCormick relaxations linearized at the node midpoint, intersected with interval
bounds; upper bounds from projected-gradient local search (restored to the
defining equalities when the problem provides a hook). Branching picks the
variable maximizing width * mean absolute gradient among variables that occur
nonlinearly; node results commit in node-id order, the same deterministic-merge
contract as the MILP solver.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .graphs import (HybridProblem, eval_graph, eval_graph_batch, grad_graph,
                     nonlinear_variables)
from .mccormick import propagate_intervals, propagate_mccormick
from .simplex import solve_dense_lp

__all__ = ["GlobalSolution", "solve_global", "local_search", "grid_oracle"]

MIN_WIDTH = 1e-9
INEQ_TOL = 1e-6


@dataclass
class GlobalSolution:
    status: str  # converged | gap-limit | node-limit | infeasible
    x: np.ndarray | None
    objective: float | None
    lower_bound: float
    abs_gap: float
    rel_gap: float
    nodes: int


def local_search(graph, box, start, max_iter=200, armijo_c=1e-4):
    """Projected gradient descent with Armijo backtracking; returns the best point.

    The returned point is always inside the box with value <= value(start).
    """
    box = np.asarray(box, dtype=float)
    lo, hi = box[:, 0], box[:, 1]
    x = np.clip(np.asarray(start, dtype=float), lo, hi)
    fx = eval_graph(graph, x)
    best_x, best_f = x.copy(), fx
    for _ in range(max_iter):
        g = grad_graph(graph, x)
        gnorm = float(np.linalg.norm(g))
        if gnorm < 1e-12:
            break
        step = 1.0 / max(1.0, gnorm)
        improved = False
        while step > 1e-14:
            cand = np.clip(x - step * g, lo, hi)
            delta = cand - x
            if np.linalg.norm(delta) < 1e-15:
                break
            fc = eval_graph(graph, cand)
            if fc <= fx + armijo_c * float(g @ delta):
                x, fx = cand, fc
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        if fx < best_f:
            best_x, best_f = x.copy(), fx
        if abs(best_f - fx) < 1e-15 and np.linalg.norm(delta) < 1e-12:
            break
    return best_x


def grid_oracle(graph, box, per_dim):
    """Exhaustive tensor-grid minimization; dimension capped at 3 for cost."""
    box = np.asarray(box, dtype=float)
    if box.shape[0] > 3:
        raise ValueError("grid oracle is limited to 3 dimensions")
    from .sampling import grid_points
    pts = grid_points(box, per_dim)
    vals = eval_graph_batch(graph, pts)
    idx = int(np.argmin(vals))
    return pts[idx], float(vals[idx])


def _interval_fathom(problem, box):
    """Interval test: (per-graph interval lists, certainly_infeasible)."""
    ivs = [propagate_intervals(g, box) for g in problem.graphs]
    tol = problem.eq_tolerance
    pos = 1
    for g in problem.equalities:
        iv = ivs[pos][g.outputs[0]]
        pos += 1
        if iv.lo > tol or iv.hi < -tol:
            return ivs, True
    for g in problem.inequalities:
        iv = ivs[pos][g.outputs[0]]
        pos += 1
        if iv.lo > INEQ_TOL:
            return ivs, True
    return ivs, False


def _is_feasible(problem, x):
    box = problem.box
    if np.any(x < box[:, 0] - 1e-9) or np.any(x > box[:, 1] + 1e-9):
        return False
    for g in problem.equalities:
        if abs(eval_graph(g, x)) > problem.eq_tolerance:
            return False
    for g in problem.inequalities:
        if eval_graph(g, x) > INEQ_TOL:
            return False
    # linear rows tolerate the simplex feasibility slack: restored points may
    # come out of a phase-one solve
    for coefs, sense, rhs in problem.linear_rows:
        v = sum(w * x[j] for j, w in coefs)
        if sense == "<=" and v > rhs + 1e-7:
            return False
        if sense == ">=" and v < rhs - 1e-7:
            return False
        if sense == "=" and abs(v - rhs) > 1e-7:
            return False
    return True


def _node_lp(problem, box, mid, node_ivs):
    """Lower-bound LP: min t over subgradient cuts + interval bounds.

    Returns (bound, feasible) where feasible=False certifies an empty node.
    """
    n = problem.objective.n_vars
    obj_iv = node_ivs[0][problem.objective.outputs[0]]
    rows, senses, rhs = [], [], []

    def cut(coefs_x, coef_t, sense, r):
        rows.append(np.concatenate([coefs_x, [coef_t]]))
        senses.append(sense)
        rhs.append(r)

    mc_obj = propagate_mccormick(problem.objective, box, mid,
                                 intervals=node_ivs[0])[problem.objective.outputs[0]]
    s = mc_obj.cvs
    cut(s, -1.0, "<=", float(s @ mid) - mc_obj.cv)
    pos = 1
    for g in problem.equalities:
        mc = propagate_mccormick(g, box, mid, intervals=node_ivs[pos])[g.outputs[0]]
        pos += 1
        cut(mc.cvs, 0.0, "<=", float(mc.cvs @ mid) - mc.cv)  # cv_h <= 0
        cut(mc.ccs, 0.0, ">=", float(mc.ccs @ mid) - mc.cc)  # cc_h >= 0
    for g in problem.inequalities:
        mc = propagate_mccormick(g, box, mid, intervals=node_ivs[pos])[g.outputs[0]]
        pos += 1
        cut(mc.cvs, 0.0, "<=", float(mc.cvs @ mid) - mc.cv)
    for coefs, sense, r in problem.linear_rows:
        dense = np.zeros(n)
        for j, w in coefs:
            dense[j] += w
        cut(dense, 0.0, sense, r)

    c = np.zeros(n + 1)
    c[-1] = 1.0
    lo = np.concatenate([box[:, 0], [obj_iv.lo]])
    hi = np.concatenate([box[:, 1], [obj_iv.hi]])
    sol = solve_dense_lp(c, np.array(rows), senses, np.array(rhs), lo, hi)
    if sol.status != "optimal":
        return math.inf, sol.status == "infeasible"
    return max(float(sol.objective), obj_iv.lo), False


def _branch_scores(problem, box, mid, candidates):
    sens = np.zeros(problem.objective.n_vars)
    count = 0
    for g in problem.graphs:
        grad = grad_graph(g, mid)
        sens += np.abs(grad if grad.ndim == 1 else grad.sum(axis=0))
        count += 1
    sens /= max(count, 1)
    width = box[:, 1] - box[:, 0]
    scores = width * sens
    # flat landscape: fall back to pure width so branching still refines
    if all(scores[i] <= 0.0 for i in candidates):
        scores = width
    return scores


def solve_global(problem: HybridProblem, abs_tol=1e-5, rel_tol=1e-4,
                 node_limit=100000, on_node=None) -> GlobalSolution:
    """Deterministic global minimization of a HybridProblem over its box.

    `on_node` (optional) is called as on_node(nodes, lower_bound, incumbent_value)
    after each processed node.
    """
    if problem.objective.n_outputs != 1:
        raise ValueError("objective graph must have exactly one output")
    root_box = np.asarray(problem.box, dtype=float)
    if not np.isfinite(root_box).all() or np.any(root_box[:, 0] > root_box[:, 1]):
        raise ValueError("global solver needs a nonempty finite box")
    n = problem.objective.n_vars

    candidates = set()
    for g in problem.graphs:
        candidates |= nonlinear_variables(g)
    if not candidates:
        candidates = set(range(n))
    candidates = sorted(candidates)

    incumbent, inc_value = None, math.inf

    def offer(x):
        nonlocal incumbent, inc_value
        x = np.clip(np.asarray(x, dtype=float), root_box[:, 0], root_box[:, 1])
        if problem.restore is not None:
            x = np.asarray(problem.restore(x), dtype=float)
        if not _is_feasible(problem, x):
            return
        v = eval_graph(problem.objective, x)
        if v < inc_value:
            incumbent, inc_value = x.copy(), float(v)

    # multistart upper bounding at the root: midpoint plus 1+dim Halton seeds
    from .sampling import halton
    seeds = [root_box.mean(axis=1)]
    seeds.extend(halton(1 + n, n, root_box))
    for seed in seeds:
        offer(local_search(problem.objective, root_box, seed))
        offer(seed)

    heap = []  # (bound, node_id, box)
    next_id = 0
    floor_bound = math.inf  # bounds of nodes abandoned for width or limits
    nodes = 0

    heapq.heappush(heap, (-math.inf, next_id, root_box))
    next_id += 1

    def cutoff():
        if incumbent is None:
            return math.inf
        return inc_value - max(abs_tol, rel_tol * abs(inc_value))

    stopped_early = False
    hit_limit = False
    while heap:
        bound_est, _, box = heap[0]
        if incumbent is not None and bound_est >= cutoff() - 1e-15:
            stopped_early = len(heap) > 0
            floor_bound = min(floor_bound, bound_est)
            break
        if nodes >= node_limit:
            hit_limit = True
            break
        heapq.heappop(heap)
        nodes += 1

        node_ivs, infeasible = _interval_fathom(problem, box)
        if infeasible:
            if on_node is not None:
                on_node(nodes, _global_bound(heap, floor_bound, inc_value), inc_value)
            continue
        mid = box.mean(axis=1)
        lb, lp_infeasible = _node_lp(problem, box, mid, node_ivs)
        if lp_infeasible:
            if on_node is not None:
                on_node(nodes, _global_bound(heap, floor_bound, inc_value), inc_value)
            continue
        if incumbent is not None and lb >= cutoff():
            floor_bound = min(floor_bound, max(lb, bound_est))
            if on_node is not None:
                on_node(nodes, _global_bound(heap, floor_bound, inc_value), inc_value)
            continue

        offer(mid)
        offer(local_search(problem.objective, box, mid))

        scores = _branch_scores(problem, box, mid, candidates)
        width = box[:, 1] - box[:, 0]
        pick, best = -1, 0.0
        for i in candidates:
            if width[i] <= MIN_WIDTH * max(1.0, abs(box[i, 0]), abs(box[i, 1])):
                continue
            if scores[i] > best + 1e-300:
                pick, best = i, scores[i]
        if pick < 0:
            floor_bound = min(floor_bound, lb)
            if on_node is not None:
                on_node(nodes, _global_bound(heap, floor_bound, inc_value), inc_value)
            continue
        for half in (0, 1):
            child = box.copy()
            if half == 0:
                child[pick, 1] = mid[pick]
            else:
                child[pick, 0] = mid[pick]
            heapq.heappush(heap, (lb, next_id, child))
            next_id += 1
        if on_node is not None:
            on_node(nodes, _global_bound(heap, floor_bound, inc_value), inc_value)

    lower = _global_bound(heap, floor_bound, inc_value)
    if incumbent is None:
        if hit_limit:
            return GlobalSolution("node-limit", None, None, lower, math.inf, math.inf, nodes)
        return GlobalSolution("infeasible", None, None, math.inf, math.inf, math.inf, nodes)
    agap = inc_value - lower
    rgap = agap / max(1.0, abs(inc_value))
    tol = max(abs_tol, rel_tol * abs(inc_value))
    if hit_limit:
        status = "node-limit"
    elif agap > tol + 1e-15:
        # exhausted, but minimum-width fathoming left a loose floor bound
        status = "gap-limit"
    elif stopped_early and agap > 1e-12:
        status = "gap-limit"
    else:
        status = "converged"
    return GlobalSolution(status, incumbent, inc_value, lower, agap, rgap, nodes)


def _global_bound(heap, floor_bound, inc_value):
    vals = [b for b, _, _ in heap]
    vals.append(floor_bound)
    vals.append(inc_value)
    return min(vals)
