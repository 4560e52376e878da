"""Branch-and-bound over binary variables with simplex LP relaxations.

Node processing is sequential; node ids are committed in creation order so any
future parallel worker pool must merge results in node-id order to reproduce the
same incumbents and bounds. Depth-first diving runs until the first incumbent,
then selection switches to best-bound; a deterministic rounding probe at each
fractional node supplies early incumbents. Status semantics: `optimal` means the
proven gap closed below the requested tolerances with nothing left to explore,
`gap-limit` means the stop happened at the requested gap with open nodes left.
"""

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .problem import ProblemIR
from .simplex import _ir_dense_parts, solve_dense_lp

__all__ = ["MilpSolution", "solve_milp"]

INT_TOL = 1e-6


@dataclass
class MilpSolution:
    status: str  # optimal | infeasible | gap-limit | node-limit | unbounded
    x: np.ndarray | None
    objective: float | None
    best_bound: float
    abs_gap: float
    rel_gap: float
    nodes: int


def _most_fractional(x, binaries):
    best, score = -1, INT_TOL
    for j in binaries:
        frac = abs(x[j] - round(x[j]))
        if frac > score + 1e-15:
            best, score = j, frac
    return best


def solve_milp(ir: ProblemIR, abs_gap=1e-6, rel_gap=1e-6, node_limit=100000,
               bound_overrides=None, on_node=None) -> MilpSolution:
    """Solve a linear ProblemIR with binary variables to global optimality.

    `bound_overrides` tightens variable bounds for this solve without copying
    the IR. `on_node` (optional) is called as on_node(nodes, best_bound,
    incumbent_value) after every processed node.
    """
    ir.validate()
    if ir.nonlinear_constraints or ir.objective_graph is not None:
        raise ValueError("branch-and-bound handles linear problems only")
    binaries = ir.binary_indices
    sense = 1.0 if ir.objective_sense == "min" else -1.0

    c, A, senses, rhs, lower, upper = _ir_dense_parts(ir)
    lower = lower.copy()
    upper = upper.copy()
    if bound_overrides:
        for j, (blo, bhi) in bound_overrides.items():
            lower[j] = max(lower[j], blo)
            upper[j] = min(upper[j], bhi)
    obj = sense * c

    def lp(overrides):
        lo = lower
        hi = upper
        if overrides:
            lo = lower.copy()
            hi = upper.copy()
            for j, (blo, bhi) in overrides.items():
                lo[j] = max(lo[j], blo)
                hi[j] = min(hi[j], bhi)
        if np.any(lo > hi):
            return "infeasible", math.inf, None
        sol = solve_dense_lp(obj, A, senses, rhs, lo, hi)
        if sol.status == "optimal":
            return sol.status, sol.objective + sense * ir.objective_constant, sol.x
        return sol.status, math.inf, None

    incumbent, inc_value = None, math.inf

    def try_rounding(x, overrides):
        """Deterministic probe: fix every binary to its rounded LP value."""
        nonlocal incumbent, inc_value
        ov = dict(overrides)
        for j in binaries:
            v = float(round(x[j]))
            ov[j] = (v, v)
        status, value, xi = lp(ov)
        if status == "optimal" and value < inc_value:
            incumbent = xi.copy()
            for j in binaries:
                incumbent[j] = round(incumbent[j])
            inc_value = value

    next_id = 0
    stack = []  # LIFO dive until the first incumbent
    heap = []  # best-bound afterwards
    pruned_bound = math.inf
    nodes = 0

    status, bound0, x0 = lp({})
    if status == "infeasible":
        return MilpSolution("infeasible", None, None, math.inf, math.inf, math.inf, 1)
    if status == "unbounded":
        return MilpSolution("unbounded", None, None, -math.inf, math.inf, math.inf, 1)
    stack.append((bound0, next_id, {}))
    next_id += 1

    def cutoff():
        return inc_value - max(abs_gap, rel_gap * abs(inc_value))

    def open_best():
        vals = [b for b, _, _ in stack] + [h[0] for h in heap]
        return min(vals) if vals else math.inf

    stopped_early = False
    while stack or heap:
        if nodes >= node_limit:
            break
        if incumbent is not None and open_best() >= cutoff() - 1e-15 and (stack or heap):
            stopped_early = True
            break
        if incumbent is None and stack:
            bound, node_id, overrides = stack.pop()
        elif heap:
            bound, node_id, overrides = heapq.heappop(heap)
        else:
            bound, node_id, overrides = stack.pop()
        nodes += 1
        status, value, x = lp(overrides)
        if on_node is not None:
            on_node(nodes, min(open_best(), value if status == "optimal" else math.inf,
                               pruned_bound, inc_value),
                    sense * inc_value if incumbent is not None else math.inf)
        if status != "optimal":
            continue
        if incumbent is not None and value >= cutoff():
            pruned_bound = min(pruned_bound, value)
            continue
        j = _most_fractional(x, binaries)
        if j < 0:
            if value < inc_value:
                inc_value = value
                incumbent = x.copy()
                for j2 in binaries:
                    incumbent[j2] = round(incumbent[j2])
            continue
        try_rounding(x, overrides)
        if incumbent is not None and value >= cutoff():
            pruned_bound = min(pruned_bound, value)
            continue
        frac = x[j]
        children = [(j, 1.0), (j, 0.0)] if frac >= 0.5 else [(j, 0.0), (j, 1.0)]
        # push the LP-favored branch last so the dive pops it first
        for var, val in reversed(children):
            ov = dict(overrides)
            ov[var] = (val, val)
            entry = (value, next_id, ov)
            next_id += 1
            if incumbent is None:
                stack.append(entry)
            else:
                heapq.heappush(heap, entry)

    best_bound = min(open_best(), pruned_bound, inc_value)
    if incumbent is None:
        if nodes >= node_limit and (stack or heap):
            return MilpSolution("node-limit", None, None, sense * best_bound,
                                math.inf, math.inf, nodes)
        return MilpSolution("infeasible", None, None, math.inf, math.inf, math.inf, nodes)
    agap = inc_value - best_bound
    rgap = agap / max(1.0, abs(inc_value))
    if nodes >= node_limit and (stack or heap):
        status = "node-limit"
    elif stopped_early and agap > 1e-12:
        status = "gap-limit"
    else:
        status = "optimal"
    return MilpSolution(status, incumbent, sense * inc_value, sense * best_bound,
                        agap, rgap, nodes)
