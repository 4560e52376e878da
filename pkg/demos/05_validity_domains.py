"""Keeping optimizers honest: hull constraints and distance penalties.

A surrogate is only trustworthy near its training data. Two guards: restrict
the search to the convex hull of the data (exact, linear, full-space), or add a
smooth soft-min distance penalty to the objective (reduced-space).
"""

import numpy as np

from embedopt import (Dataset, HybridProblem, embed_reduced_space, encode_hull_validity,
                      encode_relu_milp, eval_graph, load_model_file, penalized_objective,
                      solve_global, solve_milp)

tm = load_model_file("assets/models/relu_step.json")
data = Dataset(points=np.array([[-0.4], [-0.1], [0.2]]))

ir = encode_relu_milp(tm)
free = solve_milp(ir)
print(f"unconstrained minimum: {free.objective:+.4f} at x = {free.x[0]:+.4f}")

ir = encode_relu_milp(tm)
encode_hull_validity(ir, data, [0])
hull = solve_milp(ir)
print(f"hull-constrained:      {hull.objective:+.4f} at x = {hull.x[0]:+.4f} "
      f"(data spans [{data.points.min():+.1f}, {data.points.max():+.1f}])")

gp = load_model_file("assets/models/gp_n1_neg.json")
graph = embed_reduced_space(gp)
plain = solve_global(HybridProblem(graph))
print(f"\nGP mean minimum:       {plain.objective:+.4f} at x = {plain.x[0]:+.4f}")

far_data = Dataset(points=np.array([[2.0]]))
for rho in (0.0, 0.1, 1.0):
    pen = penalized_objective(graph, far_data, rho=rho, tau=1e-2)
    sol = solve_global(HybridProblem(pen))
    raw = eval_graph(graph, sol.x)
    print(f"penalty rho={rho:<4}: x* = {sol.x[0]:+.4f}, model value {raw:+.4f}, "
          f"penalized {sol.objective:+.4f}")
print("growing rho drags the solution toward the (here deliberately offset) data point")
