"""Full-space MILP encodings: ReLU networks, tree ensembles, region surrogates.

Internal model quantities become decision variables tied together by linear
constraints and binaries (big-M neurons, split indicators, hull disjunctions),
solved by the built-in branch-and-bound over simplex relaxations.
"""

from embedopt import (encode_crs_milp, encode_relu_milp, encode_tree_milp, eval_ann,
                      export_lp, load_model_file, solve_milp)

relu = load_model_file("assets/models/relu_step.json")
ir = encode_relu_milp(relu)
print("big-M encoding of max(x,0) - 0.5 on [-1,1]:")
print(export_lp(ir))

sol = solve_milp(ir)
print(f"minimum: {sol.objective:+.4f} at x = {sol.x[0]:+.4f} "
      f"({sol.nodes} nodes, status {sol.status})")
print(f"reference check: f({sol.x[0]:+.4f}) = {eval_ann(relu.model, sol.x[:1])[0]:+.4f}")

tree = load_model_file("assets/models/tree_pair.json")
sol = solve_milp(encode_tree_milp(tree))
print(f"\ntree ensemble minimum: {sol.objective:+.4f} at x = {sol.x[0]:+.4f}")

crs = load_model_file("assets/models/crs_vee.json")
ir = encode_crs_milp(crs)
sol = solve_milp(ir)
print(f"\nregion surrogate (hull reformulation) minimum: {sol.objective:+.4f} "
      f"at x = {sol.x[0]:+.4f}")
ir.add_linear([(0, 1.0)], ">=", 1.25)
ir.add_linear([(0, 1.0)], "<=", 1.75)
sol = solve_milp(ir)
print(f"with 1.25 <= x <= 1.75 added: {sol.objective:+.4f} at x = {sol.x[0]:+.4f}")
