"""Loading portable model documents and evaluating them directly.

Each trained model ships as one JSON document: feed-forward networks carry
per-layer weights and activations, Gaussian processes their training data and
kernel hyperparameters, tree ensembles their node arrays, and convex region
surrogates their polytopes with affine output maps.
"""

import numpy as np

from embedopt import eval_ann, eval_crs, eval_gp, eval_tree_ensemble, load_model_file

relu = load_model_file("assets/models/relu_step.json")
print(f"{relu.name}: input_dim={relu.input_dim}, box={relu.input_box.tolist()}")
for x in (-0.5, 0.25, 1.0):
    print(f"  f({x:+.2f}) = {eval_ann(relu.model, [x])[0]:+.4f}")

gp = load_model_file("assets/models/gp_n1.json")
print(f"\n{gp.name}: N={gp.model.n_train} training point(s)")
for x in (0.0, 1.0, 2.5):
    mean, var = eval_gp(gp.model, [x])
    print(f"  posterior({x:+.2f}) = {mean:+.5f} +- {np.sqrt(var):.5f}")

tree = load_model_file("assets/models/tree_pair.json")
print(f"\n{tree.name}: {len(tree.model.trees)} trees, mean aggregation")
for x in (-0.5, 0.0, 0.5):
    print(f"  f({x:+.2f}) = {eval_tree_ensemble(tree.model, [x]):+.4f}")
print("  (ties x <= threshold branch left, so f(0) takes the left leaf)")

crs = load_model_file("assets/models/crs_vee.json")
print(f"\n{crs.name}: {len(crs.model.regions)} polytope regions")
for x in (0.25, 1.0, 1.75):
    print(f"  f({x:.2f}) = {eval_crs(crs.model, [x]):+.4f}")
