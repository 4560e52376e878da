"""Full-space encodings: MILP formulations for ReLU networks, tree ensembles and
convex region surrogates, NLP liftings for tanh networks and Gaussian processes,
plus validity-domain constraint blocks.

Every encoder is a pure function from a model (and box) to a ProblemIR whose
input variables come first, so fixing them reproduces the reference evaluation.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .graphs import GraphBuilder
from .intervals import Interval, interval_affine
from .models import Dataset, TrainedModel
from .problem import BINARY, NonlinearRow, ProblemIR

__all__ = [
    "BigMBounds", "ann_preactivation_bounds", "encode_relu_milp", "encode_tree_milp",
    "encode_crs_milp", "encode_fullspace_nlp", "encode_hull_validity",
    "encode_distance_penalty", "penalized_objective", "splice_graph", "ir_to_hybrid",
]

TREE_EPS_SCALE = 1e-6
SOFTMIN_FLOOR = 1e-300


@dataclass
class BigMBounds:
    """Per-neuron pre-activation intervals [lo, hi], one array pair per layer."""

    lows: list
    highs: list

    def layer(self, k):
        return self.lows[k], self.highs[k]


def _finite_box(model, box):
    box = np.asarray(model.input_box if box is None else box, dtype=float)
    if not np.isfinite(box).all():
        raise ValueError("encoding requires a finite input box")
    return box


def ann_preactivation_bounds(net, box) -> BigMBounds:
    """Interval propagation of the input box through every layer."""
    ivs = [Interval(lo, hi) for lo, hi in box]
    lows, highs = [], []
    for layer in net.layers:
        pre = [interval_affine(row, float(b), ivs) for row, b in zip(layer.weights, layer.bias)]
        lows.append(np.array([p.lo for p in pre]))
        highs.append(np.array([p.hi for p in pre]))
        if layer.activation == "tanh":
            ivs = [Interval(math.tanh(p.lo), math.tanh(p.hi)) for p in pre]
        elif layer.activation == "relu":
            ivs = [Interval(max(p.lo, 0.0), max(p.hi, 0.0)) for p in pre]
        else:
            ivs = pre
    return BigMBounds(lows, highs)


def encode_relu_milp(model: TrainedModel, box=None, output_index=0) -> ProblemIR:
    """Big-M MILP of a ReLU network: binaries only for sign-unstable neurons.

    Per neuron with pre-activation a in [lo, hi]: if hi <= 0, z is fixed 0; if
    lo >= 0, z = a; otherwise a binary s with z >= a, z <= a - lo*(1-s), z <= hi*s
    alongside z >= 0 from the variable bound.
    """
    net = model.model
    if model.kind != "ann":
        raise ValueError("relu encoder expects a feed-forward network")
    for layer in net.layers[:-1]:
        if layer.activation != "relu":
            raise ValueError(f"relu encoder cannot handle {layer.activation!r} hidden layers")
    box = _finite_box(model, box)
    bm = ann_preactivation_bounds(net, box)

    ir = ProblemIR()
    xs = [ir.add_variable(f"x{d}", lo, hi) for d, (lo, hi) in enumerate(box)]
    prev = xs
    for k, layer in enumerate(net.layers[:-1]):
        lows, highs = bm.layer(k)
        cur = []
        for j, (row, b) in enumerate(zip(layer.weights, layer.bias)):
            lo, hi = float(lows[j]), float(highs[j])
            a = ir.add_variable(f"a{k}_{j}", lo, hi)
            ir.add_linear([(a, 1.0)] + [(p, -float(w)) for p, w in zip(prev, row)], "=", float(b))
            if hi <= 0.0:
                z = ir.add_variable(f"z{k}_{j}", 0.0, 0.0)
            elif lo >= 0.0:
                z = ir.add_variable(f"z{k}_{j}", lo, hi)
                ir.add_linear([(z, 1.0), (a, -1.0)], "=", 0.0)
            else:
                z = ir.add_variable(f"z{k}_{j}", 0.0, hi)
                s = ir.add_variable(f"s{k}_{j}", 0.0, 1.0, BINARY)
                ir.add_linear([(z, 1.0), (a, -1.0)], ">=", 0.0)
                ir.add_linear([(z, 1.0), (a, -1.0), (s, -lo)], "<=", -lo)
                ir.add_linear([(z, 1.0), (s, -hi)], "<=", 0.0)
            cur.append(z)
        prev = cur
    out_layer = net.layers[-1]
    lows, highs = bm.layer(len(net.layers) - 1)
    ys = []
    for t, (row, b) in enumerate(zip(out_layer.weights, out_layer.bias)):
        y = ir.add_variable(f"y{t}", float(lows[t]), float(highs[t]))
        ir.add_linear([(y, 1.0)] + [(p, -float(w)) for p, w in zip(prev, row)], "=", float(b))
        ys.append(y)
    ir.objective_linear = [(ys[output_index], 1.0)]
    return ir


def encode_tree_milp(model: TrainedModel, box=None) -> ProblemIR:
    """Split-binary MILP of a tree ensemble.

    One binary per distinct (feature, threshold) pair meaning x_f <= threshold,
    strict > branches realized with an epsilon of 1e-6 * feature range; one
    binary per leaf with a pick-one row per tree and path-consistency rows.
    """
    ens = model.model
    if model.kind != "tree_ensemble":
        raise ValueError("tree encoder expects a tree ensemble")
    box = _finite_box(model, box)

    ir = ProblemIR()
    xs = [ir.add_variable(f"x{d}", lo, hi) for d, (lo, hi) in enumerate(box)]
    split_var = {}  # (feature, threshold) -> binary index or forced constant
    per_feature = {}
    for i, (f, c) in enumerate(ens.split_set()):
        L, U = box[f]
        if c >= U:
            split_var[(f, c)] = ("const", 1)
            warnings.warn(f"split x{f} <= {c} is always true in the box; branch forced",
                          RuntimeWarning)
            continue
        if c < L:
            split_var[(f, c)] = ("const", 0)
            warnings.warn(f"split x{f} <= {c} is never true in the box; branch forced",
                          RuntimeWarning)
            continue
        eps = TREE_EPS_SCALE * (U - L)
        s = ir.add_variable(f"s{f}_{i}", 0.0, 1.0, BINARY)
        split_var[(f, c)] = ("var", s)
        ir.add_linear([(xs[f], 1.0), (s, U - c)], "<=", U)
        ir.add_linear([(xs[f], 1.0), (s, c + eps - L)], ">=", c + eps)
        per_feature.setdefault(f, []).append((c, s))

    # monotone ordering: s for a smaller threshold implies s for a larger one
    for f, pairs in per_feature.items():
        pairs.sort()
        for (c1, s1), (c2, s2) in zip(pairs, pairs[1:]):
            ir.add_linear([(s1, 1.0), (s2, -1.0)], "<=", 0.0)

    n_trees = len(ens.trees)
    value_terms = []
    for t, nodes in enumerate(ens.trees):
        leaves = []  # (node_index, path) with path = [(split_key, went_left)]
        stack = [(0, [])]
        while stack:
            idx, path = stack.pop()
            nd = nodes[idx]
            if nd.is_leaf:
                leaves.append((idx, path))
                continue
            key = (nd.feature, nd.threshold)
            stack.append((nd.right, path + [(key, False)]))
            stack.append((nd.left, path + [(key, True)]))
        pick = []
        for idx, path in leaves:
            reachable = True
            rows = []
            for key, went_left in path:
                kind, v = split_var[key]
                if kind == "const":
                    if (v == 1) != went_left:
                        reachable = False
                        break
                    continue
                rows.append((v, went_left))
            if reachable:
                lf = ir.add_variable(f"l{t}_{idx}", 0.0, 1.0, BINARY)
                for s, went_left in rows:
                    if went_left:
                        ir.add_linear([(lf, 1.0), (s, -1.0)], "<=", 0.0)
                    else:
                        ir.add_linear([(lf, 1.0), (s, 1.0)], "<=", 1.0)
            else:
                lf = ir.add_variable(f"l{t}_{idx}", 0.0, 0.0)
            pick.append(lf)
            value_terms.append((lf, nodes[idx].value / n_trees))
        ir.add_linear([(lf, 1.0) for lf in pick], "=", 1.0)

    vals = [v for _, v in value_terms]
    y = ir.add_variable("y", float(np.sum(np.minimum(vals, 0.0))),
                        float(np.sum(np.maximum(vals, 0.0))))
    ir.add_linear([(y, 1.0)] + [(lf, -v) for lf, v in value_terms], "=", 0.0)
    ir.objective_linear = [(y, 1.0)]
    return ir


def encode_crs_milp(model: TrainedModel) -> ProblemIR:
    """Hull reformulation of a convex region surrogate.

    Disaggregated copies x^r with A_r x^r <= d_r * beta_r and bound rows scaled
    by beta_r (per-region LP-certified boxes rather than one global bound),
    sum(beta) = 1, x = sum(x^r), y = sum(c_r . x^r + e_r beta_r).
    """
    crs = model.model
    if model.kind != "crs":
        raise ValueError("hull encoder expects a convex region surrogate")
    n_d = crs.input_dim
    boxes = [reg.bbox for reg in crs.regions]
    lo = np.minimum(np.min([b[:, 0] for b in boxes], axis=0), model.input_box[:, 0])
    hi = np.maximum(np.max([b[:, 1] for b in boxes], axis=0), model.input_box[:, 1])

    ir = ProblemIR()
    xs = [ir.add_variable(f"x{d}", lo[d], hi[d]) for d in range(n_d)]
    betas, copies = [], []
    for r, reg in enumerate(crs.regions):
        beta = ir.add_variable(f"b{r}", 0.0, 1.0, BINARY)
        xr = [ir.add_variable(f"x{r}_{d}", min(reg.bbox[d, 0], 0.0), max(reg.bbox[d, 1], 0.0))
              for d in range(n_d)]
        for row, dval in zip(reg.A, reg.d):
            ir.add_linear([(xr[d], float(row[d])) for d in range(n_d)] + [(beta, -float(dval))],
                          "<=", 0.0)
        for d in range(n_d):
            ir.add_linear([(xr[d], 1.0), (beta, -float(reg.bbox[d, 1]))], "<=", 0.0)
            ir.add_linear([(xr[d], 1.0), (beta, -float(reg.bbox[d, 0]))], ">=", 0.0)
        betas.append(beta)
        copies.append(xr)
    ir.add_linear([(b, 1.0) for b in betas], "=", 1.0)
    for d in range(n_d):
        ir.add_linear([(xs[d], 1.0)] + [(xr[d], -1.0) for xr in copies], "=", 0.0)
    vals = [float(reg.c @ np.maximum(np.abs(reg.bbox).max(axis=1), 1.0)) for reg in crs.regions]
    bound = max(abs(v) for v in vals) + max(abs(float(r.e)) for r in crs.regions) + 1.0
    y = ir.add_variable("y", -bound, bound)
    terms = [(y, 1.0)]
    for reg, beta, xr in zip(crs.regions, betas, copies):
        terms += [(xr[d], -float(reg.c[d])) for d in range(n_d)]
        terms.append((beta, -float(reg.e)))
    ir.add_linear(terms, "=", 0.0)
    ir.objective_linear = [(y, 1.0)]
    return ir


class _AnnCompletion:
    """Forward recursion filling the lifted variables of a tanh-network NLP."""

    def __init__(self, net, n_inputs, n_total):
        self.net = net
        self.n_inputs = n_inputs
        self.n_total = n_total

    def __call__(self, point):
        full = np.zeros(self.n_total)
        x = np.asarray(point[: self.n_inputs], dtype=float)
        full[: self.n_inputs] = x
        pos = self.n_inputs
        z = x
        for layer in self.net.layers[:-1]:
            z = np.tanh(layer.weights @ z + layer.bias)
            full[pos: pos + len(z)] = z
            pos += len(z)
        out = self.net.layers[-1].weights @ z + self.net.layers[-1].bias
        full[pos: pos + len(out)] = out
        return full


class _GpCompletion:
    def __init__(self, gp, gp_output, n_total):
        self.gp = gp
        self.gp_output = gp_output
        self.n_total = n_total

    def __call__(self, point):
        gp = self.gp
        full = np.zeros(self.n_total)
        x = np.asarray(point[: gp.input_dim], dtype=float)
        full[: gp.input_dim] = x
        k = gp.kernel_vector(x)
        full[gp.input_dim: gp.input_dim + gp.n_train] = k
        if self.gp_output == "mean":
            full[-1] = gp.prior_mean + float(k @ gp.alpha)
        else:
            B = gp.posterior_weight_matrix()
            full[-1] = gp.signal_variance - float(k @ B @ k)
        return full


def encode_fullspace_nlp(model: TrainedModel, box=None, gp_output="mean") -> ProblemIR:
    """Lifted NLP: one variable per hidden-neuron output or per kernel entry.

    tanh network: z_kj = tanh(W z + b) become nonlinear equality graphs over the
    lifted space, the output stays a linear row. Gaussian process: kernel entries
    k_i = sigma_f^2 * exp(-r_i^2 / 2) with y = m0 + sum(alpha_i k_i) (mean) or a
    quadratic defining row (variance).
    """
    box = _finite_box(model, box)
    ir = ProblemIR()
    if model.kind == "ann":
        net = model.model
        for layer in net.layers[:-1]:
            if layer.activation != "tanh":
                raise ValueError("fullspace NLP supports tanh hidden layers; use the MILP "
                                 "path for relu")
        bm = ann_preactivation_bounds(net, box)
        xs = [ir.add_variable(f"x{d}", lo, hi) for d, (lo, hi) in enumerate(box)]
        layer_vars = [xs]
        for k, layer in enumerate(net.layers[:-1]):
            lows, highs = bm.layer(k)
            zs = [ir.add_variable(f"z{k}_{j}", math.tanh(lows[j]), math.tanh(highs[j]))
                  for j in range(len(layer.bias))]
            layer_vars.append(zs)
        out_layer = net.layers[-1]
        lows, highs = bm.layer(len(net.layers) - 1)
        ys = [ir.add_variable(f"y{t}", float(lows[t]), float(highs[t]))
              for t in range(net.output_dim)]
        n = ir.n_vars
        bounds = np.array([[v.lower, v.upper] for v in ir.variables])
        for k, layer in enumerate(net.layers[:-1]):
            for j, (row, bias) in enumerate(zip(layer.weights, layer.bias)):
                b = GraphBuilder(n, bounds)
                pre = b.affine([(b.var(layer_vars[k][p]), float(w)) for p, w in enumerate(row)],
                               offset=float(bias))
                g = b.finish(b.sub(b.var(layer_vars[k + 1][j]), b.unary("tanh", pre)))
                ir.nonlinear_constraints.append(NonlinearRow(g, "=", 0.0))
        for t, (row, bias) in enumerate(zip(out_layer.weights, out_layer.bias)):
            ir.add_linear([(ys[t], 1.0)] + [(layer_vars[-1][p], -float(w))
                                            for p, w in enumerate(row)], "=", float(bias))
        ir.objective_linear = [(ys[0], 1.0)]
        ir.completion = _AnnCompletion(net, net.input_dim, n)
        return ir

    if model.kind == "gp":
        gp = model.model
        xs = [ir.add_variable(f"x{d}", lo, hi) for d, (lo, hi) in enumerate(box)]
        lam2 = gp.lengthscales ** 2
        k_bounds = []
        for xi in gp.X:
            terms = [Interval(*_square_range(box[d], xi[d], lam2[d])) for d in range(gp.input_dim)]
            u = Interval(sum(t.lo for t in terms), sum(t.hi for t in terms))
            k_bounds.append((gp.signal_variance * math.exp(-0.5 * u.hi),
                             gp.signal_variance * math.exp(-0.5 * u.lo)))
        ks = [ir.add_variable(f"k{i}", lo, hi) for i, (lo, hi) in enumerate(k_bounds)]
        if gp_output == "mean":
            ylo = gp.prior_mean + sum(min(a * lo, a * hi) for a, (lo, hi) in zip(gp.alpha, k_bounds))
            yhi = gp.prior_mean + sum(max(a * lo, a * hi) for a, (lo, hi) in zip(gp.alpha, k_bounds))
        else:
            ylo, yhi = 0.0, gp.signal_variance
        y = ir.add_variable("y", ylo, yhi)
        n = ir.n_vars
        bounds = np.array([[v.lower, v.upper] for v in ir.variables])
        for i, xi in enumerate(gp.X):
            b = GraphBuilder(n, bounds)
            u = b.squared_distance([b.var(xs[d]) for d in range(gp.input_dim)], xi, lam2)
            ker = b.affine([(b.unary("sekernel", u), float(gp.signal_variance))])
            g = b.finish(b.sub(b.var(ks[i]), ker))
            ir.nonlinear_constraints.append(NonlinearRow(g, "=", 0.0))
        if gp_output == "mean":
            ir.add_linear([(y, 1.0)] + [(ks[i], -float(a)) for i, a in enumerate(gp.alpha)],
                          "=", float(gp.prior_mean))
        else:
            B = gp.posterior_weight_matrix()
            b = GraphBuilder(n, bounds)
            prods = []
            for i in range(gp.n_train):
                w = b.affine([(b.var(ks[j]), float(B[i, j])) for j in range(gp.n_train)])
                prods.append(b.mul(b.var(ks[i]), w))
            var_expr = b.affine([(p, -1.0) for p in prods], offset=float(gp.signal_variance))
            g = b.finish(b.sub(b.var(y), var_expr))
            ir.nonlinear_constraints.append(NonlinearRow(g, "=", 0.0))
        ir.objective_linear = [(y, 1.0)]
        ir.completion = _GpCompletion(gp, gp_output, n)
        return ir

    raise ValueError(f"no fullspace NLP for model kind {model.kind!r}")


def _square_range(box_row, center, w):
    """Range of w*(x-center)^2 for x in box_row."""
    lo, hi = box_row
    a, b = lo - center, hi - center
    top = w * max(a * a, b * b)
    bot = 0.0 if a <= 0.0 <= b else w * min(a * a, b * b)
    return bot, top


def encode_hull_validity(ir: ProblemIR, data: Dataset, x_indices):
    """Convex-combination hull membership: x = sum(lambda_i x_i), sum(lambda)=1.

    Appends the weight variables and rows to `ir`; returns the lambda indices.
    """
    data.validate()
    pts = data.points
    if pts.shape[1] != len(x_indices):
        raise ValueError("dataset dimension differs from the wired x variables")
    lams = [ir.add_variable(f"hull_l{i}", 0.0, 1.0) for i in range(pts.shape[0])]
    ir.add_linear([(l, 1.0) for l in lams], "=", 1.0)
    for d, xv in enumerate(x_indices):
        ir.add_linear([(xv, 1.0)] + [(lams[i], -float(pts[i, d])) for i in range(pts.shape[0])],
                      "=", 0.0)
    return lams


def ir_to_hybrid(ir: ProblemIR):
    """Convert a (possibly nonlinear) ProblemIR into a HybridProblem.

    The hybrid problem always minimizes: a max-sense objective is negated, so
    callers must flip the reported optimum back. Linear constraint rows pass
    through exactly; nonlinear rows become equality/inequality graphs.
    """
    from .graphs import HybridProblem

    ir.validate()
    bounds = np.array([[v.lower, v.upper] for v in ir.variables])
    if not np.isfinite(bounds).all():
        raise ValueError("hybrid conversion needs finite variable bounds")
    n = ir.n_vars
    sign = 1.0 if ir.objective_sense == "min" else -1.0

    if ir.objective_graph is not None:
        g = ir.objective_graph
        if g.n_vars != n:
            raise ValueError("objective graph variable space differs from the IR")
        if sign < 0:
            b = GraphBuilder(n, bounds)
            (o,) = splice_graph(b, g)
            obj = b.finish(b.affine([(o, -1.0)]))
        else:
            obj = g
    else:
        b = GraphBuilder(n, bounds)
        obj = b.finish(b.affine([(b.var(j), sign * w) for j, w in ir.objective_linear],
                                offset=sign * ir.objective_constant))

    eqs, ineqs = [], []
    for row in ir.nonlinear_constraints:
        b = GraphBuilder(n, bounds)
        (o,) = splice_graph(b, row.graph)
        if row.sense == "=":
            eqs.append(b.finish(b.affine([(o, 1.0)], offset=-row.rhs)))
        elif row.sense == "<=":
            ineqs.append(b.finish(b.affine([(o, 1.0)], offset=-row.rhs)))
        else:
            ineqs.append(b.finish(b.affine([(o, -1.0)], offset=row.rhs)))
    linear_rows = [(list(row.coefs), row.sense, row.rhs) for row in ir.linear_constraints]
    return HybridProblem(obj, equalities=eqs, inequalities=ineqs,
                         linear_rows=linear_rows, box=bounds, restore=ir.completion)


def splice_graph(builder: GraphBuilder, graph, var_map=None):
    """Copy a finished graph into `builder`, remapping variables; returns output ids."""
    if var_map is None:
        var_map = list(range(graph.n_vars))
    mapping = {}
    for i, node in enumerate(graph.nodes):
        if node.kind == "const":
            mapping[i] = builder.const(node.value)
        elif node.kind == "var":
            mapping[i] = builder.var(var_map[node.index])
        elif node.kind == "affine":
            mapping[i] = builder.affine([(mapping[a], w) for a, w in zip(node.args, node.weights)],
                                        offset=node.offset)
        elif len(node.args) == 1:
            mapping[i] = builder.unary(node.kind, mapping[node.args[0]])
        else:
            mapping[i] = builder.binary(node.kind, mapping[node.args[0]], mapping[node.args[1]])
    return [mapping[o] for o in graph.outputs]


def encode_distance_penalty(builder: GraphBuilder, data: Dataset, input_ids,
                            tau=1e-2, weights=None):
    """Softmin squared-distance penalty node: -tau*log(sum_i exp(-d_i/tau)).

    d_i is the squared (optionally weighted) distance to data point i. A tiny
    additive floor inside the log guards against exp underflow far from the
    data, where the penalty saturates near 690*tau + min distance.
    """
    data.validate()
    pts = data.points
    if weights is None:
        weights = np.ones(pts.shape[1])
    w2 = np.asarray(weights, dtype=float) ** 2
    exps = []
    for xi in pts:
        d_i = builder.squared_distance(input_ids, xi, w2)
        exps.append(builder.unary("exp", builder.affine([(d_i, -1.0 / tau)])))
    total = builder.affine([(e, 1.0) for e in exps], offset=SOFTMIN_FLOOR)
    return builder.affine([(builder.unary("log", total), -tau)])


def penalized_objective(graph, data: Dataset, rho, tau=1e-2, weights=None):
    """Reduced-space objective plus rho * softmin distance penalty, as a new graph."""
    if rho < 0.0:
        raise ValueError("penalty weight must be nonnegative")
    if rho == 0.0:
        return graph
    b = GraphBuilder(graph.n_vars, graph.box)
    (obj,) = splice_graph(b, graph)
    input_ids = [b.var(i) for i in range(graph.n_vars)]
    pen = encode_distance_penalty(b, data, input_ids, tau=tau, weights=weights)
    return b.finish(b.affine([(obj, 1.0), (pen, rho)]))
