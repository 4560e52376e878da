"""Expression graphs: reduced-space formulation carrier.

A graph is a flat node array in topological order (construction only ever
references earlier nodes). Nodes are primitive scalar operations plus a sparse
affine-combination node; `sekernel` is the squared-exponential response
exp(-u/2) applied to a nonnegative squared-distance input, kept as its own
primitive so the tailored relaxation can target it.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .models import TrainedModel

__all__ = [
    "Node", "ExprGraph", "GraphBuilder", "HybridProblem", "GraphEvalError",
    "embed_reduced_space", "eval_graph", "eval_graph_batch", "grad_graph",
    "nonlinear_variables",
]

UNARY_KINDS = ("neg", "square", "sqrt", "exp", "log", "tanh", "erf", "max0", "sekernel")
BINARY_KINDS = ("add", "sub", "mul", "div")
NONLINEAR_KINDS = {"mul", "div", "square", "sqrt", "exp", "log", "tanh", "erf", "max0", "sekernel"}

SQRT_FLOOR = 0.0


class GraphEvalError(ArithmeticError):
    """Division by zero, log of a nonpositive value, or a non-finite intermediate."""


@dataclass(frozen=True)
class Node:
    kind: str
    args: tuple = ()
    value: float = 0.0  # const payload
    index: int = -1  # var payload
    weights: tuple = ()  # affine payload, parallel to args
    offset: float = 0.0


@dataclass(frozen=True)
class ExprGraph:
    nodes: tuple
    n_vars: int
    box: np.ndarray  # (n_vars, 2)
    outputs: tuple

    def __len__(self):
        return len(self.nodes)

    @property
    def n_outputs(self):
        return len(self.outputs)

    def affine_weight_count(self):
        return sum(len(n.weights) for n in self.nodes if n.kind == "affine")

    def describe(self):
        """Plain-text node listing for debugging."""
        lines = [f"graph: {self.n_vars} vars, {len(self.nodes)} nodes, "
                 f"outputs {list(self.outputs)}"]
        for i, n in enumerate(self.nodes):
            if n.kind == "const":
                lines.append(f"{i:4d} const {n.value:.17g}")
            elif n.kind == "var":
                lines.append(f"{i:4d} var x{n.index}")
            elif n.kind == "affine":
                terms = " ".join(f"{w:+.17g}*n{a}" for a, w in zip(n.args, n.weights))
                lines.append(f"{i:4d} affine {terms} {n.offset:+.17g}")
            else:
                args = " ".join(f"n{a}" for a in n.args)
                lines.append(f"{i:4d} {n.kind} {args}")
        return "\n".join(lines) + "\n"


class GraphBuilder:
    """Append-only graph construction; methods return node ids."""

    def __init__(self, n_vars, box):
        box = np.asarray(box, dtype=float).reshape(n_vars, 2)
        self.n_vars = n_vars
        self.box = box
        self.nodes = []
        self._var_ids = {}

    def _push(self, node):
        for a in node.args:
            if not (0 <= a < len(self.nodes)):
                raise ValueError(f"arg {a} not an earlier node")
        self.nodes.append(node)
        return len(self.nodes) - 1

    def const(self, v):
        return self._push(Node("const", value=float(v)))

    def var(self, i):
        if not (0 <= i < self.n_vars):
            raise ValueError(f"variable index {i} out of range")
        if i not in self._var_ids:
            self._var_ids[i] = self._push(Node("var", index=i))
        return self._var_ids[i]

    def unary(self, kind, a):
        if kind not in UNARY_KINDS:
            raise ValueError(f"unknown unary kind {kind}")
        return self._push(Node(kind, (a,)))

    def binary(self, kind, a, b):
        if kind not in BINARY_KINDS:
            raise ValueError(f"unknown binary kind {kind}")
        return self._push(Node(kind, (a, b)))

    def affine(self, terms, offset=0.0):
        """offset + sum(w * node). A lone unit-weight term with zero offset is elided."""
        terms = [(a, float(w)) for a, w in terms if w != 0.0]
        if len(terms) == 1 and terms[0][1] == 1.0 and offset == 0.0:
            return terms[0][0]
        args = tuple(a for a, _ in terms)
        weights = tuple(w for _, w in terms)
        if any(not math.isfinite(w) for w in weights) or not math.isfinite(offset):
            raise ValueError("non-finite affine coefficients")
        return self._push(Node("affine", args, weights=weights, offset=float(offset)))

    # convenience wrappers
    def neg(self, a):
        return self.unary("neg", a)

    def add(self, a, b):
        return self.binary("add", a, b)

    def sub(self, a, b):
        return self.binary("sub", a, b)

    def mul(self, a, b):
        return self.binary("mul", a, b)

    def div(self, a, b):
        return self.binary("div", a, b)

    def square(self, a):
        return self.unary("square", a)

    def finish(self, outputs):
        if isinstance(outputs, int):
            outputs = (outputs,)
        return ExprGraph(tuple(self.nodes), self.n_vars, self.box, tuple(outputs))

    # ------------------------------------------------------------------
    # model embedding

    def embed_ann(self, net, input_ids):
        if len(input_ids) != net.input_dim:
            raise ValueError("wiring length must equal the network input dimension")
        current = list(input_ids)
        for layer in net.layers:
            nxt = []
            for row, b in zip(layer.weights, layer.bias):
                a = self.affine(list(zip(current, row)), offset=float(b))
                if layer.activation == "tanh":
                    a = self.unary("tanh", a)
                elif layer.activation == "relu":
                    a = self.unary("max0", a)
                nxt.append(a)
            current = nxt
        return current

    def squared_distance(self, input_ids, center, weights):
        """sum_d weights[d] * (x_d - center[d])^2 as difference-square nodes.

        Building squares of differences (rather than expanding the quadratic)
        keeps the interval lower bound at the true minimum, in particular >= 0.
        """
        terms = []
        for d, (i, c) in enumerate(zip(input_ids, center)):
            diff = self.affine([(i, 1.0)], offset=-float(c))
            terms.append((self.square(diff), float(weights[d])))
        return self.affine(terms)

    def embed_gp_kernel_nodes(self, gp, input_ids):
        """Per training row: a squared-distance subgraph + one kernel-response node."""
        lam2 = gp.lengthscales ** 2
        return [self.unary("sekernel", self.squared_distance(input_ids, xi, lam2))
                for xi in gp.X]

    def embed_gp_mean(self, gp, input_ids, kernel_ids=None):
        if kernel_ids is None:
            kernel_ids = self.embed_gp_kernel_nodes(gp, input_ids)
        terms = [(k, float(gp.signal_variance * a)) for k, a in zip(kernel_ids, gp.alpha)]
        return self.affine(terms, offset=gp.prior_mean)

    def embed_gp_variance(self, gp, input_ids, kernel_ids=None):
        if kernel_ids is None:
            kernel_ids = self.embed_gp_kernel_nodes(gp, input_ids)
        B = gp.posterior_weight_matrix() * gp.signal_variance ** 2
        prods = []
        for i, ki in enumerate(kernel_ids):
            w = self.affine([(kj, float(B[i, j])) for j, kj in enumerate(kernel_ids)])
            prods.append(self.mul(ki, w))
        return self.affine([(p, -1.0) for p in prods], offset=gp.signal_variance)


def embed_reduced_space(model: TrainedModel, wiring=None, n_vars=None, box=None,
                        gp_output="mean") -> ExprGraph:
    """Build the explicit input-to-output graph of a trained model.

    `wiring` maps model inputs to graph variable indices (identity by default).
    Tree ensembles and convex region surrogates are rejected: a discontinuous
    model has no reduced-space graph.
    """
    if model.kind in ("tree_ensemble", "crs"):
        raise ValueError(f"discontinuous model kind {model.kind!r} has no reduced-space graph")
    if wiring is None:
        wiring = list(range(model.input_dim))
    if len(wiring) != model.input_dim:
        raise ValueError("wiring length must equal the model input dimension")
    if n_vars is None:
        n_vars = model.input_dim
    if box is None:
        box = np.zeros((n_vars, 2))
        box[:, 0], box[:, 1] = -np.inf, np.inf
        for d, v in enumerate(wiring):
            box[v] = model.input_box[d]
    b = GraphBuilder(n_vars, box)
    input_ids = [b.var(v) for v in wiring]
    if model.kind == "ann":
        outs = b.embed_ann(model.model, input_ids)
        return b.finish(tuple(outs))
    if model.kind == "gp":
        if gp_output == "mean":
            out = b.embed_gp_mean(model.model, input_ids)
        elif gp_output == "variance":
            out = b.embed_gp_variance(model.model, input_ids)
        else:
            raise ValueError(f"gp_output must be 'mean' or 'variance', got {gp_output!r}")
        return b.finish(out)
    raise ValueError(f"unknown model kind {model.kind!r}")


@dataclass
class HybridProblem:
    """min objective(x) s.t. eq_i(x)=0, ineq_j(x)<=0 over a shared box.

    `linear_rows` are (coefs, sense, rhs) constraints handled exactly inside node
    LPs; `restore` optionally maps a trial point to one satisfying the defining
    equalities (used by lifted full-space formulations).
    """

    objective: ExprGraph
    equalities: list = field(default_factory=list)  # ExprGraphs
    inequalities: list = field(default_factory=list)
    linear_rows: list = field(default_factory=list)  # [(coefs, sense, rhs)]
    eq_tolerance: float = 1e-6
    box: np.ndarray = None
    restore: object = None  # optional point -> feasible point callback

    def __post_init__(self):
        if self.box is None:
            self.box = self.objective.box
        self.box = np.asarray(self.box, dtype=float)
        n = self.objective.n_vars
        for g in [self.objective, *self.equalities, *self.inequalities]:
            if g.n_vars != n:
                raise ValueError("all graphs must share one variable space")
        if not np.isfinite(self.box).all():
            raise ValueError("hybrid problem box must be finite")

    @property
    def graphs(self):
        return [self.objective, *self.equalities, *self.inequalities]


def _node_values(graph, x, out, warn_out_of_box):
    """Topological value sweep into preallocated `out`."""
    if warn_out_of_box:
        lo, hi = graph.box[:, 0], graph.box[:, 1]
        if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
            warnings.warn("evaluating graph outside its variable box", RuntimeWarning)
    for i, node in enumerate(graph.nodes):
        k = node.kind
        if k == "const":
            v = node.value
        elif k == "var":
            v = x[node.index]
        elif k == "affine":
            v = node.offset
            for a, w in zip(node.args, node.weights):
                v += w * out[a]
        elif k == "add":
            v = out[node.args[0]] + out[node.args[1]]
        elif k == "sub":
            v = out[node.args[0]] - out[node.args[1]]
        elif k == "mul":
            v = out[node.args[0]] * out[node.args[1]]
        elif k == "div":
            den = out[node.args[1]]
            if den == 0.0:
                raise GraphEvalError("division by zero")
            v = out[node.args[0]] / den
        elif k == "neg":
            v = -out[node.args[0]]
        elif k == "square":
            a = out[node.args[0]]
            v = a * a
        elif k == "sqrt":
            a = out[node.args[0]]
            if a < SQRT_FLOOR:
                warnings.warn("sqrt argument floored at 0", RuntimeWarning)
                a = SQRT_FLOOR
            v = math.sqrt(a)
        elif k == "exp":
            v = math.exp(min(out[node.args[0]], 700.0))
        elif k == "log":
            a = out[node.args[0]]
            if a <= 0.0:
                raise GraphEvalError("log of a nonpositive value")
            v = math.log(a)
        elif k == "tanh":
            v = math.tanh(out[node.args[0]])
        elif k == "erf":
            v = math.erf(out[node.args[0]])
        elif k == "max0":
            v = max(out[node.args[0]], 0.0)
        elif k == "sekernel":
            v = math.exp(-0.5 * max(out[node.args[0]], 0.0))
        else:
            raise GraphEvalError(f"unknown node kind {k}")
        if not math.isfinite(v):
            raise GraphEvalError(f"non-finite value at node {i} ({k})")
        out[i] = v
    return out


def eval_graph(graph: ExprGraph, x, warn_out_of_box=False):
    """Evaluate the graph at a point; scalar for one output, array otherwise."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != graph.n_vars:
        raise GraphEvalError(f"point dimension {x.shape[0]} != {graph.n_vars}")
    out = np.empty(len(graph.nodes))
    _node_values(graph, x, out, warn_out_of_box)
    vals = out[list(graph.outputs)]
    return float(vals[0]) if len(vals) == 1 else vals


def eval_graph_batch(graph: ExprGraph, X):
    """Vectorized evaluation at many points; X is (n_points, n_vars).

    Returns (n_points,) for one output, else (n_points, n_outputs). Semantics
    match eval_graph: sqrt floors at 0, division by zero and non-finite
    intermediates raise.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != graph.n_vars:
        raise GraphEvalError(f"expected (n_points, {graph.n_vars}) array, got {X.shape}")
    vals = np.empty((len(graph.nodes), X.shape[0]))
    for i, node in enumerate(graph.nodes):
        k = node.kind
        if k == "const":
            vals[i] = node.value
        elif k == "var":
            vals[i] = X[:, node.index]
        elif k == "affine":
            v = np.full(X.shape[0], node.offset)
            for a, w in zip(node.args, node.weights):
                v += w * vals[a]
            vals[i] = v
        elif k == "add":
            vals[i] = vals[node.args[0]] + vals[node.args[1]]
        elif k == "sub":
            vals[i] = vals[node.args[0]] - vals[node.args[1]]
        elif k == "mul":
            vals[i] = vals[node.args[0]] * vals[node.args[1]]
        elif k == "div":
            den = vals[node.args[1]]
            if np.any(den == 0.0):
                raise GraphEvalError("division by zero")
            vals[i] = vals[node.args[0]] / den
        elif k == "neg":
            vals[i] = -vals[node.args[0]]
        elif k == "square":
            vals[i] = vals[node.args[0]] ** 2
        elif k == "sqrt":
            vals[i] = np.sqrt(np.maximum(vals[node.args[0]], SQRT_FLOOR))
        elif k == "exp":
            vals[i] = np.exp(np.minimum(vals[node.args[0]], 700.0))
        elif k == "log":
            a = vals[node.args[0]]
            if np.any(a <= 0.0):
                raise GraphEvalError("log of a nonpositive value")
            vals[i] = np.log(a)
        elif k == "tanh":
            vals[i] = np.tanh(vals[node.args[0]])
        elif k == "erf":
            from scipy.special import erf as _erf
            vals[i] = _erf(vals[node.args[0]])
        elif k == "max0":
            vals[i] = np.maximum(vals[node.args[0]], 0.0)
        elif k == "sekernel":
            vals[i] = np.exp(-0.5 * np.maximum(vals[node.args[0]], 0.0))
        else:
            raise GraphEvalError(f"unknown node kind {k}")
        if not np.isfinite(vals[i]).all():
            raise GraphEvalError(f"non-finite value at node {i} ({k})")
    rows = vals[list(graph.outputs)]
    return rows[0] if rows.shape[0] == 1 else rows.T


_DERIV = {
    "neg": lambda a: -1.0,
    "square": lambda a: 2.0 * a,
    "sqrt": lambda a: 0.0 if a <= SQRT_FLOOR else 0.5 / math.sqrt(a),
    "exp": lambda a: math.exp(min(a, 700.0)),
    "log": lambda a: 1.0 / a,
    "tanh": lambda a: 1.0 - math.tanh(a) ** 2,
    "erf": lambda a: 2.0 / math.sqrt(math.pi) * math.exp(-a * a),
    "max0": lambda a: 1.0 if a > 0.0 else 0.0,  # kink derivative fixed at 0
    "sekernel": lambda a: 0.0 if a < 0.0 else -0.5 * math.exp(-0.5 * a),
}


def grad_graph(graph: ExprGraph, x):
    """Forward-mode gradient; (n_vars,) for one output, (n_outputs, n_vars) otherwise."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != graph.n_vars:
        raise GraphEvalError(f"point dimension {x.shape[0]} != {graph.n_vars}")
    n = graph.n_vars
    vals = np.empty(len(graph.nodes))
    _node_values(graph, x, vals, False)
    tang = np.zeros((len(graph.nodes), n))
    for i, node in enumerate(graph.nodes):
        k = node.kind
        if k == "const":
            continue
        if k == "var":
            tang[i, node.index] = 1.0
        elif k == "affine":
            for a, w in zip(node.args, node.weights):
                tang[i] += w * tang[a]
        elif k == "add":
            tang[i] = tang[node.args[0]] + tang[node.args[1]]
        elif k == "sub":
            tang[i] = tang[node.args[0]] - tang[node.args[1]]
        elif k == "mul":
            a, b = node.args
            tang[i] = vals[b] * tang[a] + vals[a] * tang[b]
        elif k == "div":
            a, b = node.args
            tang[i] = (tang[a] - vals[i] * tang[b]) / vals[b]
        else:
            tang[i] = _DERIV[k](vals[node.args[0]]) * tang[node.args[0]]
    rows = tang[list(graph.outputs)]
    return rows[0] if rows.shape[0] == 1 else rows


def nonlinear_variables(graph: ExprGraph):
    """Variable indices feeding any nonlinear node; candidates for spatial branching."""
    deps = [0] * len(graph.nodes)
    nl = 0
    for i, node in enumerate(graph.nodes):
        if node.kind == "var":
            deps[i] = 1 << node.index
        else:
            d = 0
            for a in node.args:
                d |= deps[a]
            deps[i] = d
            if node.kind in NONLINEAR_KINDS:
                nl |= d
    return {i for i in range(graph.n_vars) if nl >> i & 1}
