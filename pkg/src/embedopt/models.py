"""Trained-model representation: validation, loading, and reference evaluation.

Supported kinds: feed-forward networks (tanh/relu/identity), Gaussian process
regressors with the squared-exponential kernel, regression tree ensembles
(mean aggregation), and convex region surrogates (affine maps over polytopes).
Models are immutable after load; evaluation never mutates.
"""

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .simplex import solve_dense_lp

__all__ = [
    "ModelError", "OutOfDomainError", "FeedForwardNetwork", "GaussianProcessModel",
    "TreeEnsembleModel", "ConvexRegionSurrogateModel", "TrainedModel", "Dataset",
    "load_model", "load_model_file", "dump_model", "eval_ann", "eval_gp",
    "eval_tree_ensemble", "eval_crs", "eval_model",
]

ACTIVATIONS = ("tanh", "relu", "identity")

CRS_DISJOINT_CHECK_MAX_PAIRS = 100
HALFSPACE_TOL = 1e-9


class ModelError(ValueError):
    """Malformed or inconsistent model document."""


class OutOfDomainError(ValueError):
    """Query point outside the model's declared domain."""


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray  # rows = neurons of the next layer
    bias: np.ndarray
    activation: str


@dataclass(frozen=True)
class FeedForwardNetwork:
    layers: tuple
    input_dim: int
    output_dim: int
    input_box: np.ndarray  # (n_d, 2)

    @property
    def hidden_sizes(self):
        return [len(l.bias) for l in self.layers[:-1]]

    def validate(self):
        if not self.layers:
            raise ModelError("network needs at least one layer")
        prev = self.input_dim
        for k, layer in enumerate(self.layers):
            w, b = layer.weights, layer.bias
            if w.ndim != 2 or w.shape != (len(b), prev):
                raise ModelError(f"layer {k}: weight shape {w.shape} does not chain from {prev} inputs")
            if layer.activation not in ACTIVATIONS:
                raise ModelError(f"layer {k}: unknown activation {layer.activation!r}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ModelError(f"layer {k}: non-finite parameters")
            prev = len(b)
        if prev != self.output_dim:
            raise ModelError(f"last layer emits {prev} values, expected {self.output_dim}")
        if self.layers[-1].activation != "identity":
            raise ModelError("output layer activation must be identity")
        _check_box(self.input_box, self.input_dim)


@dataclass(frozen=True)
class GaussianProcessModel:
    X: np.ndarray  # (N, n_d)
    y: np.ndarray  # (N,)
    lengthscales: np.ndarray  # per-dimension weighting factors, squared in the metric
    signal_variance: float
    noise_variance: float
    prior_mean: float
    input_dim: int
    input_box: np.ndarray
    # derived cache, filled by validate()
    chol: np.ndarray = field(default=None, compare=False)
    alpha: np.ndarray = field(default=None, compare=False)

    @property
    def n_train(self):
        return self.X.shape[0]

    def kernel_vector(self, x):
        """k(x, X_i) for all training rows, squared-exponential metric."""
        d = (np.asarray(x, dtype=float)[None, :] - self.X) * self.lengthscales[None, :]
        return self.signal_variance * np.exp(-0.5 * np.sum(d * d, axis=1))

    def kernel_matrix(self):
        sx = self.X * self.lengthscales[None, :]
        sq = np.sum(sx * sx, axis=1)
        r2 = sq[:, None] + sq[None, :] - 2.0 * (sx @ sx.T)
        np.maximum(r2, 0.0, out=r2)
        return self.signal_variance * np.exp(-0.5 * r2)

    def validate(self):
        X, y = self.X, self.y
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] != self.input_dim:
            raise ModelError(f"training inputs shape {X.shape} inconsistent with input_dim {self.input_dim}")
        if y.shape != (X.shape[0],):
            raise ModelError("training target length does not match inputs")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ModelError("non-finite training data")
        if self.lengthscales.shape != (self.input_dim,) or np.any(self.lengthscales <= 0.0):
            raise ModelError("lengthscales must be positive, one per input dimension")
        if self.signal_variance <= 0.0:
            raise ModelError("signal variance must be positive")
        if self.noise_variance < 0.0:
            raise ModelError("noise variance must be nonnegative")
        _check_box(self.input_box, self.input_dim)
        if self.noise_variance == 0.0:
            # identical rows with zero noise make the kernel matrix exactly singular
            _, idx = np.unique(X, axis=0, return_index=True)
            if len(idx) < X.shape[0]:
                raise ModelError("kernel matrix singular: duplicate training inputs with zero noise")
        K = self.kernel_matrix() + self.noise_variance * np.eye(self.n_train)
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            # one deterministic jitter retry, then give up
            jitter = 1e-10 * np.trace(K) / self.n_train
            try:
                L = np.linalg.cholesky(K + jitter * np.eye(self.n_train))
            except np.linalg.LinAlgError:
                raise ModelError("kernel matrix singular: Cholesky failed after jitter") from None
        resid = y - self.prior_mean
        alpha = cho_solve((L, True), resid)
        rel = np.linalg.norm(K @ alpha - resid) / max(1.0, np.linalg.norm(resid))
        if rel > 1e-8:
            raise ModelError(f"kernel solve residual {rel:.2e} exceeds 1e-8")
        object.__setattr__(self, "chol", L)
        object.__setattr__(self, "alpha", alpha)

    def posterior_weight_matrix(self):
        """(K + sigma_n^2 I)^-1, via the cached Cholesky factor."""
        return cho_solve((self.chol, True), np.eye(self.n_train))


@dataclass(frozen=True)
class TreeNode:
    feature: int = -1  # -1 marks a leaf
    threshold: float = 0.0
    left: int = -1
    right: int = -1
    value: float = 0.0

    @property
    def is_leaf(self):
        return self.feature < 0


@dataclass(frozen=True)
class TreeEnsembleModel:
    trees: tuple  # tuple of tuples of TreeNode; node 0 is the root
    input_dim: int
    input_box: np.ndarray

    def validate(self):
        if not self.trees:
            raise ModelError("ensemble needs at least one tree")
        for t, nodes in enumerate(self.trees):
            n = len(nodes)
            indeg = [0] * n
            for node in nodes:
                if node.is_leaf:
                    if not math.isfinite(node.value):
                        raise ModelError(f"tree {t}: non-finite leaf value")
                    continue
                if not (0 <= node.feature < self.input_dim):
                    raise ModelError(f"tree {t}: feature index {node.feature} out of range")
                for child in (node.left, node.right):
                    if not (0 <= child < n):
                        raise ModelError(f"tree {t}: child index {child} out of range")
                    indeg[child] += 1
            if indeg[0] != 0:
                raise ModelError(f"tree {t}: root has a parent")
            if any(d != 1 for d in indeg[1:]):
                raise ModelError(f"tree {t}: nodes must have exactly one parent")
            # in-degree one plus a parent-free root rules out cycles; still check reachability
            seen = set()
            stack = [0]
            while stack:
                i = stack.pop()
                if i in seen:
                    raise ModelError(f"tree {t}: cycle detected")
                seen.add(i)
                node = nodes[i]
                if not node.is_leaf:
                    stack.extend((node.right, node.left))
            if len(seen) != n:
                raise ModelError(f"tree {t}: {n - len(seen)} unreachable nodes")
        _check_box(self.input_box, self.input_dim)

    def split_set(self):
        """Sorted distinct (feature, threshold) pairs across the ensemble."""
        splits = {(nd.feature, nd.threshold) for nodes in self.trees for nd in nodes if not nd.is_leaf}
        return sorted(splits)


@dataclass(frozen=True)
class CrsRegion:
    A: np.ndarray  # (n_rows, n_d)
    d: np.ndarray
    c: np.ndarray  # affine output c.x + e
    e: float
    bbox: np.ndarray = field(default=None, compare=False)  # filled during validation


@dataclass(frozen=True)
class ConvexRegionSurrogateModel:
    regions: tuple
    input_dim: int
    input_box: np.ndarray

    def validate(self):
        if not self.regions:
            raise ModelError("surrogate needs at least one region")
        for r, reg in enumerate(self.regions):
            if reg.A.ndim != 2 or reg.A.shape[1] != self.input_dim or reg.A.shape[0] != len(reg.d):
                raise ModelError(f"region {r}: halfspace shapes inconsistent")
            if reg.c.shape != (self.input_dim,):
                raise ModelError(f"region {r}: output map dimension mismatch")
            bbox = _certify_region(reg, r, self.input_dim)
            object.__setattr__(reg, "bbox", bbox)
        n_pairs = len(self.regions) * (len(self.regions) - 1) // 2
        if n_pairs > CRS_DISJOINT_CHECK_MAX_PAIRS:
            warnings.warn(
                f"skipping region-overlap check for {n_pairs} pairs (threshold "
                f"{CRS_DISJOINT_CHECK_MAX_PAIRS}); overlapping interiors resolve by lowest index",
                RuntimeWarning,
            )
        else:
            for i in range(len(self.regions)):
                for j in range(i + 1, len(self.regions)):
                    if _interiors_overlap(self.regions[i], self.regions[j], self.input_dim):
                        warnings.warn(
                            f"regions {i} and {j} have overlapping interiors; "
                            "evaluation picks the lowest index",
                            RuntimeWarning,
                        )
        _check_box(self.input_box, self.input_dim)


_UNBOUNDED_PROBE = 1e9


def _certify_region(reg, idx, n_d):
    """LP certificates: nonempty and bounded; returns the region bounding box."""
    n_rows = len(reg.d)
    # nonemptiness: max slack t s.t. A x + t <= d over a huge probe box
    c = np.zeros(n_d + 1)
    c[-1] = -1.0
    A = np.hstack([reg.A, np.ones((n_rows, 1))])
    lo = np.full(n_d + 1, -_UNBOUNDED_PROBE)
    hi = np.full(n_d + 1, _UNBOUNDED_PROBE)
    lo[-1], hi[-1] = -1.0, 1.0
    sol = solve_dense_lp(c, A, ["<="] * n_rows, reg.d, lo, hi)
    if sol.status != "optimal" or sol.x[-1] < -1e-9:
        raise ModelError(f"region {idx}: polytope is empty")
    bbox = np.zeros((n_d, 2))
    lo = np.full(n_d, -_UNBOUNDED_PROBE)
    hi = np.full(n_d, _UNBOUNDED_PROBE)
    for j in range(n_d):
        for k, sign in enumerate((1.0, -1.0)):
            c = np.zeros(n_d)
            c[j] = sign
            sol = solve_dense_lp(c, reg.A, ["<="] * n_rows, reg.d, lo, hi)
            if sol.status != "optimal" or abs(sol.x[j]) >= 0.99 * _UNBOUNDED_PROBE:
                raise ModelError(f"region {idx}: polytope unbounded in coordinate {j}")
            bbox[j, 0 if sign > 0 else 1] = sign * sol.objective
    return bbox


def _interiors_overlap(a, b, n_d):
    """True when a strictly interior point is feasible for both regions."""
    rows = np.vstack([a.A, b.A])
    rhs = np.concatenate([a.d, b.d])
    c = np.zeros(n_d + 1)
    c[-1] = -1.0
    A = np.hstack([rows, np.ones((len(rhs), 1))])
    lo = np.full(n_d + 1, -_UNBOUNDED_PROBE)
    hi = np.full(n_d + 1, _UNBOUNDED_PROBE)
    lo[-1], hi[-1] = 0.0, 1.0
    sol = solve_dense_lp(c, A, ["<="] * len(rhs), rhs, lo, hi)
    return sol.status == "optimal" and sol.x[-1] > 1e-7


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray  # (M, n_d)
    targets: np.ndarray | None = None

    def validate(self):
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ModelError("dataset needs at least one point")
        if not np.isfinite(self.points).all():
            raise ModelError("non-finite dataset entries")
        if self.targets is not None and (
            self.targets.shape[0] != self.points.shape[0] or not np.isfinite(self.targets).all()
        ):
            raise ModelError("dataset targets inconsistent")


@dataclass(frozen=True)
class TrainedModel:
    kind: str  # ann | gp | tree_ensemble | crs
    model: object
    name: str = ""
    format_version: str = "1"

    @property
    def input_dim(self):
        return self.model.input_dim

    @property
    def input_box(self):
        return self.model.input_box


def _check_box(box, n_d):
    box = np.asarray(box, dtype=float)
    if box.shape != (n_d, 2):
        raise ModelError(f"input box shape {box.shape}, expected ({n_d}, 2)")
    if not np.isfinite(box).all():
        raise ModelError("input box must be finite")
    if np.any(box[:, 0] >= box[:, 1]):
        raise ModelError("input box needs lower < upper in every dimension")


# ---------------------------------------------------------------------------
# portable document format


def _req(doc, key):
    if key not in doc:
        raise ModelError(f"missing field {key!r}")
    return doc[key]


def load_model(data) -> TrainedModel:
    """Parse and validate one portable model document (bytes, str, or dict)."""
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            doc = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ModelError(f"document parse error: {exc}") from None
    else:
        doc = data
    if not isinstance(doc, dict):
        raise ModelError("document root must be an object")
    version = str(_req(doc, "format_version"))
    if version != "1":
        raise ModelError(f"unsupported format version {version!r}")
    kind = _req(doc, "kind")
    n_d = int(_req(doc, "input_dim"))
    n_t = int(_req(doc, "output_dim"))
    box = np.asarray(_req(doc, "input_box"), dtype=float)
    payload = _req(doc, "payload")
    name = doc.get("name", "")

    if kind == "ann":
        layers = []
        for layer_doc in payload:
            layers.append(Layer(
                weights=np.asarray(_req(layer_doc, "weights"), dtype=float),
                bias=np.asarray(_req(layer_doc, "bias"), dtype=float),
                activation=_req(layer_doc, "activation"),
            ))
        model = FeedForwardNetwork(tuple(layers), n_d, n_t, box)
    elif kind == "gp":
        if n_t != 1:
            raise ModelError("gp documents are single-output")
        model = GaussianProcessModel(
            X=np.asarray(_req(payload, "X"), dtype=float).reshape(-1, n_d),
            y=np.asarray(_req(payload, "y"), dtype=float).reshape(-1),
            lengthscales=np.asarray(_req(payload, "lengthscales"), dtype=float).reshape(-1),
            signal_variance=float(_req(payload, "signal_variance")),
            noise_variance=float(_req(payload, "noise_variance")),
            prior_mean=float(payload.get("prior_mean", 0.0)),
            input_dim=n_d,
            input_box=box,
        )
    elif kind == "tree_ensemble":
        if n_t != 1:
            raise ModelError("tree ensembles are single-output")
        trees = []
        for tree in payload:
            nodes = []
            for node in tree:
                if "leaf" in node:
                    nodes.append(TreeNode(value=float(_req(node["leaf"], "value"))))
                elif "split" in node:
                    s = node["split"]
                    nodes.append(TreeNode(
                        feature=int(_req(s, "feature")),
                        threshold=float(_req(s, "threshold")),
                        left=int(_req(s, "left")),
                        right=int(_req(s, "right")),
                    ))
                else:
                    raise ModelError("tree node needs 'leaf' or 'split'")
            trees.append(tuple(nodes))
        model = TreeEnsembleModel(tuple(trees), n_d, box)
    elif kind == "crs":
        if n_t != 1:
            raise ModelError("convex region surrogates are single-output")
        regions = []
        for reg in payload:
            regions.append(CrsRegion(
                A=np.asarray(_req(reg, "A"), dtype=float).reshape(-1, n_d),
                d=np.asarray(_req(reg, "d"), dtype=float).reshape(-1),
                c=np.asarray(_req(reg, "c"), dtype=float).reshape(-1),
                e=float(_req(reg, "e")),
            ))
        model = ConvexRegionSurrogateModel(tuple(regions), n_d, box)
    else:
        raise ModelError(f"unknown model kind {kind!r}")

    model.validate()
    return TrainedModel(kind=kind, model=model, name=name, format_version=version)


def load_model_file(path) -> TrainedModel:
    with open(path, "rb") as fh:
        return load_model(fh.read())


def dump_model(tm: TrainedModel) -> str:
    """Serialize back to the portable document format."""
    m = tm.model
    doc = {
        "format_version": tm.format_version,
        "kind": tm.kind,
        "name": tm.name,
        "input_dim": tm.input_dim,
        "output_dim": 1,
        "input_box": np.asarray(tm.input_box, dtype=float).tolist(),
    }
    if tm.kind == "ann":
        doc["output_dim"] = m.output_dim
        doc["payload"] = [
            {"weights": l.weights.tolist(), "bias": l.bias.tolist(), "activation": l.activation}
            for l in m.layers
        ]
    elif tm.kind == "gp":
        doc["payload"] = {
            "X": m.X.tolist(), "y": m.y.tolist(),
            "lengthscales": m.lengthscales.tolist(),
            "signal_variance": m.signal_variance,
            "noise_variance": m.noise_variance,
            "prior_mean": m.prior_mean,
        }
    elif tm.kind == "tree_ensemble":
        trees = []
        for nodes in m.trees:
            out = []
            for nd in nodes:
                if nd.is_leaf:
                    out.append({"leaf": {"value": nd.value}})
                else:
                    out.append({"split": {"feature": nd.feature, "threshold": nd.threshold,
                                          "left": nd.left, "right": nd.right}})
            trees.append(out)
        doc["payload"] = trees
    elif tm.kind == "crs":
        doc["payload"] = [
            {"A": r.A.tolist(), "d": r.d.tolist(), "c": r.c.tolist(), "e": r.e}
            for r in m.regions
        ]
    return json.dumps(doc, sort_keys=True)


# ---------------------------------------------------------------------------
# reference evaluation


def _as_point(x, n_d):
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (n_d,):
        raise ModelError(f"point has dimension {x.shape[0]}, model expects {n_d}")
    return x


def eval_ann(net: FeedForwardNetwork, x):
    """Forward pass: z_k = h_k(W_{k-1} z_{k-1} + b_{k-1})."""
    z = _as_point(x, net.input_dim)
    for layer in net.layers:
        a = layer.weights @ z + layer.bias
        if layer.activation == "tanh":
            z = np.tanh(a)
        elif layer.activation == "relu":
            z = np.maximum(a, 0.0)
        else:
            z = a
    return z


def eval_gp(gp: GaussianProcessModel, x):
    """Posterior (mean, variance) at x via the cached Cholesky factor."""
    x = _as_point(x, gp.input_dim)
    k = gp.kernel_vector(x)
    mean = gp.prior_mean + float(k @ gp.alpha)
    v = solve_triangular(gp.chol, k, lower=True)
    var = gp.signal_variance - float(v @ v)
    if var < -1e-8:
        raise ModelError(f"posterior variance {var:.3e} below -1e-8: numerical breakdown")
    return mean, max(var, 0.0)


def eval_tree(nodes, x):
    node = nodes[0]
    while not node.is_leaf:
        node = nodes[node.left] if x[node.feature] <= node.threshold else nodes[node.right]
    return node.value


def eval_tree_ensemble(ens: TreeEnsembleModel, x):
    """Mean of per-tree leaf values; ties x <= threshold go left."""
    x = _as_point(x, ens.input_dim)
    return float(np.mean([eval_tree(nodes, x) for nodes in ens.trees]))


def eval_crs(crs: ConvexRegionSurrogateModel, x):
    """Affine value of the lowest-index region containing x (tolerance 1e-9)."""
    x = _as_point(x, crs.input_dim)
    for reg in crs.regions:
        if np.all(reg.A @ x <= reg.d + HALFSPACE_TOL):
            return float(reg.c @ x + reg.e)
    raise OutOfDomainError(f"point {x.tolist()} lies in no region")


def eval_model(tm: TrainedModel, x):
    """Reference evaluation dispatch; GP returns its posterior mean."""
    if tm.kind == "ann":
        return eval_ann(tm.model, x)
    if tm.kind == "gp":
        return eval_gp(tm.model, x)[0]
    if tm.kind == "tree_ensemble":
        return eval_tree_ensemble(tm.model, x)
    if tm.kind == "crs":
        return eval_crs(tm.model, x)
    raise ModelError(f"unknown kind {tm.kind}")
