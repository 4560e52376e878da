"""Bayesian optimization driver: expected-improvement acquisition over a GP
posterior, globally maximized each iteration with the spatial solver.

Hyperparameters are chosen once from the initial design and then held fixed;
every refit only recomputes the Cholesky cache on the grown data set. The whole
loop is deterministic: the initial design is a Halton sequence and the inner
solver is deterministic, so reruns reproduce the history byte for byte.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import ExprGraph, GraphBuilder, HybridProblem
from .globalopt import solve_global
from .models import GaussianProcessModel
from .sampling import halton

__all__ = ["BoState", "BoCallbackError", "build_ei_graph", "bo_step", "bo_run",
           "serialize_history"]

SIGMA_FLOOR = 1e-6
# an EI maximum at or below phi(0) * floored sigma signals no usable signal:
# zero improvement with the posterior spread pinned at the floor everywhere
EI_ZERO = SIGMA_FLOOR / math.sqrt(2.0 * math.pi) + 1e-12
_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class BoCallbackError(RuntimeError):
    """Objective callback failed; carries the failing iteration index."""

    def __init__(self, iteration, cause):
        super().__init__(f"objective evaluation failed at iteration {iteration}: {cause}")
        self.iteration = iteration


@dataclass
class BoState:
    gp: GaussianProcessModel
    X: np.ndarray
    y: np.ndarray
    best_value: float
    iteration: int = 0
    suggestions: list = field(default_factory=list)

    @classmethod
    def from_data(cls, X, y, lengthscales, signal_variance, noise_variance, prior_mean,
                  input_box):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        gp = GaussianProcessModel(
            X=X, y=y,
            lengthscales=np.asarray(lengthscales, dtype=float),
            signal_variance=float(signal_variance),
            noise_variance=float(noise_variance),
            prior_mean=float(prior_mean),
            input_dim=X.shape[1],
            input_box=np.asarray(input_box, dtype=float),
        )
        gp.validate()
        return cls(gp=gp, X=X, y=y, best_value=float(np.min(y)))

    def observe(self, x, value):
        """Refit the posterior cache on the grown data; hyperparameters unchanged."""
        self.X = np.vstack([self.X, np.asarray(x, dtype=float)])
        self.y = np.append(self.y, float(value))
        refit = BoState.from_data(self.X, self.y, self.gp.lengthscales,
                                  self.gp.signal_variance, self.gp.noise_variance,
                                  self.gp.prior_mean, self.gp.input_box)
        self.gp = refit.gp
        self.best_value = refit.best_value
        self.iteration += 1


def build_ei_graph(gp: GaussianProcessModel, f_star, sigma_floor=SIGMA_FLOOR) -> ExprGraph:
    """Expected improvement EI(x) = (f*-mu)*Phi(z) + sigma*phi(z), z=(f*-mu)/sigma.

    Phi goes through erf, sigma = sqrt(max(variance, floor^2)) keeps z finite at
    data points, and a final max0 clips sub-1e-12 rounding noise to zero.
    """
    b = GraphBuilder(gp.input_dim, gp.input_box)
    inputs = [b.var(d) for d in range(gp.input_dim)]
    kernels = b.embed_gp_kernel_nodes(gp, inputs)
    mu = b.embed_gp_mean(gp, inputs, kernels)
    var = b.embed_gp_variance(gp, inputs, kernels)
    floored = b.affine([(b.unary("max0", b.affine([(var, 1.0)], offset=-sigma_floor ** 2)), 1.0)],
                       offset=sigma_floor ** 2)
    sigma = b.unary("sqrt", floored)
    imp = b.affine([(mu, -1.0)], offset=float(f_star))
    z = b.div(imp, sigma)
    big_phi = b.affine([(b.unary("erf", b.affine([(z, _INV_SQRT2)])), 0.5)], offset=0.5)
    small_phi = b.affine([(b.unary("exp", b.affine([(b.square(z), -0.5)])), _INV_SQRT2PI)])
    ei = b.add(b.mul(imp, big_phi), b.mul(sigma, small_phi))
    return b.finish(b.unary("max0", ei))


def _negated(graph):
    from .encoders import splice_graph

    b = GraphBuilder(graph.n_vars, graph.box)
    (o,) = splice_graph(b, graph)
    return b.finish(b.affine([(o, -1.0)]))


def _farthest_vertex(box, X):
    d = box.shape[0]
    if d > 20:
        raise ValueError("vertex fallback is limited to 20 dimensions")
    best, best_dist = None, -1.0
    for mask in range(2 ** d):
        v = np.array([box[i, 1] if mask >> i & 1 else box[i, 0] for i in range(d)])
        dist = float(np.min(np.linalg.norm(X - v, axis=1)))
        if dist > best_dist + 1e-15:
            best, best_dist = v, dist
    return best


def bo_step(state: BoState, box=None, rel_tol=1e-3, node_limit=600):
    """Globally maximize EI; returns (point, degenerate_flag).

    When the maximized EI is numerically zero everywhere (every sigma at the
    floor), falls back to the box vertex farthest from the data, flagged True.
    """
    box = np.asarray(state.gp.input_box if box is None else box, dtype=float)
    if np.any(box[:, 0] >= box[:, 1]):
        raise ValueError("degenerate box")
    ei = build_ei_graph(state.gp, state.best_value)
    problem = HybridProblem(_negated(ei), box=box)
    sol = solve_global(problem, abs_tol=1e-9, rel_tol=rel_tol, node_limit=node_limit)
    if sol.x is None or -sol.objective <= EI_ZERO:
        return _farthest_vertex(box, state.X), True
    return np.clip(sol.x, box[:, 0], box[:, 1]), False


@dataclass
class BoRecord:
    iteration: int
    point: np.ndarray
    value: float
    best: float
    fallback: bool = False


def bo_run(objective, box, budget, init_size, lengthscales=None, signal_variance=None,
           noise_variance=None, prior_mean=None, rel_tol=1e-3, node_limit=600):
    """Full loop: Halton initial design, then EI suggestions until the budget.

    `objective` is a callback point -> value. Hyperparameter defaults derive
    from the initial design: unit-order weights 2/width per dimension, prior
    mean and signal variance from the design targets.
    """
    box = np.asarray(box, dtype=float)
    d = box.shape[0]
    if init_size < 2 or budget < init_size:
        raise ValueError("need budget >= initial design size >= 2")

    def call(x, iteration):
        try:
            return float(objective(np.asarray(x, dtype=float)))
        except Exception as exc:
            raise BoCallbackError(iteration, exc) from exc

    design = halton(init_size, d, box)
    history = []
    X, y = [], []
    for i, x in enumerate(design):
        v = call(x, i)
        X.append(x)
        y.append(v)
        history.append(BoRecord(i, np.asarray(x), v, float(np.min(y))))

    y_arr = np.array(y)
    if lengthscales is None:
        lengthscales = 2.0 / (box[:, 1] - box[:, 0])
    if signal_variance is None:
        signal_variance = max(float(np.var(y_arr)), 1e-12)
    if noise_variance is None:
        noise_variance = 1e-8 * signal_variance
    if prior_mean is None:
        prior_mean = float(np.mean(y_arr))

    state = BoState.from_data(np.array(X), y_arr, lengthscales, signal_variance,
                              noise_variance, prior_mean, box)
    for i in range(init_size, budget):
        x_next, fallback = bo_step(state, box, rel_tol=rel_tol, node_limit=node_limit)
        v = call(x_next, i)
        state.suggestions.append(np.asarray(x_next))
        state.observe(x_next, v)
        history.append(BoRecord(i, np.asarray(x_next, dtype=float), v,
                                min(history[-1].best, v), fallback))
    return history


def serialize_history(history):
    """Tabular text: iteration, point coordinates, observed value, incumbent."""
    lines = ["# iteration point... value best"]
    for rec in history:
        coords = " ".join(f"{c:.17g}" for c in rec.point)
        lines.append(f"{rec.iteration} {coords} {rec.value:.17g} {rec.best:.17g}")
    return "\n".join(lines) + "\n"
