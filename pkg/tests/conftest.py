import json

import numpy as np
import pytest

from embedopt.models import load_model


def ann_doc(sizes, activation, seed=0, box_half=2.0, scale=1.0):
    """Random fully-connected network document; last layer identity."""
    rng = np.random.default_rng(seed)
    layers = []
    prev = sizes[0]
    for i, s in enumerate(sizes[1:]):
        act = activation if i < len(sizes) - 2 else "identity"
        layers.append({
            "weights": (rng.normal(size=(s, prev)) * scale).tolist(),
            "bias": (rng.normal(size=s) * scale).tolist(),
            "activation": act,
        })
        prev = s
    return {
        "format_version": "1", "kind": "ann",
        "input_dim": sizes[0], "output_dim": sizes[-1],
        "input_box": [[-box_half, box_half]] * sizes[0],
        "payload": layers,
    }


def gp_doc(n_train, dim=1, seed=0, lengthscale=2.0, noise=1e-6, box_half=2.5,
           signal_variance=1.0, prior_mean=0.0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-0.8 * box_half, 0.8 * box_half, size=(n_train, dim))
    y = np.sin(X.sum(axis=1)) + 0.1 * rng.normal(size=n_train)
    return {
        "format_version": "1", "kind": "gp",
        "input_dim": dim, "output_dim": 1,
        "input_box": [[-box_half, box_half]] * dim,
        "payload": {
            "X": X.tolist(), "y": y.tolist(),
            "lengthscales": [lengthscale] * dim,
            "signal_variance": signal_variance,
            "noise_variance": noise,
            "prior_mean": prior_mean,
        },
    }


def random_tree(rng, depth, dim, box, min_gap=0.02):
    """Node list for one random tree with splits kept away from each other."""
    nodes = []

    def build(level, lo, hi):
        idx = len(nodes)
        nodes.append(None)
        feat = int(rng.integers(dim))
        span = hi[feat] - lo[feat]
        if level == 0 or span < 4 * min_gap:
            nodes[idx] = {"leaf": {"value": float(rng.normal())}}
            return idx
        c = float(rng.uniform(lo[feat] + min_gap * span, hi[feat] - min_gap * span))
        lo_l, hi_l = lo.copy(), hi.copy()
        hi_l[feat] = c
        lo_r, hi_r = lo.copy(), hi.copy()
        lo_r[feat] = c
        left = build(level - 1, lo_l, hi_l)
        right = build(level - 1, lo_r, hi_r)
        nodes[idx] = {"split": {"feature": feat, "threshold": c, "left": left, "right": right}}
        return idx

    build(depth, np.array([b[0] for b in box], dtype=float),
          np.array([b[1] for b in box], dtype=float))
    return nodes


def tree_doc(n_trees, depth, dim=1, seed=0, box=None):
    box = box if box is not None else [[0.0, 1.0]] * dim
    rng = np.random.default_rng(seed)
    return {
        "format_version": "1", "kind": "tree_ensemble",
        "input_dim": dim, "output_dim": 1, "input_box": box,
        "payload": [random_tree(rng, depth, dim, box) for _ in range(n_trees)],
    }


def crs_doc_1d():
    """Two adjoining intervals with a continuous piecewise-affine vee."""
    return {
        "format_version": "1", "kind": "crs",
        "input_dim": 1, "output_dim": 1, "input_box": [[0.0, 2.0]],
        "payload": [
            {"A": [[1.0], [-1.0]], "d": [1.0, 0.0], "c": [1.0], "e": 0.0},
            {"A": [[1.0], [-1.0]], "d": [2.0, -1.0], "c": [-1.0], "e": 2.0},
        ],
    }


def crs_doc_2d(seed=0, n_regions=3):
    """Strip partition of the unit square into vertical bands with affine maps."""
    rng = np.random.default_rng(seed)
    cuts = np.sort(rng.uniform(0.2, 0.8, n_regions - 1))
    edges = np.concatenate([[0.0], cuts, [1.0]])
    regions = []
    for lo, hi in zip(edges, edges[1:]):
        regions.append({
            "A": [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]],
            "d": [float(hi), float(-lo), 1.0, 0.0],
            "c": rng.normal(size=2).tolist(),
            "e": float(rng.normal()),
        })
    return {
        "format_version": "1", "kind": "crs",
        "input_dim": 2, "output_dim": 1, "input_box": [[0.0, 1.0], [0.0, 1.0]],
        "payload": regions,
    }


def load(doc):
    return load_model(json.dumps(doc))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
