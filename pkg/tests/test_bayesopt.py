import math

import numpy as np
import pytest

from conftest import gp_doc, load
from embedopt.bayesopt import (BoCallbackError, BoState, bo_run, bo_step, build_ei_graph,
                               serialize_history)
from embedopt.graphs import eval_graph
from embedopt.sampling import halton


def _gp(payload_updates, box):
    doc = gp_doc(1)
    doc["payload"].update(payload_updates)
    doc["input_box"] = box
    return load(doc).model


def test_ei_exploitation_dead_zone():
    # far prior region has sigma ~ sigma_f; shrink sigma_f so sigma ~ floor,
    # and set the prior a unit above the incumbent: no improvement, no spread
    gp = _gp(dict(X=[[0.0]], y=[1.0], lengthscales=[1.0], signal_variance=1e-14,
                  noise_variance=0.0, prior_mean=1.0), [[-50.0, 50.0]])
    ei = build_ei_graph(gp, 0.0)
    assert eval_graph(ei, [40.0]) <= 1e-6


def test_ei_at_pure_uncertainty_point():
    gp = _gp(dict(X=[[0.0]], y=[3.0], lengthscales=[1.0], signal_variance=1.0,
                  noise_variance=0.0, prior_mean=3.0), [[-100.0, 100.0]])
    ei = build_ei_graph(gp, 3.0)
    assert eval_graph(ei, [50.0]) == pytest.approx(1.0 / math.sqrt(2 * math.pi), abs=1e-6)


def test_ei_zero_at_interpolating_minimum():
    gp = _gp(dict(X=[[0.0]], y=[3.0], lengthscales=[1.0], signal_variance=1.0,
                  noise_variance=0.0, prior_mean=0.0), [[-3.0, 3.0]])
    ei = build_ei_graph(gp, 3.0)
    assert eval_graph(ei, [0.0]) <= 1e-6 * (1.0 + 3.0)


def test_ei_nonnegative_sampled(rng):
    gp = load(gp_doc(6, seed=40, noise=1e-8)).model
    ei = build_ei_graph(gp, float(np.min(gp.y)))
    for x in rng.uniform(-2.5, 2.5, size=(300, 1)):
        assert eval_graph(ei, x) >= 0.0


def test_bo_step_symmetric_suggestion():
    gp = _gp(dict(X=[[-1.0], [1.0]], y=[1.0, 1.0], lengthscales=[1.5],
                  noise_variance=1e-10, prior_mean=0.0), [[-1.0, 1.0]])
    state = BoState(gp=gp, X=gp.X, y=gp.y, best_value=1.0)
    pt, fallback = bo_step(state)
    assert not fallback
    assert abs(pt[0]) <= 1e-3


def test_bo_step_single_observation_goes_far():
    gp = _gp(dict(X=[[-0.8]], y=[0.5], lengthscales=[1.0], noise_variance=1e-10,
                  prior_mean=0.0), [[-1.0, 1.0]])
    state = BoState(gp=gp, X=gp.X, y=gp.y, best_value=0.5)
    pt, fallback = bo_step(state)
    # dense sampling of the acquisition surface pins the maximizer
    ei = build_ei_graph(gp, 0.5)
    xs = np.linspace(-1, 1, 4001)
    best = xs[np.argmax([eval_graph(ei, [x]) for x in xs])]
    assert abs(pt[0] - best) <= 2e-3
    assert best == pytest.approx(1.0, abs=1e-2)  # boundary farthest from the data


def test_bo_step_degenerate_fallback():
    # vanishing signal variance floors sigma everywhere: EI is numerically zero
    gp = _gp(dict(X=[[-0.5], [0.25]], y=[1.0, 1.0], lengthscales=[1.0],
                  signal_variance=1e-16, noise_variance=0.0, prior_mean=1.0),
             [[-1.0, 1.0]])
    state = BoState(gp=gp, X=gp.X, y=gp.y, best_value=1.0)
    pt, fallback = bo_step(state)
    assert fallback
    assert pt[0] == 1.0  # vertex farthest from both observations


def test_bo_run_quadratic():
    history = bo_run(lambda x: (x[0] - 0.3) ** 2, [[0.0, 1.0]], budget=12, init_size=4)
    assert len(history) == 12
    assert history[-1].best <= 1e-2
    bests = [r.best for r in history]
    assert all(a >= b - 1e-15 for a, b in zip(bests, bests[1:]))
    for r in history:
        assert 0.0 <= r.point[0] <= 1.0


def test_bo_run_budget_equals_design():
    history = bo_run(lambda x: float(x[0]), [[0.0, 1.0]], budget=3, init_size=3)
    assert len(history) == 3
    design = halton(3, 1, np.array([[0.0, 1.0]]))
    assert np.allclose([r.point[0] for r in history], design[:, 0])


def test_bo_run_deterministic():
    h1 = bo_run(lambda x: abs(x[0] - 0.6), [[0.0, 1.0]], budget=6, init_size=3)
    h2 = bo_run(lambda x: abs(x[0] - 0.6), [[0.0, 1.0]], budget=6, init_size=3)
    assert serialize_history(h1) == serialize_history(h2)


def test_bo_run_callback_failure_carries_iteration():
    def bad(x):
        raise RuntimeError("boom")

    with pytest.raises(BoCallbackError) as err:
        bo_run(bad, [[0.0, 1.0]], budget=4, init_size=2)
    assert err.value.iteration == 0


def test_bo_run_argument_validation():
    with pytest.raises(ValueError):
        bo_run(lambda x: 0.0, [[0.0, 1.0]], budget=1, init_size=2)
    with pytest.raises(ValueError):
        bo_run(lambda x: 0.0, [[0.0, 1.0]], budget=5, init_size=1)
