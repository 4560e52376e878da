"""Bayesian optimization: the expected-improvement loop end to end.

Each iteration fits the GP posterior cache on all observations, builds the
expected-improvement acquisition as an expression graph, and maximizes it with
the deterministic global solver. Reruns reproduce the history exactly.
"""

import numpy as np

from embedopt import bo_run, serialize_history


def objective(x):
    return float((x[0] - 0.3) ** 2 + 0.05 * np.sin(8 * x[0]))


history = bo_run(objective, [[0.0, 1.0]], budget=12, init_size=4)

print(f"{'iter':>4} {'x':>9} {'f(x)':>9} {'best':>9} {'phase':>10}")
for rec in history:
    phase = "design" if rec.iteration < 4 else ("fallback" if rec.fallback else "EI")
    print(f"{rec.iteration:>4} {rec.point[0]:>9.4f} {rec.value:>9.4f} "
          f"{rec.best:>9.4f} {phase:>10}")

best = min(history, key=lambda r: r.value)
print(f"\nbest observed: f({best.point[0]:.4f}) = {best.value:.5f}")

rerun = bo_run(objective, [[0.0, 1.0]], budget=12, init_size=4)
print("rerun history identical:", serialize_history(history) == serialize_history(rerun))
