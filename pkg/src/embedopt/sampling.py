"""Deterministic low-discrepancy sequences and grid helpers."""

import numpy as np

__all__ = ["halton", "grid_points"]

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71)


def _vdc(i, base):
    v, denom = 0.0, 1.0
    while i > 0:
        denom *= base
        i, rem = divmod(i, base)
        v += rem / denom
    return v


def halton(count, dim, box=None, skip=1):
    """First `count` Halton points in `dim` dimensions, scaled into `box`."""
    if dim > len(_PRIMES):
        raise ValueError(f"halton supports up to {len(_PRIMES)} dimensions")
    pts = np.array([[_vdc(i + skip, _PRIMES[d]) for d in range(dim)] for i in range(count)])
    if box is not None:
        box = np.asarray(box, dtype=float)
        pts = box[:, 0] + pts * (box[:, 1] - box[:, 0])
    return pts


def grid_points(box, per_dim):
    """Tensor grid over the box, row-major; (per_dim**d, d) array."""
    box = np.asarray(box, dtype=float)
    axes = [np.linspace(lo, hi, per_dim) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)
