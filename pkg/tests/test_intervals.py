import math

import numpy as np
import pytest

from embedopt.intervals import Interval, IntervalDivisionError, interval_apply

UNARY = ["neg", "square", "sqrt", "exp", "tanh", "erf", "max0"]


def test_monotone_endpoints():
    out = interval_apply("exp", [Interval(0.0, 1.0)])
    assert out.lo == pytest.approx(1.0) and out.hi == pytest.approx(math.e)


def test_square_zero_containing():
    out = interval_apply("square", [Interval(-1.0, 2.0)])
    assert (out.lo, out.hi) == (0.0, 4.0)


def test_multiply_four_products():
    out = interval_apply("mul", [Interval(0.0, 1.0), Interval(-1.0, 1.0)])
    assert (out.lo, out.hi) == (-1.0, 1.0)


def test_divide_zero_interval_rejected():
    with pytest.raises(IntervalDivisionError):
        interval_apply("div", [Interval(1.0, 1.0), Interval(-1.0, 1.0)])


def test_nan_and_empty_rejected():
    with pytest.raises(ValueError):
        Interval(math.nan, 1.0)
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)


def _apply(kind, ivs):
    return interval_apply(kind, ivs)


def _sample(rng, iv, n):
    return rng.uniform(iv.lo, iv.hi, n)


def _f(kind, *args):
    return {
        "neg": lambda a: -a,
        "square": lambda a: a * a,
        "sqrt": lambda a: np.sqrt(np.maximum(a, 0.0)),
        "exp": np.exp,
        "tanh": np.tanh,
        "erf": lambda a: np.vectorize(math.erf)(a),
        "max0": lambda a: np.maximum(a, 0.0),
        "add": lambda a, b: a + b,
        "sub": lambda a, b: a - b,
        "mul": lambda a, b: a * b,
        "div": lambda a, b: a / b,
    }[kind](*args)


def test_inclusion_of_sampled_values(rng):
    for trial in range(300):
        kind = (UNARY + ["add", "sub", "mul", "div"])[trial % 11]
        nargs = 1 if kind in UNARY else 2
        ivs = []
        for k in range(nargs):
            lo = rng.uniform(-3, 2)
            hi = lo + rng.uniform(1e-6, 4)
            if kind == "div" and k == 1:
                lo = abs(lo) + 0.1
                hi = lo + rng.uniform(1e-6, 3)
            ivs.append(Interval(lo, hi))
        out = _apply(kind, ivs)
        pts = [_sample(rng, iv, 200) for iv in ivs]
        vals = _f(kind, *pts)
        assert np.all(vals >= out.lo - 1e-9 * max(1, abs(out.lo)))
        assert np.all(vals <= out.hi + 1e-9 * max(1, abs(out.hi)))


def test_inclusion_isotonicity(rng):
    for trial in range(300):
        kind = UNARY[trial % len(UNARY)]
        lo = rng.uniform(-3, 2)
        hi = lo + rng.uniform(0.1, 4)
        inner_lo = rng.uniform(lo, hi)
        inner_hi = rng.uniform(inner_lo, hi)
        big = _apply(kind, [Interval(lo, hi)])
        small = _apply(kind, [Interval(inner_lo, inner_hi)])
        assert small.lo >= big.lo - 1e-12
        assert small.hi <= big.hi + 1e-12
