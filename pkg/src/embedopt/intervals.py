"""Interval arithmetic: natural inclusion functions for the graph primitives."""

import math
from dataclasses import dataclass

__all__ = ["Interval", "IntervalDivisionError", "interval_apply"]


class IntervalDivisionError(ZeroDivisionError):
    """Denominator interval contains zero."""


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] over the extended reals. NaN endpoints are rejected."""

    lo: float
    hi: float

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi):
            raise ValueError("NaN interval endpoint")
        if self.lo > self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def width(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return 0.5 * (self.lo + self.hi)

    def contains(self, x, tol=0.0):
        return self.lo - tol <= x <= self.hi + tol

    def intersect(self, other):
        lo = max(self.lo, other.lo)
        hi = min(self.hi, other.hi)
        if lo > hi:
            # keep a degenerate point when numerics push the bounds past each other
            if lo - hi < 1e-12 * max(1.0, abs(lo), abs(hi)):
                lo = hi = 0.5 * (lo + hi)
            else:
                raise ValueError(f"disjoint intervals [{self.lo},{self.hi}] and [{other.lo},{other.hi}]")
        return Interval(lo, hi)

    def __repr__(self):
        return f"[{self.lo}, {self.hi}]"


def _ineg(a):
    return Interval(-a.hi, -a.lo)


def _iadd(a, b):
    return Interval(a.lo + b.lo, a.hi + b.hi)


def _isub(a, b):
    return Interval(a.lo - b.hi, a.hi - b.lo)


def _imul(a, b):
    # four-product rule; 0*inf treated as 0 so degenerate [0,0] factors stay exact
    cands = []
    for u in (a.lo, a.hi):
        for v in (b.lo, b.hi):
            if (u == 0.0 and math.isinf(v)) or (v == 0.0 and math.isinf(u)):
                cands.append(0.0)
            else:
                cands.append(u * v)
    return Interval(min(cands), max(cands))


def _idiv(a, b):
    if b.lo <= 0.0 <= b.hi:
        raise IntervalDivisionError(f"denominator interval {b} contains zero")
    return _imul(a, Interval(1.0 / b.hi, 1.0 / b.lo))


def _isquare(a):
    if a.lo <= 0.0 <= a.hi:
        return Interval(0.0, max(a.lo * a.lo, a.hi * a.hi))
    lo2, hi2 = a.lo * a.lo, a.hi * a.hi
    return Interval(min(lo2, hi2), max(lo2, hi2))


def _isqrt(a):
    # negative part of the argument is floored at 0, matching graph evaluation
    lo = math.sqrt(max(a.lo, 0.0))
    hi = math.sqrt(max(a.hi, 0.0))
    return Interval(lo, hi)


def _iexp(a):
    return Interval(math.exp(a.lo) if a.lo > -math.inf else 0.0,
                    math.exp(a.hi) if a.hi < math.inf else math.inf)


def _ilog(a):
    if a.lo <= 0.0:
        raise ValueError(f"log interval argument {a} not strictly positive")
    return Interval(math.log(a.lo), math.log(a.hi))


def _itanh(a):
    return Interval(math.tanh(a.lo), math.tanh(a.hi))


def _ierf(a):
    return Interval(math.erf(a.lo) if a.lo > -math.inf else -1.0,
                    math.erf(a.hi) if a.hi < math.inf else 1.0)


def _imax0(a):
    return Interval(max(a.lo, 0.0), max(a.hi, 0.0))


_UNARY = {
    "neg": _ineg,
    "square": _isquare,
    "sqrt": _isqrt,
    "exp": _iexp,
    "log": _ilog,
    "tanh": _itanh,
    "erf": _ierf,
    "max0": _imax0,
}

_BINARY = {
    "add": _iadd,
    "sub": _isub,
    "mul": _imul,
    "div": _idiv,
}


def interval_affine(weights, offset, args):
    """Exact interval image of offset + sum_i weights[i]*args[i]."""
    lo = hi = offset
    for w, iv in zip(weights, args):
        if w >= 0.0:
            lo += w * iv.lo
            hi += w * iv.hi
        else:
            lo += w * iv.hi
            hi += w * iv.lo
    return Interval(lo, hi)


def interval_apply(primitive, args):
    """Natural interval extension of one graph primitive.

    `primitive` is the node-kind name; `args` a sequence of Interval operands.
    Monotone primitives use endpoint evaluation; square and multiply use the
    usual zero-aware rules.
    """
    if primitive in _UNARY:
        (a,) = args
        return _UNARY[primitive](a)
    if primitive in _BINARY:
        a, b = args
        return _BINARY[primitive](a, b)
    raise KeyError(f"unknown primitive {primitive!r}")
