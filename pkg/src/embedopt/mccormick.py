"""McCormick convex/concave relaxations with subgradients for graph primitives.

Every rule returns a bundle (cv, cc, cv-subgradient, cc-subgradient, interval)
valid over the current variable box. Univariate envelopes use the median
selection rule; S-shaped functions (tanh, erf) get secant/tangent envelopes
with the tangency point found by safeguarded Newton. The final step of every
rule intersects (cv, cc) with the node interval.
"""

import math

import numpy as np

from .graphs import ExprGraph
from .intervals import Interval, interval_affine, interval_apply

__all__ = [
    "McValue", "mc_apply", "se_kernel_relax",
    "propagate_intervals", "propagate_mccormick",
]

_TANGENT_TOL = 1e-10
_THIN = 1e-14


class McValue:
    __slots__ = ("iv", "cv", "cc", "cvs", "ccs")

    def __init__(self, iv, cv, cc, cvs, ccs):
        self.iv = iv
        self.cv = cv
        self.cc = cc
        self.cvs = cvs
        self.ccs = ccs

    def __repr__(self):
        return f"McValue(cv={self.cv}, cc={self.cc}, iv={self.iv})"

    @staticmethod
    def exact(iv, value, grad):
        return McValue(iv, value, value, grad, grad)

    @staticmethod
    def constant(v, n):
        z = np.zeros(n)
        return McValue(Interval(v, v), v, v, z, z)


def _cut(mc):
    """Intersect (cv, cc) with the interval; a binding cut has zero subgradient."""
    lo, hi = mc.iv.lo, mc.iv.hi
    cv, cvs = mc.cv, mc.cvs
    cc, ccs = mc.cc, mc.ccs
    if cv < lo:
        cv, cvs = lo, np.zeros_like(cvs)
    if cc > hi:
        cc, ccs = hi, np.zeros_like(ccs)
    if cv > cc:
        gap = cv - cc
        if gap > 1e-7 * max(1.0, abs(cv), abs(cc)):
            raise ArithmeticError(f"relaxation crossover cv={cv} > cc={cc}")
        mid = 0.5 * (cv + cc)
        cv = cc = mid
        cvs = ccs = np.zeros_like(cvs)
    return McValue(mc.iv, cv, cc, cvs, ccs)


def _select(f, z):
    """Median-rule argument selection: mid(f.cv, f.cc, z) plus matching subgradient."""
    if z <= f.cv:
        return f.cv, f.cvs
    if z >= f.cc:
        return f.cc, f.ccs
    return z, np.zeros_like(f.cvs)


def _univariate(f, iv_out, env_cv, denv_cv, zmin, env_cc, denv_cc, zmax):
    m, sub = _select(f, zmin)
    cv = env_cv(m)
    cvs = denv_cv(m) * sub
    m2, sub2 = _select(f, zmax)
    cc = env_cc(m2)
    ccs = denv_cc(m2) * sub2
    return _cut(McValue(iv_out, cv, cc, cvs, ccs))


def _point(f, iv_out, value):
    z = np.zeros_like(f.cvs)
    return McValue(iv_out, value, value, z, z)


def _secant(fa, fb, a, b):
    slope = (fb - fa) / (b - a)
    return (lambda m: fa + slope * (m - a)), (lambda m: slope)


# ---------------------------------------------------------------------------
# primitive rules


def _mc_neg(f):
    iv = Interval(-f.iv.hi, -f.iv.lo)
    return McValue(iv, -f.cc, -f.cv, -f.ccs, -f.cvs)


def _mc_add(f, g):
    iv = interval_apply("add", (f.iv, g.iv))
    return _cut(McValue(iv, f.cv + g.cv, f.cc + g.cc, f.cvs + g.cvs, f.ccs + g.ccs))


def _mc_sub(f, g):
    iv = interval_apply("sub", (f.iv, g.iv))
    return _cut(McValue(iv, f.cv - g.cc, f.cc - g.cv, f.cvs - g.ccs, f.ccs - g.cvs))


def _scaled_cv(w, f):
    """(value, subgradient) of w*f usable inside a convex underestimator."""
    return (w * f.cv, w * f.cvs) if w >= 0.0 else (w * f.cc, w * f.ccs)


def _scaled_cc(w, f):
    return (w * f.cc, w * f.ccs) if w >= 0.0 else (w * f.cv, w * f.cvs)


def _mc_affine(node, args):
    iv = interval_affine(node.weights, node.offset, [a.iv for a in args])
    cv = cc = node.offset
    cvs = np.zeros_like(args[0].cvs) if args else 0.0
    ccs = np.zeros_like(cvs)
    for w, f in zip(node.weights, args):
        v, s = _scaled_cv(w, f)
        cv += v
        cvs = cvs + s
        v, s = _scaled_cc(w, f)
        cc += v
        ccs = ccs + s
    return _cut(McValue(iv, cv, cc, cvs, ccs))


def _mc_mul(f, g):
    xl, xu = f.iv.lo, f.iv.hi
    yl, yu = g.iv.lo, g.iv.hi
    if not all(map(math.isfinite, (xl, xu, yl, yu))):
        raise ArithmeticError("bilinear relaxation needs finite operand intervals")
    iv = interval_apply("mul", (f.iv, g.iv))

    def under(alpha, beta, const):
        v1, s1 = _scaled_cv(alpha, f)
        v2, s2 = _scaled_cv(beta, g)
        return v1 + v2 + const, s1 + s2

    def over(alpha, beta, const):
        v1, s1 = _scaled_cc(alpha, f)
        v2, s2 = _scaled_cc(beta, g)
        return v1 + v2 + const, s1 + s2

    cv1, cvs1 = under(yl, xl, -xl * yl)
    cv2, cvs2 = under(yu, xu, -xu * yu)
    cv, cvs = (cv1, cvs1) if cv1 >= cv2 else (cv2, cvs2)
    cc1, ccs1 = over(yu, xl, -xl * yu)
    cc2, ccs2 = over(yl, xu, -xu * yl)
    cc, ccs = (cc1, ccs1) if cc1 <= cc2 else (cc2, ccs2)
    return _cut(McValue(iv, cv, cc, cvs, ccs))


def _mc_recip(f):
    a, b = f.iv.lo, f.iv.hi
    if a <= 0.0 <= b:
        raise ArithmeticError(f"reciprocal interval {f.iv} contains zero")
    iv = Interval(1.0 / b, 1.0 / a)
    if b - a < _THIN:
        return _point(f, iv, 1.0 / a)
    if a > 0.0:
        # convex decreasing
        sec, dsec = _secant(1.0 / a, 1.0 / b, a, b)
        return _univariate(f, iv,
                           lambda m: 1.0 / m, lambda m: -1.0 / (m * m), b,
                           sec, dsec, a)
    # b < 0: concave decreasing
    sec, dsec = _secant(1.0 / a, 1.0 / b, a, b)
    return _univariate(f, iv, sec, dsec, b,
                       lambda m: 1.0 / m, lambda m: -1.0 / (m * m), a)


def _mc_div(f, g):
    return _mc_mul(f, _mc_recip(g))


def _mc_square(f):
    a, b = f.iv.lo, f.iv.hi
    iv = interval_apply("square", (f.iv,))
    if b - a < _THIN:
        return _point(f, iv, a * a)
    zmin = min(max(0.0, a), b)
    slope = a + b
    sec, dsec = _secant(a * a, b * b, a, b)
    return _univariate(f, iv,
                       lambda m: m * m, lambda m: 2.0 * m, zmin,
                       sec, dsec, b if slope >= 0.0 else a)


def _mc_exp(f):
    a, b = f.iv.lo, f.iv.hi
    iv = interval_apply("exp", (f.iv,))
    if b - a < _THIN:
        return _point(f, iv, math.exp(a))
    sec, dsec = _secant(math.exp(a), math.exp(b), a, b)
    return _univariate(f, iv, math.exp, math.exp, a, sec, dsec, b)


def _mc_log(f):
    a, b = f.iv.lo, f.iv.hi
    iv = interval_apply("log", (f.iv,))
    if b - a < _THIN:
        return _point(f, iv, math.log(a))
    sec, dsec = _secant(math.log(a), math.log(b), a, b)
    return _univariate(f, iv, sec, dsec, a,
                       math.log, lambda m: 1.0 / m, b)


def _mc_sqrt(f):
    a, b = f.iv.lo, f.iv.hi
    iv = interval_apply("sqrt", (f.iv,))
    if b <= 0.0:
        return _point(f, iv, 0.0)
    if a < 0.0:
        # floored argument: convex envelope is sqrt(b)*max(m,0)/b, overestimate by
        # the constant sqrt(b). Sound but loose; unreachable from the built-in
        # encoders, which keep sqrt arguments positive.
        rb = math.sqrt(b)
        return _univariate(
            f, iv,
            lambda m: rb * max(m, 0.0) / b, lambda m: rb / b if m > 0.0 else 0.0, a,
            lambda m: rb, lambda m: 0.0, b)
    if b - a < _THIN:
        return _point(f, iv, math.sqrt(a))
    sec, dsec = _secant(math.sqrt(a), math.sqrt(b), a, b)

    def cc_env(m):
        return math.sqrt(b) if m < 1e-12 else math.sqrt(m)

    def cc_denv(m):
        return 0.0 if m < 1e-12 else 0.5 / math.sqrt(m)

    return _univariate(f, iv, sec, dsec, a, cc_env, cc_denv, b)


def _mc_max0(f):
    a, b = f.iv.lo, f.iv.hi
    iv = interval_apply("max0", (f.iv,))
    if b - a < _THIN:
        return _point(f, iv, max(a, 0.0))
    zmin = min(max(0.0, a), b)
    sec, dsec = _secant(max(a, 0.0), max(b, 0.0), a, b)
    return _univariate(f, iv,
                       lambda m: max(m, 0.0), lambda m: 1.0 if m > 0.0 else 0.0, zmin,
                       sec, dsec, b)


def _newton_tangent(phi, dphi, ddphi, anchor, lo, hi):
    """Solve dphi(t)*(anchor-t) - (phi(anchor)-phi(t)) = 0 for t in [lo, hi].

    Safeguarded Newton with bisection fallback; the bracket endpoints are
    assumed to enclose a sign change.
    """

    def g(t):
        return dphi(t) * (anchor - t) - (phi(anchor) - phi(t))

    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    t = 0.5 * (lo + hi)
    for _ in range(100):
        gt = g(t)
        if abs(gt) < _TANGENT_TOL:
            return t
        if (gt > 0.0) == (ghi > 0.0):
            hi = t
        else:
            lo = t
        dg = ddphi(t) * (anchor - t)
        step_ok = abs(dg) > 1e-300
        if step_ok:
            tn = t - gt / dg
            if lo < tn < hi:
                t = tn
                continue
        t = 0.5 * (lo + hi)
    return t


def _sshape(f, phi, dphi, ddphi):
    """Envelopes of an increasing S-shaped function: convex left of 0, concave right."""
    a, b = f.iv.lo, f.iv.hi
    iv = Interval(phi(a), phi(b))
    if b - a < _THIN:
        return _point(f, iv, phi(a))
    if b <= 0.0:  # convex part only
        sec, dsec = _secant(phi(a), phi(b), a, b)
        return _univariate(f, iv, phi, dphi, a, sec, dsec, b)
    if a >= 0.0:  # concave part only
        sec, dsec = _secant(phi(a), phi(b), a, b)
        return _univariate(f, iv, sec, dsec, a, phi, dphi, b)

    # mixed: tangent from (t, phi(t)) through (b, phi(b)) with t <= 0, and the mirror
    sec_full, dsec_full = _secant(phi(a), phi(b), a, b)
    if dphi(a) * (b - a) >= phi(b) - phi(a):
        cv_env, cv_denv = sec_full, dsec_full
    else:
        t = _newton_tangent(phi, dphi, ddphi, b, a, 0.0)
        slope = dphi(t)

        def cv_env(m, t=t, slope=slope):
            return phi(m) if m <= t else phi(t) + slope * (m - t)

        def cv_denv(m, t=t, slope=slope):
            return dphi(m) if m <= t else slope

    if dphi(b) * (b - a) >= phi(b) - phi(a):
        cc_env, cc_denv = sec_full, dsec_full
    else:
        s = _newton_tangent(phi, dphi, ddphi, a, 0.0, b)
        slope = dphi(s)

        def cc_env(m, s=s, slope=slope):
            return phi(m) if m >= s else phi(s) + slope * (m - s)

        def cc_denv(m, s=s, slope=slope):
            return dphi(m) if m >= s else slope

    return _univariate(f, iv, cv_env, cv_denv, a, cc_env, cc_denv, b)


def _mc_tanh(f):
    return _sshape(f, math.tanh,
                   lambda t: 1.0 - math.tanh(t) ** 2,
                   lambda t: -2.0 * math.tanh(t) * (1.0 - math.tanh(t) ** 2))


_SQRT2_PI = 2.0 / math.sqrt(math.pi)


def _mc_erf(f):
    return _sshape(f, math.erf,
                   lambda t: _SQRT2_PI * math.exp(-t * t),
                   lambda t: -2.0 * t * _SQRT2_PI * math.exp(-t * t))


def se_kernel_relax(u: McValue) -> McValue:
    """Tailored relaxation of the kernel response exp(-u/2) for u >= 0.

    exp(-u/2) is convex and decreasing, so the underestimator composes with the
    concave overestimate of u and the overestimator is the secant evaluated at
    the convex underestimate of u.
    """
    if u.iv.lo < -1e-12:
        raise ValueError(f"kernel response needs a nonnegative argument, got {u.iv}")
    a, b = max(u.iv.lo, 0.0), max(u.iv.hi, 0.0)
    iv = Interval(math.exp(-0.5 * b), math.exp(-0.5 * a))
    if b - a < _THIN:
        return _point(u, iv, math.exp(-0.5 * a))
    phi = lambda m: math.exp(-0.5 * max(m, 0.0))
    dphi = lambda m: -0.5 * math.exp(-0.5 * max(m, 0.0))
    sec, dsec = _secant(phi(a), phi(b), a, b)
    return _univariate(u, iv, phi, dphi, b, sec, dsec, a)


_RULES = {
    "neg": _mc_neg,
    "add": _mc_add,
    "sub": _mc_sub,
    "mul": _mc_mul,
    "div": _mc_div,
    "square": _mc_square,
    "sqrt": _mc_sqrt,
    "exp": _mc_exp,
    "log": _mc_log,
    "tanh": _mc_tanh,
    "erf": _mc_erf,
    "max0": _mc_max0,
    "sekernel": se_kernel_relax,
}


def mc_apply(primitive, args, parent_interval=None, node=None) -> McValue:
    """One relaxation rule; `parent_interval` tightens the final cut when given."""
    if primitive == "affine":
        out = _mc_affine(node, args)
    else:
        out = _RULES[primitive](*args)
    if parent_interval is not None:
        out = McValue(out.iv.intersect(parent_interval), out.cv, out.cc, out.cvs, out.ccs)
        out = _cut(out)
    return out


# ---------------------------------------------------------------------------
# graph propagation


def propagate_intervals(graph: ExprGraph, box=None):
    """Natural interval extension over every node; returns a list of Intervals."""
    box = graph.box if box is None else np.asarray(box, dtype=float)
    out = []
    for node in graph.nodes:
        k = node.kind
        if k == "const":
            iv = Interval(node.value, node.value)
        elif k == "var":
            iv = Interval(box[node.index, 0], box[node.index, 1])
        elif k == "affine":
            iv = interval_affine(node.weights, node.offset, [out[a] for a in node.args])
        elif k == "sekernel":
            u = out[node.args[0]]
            iv = Interval(math.exp(-0.5 * max(u.hi, 0.0)), math.exp(-0.5 * max(u.lo, 0.0)))
        else:
            iv = interval_apply(k, [out[a] for a in node.args])
        out.append(iv)
    return out


def propagate_mccormick(graph: ExprGraph, box, x, intervals=None):
    """McCormick bundle per node, linearized at reference point x inside `box`."""
    box = np.asarray(box, dtype=float)
    x = np.asarray(x, dtype=float)
    n = graph.n_vars
    if intervals is None:
        intervals = propagate_intervals(graph, box)
    out = []
    for i, node in enumerate(graph.nodes):
        k = node.kind
        if k == "const":
            mc = McValue.constant(node.value, n)
        elif k == "var":
            j = node.index
            iv = Interval(box[j, 0], box[j, 1])
            grad = np.zeros(n)
            grad[j] = 1.0
            xi = min(max(x[j], iv.lo), iv.hi)
            mc = McValue.exact(iv, xi, grad)
        elif k == "affine":
            if not node.args:
                mc = McValue.constant(node.offset, n)
            else:
                mc = mc_apply("affine", [out[a] for a in node.args],
                              parent_interval=intervals[i], node=node)
        else:
            mc = mc_apply(k, [out[a] for a in node.args], parent_interval=intervals[i])
        out.append(mc)
    return out
