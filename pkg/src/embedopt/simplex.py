"""Dense two-phase bounded-variable simplex for LP relaxations.

Target scale is desk-size encodings (up to a couple thousand variables), so the
solver keeps a full dense B^-1 A tableau and favors determinism over sparse
performance: Dantzig pricing with lowest-index tie breaks, switching to Bland's
rule after a run of degenerate pivots. Basic values are refreshed from the
tableau every iteration, which keeps the state self-consistent at the cost of
one extra mat-vec per pivot.
"""

import math
from dataclasses import dataclass

import numpy as np

from .problem import ProblemIR

__all__ = ["LpSolution", "SimplexBreakdown", "solve_lp", "solve_dense_lp"]

PIVOT_TOL = 1e-11
COST_TOL = 1e-9
FEAS_TOL = 1e-7
DEGENERATE_STEP = 1e-12
BLAND_AFTER = 1000
MAX_ITER = 200000

_LOWER, _UPPER, _BASIC = 0, 1, 2


class SimplexBreakdown(RuntimeError):
    """Numerical breakdown: pivot below tolerance or iteration runaway."""


@dataclass
class LpSolution:
    status: str  # optimal | infeasible | unbounded
    x: np.ndarray | None
    objective: float | None
    iterations: int


class _Tableau:
    """Bounded-variable simplex state over equality form A x = b, l <= x <= u."""

    def __init__(self, A, b, lower, upper):
        self.m, n = A.shape
        self.iterations = 0
        self.degenerate_run = 0

        status = np.full(n, _LOWER, dtype=np.int8)
        xval = np.zeros(n)
        for j in range(n):
            if math.isfinite(lower[j]):
                xval[j] = lower[j]
            elif math.isfinite(upper[j]):
                status[j] = _UPPER
                xval[j] = upper[j]

        resid = b - A @ xval
        sign = np.where(resid >= 0.0, 1.0, -1.0)
        # artificial columns sign(resid)*e_i start basic at |resid| >= 0
        self.art0 = n
        self.ntot = n + self.m
        self.lower = np.concatenate([lower, np.zeros(self.m)])
        self.upper = np.concatenate([upper, np.full(self.m, math.inf)])
        self.status = np.concatenate([status, np.full(self.m, _BASIC, dtype=np.int8)])
        self.xval = np.concatenate([xval, np.abs(resid)])
        self.T = sign[:, None] * np.hstack([A, np.diag(sign)])
        self.beta = sign * b
        self.basis = np.arange(n, n + self.m)

    def _refresh_basics(self):
        nb = self.status != _BASIC
        self.xval[self.basis] = self.beta - self.T[:, nb] @ self.xval[nb]

    def _choose_entering(self, z, bland, blocked):
        best, best_score = -1, COST_TOL
        for j in range(self.ntot):
            if self.status[j] == _BASIC or blocked[j] or self.lower[j] == self.upper[j]:
                continue
            free = not math.isfinite(self.lower[j]) and not math.isfinite(self.upper[j])
            down = (self.status[j] == _LOWER or free) and z[j] < -COST_TOL
            up = (self.status[j] == _UPPER or free) and z[j] > COST_TOL
            if not (down or up):
                continue
            if bland:
                return j, (1.0 if down else -1.0)
            if abs(z[j]) > best_score + 1e-15:
                best, best_score = j, abs(z[j])
                best_dir = 1.0 if down else -1.0
        return (best, best_dir) if best >= 0 else (-1, 0.0)

    def _ratio_test(self, q, direction):
        """Largest step for entering q; returns (step, basis_position, hit_kind)."""
        dB = -direction * self.T[:, q]  # basic values move by dB * step
        best_t = self.upper[q] - self.lower[q]  # bound-flip distance (may be inf)
        best_pos, best_hit = -1, "flip"
        xb = self.xval[self.basis]
        for p in range(self.m):
            d = dB[p]
            idx = self.basis[p]
            if d < -PIVOT_TOL:
                t = (xb[p] - self.lower[idx]) / (-d)
                hit = "lower"
            elif d > PIVOT_TOL:
                t = (self.upper[idx] - xb[p]) / d
                hit = "upper"
            else:
                continue
            t = max(t, 0.0)
            if t < best_t - 1e-12:
                best_t, best_pos, best_hit = t, p, hit
            elif t <= best_t + 1e-12 and best_pos >= 0 and idx < self.basis[best_pos]:
                best_pos, best_hit = p, hit
        return best_t, best_pos, best_hit

    def _pivot(self, q, direction, step, pos, hit):
        self.xval[self.basis] += -direction * step * self.T[:, q]
        self.xval[q] += direction * step
        if pos < 0:  # bound flip
            self.status[q] = _UPPER if self.status[q] == _LOWER else _LOWER
            return
        leave = self.basis[pos]
        piv = self.T[pos, q]
        if abs(piv) < PIVOT_TOL:
            raise SimplexBreakdown(f"pivot magnitude {abs(piv):.3e} below tolerance")
        colq = self.T[:, q].copy()
        self.T[pos, :] /= piv
        self.beta[pos] /= piv
        for i in range(self.m):
            if i != pos and colq[i] != 0.0:
                self.T[i, :] -= colq[i] * self.T[pos, :]
                self.beta[i] -= colq[i] * self.beta[pos]
        self.basis[pos] = q
        self.status[q] = _BASIC
        self.status[leave] = _LOWER if hit == "lower" else _UPPER
        self.xval[leave] = self.lower[leave] if hit == "lower" else self.upper[leave]

    def run_phase(self, cost, blocked):
        """Minimize cost from the current basis; returns 'optimal' or 'unbounded'."""
        while True:
            if self.iterations > MAX_ITER:
                raise SimplexBreakdown("iteration limit exceeded")
            self._refresh_basics()
            z = cost - cost[self.basis] @ self.T
            bland = self.degenerate_run >= BLAND_AFTER
            q, direction = self._choose_entering(z, bland, blocked)
            if q < 0:
                return "optimal"
            step, pos, hit = self._ratio_test(q, direction)
            if not math.isfinite(step):
                return "unbounded"
            self.iterations += 1
            self.degenerate_run = self.degenerate_run + 1 if step <= DEGENERATE_STEP else 0
            self._pivot(q, direction, step, pos, hit)

    def drive_out_artificials(self):
        """Pivot basic artificials onto structural columns; freeze redundant rows."""
        for p in range(self.m):
            j = self.basis[p]
            if j < self.art0:
                continue
            target = -1
            for k in range(self.art0):
                if self.status[k] != _BASIC and self.lower[k] != self.upper[k] \
                        and abs(self.T[p, k]) > 1e-9:
                    target = k
                    break
            if target < 0:
                self.lower[j] = self.upper[j] = 0.0
                continue
            colq = self.T[:, target].copy()
            self.T[p, :] /= colq[p]
            self.beta[p] /= colq[p]
            for i in range(self.m):
                if i != p and colq[i] != 0.0:
                    self.T[i, :] -= colq[i] * self.T[p, :]
                    self.beta[i] -= colq[i] * self.beta[p]
            self.basis[p] = target
            self.status[target] = _BASIC
            self.status[j] = _LOWER
            self.xval[j] = 0.0


def solve_dense_lp(c, A, senses, rhs, lower, upper):
    """Solve min c.x s.t. A x (senses) rhs, lower <= x <= upper.

    Rows become equalities via slacks with sign-appropriate bounds; phase one
    minimizes artificial infeasibility, phase two the true objective.
    """
    c = np.asarray(c, dtype=float)
    n = len(c)
    m = len(senses)
    A = np.asarray(A, dtype=float).reshape(m, n) if m else np.zeros((0, n))
    rhs = np.asarray(rhs, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)

    slack_lo, slack_hi = [], []
    for s in senses:
        if s == "<=":
            slack_lo.append(0.0)
            slack_hi.append(math.inf)
        elif s == ">=":
            slack_lo.append(-math.inf)
            slack_hi.append(0.0)
        elif s == "=":
            slack_lo.append(0.0)
            slack_hi.append(0.0)
        else:
            raise ValueError(f"bad sense {s!r}")
    Aeq = np.hstack([A, np.eye(m)]) if m else A
    lo = np.concatenate([lower, slack_lo])
    hi = np.concatenate([upper, slack_hi])
    if np.any(lo > hi):
        return LpSolution("infeasible", None, None, 0)

    tab = _Tableau(Aeq, rhs, lo, hi)
    blocked = np.zeros(tab.ntot, dtype=bool)

    phase1 = np.zeros(tab.ntot)
    phase1[tab.art0:] = 1.0
    tab.run_phase(phase1, blocked)
    tab._refresh_basics()
    if float(np.sum(np.abs(tab.xval[tab.art0:]))) > FEAS_TOL:
        return LpSolution("infeasible", None, None, tab.iterations)
    tab.drive_out_artificials()

    blocked[tab.art0:] = True
    phase2 = np.zeros(tab.ntot)
    phase2[:n] = c
    outcome = tab.run_phase(phase2, blocked)
    if outcome == "unbounded":
        return LpSolution("unbounded", None, None, tab.iterations)
    tab._refresh_basics()
    x = tab.xval[:n].copy()
    return LpSolution("optimal", x, float(c @ x), tab.iterations)


def _ir_dense_parts(ir: ProblemIR):
    n = ir.n_vars
    m = len(ir.linear_constraints)
    A = np.zeros((m, n))
    senses, rhs = [], []
    for i, row in enumerate(ir.linear_constraints):
        for j, w in row.coefs:
            A[i, j] += w
        senses.append(row.sense)
        rhs.append(row.rhs)
    c = np.zeros(n)
    for j, w in ir.objective_linear or []:
        c[j] += w
    lower = np.array([v.lower for v in ir.variables])
    upper = np.array([v.upper for v in ir.variables])
    return c, A, senses, np.array(rhs), lower, upper


def solve_lp(ir: ProblemIR, bound_overrides=None) -> LpSolution:
    """LP relaxation of a linear ProblemIR (integrality dropped).

    `bound_overrides` maps var index -> (lo, hi); used by branch-and-bound nodes.
    Maximization runs as negated minimization and is reported in the original sense.
    """
    if ir.nonlinear_constraints or ir.objective_graph is not None:
        raise ValueError("simplex handles linear problems only")
    c, A, senses, rhs, lower, upper = _ir_dense_parts(ir)
    if bound_overrides:
        for j, (blo, bhi) in bound_overrides.items():
            lower[j] = max(lower[j], blo)
            upper[j] = min(upper[j], bhi)
            if lower[j] > upper[j]:
                return LpSolution("infeasible", None, None, 0)
    sign = 1.0 if ir.objective_sense == "min" else -1.0
    sol = solve_dense_lp(sign * c, A, senses, rhs, lower, upper)
    if sol.status == "optimal":
        obj = float(c @ sol.x) + ir.objective_constant
        return LpSolution("optimal", sol.x, obj, sol.iterations)
    return sol
