"""Problem intermediate representation for full-space formulations, plus LP-file export."""

import math
from dataclasses import dataclass, field

__all__ = ["Variable", "LinearRow", "NonlinearRow", "ProblemIR", "export_lp"]

CONTINUOUS = "continuous"
BINARY = "binary"


@dataclass
class Variable:
    name: str
    lower: float
    upper: float
    integrality: str = CONTINUOUS


@dataclass
class LinearRow:
    """Sparse linear constraint: sum(coef * var) sense rhs, sense in {<=, =, >=}."""

    coefs: list  # list of (var_index, coefficient)
    sense: str
    rhs: float


@dataclass
class NonlinearRow:
    """Nonlinear constraint graph(vars) sense rhs. The graph's variable space is the IR's."""

    graph: object  # ExprGraph
    sense: str
    rhs: float


@dataclass
class ProblemIR:
    """Variables, linear rows, optional nonlinear rows, and a linear-or-graph objective."""

    variables: list = field(default_factory=list)
    linear_constraints: list = field(default_factory=list)
    nonlinear_constraints: list = field(default_factory=list)
    objective_linear: list | None = None  # sparse row [(idx, coef)], plus constant below
    objective_constant: float = 0.0
    objective_graph: object | None = None
    objective_sense: str = "min"
    # optional hook: maps a full-length point with trusted input entries to a
    # completed point satisfying the defining equalities (set by NLP encoders)
    completion: object = None

    def add_variable(self, name, lower, upper, integrality=CONTINUOUS):
        if integrality == BINARY and not (lower == 0.0 and upper == 1.0):
            raise ValueError(f"binary variable {name} must have bounds [0,1]")
        self.variables.append(Variable(name, float(lower), float(upper), integrality))
        return len(self.variables) - 1

    def add_linear(self, coefs, sense, rhs):
        if sense not in ("<=", "=", ">="):
            raise ValueError(f"bad sense {sense!r}")
        for j, w in coefs:
            if not (0 <= j < len(self.variables)):
                raise ValueError(f"constraint references unknown variable {j}")
            if not math.isfinite(w):
                raise ValueError("non-finite constraint coefficient")
        self.linear_constraints.append(LinearRow(list(coefs), sense, float(rhs)))
        return len(self.linear_constraints) - 1

    @property
    def n_vars(self):
        return len(self.variables)

    @property
    def binary_indices(self):
        return [i for i, v in enumerate(self.variables) if v.integrality == BINARY]

    def validate(self):
        for v in self.variables:
            if v.lower > v.upper:
                raise ValueError(f"variable {v.name} has empty bound interval")
            if v.integrality == BINARY and (v.lower < 0.0 or v.upper > 1.0):
                raise ValueError(f"binary variable {v.name} bounds outside [0,1]")
        if self.objective_linear is None and self.objective_graph is None:
            raise ValueError("no objective set")


def _fmt(x):
    return f"{x:.17g}"


def _fmt_terms(coefs):
    """Render a sparse row as `x0 + 2 x1 - 3.5 x2`; unit coefficients drop the 1."""
    parts = []
    for k, (j, w) in enumerate(coefs):
        mag = abs(w)
        term = f"x{j}" if mag == 1.0 else f"{_fmt(mag)} x{j}"
        if k == 0:
            parts.append(term if w >= 0 else f"- {term}")
        else:
            parts.append(("+ " if w >= 0 else "- ") + term)
    if not parts:
        return "0 x0"
    return " ".join(parts)


def export_lp(ir: ProblemIR) -> str:
    """Serialize a linear ProblemIR to LP-file text.

    Deterministic naming (x0.., c0..) and 17-significant-digit coefficients keep
    exports byte-stable across runs. Nonlinear content is rejected.
    """
    if ir.nonlinear_constraints or ir.objective_graph is not None:
        raise ValueError("LP export requires a purely linear problem")
    ir.validate()
    sense_word = "Minimize" if ir.objective_sense == "min" else "Maximize"
    lines = [sense_word, " obj: " + _fmt_terms(ir.objective_linear or [])]
    lines.append("Subject To")
    for i, row in enumerate(ir.linear_constraints):
        op = {"<=": "<=", "=": "=", ">=": ">="}[row.sense]
        lines.append(f" c{i}: {_fmt_terms(row.coefs)} {op} {_fmt(row.rhs)}")
    lines.append("Bounds")
    for j, v in enumerate(ir.variables):
        lines.append(f" {_fmt(v.lower)} <= x{j} <= {_fmt(v.upper)}")
    binaries = ir.binary_indices
    if binaries:
        lines.append("Binaries")
        for j in binaries:
            lines.append(f" x{j}")
    lines.append("End")
    return "\n".join(lines) + "\n"
