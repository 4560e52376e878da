"""Command-line front end.

Commands: evaluate, solve, compare, formulate, bo. Results are emitted as
key=value text on stdout plus an optional machine-readable JSON document
(--out); wall-clock timings go to stderr so repeated runs stay byte-identical
on stdout and in output files. Exit codes: 0 for any solver status, 2 for
usage/config errors, 3 for internal invariant breaches (such as a formulation
disagreement in `compare`).
"""

import argparse
import json
import sys
import time

import numpy as np

from .bayesopt import bo_run, serialize_history
from .encoders import (encode_crs_milp, encode_fullspace_nlp, encode_hull_validity,
                       encode_relu_milp, encode_tree_milp, ir_to_hybrid,
                       penalized_objective)
from .globalopt import grid_oracle, solve_global
from .graphs import HybridProblem, embed_reduced_space
from .milp import solve_milp
from .models import Dataset, ModelError, OutOfDomainError, eval_ann, eval_crs, eval_gp, \
    eval_tree_ensemble, load_model_file
from .problem import export_lp
from .simplex import SimplexBreakdown

__all__ = ["main"]


class CliConfigError(ValueError):
    """Inconsistent or unusable command configuration."""


class InvariantError(RuntimeError):
    """An internal consistency guarantee failed."""


def _fmt(v):
    return f"{v:.17g}"


def _read_points(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([float(tok) for tok in line.split()])
            except ValueError:
                raise CliConfigError(f"points file row {lineno} is not numeric: {line!r}")
    if not rows:
        raise CliConfigError("points file contains no rows")
    return rows


def _load(path):
    try:
        return load_model_file(path)
    except FileNotFoundError:
        raise CliConfigError(f"model file not found: {path}")


def _ann_activations(net):
    return {layer.activation for layer in net.layers[:-1]}


def _hull_data(tm, args):
    if args.data is not None:
        return Dataset(points=np.array(_read_points(args.data), dtype=float))
    if tm.kind == "gp":
        return Dataset(points=tm.model.X)
    raise CliConfigError("--validity needs --data for models without stored training inputs")


def _emit(pairs, out_path, doc_extra=None):
    for k, v in pairs:
        print(f"{k}={v}")
    if out_path:
        doc = {k: v for k, v in pairs}
        if doc_extra:
            doc.update(doc_extra)
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, sort_keys=True, indent=2)
            fh.write("\n")


def cmd_evaluate(args):
    tm = _load(args.model)
    rows = _read_points(args.points)
    out_lines = []
    for i, row in enumerate(rows):
        if len(row) != tm.input_dim:
            raise CliConfigError(
                f"row {i + 1} has {len(row)} values, model expects {tm.input_dim}")
        if tm.kind == "ann":
            vals = eval_ann(tm.model, row)
            out_lines.append(" ".join(_fmt(v) for v in vals))
        elif tm.kind == "gp":
            m, v = eval_gp(tm.model, row)
            out_lines.append(f"{_fmt(m)} {_fmt(v)}")
        elif tm.kind == "tree_ensemble":
            out_lines.append(_fmt(eval_tree_ensemble(tm.model, row)))
        else:
            out_lines.append(_fmt(eval_crs(tm.model, row)))
    text = "\n".join(out_lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _solve_reduced(tm, args):
    if tm.kind in ("tree_ensemble", "crs"):
        raise CliConfigError(f"--formulation reduced is not available for {tm.kind} models")
    if args.validity == "hull":
        raise CliConfigError("--validity hull requires --formulation fullspace")
    graph = embed_reduced_space(tm)
    if args.validity == "penalty":
        data = _hull_data(tm, args)
        weights = tm.model.lengthscales if tm.kind == "gp" else None
        graph = penalized_objective(graph, data, rho=args.rho, tau=args.tau, weights=weights)
    if graph.n_outputs > 1:
        graph = type(graph)(graph.nodes, graph.n_vars, graph.box, (graph.outputs[0],))
    if args.sense == "max":
        from .encoders import splice_graph
        from .graphs import GraphBuilder
        b = GraphBuilder(graph.n_vars, graph.box)
        (o,) = splice_graph(b, graph)
        graph = b.finish(b.affine([(o, -1.0)]))
    if getattr(args, "dump_graph", None):
        with open(args.dump_graph, "w", encoding="utf-8") as fh:
            fh.write(graph.describe())
    sol = solve_global(HybridProblem(graph), abs_tol=args.abs_gap, rel_tol=args.rel_gap,
                       node_limit=args.node_limit)
    sign = -1.0 if args.sense == "max" else 1.0
    return sol, sign


def _solve_fullspace(tm, args):
    milp_kind = (tm.kind in ("tree_ensemble", "crs")
                 or (tm.kind == "ann" and _ann_activations(tm.model) <= {"relu", "identity"}))
    if args.validity == "penalty":
        raise CliConfigError("--validity penalty requires --formulation reduced")
    if milp_kind:
        if tm.kind == "tree_ensemble":
            ir = encode_tree_milp(tm)
        elif tm.kind == "crs":
            ir = encode_crs_milp(tm)
        else:
            ir = encode_relu_milp(tm)
        if args.validity == "hull":
            data = _hull_data(tm, args)
            encode_hull_validity(ir, data, list(range(tm.input_dim)))
        ir.objective_sense = args.sense
        sol = solve_milp(ir, abs_gap=args.abs_gap, rel_gap=args.rel_gap,
                         node_limit=args.node_limit)
        return sol, 1.0
    if tm.kind == "gp" or (tm.kind == "ann" and _ann_activations(tm.model) <= {"tanh", "identity"}):
        ir = encode_fullspace_nlp(tm)
        if args.validity == "hull":
            data = _hull_data(tm, args)
            lams = encode_hull_validity(ir, data, list(range(tm.input_dim)))
            ir.completion = _HullCompletion(ir.completion, data.points, lams, tm.input_dim)
        ir.objective_sense = args.sense
        sol = solve_global(ir_to_hybrid(ir), abs_tol=args.abs_gap, rel_tol=args.rel_gap,
                           node_limit=args.node_limit)
        return sol, (-1.0 if args.sense == "max" else 1.0)
    raise CliConfigError(f"no fullspace encoding for this model (activations "
                         f"{sorted(_ann_activations(tm.model))})")


class _HullCompletion:
    """Completion that also restores hull weights by a feasibility LP."""

    def __init__(self, inner, points, lam_indices, n_inputs):
        self.inner = inner
        self.points = np.asarray(points, dtype=float)
        self.lam_indices = list(lam_indices)
        self.n_inputs = n_inputs

    def __call__(self, point):
        from .simplex import solve_dense_lp
        full = np.asarray(self.inner(point), dtype=float)
        need = max(self.lam_indices) + 1
        if len(full) < need:
            full = np.concatenate([full, np.zeros(need - len(full))])
        x = full[: self.n_inputs]
        n_lam = len(self.lam_indices)
        # feasibility LP: lambda >= 0, sum(lambda) = 1, points^T lambda = x
        A = np.vstack([np.ones((1, n_lam)), self.points.T])
        rhs = np.concatenate([[1.0], x])
        sol = solve_dense_lp(np.zeros(n_lam), A, ["="] * (1 + self.n_inputs), rhs,
                             np.zeros(n_lam), np.ones(n_lam))
        if sol.status == "optimal":
            for k, j in enumerate(self.lam_indices):
                full[j] = sol.x[k]
        return full


def _report_solution(kind, sol, sign):
    if kind == "milp":
        optimum = sol.objective
        bound = sol.best_bound
        status = sol.status
    else:
        status = sol.status
        optimum = None if sol.objective is None else sign * sol.objective
        bound = sign * sol.lower_bound
    pairs = [("status", status)]
    if optimum is not None:
        pairs.append(("optimum", _fmt(optimum)))
        pairs.append(("point", " ".join(_fmt(v) for v in sol.x)))
    pairs.append(("bound", _fmt(bound) if np.isfinite(bound) else str(bound)))
    pairs.append(("abs_gap", _fmt(sol.abs_gap) if np.isfinite(sol.abs_gap) else str(sol.abs_gap)))
    pairs.append(("rel_gap", _fmt(sol.rel_gap) if np.isfinite(sol.rel_gap) else str(sol.rel_gap)))
    pairs.append(("nodes", str(sol.nodes)))
    return pairs


def cmd_solve(args):
    tm = _load(args.model)
    t0 = time.perf_counter()
    if args.formulation == "reduced":
        sol, sign = _solve_reduced(tm, args)
        kind = "global"
    else:
        sol, sign = _solve_fullspace(tm, args)
        kind = "milp" if hasattr(sol, "best_bound") else "global"
    wall = time.perf_counter() - t0
    pairs = _report_solution(kind, sol, sign)
    _emit(pairs, args.out)
    print(f"wall_time={wall:.3f}s", file=sys.stderr)
    return 0


def cmd_compare(args):
    tm = _load(args.model)
    if tm.kind in ("tree_ensemble", "crs"):
        raise CliConfigError(f"{tm.kind} models have no reduced-space formulation to compare")
    t0 = time.perf_counter()
    rs, rs_sign = _solve_reduced(tm, args)
    t_rs = time.perf_counter() - t0
    t0 = time.perf_counter()
    fs, fs_sign = _solve_fullspace(tm, args)
    t_fs = time.perf_counter() - t0
    rs_opt = rs_sign * rs.objective
    fs_opt = fs.objective if hasattr(fs, "best_bound") else fs_sign * fs.objective
    delta = abs(rs_opt - fs_opt)
    pairs = [
        ("reduced_status", rs.status),
        ("reduced_optimum", _fmt(rs_opt)),
        ("reduced_nodes", str(rs.nodes)),
        ("fullspace_status", fs.status),
        ("fullspace_optimum", _fmt(fs_opt)),
        ("fullspace_nodes", str(fs.nodes)),
        ("delta", _fmt(delta)),
        ("agree", "yes" if delta <= 1e-4 else "no"),
    ]
    if args.grid and tm.input_dim <= 3:
        graph = embed_reduced_space(tm)
        if graph.n_outputs > 1:
            graph = type(graph)(graph.nodes, graph.n_vars, graph.box, (graph.outputs[0],))
        _, oracle = grid_oracle(graph, graph.box, args.grid)
        pairs.append(("oracle", _fmt(oracle)))
    _emit(pairs, args.out)
    print(f"wall_time_reduced={t_rs:.3f}s wall_time_fullspace={t_fs:.3f}s", file=sys.stderr)
    if delta > 1e-4 and not args.no_assert:
        raise InvariantError(f"formulations disagree by {delta:.3e} (> 1e-4)")
    return 0


def cmd_formulate(args):
    tm = _load(args.model)
    if tm.kind == "ann" and _ann_activations(tm.model) <= {"relu", "identity"}:
        ir = encode_relu_milp(tm)
    elif tm.kind == "tree_ensemble":
        ir = encode_tree_milp(tm)
    elif tm.kind == "crs":
        ir = encode_crs_milp(tm)
    else:
        raise CliConfigError(
            "LP export needs a MILP-encodable model (relu/identity network, tree "
            "ensemble, or convex region surrogate); tanh networks and GPs are nonlinear")
    ir.objective_sense = args.sense
    text = export_lp(ir)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


_BUILTINS = {
    "quadratic": (lambda x: float((x[0] - 0.3) ** 2), [[0.0, 1.0]]),
    "sine": (lambda x: float(np.sin(3.0 * x[0]) + 0.5 * x[0]), [[0.0, 2.0]]),
}


def cmd_bo(args):
    if args.objective in _BUILTINS:
        fn, box = _BUILTINS[args.objective]
    else:
        tm = _load(args.objective)
        from .models import eval_model
        box = tm.input_box.tolist()

        def fn(x, tm=tm):
            v = eval_model(tm, x)
            return float(v[0]) if np.ndim(v) else float(v)

    t0 = time.perf_counter()
    history = bo_run(fn, box, budget=args.budget, init_size=args.init,
                     node_limit=args.node_limit)
    wall = time.perf_counter() - t0
    text = serialize_history(history)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    best = history[-1]
    print(f"iterations={len(history)}")
    print(f"best_value={_fmt(best.best)}")
    best_rec = min(history, key=lambda r: (r.value, r.iteration))
    print(f"best_point={' '.join(_fmt(c) for c in best_rec.point)}")
    print(f"fallbacks={sum(1 for r in history if r.fallback)}")
    print(f"wall_time={wall:.3f}s", file=sys.stderr)
    return 0


def _build_parser():
    p = argparse.ArgumentParser(prog="embedopt",
                                description="optimization with trained surrogate models embedded")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--model", required=False)
        sp.add_argument("--sense", choices=("min", "max"), default="min")
        sp.add_argument("--formulation", choices=("reduced", "fullspace"), default="fullspace")
        sp.add_argument("--validity", choices=("none", "hull", "penalty"), default="none")
        sp.add_argument("--rho", type=float, default=1.0)
        sp.add_argument("--tau", type=float, default=1e-2)
        sp.add_argument("--data")
        sp.add_argument("--abs-gap", type=float, default=1e-5)
        sp.add_argument("--rel-gap", type=float, default=1e-4)
        sp.add_argument("--node-limit", type=int, default=100000)
        sp.add_argument("--grid", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out")
        sp.add_argument("--dump-graph", help="write the reduced-space node listing (debug)")

    sp = sub.add_parser("evaluate", help="evaluate a model on a points file")
    sp.add_argument("--model", required=True)
    sp.add_argument("--points", required=True)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("solve", help="globally optimize an embedded model")
    common(sp)
    sp.set_defaults(fn=cmd_solve, require_model=True)

    sp = sub.add_parser("compare", help="reduced-space vs full-space comparison")
    common(sp)
    sp.add_argument("--no-assert", action="store_true")
    sp.set_defaults(fn=cmd_compare, require_model=True)

    sp = sub.add_parser("formulate", help="export the full-space MILP as an LP file")
    common(sp)
    sp.set_defaults(fn=cmd_formulate, require_model=True)

    sp = sub.add_parser("bo", help="Bayesian optimization loop")
    sp.add_argument("--objective", required=True,
                    help=f"builtin ({', '.join(sorted(_BUILTINS))}) or model path")
    sp.add_argument("--budget", type=int, default=12)
    sp.add_argument("--init", type=int, default=4)
    sp.add_argument("--node-limit", type=int, default=600)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(fn=cmd_bo)

    return p


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "require_model", False) and not args.model:
        parser.error("--model is required for this command")
    try:
        return args.fn(args)
    except (CliConfigError, ModelError, OutOfDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InvariantError, SimplexBreakdown) as exc:
        print(f"invariant breach: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
