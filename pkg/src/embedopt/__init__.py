"""embedopt: deterministic global optimization with trained ML surrogates embedded.

The package loads trained models from a portable document format (feed-forward
networks, Gaussian processes, tree ensembles, convex region surrogates) and
optimizes over them either in reduced space (explicit expression graphs solved
by spatial branch-and-bound over McCormick relaxations) or in full space (MILP
and lifted-NLP encodings), with a Bayesian-optimization driver on top.
"""

from .bayesopt import BoState, bo_run, bo_step, build_ei_graph, serialize_history
from .encoders import (ann_preactivation_bounds, encode_crs_milp, encode_distance_penalty,
                       encode_fullspace_nlp, encode_hull_validity, encode_relu_milp,
                       encode_tree_milp, ir_to_hybrid, penalized_objective, splice_graph,
                       BigMBounds)
from .globalopt import GlobalSolution, grid_oracle, local_search, solve_global
from .graphs import (ExprGraph, GraphBuilder, GraphEvalError, HybridProblem,
                     embed_reduced_space, eval_graph, eval_graph_batch, grad_graph,
                     nonlinear_variables)
from .intervals import Interval, IntervalDivisionError, interval_apply
from .mccormick import McValue, mc_apply, propagate_intervals, propagate_mccormick, \
    se_kernel_relax
from .milp import MilpSolution, solve_milp
from .models import (ConvexRegionSurrogateModel, Dataset, FeedForwardNetwork,
                     GaussianProcessModel, ModelError, OutOfDomainError, TrainedModel,
                     TreeEnsembleModel, dump_model, eval_ann, eval_crs, eval_gp,
                     eval_model, eval_tree_ensemble, load_model, load_model_file)
from .problem import ProblemIR, export_lp
from .sampling import grid_points, halton
from .simplex import LpSolution, SimplexBreakdown, solve_lp

__version__ = "0.1.0"
