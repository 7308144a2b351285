"""Symbolic regression by projection onto randomly grown function bases."""

from .benchmarks import CONVENTIONAL_OPSET, ProblemSpec, SampledProblem, load_problems
from .ftg import FtgConfig, FtgResult, assemble_model, independence_test, run_ftg
from .gp import GpConfig, GpRun, Individual, run_canonical, run_one_plus_lambda, \
    tournament_select
from .harness import AggregateStats, RunRecord, TOLERANCES, aggregate, emit, \
    first_hits, heatmap_delta, run_single, run_sweep
from .hilbert import BudgetExhausted, BudgetMeter, DataSet, EvalVector, SampleSpace, \
    evaluate_class, inner, loss_sum, sq_distance
from .lsp import L2Element, LspProblem, Poly, l2_inner, lsp_loss, poly_add, poly_mul, \
    poly_sub, run_lsp_experiment, span_size, tree_to_poly
from .projection import GramState, extend_gram, invert_checked, solve_coefficients
from .trees import ExprTree, GenParams, NodeKind, OperatorSet, binary, const, \
    eval_tree, eval_tree_batch, generate_composition, parse_sexpr, random_subtree, \
    replace_subtree, subtree_at, subtree_crossover, to_sexpr, tree_depth, tree_size, \
    unary, var

__version__ = "0.1.0"
