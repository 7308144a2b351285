"""Large-scale polynomial benchmark: exact fitting over a whole interval.

Candidates over the {+, *} operator set are always polynomials, so a tree can
be lowered to a dense coefficient list and the squared fitting error over
[a, b] computed in closed form from the antiderivative of the coefficient
product. The training "set" is the entire interval; one inner product or loss
computation still counts as one traversal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .ftg import FtgResult, run_ftg
from .genomes import Genome, genome_to_poly
from .gp import GpRun, Individual, run_canonical, run_one_plus_lambda
from .hilbert import BudgetMeter
from .trees import ExprTree, NodeKind, OperatorSet

# Lowered candidates above this degree are treated as unusable (infinite loss);
# keeps coefficient arithmetic inside double precision and runs finite.
MAX_DEGREE = 2000

POLY_OPSET = OperatorSet(unary=(), binary=("+", "*"))


class Poly:
    """Polynomial in normal form: dense coefficients, constant term first.

    Trailing exact zeros are trimmed, so the last coefficient is nonzero
    except for the zero polynomial (empty coefficient list). Non-finite
    coefficients mark the polynomial invalid; arithmetic still flows through
    so the flag propagates.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        arr = np.asarray(coeffs, dtype=float).ravel()
        n = arr.size
        while n > 0 and arr[n - 1] == 0.0:
            n -= 1
        arr = arr[:n].copy()
        arr.setflags(write=False)
        self.coeffs = arr

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1  # -1 for the zero polynomial

    @property
    def is_valid(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def __call__(self, x):
        if self.coeffs.size == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.polynomial.polynomial.polyval(x, self.coeffs)

    def __repr__(self):
        return f"Poly({self.coeffs.tolist()})"


def invalid_poly() -> Poly:
    return Poly([math.nan])


def poly_add(p: Poly, q: Poly) -> Poly:
    a, b = p.coeffs, q.coeffs
    if a.size < b.size:
        a, b = b, a
    out = a.copy()
    out[: b.size] += b
    return Poly(out)


def poly_sub(p: Poly, q: Poly) -> Poly:
    n = max(p.coeffs.size, q.coeffs.size)
    out = np.zeros(n)
    out[: p.coeffs.size] = p.coeffs
    out[: q.coeffs.size] -= q.coeffs
    return Poly(out)


def poly_mul(p: Poly, q: Poly) -> Poly:
    if p.coeffs.size == 0 or q.coeffs.size == 0:
        return Poly([])
    with np.errstate(all="ignore"):
        return Poly(np.convolve(p.coeffs, q.coeffs))


def poly_scale(p: Poly, s: float) -> Poly:
    return Poly(p.coeffs * float(s))


def tree_to_poly(tree: ExprTree, max_degree: int | None = None) -> Poly | None:
    """Lower a {+, *} tree over one variable to normal form.

    Returns None as soon as an intermediate exceeds ``max_degree`` (when
    given). Unary operators, other binaries, and variables beyond the first
    coordinate are outside this benchmark's language and raise ValueError.
    """
    vals: list[Poly] = []
    stack: list[tuple[ExprTree, bool]] = [(tree, False)]
    while stack:
        node, ready = stack.pop()
        kind = node.kind
        if kind is NodeKind.CONST:
            vals.append(Poly([node.value]))
        elif kind is NodeKind.VAR:
            if node.value != 0:
                raise ValueError("polynomial lowering is single-variable")
            vals.append(Poly([0.0, 1.0]))
        elif kind is NodeKind.UNARY:
            raise ValueError(f"unary operator {node.value!r} has no polynomial form")
        elif ready:
            rhs = vals.pop()
            if node.value == "+":
                vals[-1] = poly_add(vals[-1], rhs)
            elif node.value == "*":
                vals[-1] = poly_mul(vals[-1], rhs)
            else:
                raise ValueError(f"operator {node.value!r} has no polynomial form")
            if max_degree is not None and vals[-1].degree > max_degree:
                return None
        else:
            stack.append((node, True))
            stack.append((node.children[1], False))
            stack.append((node.children[0], False))
    return vals[0]


def l2_inner(p: Poly, q: Poly, a: float, b: float) -> float:
    """Integral of p*q over [a, b], exactly from the product's coefficients.

    Overflow or invalid coefficients surface as a non-finite return value,
    which callers treat as a rejection.
    """
    prod = poly_mul(p, q)
    if prod.coeffs.size == 0:
        return 0.0
    powers = np.arange(1, prod.coeffs.size + 1, dtype=float)
    with np.errstate(all="ignore"):
        return float(np.sum(prod.coeffs / powers * (b ** powers - a ** powers)))


def span_size(p: Poly) -> int:
    """Number of distinct-degree terms present in normal form."""
    return int(np.count_nonzero(p.coeffs))


@dataclass(frozen=True, eq=False)
class L2Element:
    """A polynomial viewed as an element of the interval's function space."""

    poly: Poly
    lower: float
    upper: float

    def inner(self, other: "L2Element") -> float:
        return l2_inner(self.poly, other.poly, self.lower, self.upper)

    def __add__(self, other: "L2Element") -> "L2Element":
        return L2Element(poly_add(self.poly, other.poly), self.lower, self.upper)

    def __sub__(self, other: "L2Element") -> "L2Element":
        return L2Element(poly_sub(self.poly, other.poly), self.lower, self.upper)

    def __mul__(self, scalar: float) -> "L2Element":
        return L2Element(poly_scale(self.poly, scalar), self.lower, self.upper)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class LspProblem:
    """Fit a target polynomial over the whole interval [lower, upper]."""

    target: Poly
    lower: float = 0.0
    upper: float = 1.0
    opset: OperatorSet = POLY_OPSET

    def __post_init__(self):
        if not self.lower < self.upper:
            raise ValueError("need lower < upper")
        if not self.target.is_valid:
            raise ValueError("target polynomial must be finite")

    @classmethod
    def power_sum(cls, degree: int, lower: float = 0.0, upper: float = 1.0) -> "LspProblem":
        """The benchmark family: target 1 + x + ... + x^degree."""
        return cls(Poly(np.ones(degree + 1)), lower, upper)

    def space(self) -> "L2Space":
        return L2Space(self)

    def genome_evaluator(self, meter: BudgetMeter) -> "LspEvaluator":
        return LspEvaluator(self, meter)


class L2Space:
    def __init__(self, problem: LspProblem):
        self.problem = problem
        self.target = L2Element(problem.target, problem.lower, problem.upper)

    def lift(self, tree: ExprTree) -> L2Element:
        poly = tree_to_poly(tree, max_degree=MAX_DEGREE)
        if poly is None or not poly.is_valid:
            poly = invalid_poly()
        return L2Element(poly, self.problem.lower, self.problem.upper)


class LspEvaluator:
    """Charged genome loss over the interval; remembers the last candidate's shape.

    ``last_span`` and ``last_degree`` describe the most recently evaluated
    genome, letting callers log span without lowering it twice.
    """

    def __init__(self, problem: LspProblem, meter: BudgetMeter):
        self.problem = problem
        self.meter = meter
        self.last_span = 0
        self.last_degree = -1

    def __call__(self, genome: Genome) -> float:
        self.meter.require()
        self.meter.charge()
        try:
            coeffs = genome_to_poly(genome, max_degree=MAX_DEGREE)
        except ValueError:
            coeffs = None
        poly = None if coeffs is None else Poly(coeffs)
        self.last_span = 0 if poly is None else span_size(poly)
        self.last_degree = -1 if poly is None else poly.degree
        return _poly_distance_sq(poly, self.problem)


def lsp_loss(candidate: ExprTree, problem: LspProblem, meter: BudgetMeter) -> float:
    """Exact squared distance between the candidate and the target; 1 traversal.

    Candidates that fail to lower (degree guard, non-finite coefficients)
    score infinite loss.
    """
    meter.require()
    meter.charge()
    return _poly_distance_sq(tree_to_poly(candidate, max_degree=MAX_DEGREE), problem)


def _poly_distance_sq(poly: Poly | None, problem: LspProblem) -> float:
    if poly is None or not poly.is_valid:
        return math.inf
    diff = poly_sub(problem.target, poly)
    value = l2_inner(diff, diff, problem.lower, problem.upper)
    if not math.isfinite(value):
        return math.inf
    return max(value, 0.0)  # squared distance; guard tiny negative round-off


# ---------------------------------------------------------------------------
# per-generation experiment traces


@dataclass(frozen=True)
class LspGenerationRow:
    generation: int
    traversals: int
    best_loss: float
    span: int
    nodes: int
    mean_loss: float | None = None
    mean_nodes: float | None = None


@dataclass
class LspTrace:
    algorithm: str
    degree: int
    rows: list[LspGenerationRow] = field(default_factory=list)
    dual_improvements: int = 0  # evaluations beating best loss with a larger span
    final_loss: float = math.inf
    final_span: int = 0
    traversals: int = 0


class _GpLspTracker:
    """Collects spans, per-generation rows, and the dual-improvement count."""

    def __init__(self, evaluator: LspEvaluator):
        self.evaluator = evaluator
        self.spans: dict[Individual, int] = {}
        self.best_loss = math.inf
        self.best_span = 0
        self.dual = 0
        self.rows: list[LspGenerationRow] = []

    def on_eval(self, ind: Individual) -> None:
        span = self.evaluator.last_span
        self.spans[ind] = span
        if ind.loss < self.best_loss and span > self.best_span:
            self.dual += 1
        if ind.loss < self.best_loss:
            self.best_loss = ind.loss
            self.best_span = span

    def on_generation(self, gen: int, pop: list[Individual], best: Individual) -> None:
        finite = [ind.loss for ind in pop if math.isfinite(ind.loss)]
        self.rows.append(LspGenerationRow(
            generation=gen,
            traversals=self.evaluator.meter.count,
            best_loss=best.loss,
            span=self.spans.get(best, 0),
            nodes=best.size,
            mean_loss=float(np.mean(finite)) if finite else math.inf,
            mean_nodes=float(np.mean([ind.size for ind in pop])),
        ))
        keep = set(pop)
        keep.add(best)
        self.spans = {ind: sp for ind, sp in self.spans.items() if ind in keep}


def run_lsp_experiment(algorithm: str, problem: LspProblem, config,
                       rng: np.random.Generator) -> LspTrace:
    """One run of FTG, (1+lambda)-GP, (1+1)-GP, or canonical GP on the interval.

    The returned trace has one row per generation (for the projection loop,
    per accepted basis extension): best loss so far, span of the best
    candidate (basis size for the projection loop), and its node count.
    """
    degree = problem.target.degree
    trace = LspTrace(algorithm=algorithm, degree=degree)

    if algorithm == "ftg":
        result: FtgResult = run_ftg(problem, config, rng)
        sizes = result.basis_tree_sizes
        for k, (stamp, loss) in enumerate(result.loss_trace, start=1):
            # assembled model: k products of (coefficient, tree) chained by k-1 sums
            nodes = sum(s + 2 for s in sizes[:k]) + (k - 1)
            trace.rows.append(LspGenerationRow(k, stamp, loss, span=k, nodes=nodes))
        trace.dual_improvements = max(result.basis_size - 1, 0)
        trace.final_loss = result.final_loss
        trace.final_span = result.basis_size
        trace.traversals = result.traversals
        return trace

    runner = {"gp11": run_one_plus_lambda, "gp1l": run_one_plus_lambda,
              "canonical": run_canonical}.get(algorithm)
    if runner is None:
        raise ValueError(f"unknown algorithm {algorithm!r}")

    tracker_holder: list[_GpLspTracker] = []

    class _HookedProblem:
        opset = problem.opset

        @staticmethod
        def genome_evaluator(meter: BudgetMeter) -> LspEvaluator:
            evaluator = LspEvaluator(problem, meter)
            tracker_holder.append(_GpLspTracker(evaluator))
            return evaluator

    run: GpRun = runner(
        _HookedProblem, config, rng,
        on_eval=lambda ind: tracker_holder[0].on_eval(ind),
        on_generation=lambda gen, pop, best: tracker_holder[0].on_generation(gen, pop, best),
    )
    tracker = tracker_holder[0]
    trace.rows = tracker.rows
    trace.dual_improvements = tracker.dual
    trace.final_loss = run.best.loss
    trace.final_span = tracker.rows[-1].span if tracker.rows else 0
    trace.traversals = run.traversals
    return trace
