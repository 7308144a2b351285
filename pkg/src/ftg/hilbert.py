"""Training sets and the finite-dimensional space of function values on them.

Functions that agree on every training point are interchangeable for fitting
purposes, so a function is represented by its vector of values on the training
set. The dot product of two such vectors is the inner product of the space,
and one pass over the training set (an inner product, a loss computation, or a
standalone tree evaluation) costs one unit of the run budget.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
import numpy as np

from .genomes import encode_tree, eval_genome
from .trees import ExprTree, eval_tree_batch


class BudgetExhausted(RuntimeError):
    """Raised when a charged operation is requested after the budget ran out."""


@dataclass
class BudgetMeter:
    """Counts dataset traversals against a cap.

    The count only grows. Operations charge themselves and may finish past the
    cap; callers check :attr:`exhausted` between steps and stop after the
    increment that crossed the limit.
    """

    limit: float
    count: int = 0

    def charge(self, n: int = 1) -> None:
        self.count += n

    @property
    def exhausted(self) -> bool:
        return self.count >= self.limit

    def require(self) -> None:
        if self.exhausted:
            raise BudgetExhausted(f"budget of {self.limit} traversals is spent")


@dataclass(frozen=True, eq=False)
class DataSet:
    """Ordered training points with their target values and domain bounds."""

    points: np.ndarray  # (N, n)
    targets: np.ndarray  # (N,)
    bounds: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        tgt = np.asarray(self.targets, dtype=float).ravel()
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if pts.shape[0] != tgt.shape[0] or pts.shape[0] < 1:
            raise ValueError("need equally many points and targets, at least one each")
        if pts.shape[1] != len(bounds):
            raise ValueError("one bounds pair per coordinate is required")
        for j, (lo, hi) in enumerate(bounds):
            if lo > hi:
                raise ValueError(f"empty bounds for coordinate {j}")
            if np.any(pts[:, j] < lo) or np.any(pts[:, j] > hi):
                raise ValueError(f"points leave the domain in coordinate {j}")
        pts.setflags(write=False)
        tgt.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "targets", tgt)
        object.__setattr__(self, "bounds", bounds)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass(frozen=True, eq=False)
class EvalVector:
    """A function's values on the training set; one representative per class.

    Supports the vector-space operations and the raw (uncharged) inner
    product; budgeted access goes through :func:`inner` and friends.
    """

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.shape[0]

    def inner(self, other: "EvalVector") -> float:
        if len(self) != len(other):
            raise ValueError("vectors from different training sets")
        return float(self.values @ other.values)

    def __add__(self, other: "EvalVector") -> "EvalVector":
        return EvalVector(self.values + other.values)

    def __sub__(self, other: "EvalVector") -> "EvalVector":
        return EvalVector(self.values - other.values)

    def __mul__(self, scalar: float) -> "EvalVector":
        return EvalVector(self.values * float(scalar))

    __rmul__ = __mul__


def evaluate_class(tree: ExprTree, data: DataSet, meter: BudgetMeter | None = None) -> EvalVector:
    """Values of ``tree`` on all training points; one traversal when metered.

    Pass ``meter=None`` for derived computations whose cost is charged
    elsewhere (e.g. as part of a fused inner product). Uses the compiled
    postorder evaluator, which matches :func:`ftg.trees.eval_tree_batch`
    operation for operation.
    """
    if meter is not None:
        meter.require()
        meter.charge()
    return EvalVector(eval_genome(encode_tree(tree), data.points))


def inner(u, v, meter: BudgetMeter) -> float:
    """Charged inner product; works for any elements exposing ``.inner``."""
    meter.require()
    meter.charge()
    return u.inner(v)


def sq_distance(u, v, meter: BudgetMeter) -> float:
    """Charged squared distance between two elements; non-finite maps to inf."""
    meter.require()
    meter.charge()
    diff = u - v
    value = diff.inner(diff)
    return value if math.isfinite(value) else math.inf


def loss_sum(tree: ExprTree, data: DataSet, meter: BudgetMeter) -> float:
    """Sum of squared errors of ``tree`` against the targets; one traversal.

    Non-finite tree outputs make the loss infinite, which ranks such trees
    behind every finite candidate.
    """
    meter.require()
    meter.charge()
    values = eval_tree_batch(tree, data.points)
    total = float(np.sum((data.targets - values) ** 2))
    return total if math.isfinite(total) else math.inf


class SampleSpace:
    """Bundles one dataset's target vector with the tree-lifting map."""

    def __init__(self, data: DataSet):
        self.data = data
        self.target = EvalVector(data.targets)

    def lift(self, tree: ExprTree) -> EvalVector:
        return evaluate_class(tree, self.data)


def write_dataset_csv(data: DataSet, path) -> None:
    """Snapshot of the training set: one x column per coordinate plus target."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{j}" for j in range(data.dim)] + ["target"])
        for row, t in zip(data.points, data.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(t))])
