"""The nine classical one-dimensional regression benchmarks.

Each problem samples twenty i.i.d. uniform training points from its domain
per run, so two runs of the same problem see different datasets unless they
share a seed. Targets are plain vectorized callables; the exact closed forms
are listed next to each definition.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

import math

from .genomes import Genome, genome_sse
from .hilbert import BudgetMeter, DataSet, SampleSpace, loss_sum
from .trees import ExprTree, OperatorSet

CONVENTIONAL_OPSET = OperatorSet(unary=("sin", "cos", "ln"), binary=("+", "-", "*", "/"))


def _koza1(x):
    return x**4 + x**3 + x**2 + x


def _koza2(x):
    return x**5 - 2 * x**3 + x


def _koza3(x):
    return x**6 - 2 * x**4 + x**2


def _nguyen3(x):
    return x**5 + x**4 + x**3 + x**2 + x


def _nguyen4(x):
    return x**6 + x**5 + x**4 + x**3 + x**2 + x


def _nguyen5(x):
    return np.sin(x**2) * np.cos(x) - 1


def _nguyen6(x):
    return np.sin(x) + np.sin(x + x**2)


def _nguyen7(x):
    return np.log(x + 1) + np.log(x**2 + 1)


def _nguyen8(x):
    return np.sqrt(x)


@dataclass(frozen=True)
class ProblemSpec:
    """Closed-form target plus its sampling recipe and operator alphabet."""

    name: str
    target: Callable[[np.ndarray], np.ndarray]
    bounds: tuple[float, float]
    index: int                      # stable position used for seed derivation
    n_points: int = 20
    opset: OperatorSet = CONVENTIONAL_OPSET

    def sample(self, rng: np.random.Generator) -> "SampledProblem":
        lo, hi = self.bounds
        points = rng.uniform(lo, hi, size=(self.n_points, 1))
        data = DataSet(points, self.target(points[:, 0]), (self.bounds,))
        return SampledProblem(self.name, data, self.opset)


_TABLE = [
    ("koza1", _koza1, (-1.0, 1.0)),
    ("koza2", _koza2, (-1.0, 1.0)),
    ("koza3", _koza3, (-1.0, 1.0)),
    ("nguyen3", _nguyen3, (-1.0, 1.0)),
    ("nguyen4", _nguyen4, (-1.0, 1.0)),
    ("nguyen5", _nguyen5, (-1.0, 1.0)),
    ("nguyen6", _nguyen6, (-1.0, 1.0)),
    ("nguyen7", _nguyen7, (0.0, 2.0)),
    ("nguyen8", _nguyen8, (0.0, 4.0)),
]


def load_problems() -> list[ProblemSpec]:
    """All nine problem definitions, in their canonical order."""
    return [ProblemSpec(name, fn, bounds, index=i)
            for i, (name, fn, bounds) in enumerate(_TABLE)]


def problem_by_name(name: str) -> ProblemSpec:
    for spec in load_problems():
        if spec.name == name:
            return spec
    raise KeyError(f"unknown problem {name!r}")


@dataclass(frozen=True, eq=False)
class SampledProblem:
    """A concrete instance: one drawn dataset plus the operator alphabet."""

    name: str
    data: DataSet
    opset: OperatorSet

    def space(self) -> SampleSpace:
        return SampleSpace(self.data)

    def loss_fn(self, meter: BudgetMeter) -> Callable[[ExprTree], float]:
        return lambda tree: loss_sum(tree, self.data, meter)

    def genome_evaluator(self, meter: BudgetMeter) -> Callable[[Genome], float]:
        """Charged sum-of-squared-errors over flat genomes (one traversal each)."""
        points, targets = self.data.points, self.data.targets

        def evaluate(genome: Genome) -> float:
            meter.require()
            meter.charge()
            total = genome_sse(genome, points, targets)
            return total if math.isfinite(total) else math.inf

        return evaluate
