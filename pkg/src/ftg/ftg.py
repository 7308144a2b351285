"""Fourier Tree Growing: least-squares regression onto a randomly grown basis.

The loop seeds the basis with the constant function 1, then repeatedly draws
random operator compositions and keeps only those that carry new information:
a candidate must have a residual inner product above the dependence threshold,
and the extended system matrix must pass the checked SVD inversion. Every
accepted element strictly reduces the fitting loss, so the loss trace is a
strictly decreasing sequence until exact fit or budget exhaustion.

Budget accounting, in traversals of the training set: seeding the constant
basis costs 2 (its self inner product and the target projection), every loss
check costs 1, every candidate's dependence test costs 1, and every extension
of the k-element system costs 2k (new row and column plus the new target
entry). Rejected inversions keep their 2k charge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hilbert import BudgetMeter
from .projection import GramState, extend_gram, invert_checked, solve_coefficients
from .trees import ExprTree, GenParams, binary, const, generate_composition, tree_size

# Floating point never hits an exact zero loss; below every tolerance of interest.
ZERO_LOSS = 1e-14


@dataclass(frozen=True)
class FtgConfig:
    inverse_tol: float = 1e-4      # entrywise identity tolerance of the SVD inverse
    dependence_tol: float = 1e-3   # residual inner products at or below count as zero
    gen: GenParams = GenParams(0.5, 1, 9)
    budget: float = 100_000

    def __post_init__(self):
        if self.inverse_tol <= 0 or self.dependence_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.budget < 3:
            raise ValueError("budget must allow at least the opening 3 traversals")


@dataclass(frozen=True)
class ExtensionEvent:
    """One attempted basis extension: target size, conditioning, verdict."""

    basis_size: int
    cond_estimate: float
    accepted: bool
    traversals: int


@dataclass
class FtgResult:
    model: ExprTree
    loss_trace: list[tuple[int, float]]  # (traversal stamp, sum of squared errors)
    basis_size: int
    termination: str                     # "converged" or "budget"
    traversals: int
    final_loss: float
    basis_tree_sizes: list[int] = field(default_factory=list)
    events: list[ExtensionEvent] = field(default_factory=list)
    dependence_tests: int = 0


def independence_test(residual, candidate, tol: float, meter: BudgetMeter) -> bool:
    """True when the candidate is not orthogonal to the residual (one traversal).

    A candidate inside the span of the current basis is orthogonal to the
    residual, so this filters linearly dependent draws; values whose magnitude
    does not exceed ``tol`` count as zero. NaN inner products (from non-finite
    candidates) fail the test.
    """
    meter.charge()
    value = residual.inner(candidate)
    return abs(value) > tol


def assemble_model(basis_trees: list[ExprTree], alpha) -> ExprTree:
    """Right-leaning sum tree of the weighted basis: a1*v1 + (a2*v2 + ...)."""
    if len(basis_trees) != len(alpha):
        raise ValueError("one coefficient per basis tree is required")
    terms = [binary("*", const(float(a)), t) for a, t in zip(alpha, basis_trees)]
    model = terms[-1]
    for term in reversed(terms[:-1]):
        model = binary("+", term, model)
    return model


def run_ftg(problem, config: FtgConfig, rng: np.random.Generator,
            stop_loss: float | None = None) -> FtgResult:
    """Run the projection loop on ``problem`` until exact fit or budget end.

    ``problem`` must expose ``opset`` and a ``space()`` factory whose result
    has a ``target`` element and a ``lift(tree)`` map into the same space.
    On budget exhaustion the last accepted fit is returned. ``stop_loss``
    optionally ends the run early once the measured loss falls below it,
    which leaves all earlier first-hitting stamps untouched.
    """
    meter = BudgetMeter(config.budget)
    space = problem.space()
    target = space.target
    events: list[ExtensionEvent] = []
    trace: list[tuple[int, float]] = []
    dependence_tests = 0

    # Seed the basis with the constant function 1; its projection always exists.
    seed_tree = const(1.0)
    state = extend_gram(GramState(), space.lift(seed_tree), target, meter, tree=seed_tree)
    inv, cond = invert_checked(state.gram, config.inverse_tol)
    events.append(ExtensionEvent(1, cond, inv is not None, meter.count))
    state.gram_inv, state.cond_estimate = inv, cond
    state.alpha = solve_coefficients(state)
    residual = target - state.combination()

    termination = "budget"
    while True:
        if meter.exhausted:
            break
        meter.charge()  # loss check of the current fit
        loss = residual.inner(residual)
        loss = loss if math.isfinite(loss) else math.inf
        trace.append((meter.count, loss))
        if loss < ZERO_LOSS:
            termination = "converged"
            break
        if stop_loss is not None and loss < stop_loss:
            termination = "stopped"
            break
        if meter.exhausted:
            break

        k = state.size + 1
        stop = False
        while True:
            candidate_tree = generate_composition(problem.opset, config.gen, rng)
            candidate = space.lift(candidate_tree)
            passes = independence_test(residual, candidate, config.dependence_tol, meter)
            dependence_tests += 1
            if meter.exhausted:
                stop = True
                break
            if not passes:
                continue
            trial = extend_gram(state, candidate, target, meter, tree=candidate_tree)
            inv, cond = invert_checked(trial.gram, config.inverse_tol)
            events.append(ExtensionEvent(k, cond, inv is not None, meter.count))
            if inv is None:
                if meter.exhausted:
                    stop = True
                    break
                continue
            trial.gram_inv, trial.cond_estimate = inv, cond
            trial.alpha = solve_coefficients(trial)
            state = trial
            residual = target - state.combination()
            break
        if stop:
            break

    model = assemble_model([t for t in state.trees], state.alpha)
    final_loss = residual.inner(residual)
    final_loss = final_loss if math.isfinite(final_loss) else math.inf
    return FtgResult(
        model=model,
        loss_trace=trace,
        basis_size=state.size,
        termination=termination,
        traversals=meter.count,
        final_loss=final_loss,
        basis_tree_sizes=[tree_size(t) for t in state.trees],
        events=events,
        dependence_tests=dependence_tests,
    )
