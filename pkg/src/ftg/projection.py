"""Least-squares projection onto a growing basis in an inner-product space.

The machinery is generic over the element type: anything with an ``inner``
method and the vector-space operators works, be it a vector of training-set
values or a polynomial under an integral inner product. The system matrix of
pairwise inner products is inverted from scratch with an SVD at every
extension, and the inverse is only accepted when the product with the original
matrix reproduces the identity entrywise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .hilbert import BudgetMeter
from .trees import ExprTree


@dataclass
class GramState:
    """A basis, its matrix of pairwise inner products, and the solved fit.

    ``gram_inv``, ``alpha`` and ``cond_estimate`` stay ``None`` on candidate
    states produced by :func:`extend_gram` until the inversion check passes.
    """

    trees: list[ExprTree | None] = field(default_factory=list)
    elements: list[Any] = field(default_factory=list)
    gram: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gram_inv: np.ndarray | None = None
    alpha: np.ndarray | None = None
    cond_estimate: float | None = None

    @property
    def size(self) -> int:
        return len(self.elements)

    def combination(self):
        """The current fit, as an element: sum of alpha[i] * basis[i]."""
        if self.alpha is None:
            raise ValueError("no solved coefficients on this state")
        acc = float(self.alpha[0]) * self.elements[0]
        for a, e in zip(self.alpha[1:], self.elements[1:]):
            acc = acc + float(a) * e
        return acc


def extend_gram(state: GramState, element, target, meter: BudgetMeter,
                tree: ExprTree | None = None) -> GramState:
    """Candidate state with ``element`` appended to the basis.

    Adding the new row and column costs 2k - 1 inner products for the new
    size k, plus one more for the right-hand-side entry against the target;
    the meter is charged 2k in total. Acceptance is decided separately by
    :func:`invert_checked`.
    """
    k = state.size + 1
    new_col = np.array([element.inner(b) for b in state.elements] + [element.inner(element)])
    meter.charge(2 * k - 1)
    rhs_entry = target.inner(element)
    meter.charge(1)

    gram = np.zeros((k, k))
    gram[: k - 1, : k - 1] = state.gram
    gram[k - 1, :] = new_col
    gram[:, k - 1] = new_col
    rhs = np.append(state.rhs, rhs_entry)
    return GramState(state.trees + [tree], state.elements + [element], gram, rhs)


def invert_checked(gram: np.ndarray, tol: float) -> tuple[np.ndarray | None, float]:
    """SVD inverse of ``gram``, or None when the identity test fails.

    Returns ``(inverse_or_None, cond_estimate)`` where the condition estimate
    is the ratio of the extreme singular values. The inverse is accepted only
    if every entry of ``gram @ inverse`` is within ``tol`` of the identity
    matrix. There is no singular-value clipping: rank-deficient or wildly
    ill-conditioned matrices simply fail the entrywise test.
    """
    gram = np.asarray(gram, dtype=float)
    if not np.all(np.isfinite(gram)):
        return None, math.inf
    try:
        u, s, vt = np.linalg.svd(gram)
    except np.linalg.LinAlgError:
        return None, math.inf
    if s.size == 0:
        return None, math.inf
    cond = float(s[0] / s[-1]) if s[-1] > 0 else math.inf
    with np.errstate(all="ignore"):
        inv = (vt.T / s) @ u.T
    if not np.all(np.isfinite(inv)):
        return None, cond
    err = float(np.max(np.abs(gram @ inv - np.eye(gram.shape[0]))))
    if err < tol:
        return inv, cond
    return None, cond


def solve_coefficients(state: GramState) -> np.ndarray:
    """Projection coefficients from the checked inverse: gram_inv @ rhs."""
    if state.gram_inv is None:
        raise ValueError("state has no checked inverse")
    return state.gram_inv @ state.rhs
