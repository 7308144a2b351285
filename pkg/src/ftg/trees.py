"""Expression trees over configurable elementary operator sets.

Trees are immutable values: variation operators return new trees and share
unmodified subtrees structurally, so copies are free and trees can be passed
between threads. All traversals are iterative, because evolved trees can get
deep enough to blow the interpreter recursion limit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

# |denominator| at or below this makes division return 1 instead of dividing.
DIV_GUARD = 1e-12


def _protected_div(a, b):
    mask = np.abs(b) <= DIV_GUARD
    return np.where(mask, 1.0, np.asarray(a) / np.where(mask, 1.0, b))


def _protected_ln(a):
    # ln of the magnitude, with ln(0) pinned to 0; non-finite inputs propagate.
    mag = np.abs(a)
    zero = mag == 0
    return np.where(zero, 0.0, np.log(np.where(zero, 1.0, mag)))


UNARY_OPS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "ln": _protected_ln,
}

BINARY_OPS: dict[str, Callable] = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": _protected_div,
}


class NodeKind(enum.Enum):
    CONST = "const"
    VAR = "var"
    UNARY = "unary"
    BINARY = "binary"


_ARITY = {NodeKind.CONST: 0, NodeKind.VAR: 0, NodeKind.UNARY: 1, NodeKind.BINARY: 2}


@dataclass(frozen=True, eq=False, slots=True)
class ExprTree:
    """One node of an expression tree; the root node stands for the tree.

    ``value`` holds the constant for CONST nodes, the input-coordinate index
    for VAR nodes, and the operator name for UNARY/BINARY nodes. Equality and
    hashing are by identity so that immutable subtrees can be shared and used
    as dictionary keys cheaply; compare structures via :func:`to_sexpr`.
    """

    kind: NodeKind
    value: float | int | str
    children: tuple["ExprTree", ...] = ()

    def __post_init__(self):
        if len(self.children) != _ARITY[self.kind]:
            raise ValueError(f"{self.kind.value} node takes {_ARITY[self.kind]} children")
        if self.kind is NodeKind.VAR and (not isinstance(self.value, int) or self.value < 0):
            raise ValueError("variable index must be a non-negative int")
        if self.kind is NodeKind.UNARY and self.value not in UNARY_OPS:
            raise ValueError(f"unknown unary operator {self.value!r}")
        if self.kind is NodeKind.BINARY and self.value not in BINARY_OPS:
            raise ValueError(f"unknown binary operator {self.value!r}")


def const(value: float) -> ExprTree:
    return ExprTree(NodeKind.CONST, float(value))


def var(index: int) -> ExprTree:
    return ExprTree(NodeKind.VAR, index)


def unary(op: str, child: ExprTree) -> ExprTree:
    return ExprTree(NodeKind.UNARY, op, (child,))


def binary(op: str, lhs: ExprTree, rhs: ExprTree) -> ExprTree:
    return ExprTree(NodeKind.BINARY, op, (lhs, rhs))


@dataclass(frozen=True)
class OperatorSet:
    """Named elementary operators plus the terminal alphabet.

    ``arity`` is the dimension of the input domain (one coordinate projector
    per dimension); constants are ephemeral, drawn uniformly from
    ``const_range`` at generation time.
    """

    unary: tuple[str, ...]
    binary: tuple[str, ...]
    arity: int = 1
    const_range: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "unary", tuple(sorted(set(self.unary))))
        object.__setattr__(self, "binary", tuple(sorted(set(self.binary))))
        unknown = [o for o in self.unary if o not in UNARY_OPS]
        unknown += [o for o in self.binary if o not in BINARY_OPS]
        if unknown:
            raise ValueError(f"operators without semantics: {unknown}")
        if not self.binary:
            raise ValueError("binary operator set must be non-empty")
        if self.arity < 1:
            raise ValueError("domain dimension must be at least 1")
        lo, hi = self.const_range
        if not lo <= hi:
            raise ValueError("constant range is empty")

    @property
    def internal_ops(self) -> tuple[str, ...]:
        """Unary and binary names in one fixed order, for uniform draws."""
        return self.unary + self.binary


@dataclass(frozen=True)
class GenParams:
    """Knobs of the ramped half-and-half composition generator.

    ``min_depth``/``max_depth`` bound the operator nesting; ``internal_prob``
    is the chance of drawing an operator in the ramp zone when the grow
    flavour is active.
    """

    internal_prob: float = 0.5
    min_depth: int = 1
    max_depth: int = 9

    def __post_init__(self):
        if not 0.0 <= self.internal_prob <= 1.0:
            raise ValueError("internal_prob must lie in [0, 1]")
        if not 1 <= self.min_depth <= self.max_depth:
            raise ValueError("need 1 <= min_depth <= max_depth")


# ---------------------------------------------------------------------------
# evaluation


def eval_tree_batch(tree: ExprTree, points: np.ndarray) -> np.ndarray:
    """Evaluate ``tree`` on every row of ``points`` (shape (N, n)).

    Total on all real inputs: division by (near) zero yields 1, ln acts on the
    magnitude with ln(0) = 0, and any non-finite intermediate propagates to a
    non-finite entry instead of raising.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array, one row per point")
    vals: list = []
    stack: list[tuple[ExprTree, bool]] = [(tree, False)]
    u_ops, b_ops = UNARY_OPS, BINARY_OPS
    with np.errstate(all="ignore"):
        while stack:
            node, ready = stack.pop()
            kind = node.kind
            if kind is NodeKind.CONST:
                vals.append(node.value)
            elif kind is NodeKind.VAR:
                vals.append(points[:, node.value])
            elif ready:
                if kind is NodeKind.UNARY:
                    vals[-1] = u_ops[node.value](vals[-1])
                else:
                    rhs = vals.pop()
                    vals[-1] = b_ops[node.value](vals[-1], rhs)
            else:
                stack.append((node, True))
                stack.append((node.children[-1], False))
                if kind is NodeKind.BINARY:
                    stack.append((node.children[0], False))
    out = vals[0]
    if np.ndim(out) == 0:  # constant-only tree
        return np.full(points.shape[0], float(out))
    return np.asarray(out, dtype=float)


def eval_tree(tree: ExprTree, x) -> float:
    """Evaluate ``tree`` at a single point (scalar or length-n sequence)."""
    pt = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, -1)
    return float(eval_tree_batch(tree, pt)[0])


# ---------------------------------------------------------------------------
# structure


def iter_nodes(tree: ExprTree) -> Iterator[ExprTree]:
    """Yield every node in preorder (root first, children left to right)."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def tree_size(tree: ExprTree) -> int:
    return sum(1 for _ in iter_nodes(tree))


def tree_depth(tree: ExprTree) -> int:
    """Maximum number of edges from the root down to any leaf."""
    deepest = 0
    stack = [(tree, 0)]
    while stack:
        node, d = stack.pop()
        if node.children:
            for child in node.children:
                stack.append((child, d + 1))
        elif d > deepest:
            deepest = d
    return deepest


def subtree_at(tree: ExprTree, index: int) -> ExprTree:
    """Return the subtree rooted at the ``index``-th node in preorder."""
    for i, node in enumerate(iter_nodes(tree)):
        if i == index:
            return node
    raise ValueError(f"stale subtree handle {index} for a tree of size {i + 1}")


def random_subtree(tree: ExprTree, rng: np.random.Generator) -> int:
    """Pick a node handle uniformly over all nodes of the tree."""
    return int(rng.integers(tree_size(tree)))


def replace_subtree(tree: ExprTree, index: int, replacement: ExprTree) -> ExprTree:
    """Rebuild ``tree`` with the node at preorder ``index`` swapped out.

    The input trees are untouched; the result shares every subtree off the
    path from the root to the replaced node.
    """
    if index == 0:
        return replacement
    path = _path_to(tree, index)
    current = replacement
    for parent, slot in reversed(path):
        kids = list(parent.children)
        kids[slot] = current
        current = ExprTree(parent.kind, parent.value, tuple(kids))
    return current


def _path_to(tree: ExprTree, index: int) -> list[tuple[ExprTree, int]]:
    # Preorder walk recording parent links until the target index is reached.
    nodes: list[ExprTree] = []
    parents: list[int] = []
    slots: list[int] = []
    stack: list[tuple[ExprTree, int, int]] = [(tree, -1, -1)]
    while stack:
        node, parent_idx, slot = stack.pop()
        me = len(nodes)
        nodes.append(node)
        parents.append(parent_idx)
        slots.append(slot)
        if me == index:
            path = []
            while parent_idx != -1:
                path.append((nodes[parent_idx], slot))
                slot = slots[parent_idx]
                parent_idx = parents[parent_idx]
            path.reverse()
            return path
        for pos in range(len(node.children) - 1, -1, -1):
            stack.append((node.children[pos], me, pos))
    raise ValueError(f"stale subtree handle {index} for a tree of size {len(nodes)}")


def subtree_crossover(a: ExprTree, b: ExprTree, rng: np.random.Generator) -> ExprTree:
    """Child of ``a`` with a uniform subtree replaced by a uniform subtree of ``b``.

    Draw order: the slot in ``a`` first, then the donor in ``b``.
    """
    target = random_subtree(a, rng)
    donor = subtree_at(b, random_subtree(b, rng))
    return replace_subtree(a, target, donor)


# ---------------------------------------------------------------------------
# ramped half-and-half generation


def generate_composition(
    opset: OperatorSet, params: GenParams, rng: np.random.Generator
) -> ExprTree:
    """Draw a random composition of elementary operators.

    Per call, a flavour is tossed between grow (operator probability
    ``internal_prob`` in the ramp zone) and full (operator probability 1), and
    a nesting cap is drawn uniformly from ``min_depth..max_depth``. Slots are
    then filled breadth-first: depths below ``min_depth`` always receive an
    operator, depths at or beyond the cap always receive a terminal, and the
    zone in between is ruled by the flavour. Terminals pick coordinate versus
    constant with a fair coin, then uniformly within the chosen group.
    """
    p_eff = params.internal_prob if rng.random() < 0.5 else 1.0
    cap = int(rng.integers(params.min_depth, params.max_depth + 1))

    syms: list = [_draw_symbol(opset, p_eff, 0, params.min_depth, cap, rng)]
    depths = [0]
    child_ids: list[list[int]] = [[]]
    unary_names = frozenset(opset.unary)
    i = 0
    while i < len(syms):
        sym = syms[i]
        if isinstance(sym, str):
            d = depths[i] + 1
            n_kids = 1 if sym in unary_names else 2
            for _ in range(n_kids):
                child_ids[i].append(len(syms))
                syms.append(_draw_symbol(opset, p_eff, d, params.min_depth, cap, rng))
                depths.append(d)
                child_ids.append([])
        i += 1

    # Children always carry larger slot ids, so one reverse pass builds bottom-up.
    built: list[ExprTree | None] = [None] * len(syms)
    for idx in range(len(syms) - 1, -1, -1):
        sym = syms[idx]
        if isinstance(sym, str):
            kind = NodeKind.UNARY if sym in unary_names else NodeKind.BINARY
            built[idx] = ExprTree(kind, sym, tuple(built[c] for c in child_ids[idx]))
        else:
            built[idx] = sym
    return built[0]


def _draw_symbol(opset, p_eff, depth, min_depth, cap, rng):
    # Returns an operator name (str) or a finished terminal leaf.
    if depth < min_depth:
        internal = True
    elif depth < cap:
        internal = rng.random() < p_eff
    else:
        internal = False
    if internal:
        ops = opset.internal_ops
        return ops[int(rng.integers(len(ops)))]
    if rng.random() < 0.5:
        return var(int(rng.integers(opset.arity)))
    lo, hi = opset.const_range
    return const(float(rng.uniform(lo, hi)))


# ---------------------------------------------------------------------------
# s-expression serialization


def to_sexpr(tree: ExprTree) -> str:
    """Canonical text form, e.g. ``(+ (sin x0) 0.5)``; round-trippable."""
    parts: list[str] = []
    stack: list = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
        elif item.kind is NodeKind.CONST:
            parts.append(repr(item.value))
        elif item.kind is NodeKind.VAR:
            parts.append(f"x{item.value}")
        else:
            parts.append(f"({item.value}")
            stack.append(")")
            stack.extend(reversed(item.children))
    # Closing parens were emitted as standalone tokens; glue them back.
    return " ".join(parts).replace(" )", ")")


def parse_sexpr(text: str) -> ExprTree:
    """Inverse of :func:`to_sexpr`."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise ValueError("empty s-expression")
    stack: list[list] = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) < 2:
                raise ValueError("unbalanced ')'")
            group = stack.pop()
            if len(group) < 2 or not isinstance(group[0], str):
                raise ValueError("operator group needs an operator and arguments")
            name, args = group[0], group[1:]
            if name in UNARY_OPS and len(args) == 1:
                node = unary(name, args[0])
            elif name in BINARY_OPS and len(args) == 2:
                node = binary(name, args[0], args[1])
            else:
                raise ValueError(f"bad operator application: {name} with {len(args)} args")
            stack[-1].append(node)
        elif len(stack) > 1 and not stack[-1]:
            stack[-1].append(tok)  # operator-name position
        else:
            stack[-1].append(_parse_leaf(tok))
    if len(stack) != 1 or len(stack[0]) != 1 or not isinstance(stack[0][0], ExprTree):
        raise ValueError("malformed s-expression")
    return stack[0][0]


def _parse_leaf(token: str) -> ExprTree:
    if token.startswith("x") and token[1:].isdigit():
        return var(int(token[1:]))
    try:
        return const(float(token))
    except ValueError:
        raise ValueError(f"unrecognized token {token!r}") from None
