"""Flat postorder genomes: the fast internal representation for evolution.

Node trees are the public genotype, but evolving populations whose trees grow
into the thousands of nodes needs cheaper machinery than per-node Python
dispatch. A genome stores a tree in postorder as two parallel arrays (opcode,
payload); evaluation is one compiled scan over the arrays, and subtree
replacement is an array splice because a subtree occupies a contiguous
postorder range. Encoding and decoding are exact inverses, and the compiled
evaluator applies the same protected semantics as the tree walker (division,
logarithm, non-finite propagation); transcendentals may differ from numpy's
vectorized ones by an ulp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .trees import DIV_GUARD, ExprTree, NodeKind, binary, const, unary, var

OP_CONST = 0
OP_VAR = 1
OP_SIN = 2
OP_COS = 3
OP_LN = 4
OP_ADD = 5
OP_SUB = 6
OP_MUL = 7
OP_DIV = 8

_UNARY_CODE = {"sin": OP_SIN, "cos": OP_COS, "ln": OP_LN}
_BINARY_CODE = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}
_UNARY_NAME = {v: k for k, v in _UNARY_CODE.items()}
_BINARY_NAME = {v: k for k, v in _BINARY_CODE.items()}


@dataclass(frozen=True, eq=False)
class Genome:
    """Postorder opcode/payload arrays; payload is the constant or var index."""

    ops: np.ndarray   # int16
    args: np.ndarray  # float64

    def __len__(self) -> int:
        return self.ops.shape[0]


def encode_tree(tree: ExprTree) -> Genome:
    ops = np.empty(_count(tree), dtype=np.int16)
    args = np.zeros(ops.shape[0], dtype=np.float64)
    pos = ops.shape[0]
    stack = [tree]
    # reverse-postorder fill: pop parents first, children land before them
    while stack:
        node = stack.pop()
        pos -= 1
        kind = node.kind
        if kind is NodeKind.CONST:
            ops[pos] = OP_CONST
            args[pos] = node.value
        elif kind is NodeKind.VAR:
            ops[pos] = OP_VAR
            args[pos] = node.value
        elif kind is NodeKind.UNARY:
            ops[pos] = _UNARY_CODE[node.value]
            stack.append(node.children[0])
        else:
            ops[pos] = _BINARY_CODE[node.value]
            stack.append(node.children[0])
            stack.append(node.children[1])
    ops.setflags(write=False)
    args.setflags(write=False)
    return Genome(ops, args)


def _count(tree: ExprTree) -> int:
    n = 0
    stack = [tree]
    while stack:
        node = stack.pop()
        n += 1
        stack.extend(node.children)
    return n


def decode_genome(genome: Genome) -> ExprTree:
    stack: list[ExprTree] = []
    for op, arg in zip(genome.ops, genome.args):
        if op == OP_CONST:
            stack.append(const(float(arg)))
        elif op == OP_VAR:
            stack.append(var(int(arg)))
        elif op <= OP_LN:
            stack.append(unary(_UNARY_NAME[op], stack.pop()))
        else:
            rhs = stack.pop()
            stack.append(binary(_BINARY_NAME[op], stack.pop(), rhs))
    if len(stack) != 1:
        raise ValueError("malformed genome")
    return stack[0]


@nb.njit(cache=True)
def _eval_kernel(ops, args, points):  # pragma: no cover - exercised via wrappers
    n_nodes = ops.shape[0]
    n_pts = points.shape[0]
    depth = 0
    max_depth = 1
    for i in range(n_nodes):
        op = ops[i]
        if op <= OP_VAR:
            depth += 1
        elif op >= OP_ADD:
            depth -= 1
        if depth > max_depth:
            max_depth = depth
    stack = np.empty((max_depth, n_pts))
    top = -1
    for i in range(n_nodes):
        op = ops[i]
        if op == OP_CONST:
            top += 1
            v = args[i]
            for j in range(n_pts):
                stack[top, j] = v
        elif op == OP_VAR:
            top += 1
            col = int(args[i])
            for j in range(n_pts):
                stack[top, j] = points[j, col]
        elif op == OP_SIN:
            for j in range(n_pts):
                stack[top, j] = np.sin(stack[top, j])
        elif op == OP_COS:
            for j in range(n_pts):
                stack[top, j] = np.cos(stack[top, j])
        elif op == OP_LN:
            for j in range(n_pts):
                a = abs(stack[top, j])
                # a == 0 pins ln(0) to 0; NaN fails the comparison and propagates
                stack[top, j] = 0.0 if a == 0.0 else np.log(a)
        elif op == OP_ADD:
            top -= 1
            for j in range(n_pts):
                stack[top, j] = stack[top, j] + stack[top + 1, j]
        elif op == OP_SUB:
            top -= 1
            for j in range(n_pts):
                stack[top, j] = stack[top, j] - stack[top + 1, j]
        elif op == OP_MUL:
            top -= 1
            for j in range(n_pts):
                stack[top, j] = stack[top, j] * stack[top + 1, j]
        else:
            top -= 1
            for j in range(n_pts):
                b = stack[top + 1, j]
                stack[top, j] = 1.0 if abs(b) <= DIV_GUARD else stack[top, j] / b
    out = np.empty(n_pts)
    for j in range(n_pts):
        out[j] = stack[0, j]
    return out


@nb.njit(cache=True)
def _sse_kernel(ops, args, points, targets):  # pragma: no cover
    vals = _eval_kernel(ops, args, points)
    total = 0.0
    for j in range(targets.shape[0]):
        d = targets[j] - vals[j]
        total += d * d
    return total


@nb.njit(cache=True)
def _span_starts(ops):  # pragma: no cover
    """sizes[i] = node count of the subtree rooted at postorder index i."""
    n = ops.shape[0]
    sizes = np.empty(n, dtype=np.int64)
    for i in range(n):
        op = ops[i]
        if op <= OP_VAR:
            sizes[i] = 1
        elif op <= OP_LN:
            sizes[i] = 1 + sizes[i - 1]
        else:
            right = sizes[i - 1]
            sizes[i] = 1 + right + sizes[i - 1 - right]
    return sizes


def eval_genome(genome: Genome, points: np.ndarray) -> np.ndarray:
    return _eval_kernel(genome.ops, genome.args, points)


def genome_sse(genome: Genome, points: np.ndarray, targets: np.ndarray) -> float:
    return float(_sse_kernel(genome.ops, genome.args, points, targets))


def subtree_range(genome: Genome, index: int) -> tuple[int, int]:
    """Postorder slice [start, end) of the subtree rooted at ``index``."""
    sizes = _span_starts(genome.ops)
    return index + 1 - int(sizes[index]), index + 1


def splice(genome: Genome, start: int, end: int, donor: Genome) -> Genome:
    ops = np.concatenate([genome.ops[:start], donor.ops, genome.ops[end:]])
    args = np.concatenate([genome.args[:start], donor.args, genome.args[end:]])
    return Genome(ops, args)


def replace_genome_subtree(genome: Genome, index: int, donor: Genome) -> Genome:
    start, end = subtree_range(genome, index)
    return splice(genome, start, end, donor)


def genome_crossover(a: Genome, b: Genome, rng: np.random.Generator) -> Genome:
    """Uniform slot in ``a`` receives a uniform subtree of ``b`` (slot drawn first)."""
    slot = int(rng.integers(len(a)))
    donor_root = int(rng.integers(len(b)))
    d_start, d_end = subtree_range(b, donor_root)
    donor = Genome(b.ops[d_start:d_end], b.args[d_start:d_end])
    return replace_genome_subtree(a, slot, donor)


def genome_to_poly(genome: Genome, max_degree: int | None = None):
    """Lower a {+, *} genome over one variable to a dense coefficient array.

    Returns None once an intermediate exceeds ``max_degree``. Raises for
    opcodes outside the polynomial language, mirroring the tree lowering.
    """
    stack: list[np.ndarray] = []
    with np.errstate(all="ignore"):
        for op, arg in zip(genome.ops, genome.args):
            if op == OP_CONST:
                stack.append(_trim(np.array([arg])))
            elif op == OP_VAR:
                if arg != 0:
                    raise ValueError("polynomial lowering is single-variable")
                stack.append(np.array([0.0, 1.0]))
            elif op == OP_ADD:
                b = stack.pop()
                a = stack.pop()
                if a.size < b.size:
                    a, b = b, a
                out = a.copy()
                out[: b.size] += b
                stack.append(_trim(out))
            elif op == OP_MUL:
                b = stack.pop()
                a = stack.pop()
                if a.size == 0 or b.size == 0:
                    stack.append(np.zeros(0))
                else:
                    stack.append(_trim(np.convolve(a, b)))
            else:
                raise ValueError(f"opcode {op} has no polynomial form")
            if max_degree is not None and stack[-1].size - 1 > max_degree:
                return None
    return stack[0]


def _trim(coeffs: np.ndarray) -> np.ndarray:
    # normal form keeps a nonzero leading coefficient (exact-zero test only)
    n = coeffs.size
    while n > 0 and coeffs[n - 1] == 0.0:
        n -= 1
    return coeffs[:n]


def warmup() -> None:
    """Force JIT compilation ahead of timing-sensitive work."""
    g = encode_tree(binary("+", unary("sin", var(0)), const(1.0)))
    pts = np.zeros((2, 1))
    _eval_kernel(g.ops, g.args, pts)
    _sse_kernel(g.ops, g.args, pts, np.zeros(2))
    _span_starts(g.ops)
