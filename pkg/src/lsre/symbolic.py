"""Expression trees over the vector symbol set used to describe problems.

Trees are stored as flat prefix tuples (gplearn style) which makes subtree
surgery a matter of slicing. Evaluation is vectorised over a batch of
points: a scalar node carries an ``(n,)`` array, a vector node an
``(n, L)`` array.

Semantics
---------
* ``X`` is the whole decision vector, ``Xa`` is ``x[0:d-1]`` and ``Xb`` is
  ``x[1:d]``; a constant ``C`` is a scalar broadcast against vectors.
* Binary operators on vectors of different lengths truncate both to the
  shorter one.
* ``sum``/``mean`` with one child aggregate a vector to a scalar and leave a
  scalar untouched; with two children they are element-wise add / average.
* ``div``, ``pow``, ``log`` and ``sqrt`` are protected, and any non-finite
  intermediate is clamped to ±1e150 (NaN becomes 0).
* A vector-valued root is summed to give the scalar objective.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, ParseError
from .seeding import text_hash

EPS = 1e-9
CLAMP = 1e150
MAX_DEPTH = 15

UNARY = ("neg", "sin", "cos", "abs", "tanh", "exp", "log", "sqrt")
BINARY = ("add", "sub", "mul", "div", "pow")
AGGREGATES = ("sum", "mean")
OPERATORS = AGGREGATES + BINARY + UNARY
VARIABLES = ("X", "Xa", "Xb")
OPERANDS = VARIABLES + ("C",)


class Op(NamedTuple):
    name: str
    arity: int


class Const(NamedTuple):
    mant: int
    exp: int

    @property
    def value(self) -> float:
        base = {10: math.pi, 11: math.e}.get(self.mant, float(self.mant))
        return base * 10.0**self.exp


def _arity(node):
    return node.arity if isinstance(node, Op) else 0


def subtree_end(nodes, start: int) -> int:
    """Index one past the subtree rooted at ``start``."""
    need = 1
    end = start
    while need:
        need += _arity(nodes[end]) - 1
        end += 1
    return end


@dataclass(frozen=True)
class ExprTree:
    nodes: tuple

    def __post_init__(self):
        try:
            ok = bool(self.nodes) and subtree_end(self.nodes, 0) == len(self.nodes)
        except IndexError:
            ok = False
        if not ok:
            raise ParameterError("node sequence is not a single well-formed tree")

    def __len__(self):
        return len(self.nodes)

    @property
    def depth(self) -> int:
        # a lone operand has depth 1
        best, stack = 0, []
        for node in self.nodes:
            level = stack.pop() + 1 if stack else 1
            best = max(best, level)
            stack.extend([level] * _arity(node))
        return best

    def node_depth(self, index: int) -> int:
        """Level of node ``index`` (root = 1)."""
        stack = []
        for i, node in enumerate(self.nodes):
            level = stack.pop() + 1 if stack else 1
            if i == index:
                return level
            stack.extend([level] * _arity(node))
        raise IndexError(index)

    def subtree(self, index: int) -> "ExprTree":
        return ExprTree(self.nodes[index : subtree_end(self.nodes, index)])

    def replace(self, index: int, new: "ExprTree") -> "ExprTree":
        end = subtree_end(self.nodes, index)
        return ExprTree(self.nodes[:index] + new.nodes + self.nodes[end:])

    def has_variable(self) -> bool:
        return any(n in VARIABLES for n in self.nodes)

    def __str__(self):
        return serialize(self)

    def hash(self) -> int:
        return text_hash(serialize(self))


def validate(tree: ExprTree, max_depth: int = MAX_DEPTH) -> None:
    for node in tree.nodes:
        if isinstance(node, Op):
            ok = node.name in OPERATORS and (
                node.arity in (1, 2) if node.name in AGGREGATES
                else node.arity == (2 if node.name in BINARY else 1)
            )
            if not ok:
                raise ParameterError(f"bad operator node {node}")
        elif isinstance(node, Const):
            if not (1 <= node.mant <= 11 and -1 <= node.exp <= 3):
                raise ParameterError(f"constant out of range {node}")
        elif node not in VARIABLES:
            raise ParameterError(f"unknown node {node!r}")
    if tree.depth > max_depth:
        raise ParameterError(f"depth {tree.depth} exceeds {max_depth}")
    if not tree.has_variable():
        raise ParameterError("tree references no decision variable")


# -- evaluation ---------------------------------------------------------------


def _clean(v):
    v = np.nan_to_num(v, nan=0.0, posinf=CLAMP, neginf=-CLAMP)
    return np.clip(v, -CLAMP, CLAMP, out=v)


def _align(a, b):
    if a.ndim == 2 and b.ndim == 2:
        m = min(a.shape[1], b.shape[1])
        return a[:, :m], b[:, :m]
    if a.ndim == 2:
        return a, b[:, None]
    if b.ndim == 2:
        return a[:, None], b
    return a, b


def _binary(name, a, b):
    a, b = _align(a, b)
    if name in ("add", "sum"):
        return a + b
    if name == "sub":
        return a - b
    if name == "mul":
        return a * b
    if name == "mean":
        return 0.5 * (a + b)
    if name == "div":
        small = np.abs(b) < EPS
        return np.where(small, 1.0, a / np.where(small, 1.0, b))
    # pow
    out = np.power(a, b)
    return np.where((np.abs(a) < EPS) & (b == -1.0), 1.0, out)


def _unary(name, a):
    if name == "neg":
        return -a
    if name == "sin":
        return np.sin(a)
    if name == "cos":
        return np.cos(a)
    if name == "abs":
        return np.abs(a)
    if name == "tanh":
        return np.tanh(a)
    if name == "exp":
        return np.exp(a)
    if name == "sqrt":
        return np.sqrt(np.abs(a))
    if name == "log":
        small = np.abs(a) < EPS
        return np.where(small, 0.0, np.log10(np.where(small, 1.0, np.abs(a))))
    if name == "sum":
        return a.sum(axis=1) if a.ndim == 2 else a
    if name == "mean":
        return a.mean(axis=1) if a.ndim == 2 else a
    raise ParameterError(f"unknown operator {name}")


def _eval_at(nodes, i, X):
    node = nodes[i]
    if isinstance(node, Op):
        if node.arity == 1:
            a, j = _eval_at(nodes, i + 1, X)
            return _clean(_unary(node.name, a)), j
        a, j = _eval_at(nodes, i + 1, X)
        b, k = _eval_at(nodes, j, X)
        return _clean(_binary(node.name, a, b)), k
    if isinstance(node, Const):
        return np.full(X.shape[0], node.value), i + 1
    if node == "X":
        return X, i + 1
    if node == "Xa":
        return X[:, :-1], i + 1
    return X[:, 1:], i + 1


def eval_batch(tree: ExprTree, X) -> np.ndarray:
    """Objective values of ``tree`` at the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] < 2:
        raise ParameterError("symbolic problems need d >= 2")
    with np.errstate(all="ignore"):
        v, _ = _eval_at(tree.nodes, 0, X)
        if v.ndim == 2:
            v = _clean(v.sum(axis=1))
    return v


def eval(tree: ExprTree, x) -> float:  # noqa: A001 - mirrors the operation name
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ParameterError("x must be a vector")
    return float(eval_batch(tree, x[None, :])[0])


@dataclass(frozen=True)
class SymbolicProblem:
    """A tree instantiated at a fixed dimension on [-5, 5]^dim."""

    tree: ExprTree
    dim: int

    lower = -5.0
    upper = 5.0

    def __post_init__(self):
        if self.dim < 2:
            raise ParameterError("dim must be >= 2")

    def __call__(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise ParameterError(f"expected {self.dim}-D points, got {X.shape[1]}-D")
        return eval_batch(self.tree, X)

    def optimum(self):
        return None

    @property
    def name(self):
        return f"expr_d{self.dim}"


# -- random construction ------------------------------------------------------


def random_constant(rng) -> Const:
    return Const(int(rng.integers(1, 12)), int(rng.integers(-1, 4)))


def random_operand(rng, variables_only=False):
    choices = VARIABLES if variables_only else OPERANDS
    name = choices[int(rng.integers(len(choices)))]
    return random_constant(rng) if name == "C" else name


def random_operator(rng) -> Op:
    name = OPERATORS[int(rng.integers(len(OPERATORS)))]
    if name in AGGREGATES:
        return Op(name, 1 if rng.random() < 0.5 else 2)
    return Op(name, 2 if name in BINARY else 1)


def _grow(rng, remaining, forced, out):
    p_leaf = len(OPERANDS) / (len(OPERANDS) + len(OPERATORS))
    if remaining == 1 or (not forced and rng.random() < p_leaf):
        out.append(random_operand(rng))
        return
    op = random_operator(rng)
    out.append(op)
    carrier = int(rng.integers(op.arity)) if forced else -1
    for c in range(op.arity):
        _grow(rng, remaining - 1, c == carrier, out)


def random_tree(depth_range, rng, max_tries: int = 100) -> ExprTree:
    """Grow a tree whose depth is drawn uniformly from ``depth_range``."""
    lo, hi = depth_range
    if not 1 <= lo <= hi <= MAX_DEPTH:
        raise ParameterError(f"invalid depth range {depth_range}")
    for _ in range(max_tries):
        target = int(rng.integers(lo, hi + 1))
        out: list = []
        _grow(rng, target, True, out)
        tree = ExprTree(tuple(out))
        if tree.has_variable():
            return tree
    return ExprTree(("X",))


# -- text formats -------------------------------------------------------------


def _node_text(node):
    if isinstance(node, Const):
        return f"C({node.mant},{node.exp})"
    if isinstance(node, Op):
        return node.name
    return node


def serialize(tree: ExprTree) -> str:
    parts = []
    stack = []  # remaining children of each open operator
    for node in tree.nodes:
        parts.append(_node_text(node))
        if isinstance(node, Op):
            parts.append("(")
            stack.append(node.arity)
            continue
        while stack:
            stack[-1] -= 1
            if stack[-1]:
                parts.append(", ")
                break
            stack.pop()
            parts.append(")")
    return "".join(parts)


_TOKEN = re.compile(r"\s*(?:(?P<name>[A-Za-z]+)|(?P<int>-?\d+)|(?P<punct>[(),]))")


def _tokenize(text):
    pos, toks = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        toks.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


def parse(text: str) -> ExprTree:
    toks = _tokenize(text)
    out: list = []
    i = 0

    def expect(kind, value=None):
        nonlocal i
        k, v, p = toks[i]
        if k != kind or (value is not None and v != value):
            raise ParseError(f"expected {value or kind}, found {v or 'end of input'!r}", p)
        i += 1
        return v

    def node():
        nonlocal i
        k, name, p = toks[i]
        if k != "name":
            raise ParseError(f"expected a symbol, found {name or 'end of input'!r}", p)
        i += 1
        if name in VARIABLES:
            out.append(name)
            return
        if name == "C":
            expect("punct", "(")
            mant = int(expect("int"))
            expect("punct", ",")
            exp = int(expect("int"))
            expect("punct", ")")
            if not (1 <= mant <= 11 and -1 <= exp <= 3):
                raise ParseError(f"constant C({mant},{exp}) out of range", p)
            out.append(Const(mant, exp))
            return
        if name not in OPERATORS:
            raise ParseError(f"unknown symbol {name!r}", p)
        slot = len(out)
        out.append(None)
        expect("punct", "(")
        n_children = 1
        node()
        while toks[i][1] == ",":
            i += 1
            node()
            n_children += 1
        expect("punct", ")")
        if name in AGGREGATES:
            ok = n_children in (1, 2)
        else:
            ok = n_children == (2 if name in BINARY else 1)
        if not ok:
            raise ParseError(f"{name} cannot take {n_children} argument(s)", p)
        out[slot] = Op(name, n_children)

    node()
    if toks[i][0] != "end":
        raise ParseError(f"trailing input {toks[i][1]!r}", toks[i][2])
    return ExprTree(tuple(out))


_INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}
_MANT = {10: "pi", 11: "e"}


def _infix_at(nodes, i):
    node = nodes[i]
    if isinstance(node, Const):
        m = _MANT.get(node.mant, str(node.mant))
        return (m if node.exp == 0 else f"{m}*10^{node.exp}"), i + 1
    if not isinstance(node, Op):
        return {"X": "x", "Xa": "x[0:n-1]", "Xb": "x[1:n]"}[node], i + 1
    a, j = _infix_at(nodes, i + 1)
    if node.arity == 1:
        if node.name == "neg":
            return f"-({a})", j
        return f"{node.name}({a})", j
    b, k = _infix_at(nodes, j)
    if node.name in _INFIX:
        return f"({a} {_INFIX[node.name]} {b})", k
    return f"{node.name}({a}, {b})", k


def to_infix(tree: ExprTree) -> str:
    """Human-readable formula with explicit slice notation."""
    return _infix_at(tree.nodes, 0)[0]
