"""Set expressions over k streams.

Concrete syntax::

    expr  := term (op term)*
    term  := IDENT | "(" expr ")"
    op    := "|" | "&" | "-"        (aliases: "∪", "∩", "∖", "\\")

All operators share one precedence level and associate to the left, so
``A & B - C`` means ``(A & B) - C``. Parentheses are the only grouping
mechanism.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import BindingError, ExprSyntaxError


class Op(enum.Enum):
    UNION = "|"
    INTERSECT = "&"
    DIFF = "-"


_OP_ALIASES = {
    "|": Op.UNION, "∪": Op.UNION,
    "&": Op.INTERSECT, "∩": Op.INTERSECT,
    "-": Op.DIFF, "∖": Op.DIFF, "\\": Op.DIFF,
}
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class Leaf:
    index: int
    name: str = field(default=None, compare=False)


@dataclass(frozen=True)
class Node:
    op: Op
    left: "SetExpr"
    right: "SetExpr"


SetExpr = Union[Leaf, Node]


def leaf_indices(expr: SetExpr) -> set:
    if isinstance(expr, Leaf):
        return {expr.index}
    return leaf_indices(expr.left) | leaf_indices(expr.right)


def arity(expr: SetExpr) -> int:
    """Number of streams the expression needs (largest leaf index + 1)."""
    return max(leaf_indices(expr)) + 1


class _Parser:
    def __init__(self, text, names):
        self.text = text
        self.pos = 0
        self.bound = names is not None
        self.names = list(names) if names is not None else []

    def offset(self, pos=None):
        pos = self.pos if pos is None else pos
        return len(self.text[:pos].encode("utf-8"))

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def parse(self):
        expr = self.expr()
        self.skip_ws()
        if self.pos != len(self.text):
            raise ExprSyntaxError(f"unexpected {self.text[self.pos]!r}", self.offset())
        return expr

    def expr(self):
        left = self.term()
        while True:
            self.skip_ws()
            if self.pos >= len(self.text) or self.text[self.pos] not in _OP_ALIASES:
                return left
            op = _OP_ALIASES[self.text[self.pos]]
            self.pos += 1
            left = Node(op, left, self.term())

    def term(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            raise ExprSyntaxError("unexpected end of expression", self.offset())
        ch = self.text[self.pos]
        if ch == "(":
            self.pos += 1
            inner = self.expr()
            self.skip_ws()
            if self.pos >= len(self.text) or self.text[self.pos] != ")":
                raise ExprSyntaxError("expected ')'", self.offset())
            self.pos += 1
            return inner
        match = _IDENT.match(self.text, self.pos)
        if match is None:
            raise ExprSyntaxError(f"unexpected {ch!r}", self.offset())
        name = match.group()
        if name not in self.names:
            if self.bound:
                raise BindingError(f"unknown identifier {name!r} at offset {self.offset()}")
            self.names.append(name)
        self.pos = match.end()
        return Leaf(self.names.index(name), name)


def parse(text: str, names: Sequence[str] = None) -> SetExpr:
    """Parse ``text`` into a :class:`Leaf`/:class:`Node` tree.

    Identifiers are bound to stream indices in order of first appearance, or
    by position in ``names`` when given.
    """
    return _Parser(text, names).parse()


def parse_with_names(text: str, names: Sequence[str] = None):
    """Like :func:`parse` but also return the identifier list used for binding."""
    parser = _Parser(text, names)
    return parser.parse(), list(parser.names)


def _leaf_name(leaf, names):
    if names is not None:
        return names[leaf.index]
    if leaf.name is not None:
        return leaf.name
    return f"S{leaf.index}"


def format_expr(expr: SetExpr, names: Sequence[str] = None, unicode: bool = False) -> str:
    """Render ``expr`` so that ``parse(format_expr(e))`` rebuilds the same tree."""
    if isinstance(expr, Leaf):
        return _leaf_name(expr, names)
    symbols = {Op.UNION: "∪", Op.INTERSECT: "∩", Op.DIFF: "∖"} if unicode else None
    sym = symbols[expr.op] if symbols else expr.op.value
    left = format_expr(expr.left, names, unicode)
    right = format_expr(expr.right, names, unicode)
    if isinstance(expr.right, Node):
        right = f"({right})"
    return f"{left} {sym} {right}"


def membership_eval(expr: SetExpr, present: Sequence[bool]) -> bool:
    """Does an element with per-stream membership ``present`` belong to expr?"""
    if isinstance(expr, Leaf):
        if not 0 <= expr.index < len(present):
            raise BindingError(f"stream index {expr.index} out of range for k={len(present)}")
        return bool(present[expr.index])
    left = membership_eval(expr.left, present)
    right = membership_eval(expr.right, present)
    if expr.op is Op.UNION:
        return left or right
    if expr.op is Op.INTERSECT:
        return left and right
    return left and not right


def membership_mask(expr: SetExpr, present: np.ndarray) -> np.ndarray:
    """Vectorized membership: ``present`` is a (k, n) boolean array."""
    if isinstance(expr, Leaf):
        if not 0 <= expr.index < present.shape[0]:
            raise BindingError(
                f"stream index {expr.index} out of range for k={present.shape[0]}")
        return present[expr.index]
    left = membership_mask(expr.left, present)
    right = membership_mask(expr.right, present)
    if expr.op is Op.UNION:
        return left | right
    if expr.op is Op.INTERSECT:
        return left & right
    return left & ~right


def exact_eval(expr: SetExpr, sets: Sequence[set]) -> set:
    """Evaluate with ordinary set algebra over explicit element sets."""
    if isinstance(expr, Leaf):
        if not 0 <= expr.index < len(sets):
            raise BindingError(f"stream index {expr.index} out of range for k={len(sets)}")
        return set(sets[expr.index])
    left = exact_eval(expr.left, sets)
    right = exact_eval(expr.right, sets)
    if expr.op is Op.UNION:
        return left | right
    if expr.op is Op.INTERSECT:
        return left & right
    return left - right
