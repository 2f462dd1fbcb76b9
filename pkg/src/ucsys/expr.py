"""Expression trees for matrix and tensor entries.

Entries are small arithmetic expressions over the spatial variables
``x1..xn`` and the covector variables ``xi1..xin``::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := base ('^' integer)?
    base   := number | ident | '(' expr ')' | ('sqrt'|'abs') '(' expr ')'
              | ('+'|'-') base

A leading sign on a base is accepted in addition to the core grammar so that
entries such as ``-1`` or ``-x2*xi2`` can be written directly.

Trees are immutable and evaluate vectorised over numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np


class ExprError(ValueError):
    """Raised on malformed expressions or failed evaluations."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)
        self.offset = offset


_BINARY = ("add", "sub", "mul", "div")
_UNARY = ("neg", "sqrt", "abs")


@dataclass(frozen=True)
class Expr:
    kind: str
    children: tuple["Expr", ...] = ()
    value: float = 0.0
    index: int = 0  # 1-based variable index, or the integer exponent for "pow"

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def const(value: float) -> "Expr":
        return Expr("const", value=float(value))

    @staticmethod
    def x(j: int) -> "Expr":
        return Expr("x", index=j)

    @staticmethod
    def xi(j: int) -> "Expr":
        return Expr("xi", index=j)

    def is_const(self, value: float | None = None) -> bool:
        if self.kind != "const":
            return False
        return value is None or self.value == value

    def __add__(self, other) -> "Expr":
        other = _lift(other)
        if self.is_const(0.0):
            return other
        if other.is_const(0.0):
            return self
        if self.is_const() and other.is_const():
            return Expr.const(self.value + other.value)
        return Expr("add", (self, other))

    def __radd__(self, other) -> "Expr":
        return _lift(other) + self

    def __sub__(self, other) -> "Expr":
        other = _lift(other)
        if other.is_const(0.0):
            return self
        if self.is_const() and other.is_const():
            return Expr.const(self.value - other.value)
        if self.is_const(0.0):
            return -other
        return Expr("sub", (self, other))

    def __rsub__(self, other) -> "Expr":
        return _lift(other) - self

    def __mul__(self, other) -> "Expr":
        other = _lift(other)
        if self.is_const(0.0) or other.is_const(0.0):
            return Expr.const(0.0)
        if self.is_const(1.0):
            return other
        if other.is_const(1.0):
            return self
        if self.is_const() and other.is_const():
            return Expr.const(self.value * other.value)
        return Expr("mul", (self, other))

    def __rmul__(self, other) -> "Expr":
        return _lift(other) * self

    def __truediv__(self, other) -> "Expr":
        other = _lift(other)
        if other.is_const(1.0):
            return self
        if self.is_const(0.0) and not other.is_const(0.0):
            return Expr.const(0.0)
        return Expr("div", (self, other))

    def __neg__(self) -> "Expr":
        if self.is_const():
            return Expr.const(-self.value)
        if self.kind == "neg":
            return self.children[0]
        return Expr("neg", (self,))

    def __pow__(self, p: int) -> "Expr":
        if int(p) != p:
            raise ExprError("only integer exponents are supported")
        p = int(p)
        if p == 1:
            return self
        if p == 0:
            return Expr.const(1.0)
        if self.is_const():
            return Expr.const(self.value**p)
        return Expr("pow", (self,), index=p)

    # -- queries --------------------------------------------------------------

    def variables(self) -> set[tuple[str, int]]:
        if self.kind in ("x", "xi"):
            return {(self.kind, self.index)}
        out: set[tuple[str, int]] = set()
        for c in self.children:
            out |= c.variables()
        return out

    def evaluate(self, x=None, xi=None):
        """Evaluate with ``x[j-1]`` and ``xi[j-1]`` bound to variable j.

        ``x`` and ``xi`` are sequences (or leading-axis arrays); the entries
        may be numpy arrays, in which case evaluation broadcasts.
        """
        return _eval(self, x, xi)

    def substitute(self, mapping: Mapping[tuple[str, int], "Expr"]) -> "Expr":
        if self.kind in ("x", "xi"):
            return mapping.get((self.kind, self.index), self)
        if not self.children:
            return self
        kids = [c.substitute(mapping) for c in self.children]
        if self.kind == "add":
            return kids[0] + kids[1]
        if self.kind == "sub":
            return kids[0] - kids[1]
        if self.kind == "mul":
            return kids[0] * kids[1]
        if self.kind == "div":
            return kids[0] / kids[1]
        if self.kind == "neg":
            return -kids[0]
        if self.kind == "pow":
            return kids[0] ** self.index
        return Expr(self.kind, tuple(kids))

    def __str__(self) -> str:
        return to_source(self)


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return Expr.const(float(v))


def sqrt(e) -> Expr:
    e = _lift(e)
    if e.is_const() and e.value >= 0:
        return Expr.const(math.sqrt(e.value))
    return Expr("sqrt", (e,))


def absolute(e) -> Expr:
    e = _lift(e)
    if e.is_const():
        return Expr.const(abs(e.value))
    return Expr("abs", (e,))


# Relative slack for square roots of expressions that should be nonnegative
# but lose a few ulps (e.g. after substitution).
_SQRT_SLACK = 1e-12


def _eval(e: Expr, x, xi):
    k = e.kind
    if k == "const":
        return e.value
    if k == "x":
        if x is None or e.index > len(x):
            raise ExprError(f"variable x{e.index} is not bound")
        return x[e.index - 1]
    if k == "xi":
        if xi is None or e.index > len(xi):
            raise ExprError(f"variable xi{e.index} is not bound")
        return xi[e.index - 1]
    if k in _BINARY:
        a = _eval(e.children[0], x, xi)
        b = _eval(e.children[1], x, xi)
        if k == "add":
            return a + b
        if k == "sub":
            return a - b
        if k == "mul":
            return a * b
        if np.any(np.asarray(b) == 0):
            raise ExprError(f"division by zero in {to_source(e)}")
        return a / b
    a = _eval(e.children[0], x, xi)
    if k == "neg":
        return -a
    if k == "abs":
        return np.abs(a)
    if k == "pow":
        if e.index < 0 and np.any(np.asarray(a) == 0):
            raise ExprError(f"zero raised to a negative power in {to_source(e)}")
        return a ** e.index if e.index >= 0 else 1.0 / a ** (-e.index)
    if k == "sqrt":
        arr = np.asarray(a, dtype=float)
        scale = np.maximum(np.abs(arr), 1.0)
        if np.any(arr < -_SQRT_SLACK * scale):
            raise ExprError(f"square root of a negative value in {to_source(e)}")
        out = np.sqrt(np.maximum(arr, 0.0))
        return out if out.ndim else float(out)
    raise ExprError(f"unknown node kind {k!r}")


# -- pretty printing ------------------------------------------------------------

def to_source(e: Expr) -> str:
    """Fully parenthesised source that re-parses to an equivalent tree."""
    k = e.kind
    if k == "const":
        v = e.value
        text = repr(float(abs(v)))
        return f"(-{text})" if v < 0 or (v == 0 and math.copysign(1, v) < 0) else text
    if k == "x":
        return f"x{e.index}"
    if k == "xi":
        return f"xi{e.index}"
    if k in _BINARY:
        op = {"add": "+", "sub": "-", "mul": "*", "div": "/"}[k]
        return f"({to_source(e.children[0])} {op} {to_source(e.children[1])})"
    if k == "neg":
        return f"(-{to_source(e.children[0])})"
    if k == "pow":
        return f"({to_source(e.children[0])}^{e.index})" if e.index >= 0 else \
            f"({to_source(e.children[0])}^(-{-e.index}))"
    return f"{k}({to_source(e.children[0])})"


# -- parsing ----------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)
_VAR = re.compile(r"(xi|x)([1-9][0-9]*)$")


def _tokenize(source: str):
    pos = 0
    out = []
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        start = m.start(m.lastgroup)
        out.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    out.append(("end", "", n))
    return out


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str, dim: int | None):
        self.source = source
        self.dim = dim
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str, pos: int):
        raise ExprError(message, _byte_offset(self.source, pos))

    def expect(self, op: str):
        kind, text, pos = self.take()
        if kind != "op" or text != op:
            self.fail(f"expected {op!r}, found {text or 'end of input'!r}", pos)

    def parse(self) -> Expr:
        e = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            self.fail(f"unexpected token {text!r}", pos)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = Expr("add" if op == "+" else "sub", (e, rhs))
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            rhs = self.factor()
            e = Expr("mul" if op == "*" else "div", (e, rhs))
        return e

    def factor(self) -> Expr:
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            sign = 1
            kind, text, pos = self.peek()
            wrapped = False
            if kind == "op" and text == "(":
                self.take()
                wrapped = True
                kind, text, pos = self.peek()
            if kind == "op" and text in "+-":
                self.take()
                sign = -1 if text == "-" else 1
                kind, text, pos = self.peek()
            if kind != "num" or not text.isdigit():
                self.fail("exponent must be an integer", pos)
            self.take()
            if wrapped:
                self.expect(")")
            return Expr("pow", (base,), index=sign * int(text))
        return base

    def base(self) -> Expr:
        kind, text, pos = self.take()
        if kind == "num":
            return Expr.const(float(text))
        if kind == "op" and text == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "op" and text in "+-":
            operand = self.base()
            return operand if text == "+" else Expr("neg", (operand,))
        if kind == "ident":
            if text in ("sqrt", "abs"):
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Expr(text, (arg,))
            m = _VAR.match(text)
            if m is None:
                self.fail(f"unknown identifier {text!r}", pos)
            j = int(m.group(2))
            if self.dim is not None and j > self.dim:
                self.fail(f"index of {text!r} exceeds dimension {self.dim}", pos)
            return Expr(m.group(1), index=j)
        self.fail(f"unexpected token {text or 'end of input'!r}", pos)


def parse_entry_expression(source: str, dim: int | None = None) -> Expr:
    """Parse ``source``; ``dim`` bounds the admissible variable indices."""
    if not isinstance(source, str):
        source = repr(float(source))
    return _Parser(source, dim).parse()


def evaluate_matrix(entries: Sequence[Sequence[Expr]], x=None, xi=None) -> np.ndarray:
    """Evaluate a matrix of trees; broadcast shapes go in front: (..., rows, cols)."""
    vals = [[np.asarray(e.evaluate(x, xi), dtype=float) for e in row] for row in entries]
    shape = np.broadcast_shapes(*(v.shape for row in vals for v in row))
    out = np.empty(shape + (len(vals), len(vals[0])))
    for a, row in enumerate(vals):
        for b, v in enumerate(row):
            out[..., a, b] = v
    return out
