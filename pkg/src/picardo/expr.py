"""A small arithmetic language for kernels, forcings and operators.

Grammar (``^`` is right-associative; a leading minus belongs to the base,
so ``-2^2 == 4`` and ``2^-1 == 0.5``)::

    expr   := term (('+' | '-') term)*
    term   := power (('*' | '/') power)*
    power  := signed ('^' power)?
    signed := ('+' | '-') signed | atom
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

Functions: ``sin cos exp sqrt abs asin``. The constant ``pi`` is predefined.
Evaluation works on floats and on numpy arrays alike.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Tuple, Union

import numpy as np

from .errors import EvalError, ParseError, UnboundVariable

__all__ = ["Expression", "parse_expr", "eval_expr", "FUNCTIONS", "CONSTANTS"]

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "asin": np.arcsin,
}
CONSTANTS = {"pi": math.pi}

Span = Tuple[int, int]


@dataclass(frozen=True)
class Num:
    value: float
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Var:
    name: str
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Neg:
    operand: "Node"
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"
    span: Span = field(compare=False, default=(0, 0))


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"
    span: Span = field(compare=False, default=(0, 0))


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if not m:
            col = pos + len(src[pos:]) - len(src[pos:].lstrip())
            raise ParseError(f"unexpected character {src[col]!r}", 1, col + 1)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), (start, m.end())))
        pos = m.end()
    tokens.append(("end", "", (len(src), len(src))))
    return tokens


class _Parser:
    def __init__(self, src):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, val, span = self.take()
        if val != text:
            found = "end of input" if kind == "end" else repr(val)
            raise ParseError(f"expected {text!r}, found {found}", 1, span[0] + 1)
        return span

    def parse(self):
        node = self.expr()
        kind, val, span = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", 1, span[0] + 1)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.term()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def term(self):
        node = self.power()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            right = self.power()
            node = BinOp(op, node, right, (node.span[0], right.span[1]))
        return node

    def power(self):
        base = self.signed()
        if self.peek()[1] == "^":
            self.take()
            exponent = self.power()
            return BinOp("^", base, exponent, (base.span[0], exponent.span[1]))
        return base

    def signed(self):
        kind, val, span = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            operand = self.signed()
            if val == "+":
                return operand
            return Neg(operand, (span[0], operand.span[1]))
        return self.atom()

    def atom(self):
        kind, val, span = self.take()
        if kind == "num":
            return Num(float(val), span)
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                end = self.expect(")")
                return Call(val, arg, (span[0], end[1]))
            if self.peek()[1] == "(":
                raise ParseError(f"unknown function {val!r}", 1, span[0] + 1)
            return Var(val, span)
        if val == "(":
            node = self.expr()
            end = self.expect(")")
            return replace(node, span=(span[0], end[1]))
        found = "end of input" if kind == "end" else repr(val)
        raise ParseError(f"expected a number, name or '(', found {found}", 1, span[0] + 1)


def _free_vars(node, out):
    if isinstance(node, Var):
        if node.name not in CONSTANTS:
            out.add(node.name)
    elif isinstance(node, Neg):
        _free_vars(node.operand, out)
    elif isinstance(node, BinOp):
        _free_vars(node.left, out)
        _free_vars(node.right, out)
    elif isinstance(node, Call):
        _free_vars(node.arg, out)
    return out


@dataclass(frozen=True)
class Expression:
    """A parsed expression. Equality is structural (source spacing is ignored)."""

    source: str = field(compare=False)
    root: Node

    @property
    def variables(self) -> frozenset:
        return frozenset(_free_vars(self.root, set()))

    def __call__(self, **bindings):
        return eval_expr(self, bindings)

    def __str__(self):
        return self.source


def parse_expr(src: str) -> Expression:
    if not src.strip():
        raise ParseError("empty expression", 1, 1)
    return Expression(src, _Parser(src).parse())


def _any(mask) -> bool:
    return bool(np.any(mask))


def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        if node.name in env:
            return env[node.name]
        if node.name in CONSTANTS:
            return CONSTANTS[node.name]
        raise UnboundVariable(node.name)
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        x = _eval(node.arg, env)
        if node.func == "asin" and _any(np.abs(x) > 1.0):
            raise EvalError("asin argument outside [-1, 1]", node.span)
        if node.func == "sqrt" and _any(np.asarray(x) < 0.0):
            raise EvalError("sqrt of a negative number", node.span)
        with np.errstate(all="ignore"):
            out = FUNCTIONS[node.func](x)
        if _any(~np.isfinite(out)):
            raise EvalError(f"{node.func} overflowed", node.span)
        return out if np.ndim(out) else float(out)

    a = _eval(node.left, env)
    b = _eval(node.right, env)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        if _any(np.asarray(b) == 0.0):
            raise EvalError("division by zero", node.span)
        return a / b
    with np.errstate(all="ignore"):
        out = np.power(np.asarray(a, dtype=float), b)
    if _any(~np.isfinite(out)):
        if _any((np.asarray(a) < 0.0) & (np.asarray(b) != np.round(b))):
            raise EvalError("fractional power of a negative number", node.span)
        if _any((np.asarray(a) == 0.0) & (np.asarray(b) < 0.0)):
            raise EvalError("division by zero", node.span)
        raise EvalError("power overflowed", node.span)
    return out if np.ndim(out) else float(out)


def eval_expr(e: Expression, bindings: Mapping[str, object]):
    """Evaluate with IEEE double semantics; arrays in ``bindings`` broadcast."""
    return _eval(e.root, bindings)
