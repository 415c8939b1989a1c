"""Arithmetic expressions in one variable ``x``.

Small recursive-descent parser and evaluator used for coefficient functions
and manufactured solutions given as strings in problem configs.  Supported:
real literals, ``x``, ``pi``, binary ``+ - * /``, unary minus, ``^`` with an
integer-literal exponent, and the functions ``sin cos exp sqrt abs``.

Precedence: ``^`` binds tighter than unary minus (so ``-x^2`` is ``-(x^2)``),
then ``* /``, then ``+ -``; binary operators associate to the left.
Evaluation follows IEEE double semantics; division by zero yields inf/nan,
which downstream validation rejects where positivity is required.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np


class ExprError(ValueError):
    """Base class for expression problems; carries a byte offset."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (offset {offset})")


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


_FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class PiConst:
    pass


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    name: str
    arg: "Expr"


Expr = Num | Var | PiConst | Neg | Bin | Pow | Call


_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            # skip over whitespace-only tail
            rest = src[pos:]
            if rest.strip() == "":
                break
            bad = pos + len(rest) - len(rest.lstrip())
            raise ExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str):
        kind, val, off = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", off)
        return self.advance()

    def parse(self) -> Expr:
        e = self.sum()
        kind, val, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", off)
        return e

    def sum(self) -> Expr:
        e = self.product()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                e = Bin(val, e, self.product())
            else:
                return e

    def product(self) -> Expr:
        e = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                e = Bin(val, e, self.unary())
            else:
                return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        e = self.atom()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "^":
                self.advance()
                e = Pow(e, self.exponent())
            else:
                return e

    def exponent(self) -> int:
        sign = 1
        kind, val, off = self.peek()
        if kind == "op" and val in "+-":
            self.advance()
            sign = -1 if val == "-" else 1
            kind, val, off = self.peek()
        if kind != "num" or not re.fullmatch(r"\d+", val):
            raise ExprSyntaxError("exponent must be an integer literal", off)
        self.advance()
        return sign * int(val)

    def atom(self) -> Expr:
        kind, val, off = self.advance()
        if kind == "num":
            return Num(float(val))
        if kind == "name":
            if val == "x":
                return Var()
            if val == "pi":
                return PiConst()
            if val in _FUNCTIONS:
                self.expect_op("(")
                arg = self.sum()
                self.expect_op(")")
                return Call(val, arg)
            raise UnknownIdentifierError(f"unknown identifier {val!r}", off)
        if kind == "op" and val == "(":
            e = self.sum()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(f"unexpected token {val!r}" if val else "unexpected end of input", off)


def parse(src: str) -> Expr:
    """Parse a coefficient expression string into a tree."""
    return _Parser(src).parse()


def evaluate(e: Expr, x) -> float | np.ndarray:
    """Evaluate at a scalar or ndarray ``x`` with IEEE double semantics."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _eval(e, np.asarray(x, dtype=float))
    if np.ndim(x) == 0:
        return float(out)
    return out


def _eval(e: Expr, x):
    if isinstance(e, Num):
        return np.full_like(x, e.value) if x.ndim else np.float64(e.value)
    if isinstance(e, Var):
        return x
    if isinstance(e, PiConst):
        return np.full_like(x, math.pi) if x.ndim else np.float64(math.pi)
    if isinstance(e, Neg):
        return -_eval(e.operand, x)
    if isinstance(e, Bin):
        a, b = _eval(e.left, x), _eval(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        return np.divide(a, b)
    if isinstance(e, Pow):
        return _eval(e.base, x) ** e.exponent
    if isinstance(e, Call):
        return _FUNCTIONS[e.name](_eval(e.arg, x))
    raise TypeError(f"not an expression node: {e!r}")


# precedence levels used by the printer; atoms sit above everything
_PREC_SUM = 1
_PREC_PROD = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, Bin):
        return _PREC_SUM if e.op in "+-" else _PREC_PROD
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def to_string(e: Expr) -> str:
    """Render a tree so that ``parse(to_string(e))`` rebuilds the same tree."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return "x"
    if isinstance(e, PiConst):
        return "pi"
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        if _prec(e.operand) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Bin):
        p = _prec(e)
        left = to_string(e.left)
        if _prec(e.left) < p:
            left = f"({left})"
        right = to_string(e.right)
        # equal precedence on the right must be wrapped to keep right-nested
        # trees right-nested under left-associative reparsing
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left}{e.op}{right}"
    if isinstance(e, Pow):
        base = to_string(e.base)
        if _prec(e.base) < _PREC_POW:
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.name}({to_string(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")
