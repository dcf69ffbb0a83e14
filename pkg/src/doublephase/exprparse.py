"""A small expression language for exponents, weights, sources, and boundary data.

Grammar (highest binding last):
    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?          # right-associative
    atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'

Names: variables ``x`` and ``y``, constants ``pi`` and ``e``, and the calls
sin, cos, exp, log, sqrt, abs (one argument), min, max (two arguments).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

_FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}
_CONSTANTS = {"pi": math.pi, "e": math.e}
_VARIABLES = ("x", "y")

_NUMBER = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?")
_NAME = re.compile(r"[A-Za-z_][A-Za-z_0-9]*")


class ParseError(Exception):
    """Raised when expression text cannot be parsed; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.message = message
        self.offset = offset


class EvalError(Exception):
    """Raised when evaluation hits a domain error; carries the offending point."""

    def __init__(self, message: str, point: tuple[float, ...]):
        super().__init__(f"{message} at point {point}")
        self.message = message
        self.point = point


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Expr", ...]


Expr = Union[Num, Var, Neg, BinOp, Call]


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.pos = 0

    def skip_ws(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            raise ParseError(f"expected '{ch}'", self.pos)
        self.pos += 1

    def parse_expr(self) -> Expr:
        node = self.parse_term()
        while self.peek() in {"+", "-"}:
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.parse_term())
        return node

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.peek() in {"*", "/"}:
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        if self.peek() == "-":
            self.pos += 1
            return Neg(self.parse_factor())
        return self.parse_power()

    def parse_power(self) -> Expr:
        base = self.parse_atom()
        if self.peek() == "^":
            self.pos += 1
            return BinOp("^", base, self.parse_factor())
        return base

    def parse_atom(self) -> Expr:
        ch = self.peek()
        start = self.pos
        if ch == "(":
            self.pos += 1
            node = self.parse_expr()
            self.expect(")")
            return node
        m = _NUMBER.match(self.src, self.pos)
        if m:
            self.pos = m.end()
            return Num(float(m.group()))
        m = _NAME.match(self.src, self.pos)
        if m:
            name = m.group()
            self.pos = m.end()
            if self.peek() == "(":
                if name not in _FUNCTIONS:
                    raise ParseError(f"unknown function '{name}'", start)
                self.pos += 1
                args = [self.parse_expr()]
                while self.peek() == ",":
                    self.pos += 1
                    args.append(self.parse_expr())
                self.expect(")")
                arity = _FUNCTIONS[name]
                if len(args) != arity:
                    raise ParseError(
                        f"'{name}' takes {arity} argument(s), got {len(args)}", start
                    )
                return Call(name, tuple(args))
            if name in _VARIABLES:
                return Var(name)
            if name in _CONSTANTS:
                return Num(_CONSTANTS[name])
            raise ParseError(f"unknown identifier '{name}'", start)
        raise ParseError("expected a number, name, or '('", self.pos)


def parse(src: str) -> Expr:
    """Parse expression text, requiring the whole input to be consumed."""
    p = _Parser(src)
    node = p.parse_expr()
    p.skip_ws()
    if p.pos != len(src):
        raise ParseError("trailing input", p.pos)
    return node


def variables_used(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return variables_used(e.operand)
    if isinstance(e, BinOp):
        return variables_used(e.left) | variables_used(e.right)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= variables_used(a)
        return out
    return set()


def _eval(e: Expr, point: tuple[float, ...]) -> float:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        idx = 0 if e.name == "x" else 1
        if idx >= len(point):
            raise EvalError(f"variable '{e.name}' undefined on a {len(point)}d point", point)
        return point[idx]
    if isinstance(e, Neg):
        return -_eval(e.operand, point)
    if isinstance(e, BinOp):
        a = _eval(e.left, point)
        b = _eval(e.right, point)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise EvalError("division by zero", point)
            return a / b
        try:
            return math.pow(a, b)
        except (ValueError, OverflowError) as exc:
            raise EvalError(f"invalid power {a}^{b}", point) from exc
    a = _eval(e.args[0], point)
    if e.func == "sin":
        return math.sin(a)
    if e.func == "cos":
        return math.cos(a)
    if e.func == "exp":
        try:
            return math.exp(a)
        except OverflowError as exc:
            raise EvalError("exp overflow", point) from exc
    if e.func == "log":
        if a <= 0.0:
            raise EvalError(f"log of non-positive value {a}", point)
        return math.log(a)
    if e.func == "sqrt":
        if a < 0.0:
            raise EvalError(f"sqrt of negative value {a}", point)
        return math.sqrt(a)
    if e.func == "abs":
        return abs(a)
    b = _eval(e.args[1], point)
    return min(a, b) if e.func == "min" else max(a, b)


def eval_at(e: Expr, point) -> float:
    """Evaluate at a point (x,) or (x, y); non-finite results are errors."""
    pt = tuple(float(c) for c in np.atleast_1d(point))
    val = _eval(e, pt)
    if not math.isfinite(val):
        raise EvalError(f"non-finite value {val}", pt)
    return val


def sample(e: Expr, grid, where: str = "nodes") -> np.ndarray:
    """Evaluate on node coordinates or cell centers of a grid."""
    if where == "nodes":
        coords = grid.node_coords()
    elif where == "cells":
        coords = grid.cell_centers()
    else:
        raise ValueError(f"where must be 'nodes' or 'cells', got {where!r}")
    return np.array([eval_at(e, pt) for pt in coords])


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PRECEDENCE = 3


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PRECEDENCE[e.op]
    if isinstance(e, Neg):
        return _NEG_PRECEDENCE
    return 9


def pretty(e: Expr) -> str:
    """Render back to text; ``parse(pretty(ast)) == ast`` for parser output."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        inner = pretty(e.operand)
        if _prec(e.operand) < _NEG_PRECEDENCE:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Call):
        return f"{e.func}({', '.join(pretty(a) for a in e.args)})"
    p = _PRECEDENCE[e.op]
    left = pretty(e.left)
    right = pretty(e.right)
    if e.op == "^":
        # right-associative: parenthesize an equal-precedence left child
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < _NEG_PRECEDENCE:
            right = f"({right})"
    else:
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
    return f"{left} {e.op} {right}" if e.op in "+-" else f"{left}{e.op}{right}"
