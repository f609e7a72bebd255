"""Small arithmetic expression language for user-defined vector fields.

Grammar (precedence climbing, ``^``/``**`` right-associative and binding
tighter than unary minus, as in ``-x^2 == -(x^2)``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Evaluation is numpy-vectorised: variables may be bound to arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

from .errors import ParseError

FUNCTIONS: dict[str, tuple[Callable, int]] = {
    "sin": (np.sin, 1),
    "cos": (np.cos, 1),
    "tan": (np.tan, 1),
    "tanh": (np.tanh, 1),
    "exp": (np.exp, 1),
    "log": (np.log, 1),
    "sqrt": (np.sqrt, 1),
    "abs": (np.abs, 1),
    "min": (np.minimum, 2),
    "max": (np.maximum, 2),
}
CONSTANTS = {"pi": math.pi, "e": math.e}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple["Node", ...]


Node = Union[Num, Var, Neg, BinOp, Call]

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
    """,
    re.VERBOSE,
)


def _position(text: str, offset: int) -> tuple[int, int]:
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            line, col = _position(text, pos)
            raise ParseError(f"unexpected character {text[pos]!r}", offset=pos, line=line, column=col, source=text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, constants: Mapping[str, float] | None):
        self.text = text
        self.tokens = tokenize(text)
        self.i = 0
        self.constants = dict(CONSTANTS)
        if constants:
            self.constants.update(constants)

    def error(self, message, offset=None):
        if offset is None:
            offset = self.tokens[self.i][2]
        line, col = _position(self.text, offset)
        return ParseError(message, offset=offset, line=line, column=col, source=self.text)

    def peek(self):
        return self.tokens[self.i]

    def take(self, value=None):
        tok = self.tokens[self.i]
        if value is not None and tok[1] != value:
            shown = tok[1] or "end of input"
            raise self.error(f"expected {value!r}, found {shown!r}")
        self.i += 1
        return tok

    def parse(self) -> Node:
        node = self.expr()
        if self.peek()[0] != "end":
            raise self.error(f"unexpected {self.peek()[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] in ("^", "**"):
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, value, offset = self.peek()
        if kind == "num":
            self.take()
            return Num(float(value))
        if kind == "name":
            self.take()
            if self.peek()[1] == "(":
                if value not in FUNCTIONS:
                    raise self.error(f"unknown function {value!r}", offset)
                self.take("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.take(")")
                arity = FUNCTIONS[value][1]
                if len(args) != arity:
                    raise self.error(f"{value}() takes {arity} argument(s), got {len(args)}", offset)
                return Call(value, tuple(args))
            if value in self.constants:
                return Num(float(self.constants[value]))
            return Var(value)
        if value == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        shown = value or "end of input"
        raise self.error(f"unexpected {shown!r}")


def parse(text: str, constants: Mapping[str, float] | None = None) -> Node:
    """Parse ``text`` into an expression tree.

    Named constants (``pi``, ``e`` and any in ``constants``) are folded into
    :class:`Num` leaves at parse time.

    Raises:
        ParseError: with the offending offset, line and column.
    """
    return _Parser(text, constants).parse()


def variables(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return variables(node.operand)
    if isinstance(node, BinOp):
        return variables(node.left) | variables(node.right)
    return set().union(*(variables(a) for a in node.args))


def to_string(node: Node) -> str:
    """Fully parenthesised text that re-parses to an identical tree."""
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"(-{repr(-node.value)})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_string(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_string(node.left)} {node.op} {to_string(node.right)})"
    return f"{node.func}(" + ", ".join(to_string(a) for a in node.args) + ")"


def compile_expr(node: Node) -> Callable[[Mapping[str, object]], object]:
    """Turn a tree into a closure ``env -> value`` (numpy broadcasting)."""
    if isinstance(node, Num):
        v = node.value
        return lambda env: v
    if isinstance(node, Var):
        name = node.name
        return lambda env: env[name]
    if isinstance(node, Neg):
        inner = compile_expr(node.operand)
        return lambda env: -inner(env)
    if isinstance(node, BinOp):
        a, b = compile_expr(node.left), compile_expr(node.right)
        if node.op == "+":
            return lambda env: a(env) + b(env)
        if node.op == "-":
            return lambda env: a(env) - b(env)
        if node.op == "*":
            return lambda env: a(env) * b(env)
        if node.op == "/":
            return lambda env: a(env) / b(env)
        return lambda env: np.power(a(env), b(env))
    fn = FUNCTIONS[node.func][0]
    args = [compile_expr(a) for a in node.args]
    if len(args) == 1:
        (arg,) = args
        return lambda env: fn(arg(env))
    return lambda env: fn(*(f(env) for f in args))


def evaluate(node: Node, env: Mapping[str, object]):
    with np.errstate(all="ignore"):
        return compile_expr(node)(env)
