"""A small arithmetic expression language for analytic forcing terms.

Grammar (``^`` and ``**`` are right-associative and bind tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom (('^' | '**') unary)?
    atom   := NUMBER | 'x' | 'y' | 'pi' | 'e' | FUNC '(' expr ')' | '(' expr ')'
    FUNC   := sin | cos | exp

Compiled expressions are callables ``fn(x, y)`` that broadcast over numpy arrays.
"""

import math
import re

import numpy as np

from .errors import ExpressionError

FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|(\*\*|[-+*/^()])|([A-Za-z_]\w*))")


def tokenize(text):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExpressionError(f"unexpected character {text[pos:].lstrip()[:1]!r} at offset {pos}")
        num, op, name = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif op is not None:
            out.append(("op", "^" if op == "**" else op))
        else:
            out.append(("name", name))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind or "token"
            raise ExpressionError(f"expected {want!r} in {self.text!r}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] is not None:
            raise ExpressionError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            rhs = self.term()
            node = (lambda a, b: lambda x, y: a(x, y) + b(x, y))(node, rhs) if op == "+" else \
                (lambda a, b: lambda x, y: a(x, y) - b(x, y))(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            rhs = self.unary()
            node = (lambda a, b: lambda x, y: a(x, y) * b(x, y))(node, rhs) if op == "*" else \
                (lambda a, b: lambda x, y: a(x, y) / b(x, y))(node, rhs)
        return node

    def unary(self):
        if self.peek() == ("op", "-"):
            self.take()
            inner = self.unary()
            return lambda x, y: -inner(x, y)
        if self.peek() == ("op", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            exp = self.unary()
            return lambda x, y: np.power(base(x, y), exp(x, y))
        return base

    def atom(self):
        kind, val = self.peek()
        if kind == "num":
            self.take()
            return lambda x, y: val
        if kind == "name":
            self.take()
            if val == "x":
                return lambda x, y: x
            if val == "y":
                return lambda x, y: y
            if val in CONSTANTS:
                c = CONSTANTS[val]
                return lambda x, y: c
            if val in FUNCTIONS:
                fn = FUNCTIONS[val]
                self.take("op", "(")
                arg = self.expr()
                self.take("op", ")")
                return lambda x, y: fn(arg(x, y))
            raise ExpressionError(f"unknown name {val!r} in {self.text!r}")
        if (kind, val) == ("op", "("):
            self.take()
            node = self.expr()
            self.take("op", ")")
            return node
        if kind is None:
            raise ExpressionError(f"unexpected end of input in {self.text!r}")
        raise ExpressionError(f"unexpected {val!r} in {self.text!r}")


def compile_expr(text: str):
    """Compile an expression into ``fn(x, y)`` returning an array shaped like ``x``."""
    node = _Parser(text).parse()

    def fn(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = node(x, y)
        return np.broadcast_to(np.asarray(out, dtype=float), np.broadcast(x, y).shape)

    fn.source = text
    return fn


def evaluate(text: str, x=0.0, y=0.0) -> float:
    return float(compile_expr(text)(x, y))
