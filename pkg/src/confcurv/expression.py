"""Tiny arithmetic language for curvature fields K(x, y, z).

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)?          right-associative
    exponent:= '-'? power                    must reduce to a constant
    atom    := NUMBER | x | y | z | FUNC '(' expr ')' | '(' expr ')'

Evaluation is vectorised over numpy arrays of coordinates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

FUNCTIONS = {
    "exp": np.exp,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}
VARIABLES = ("x", "y", "z")


class ExpressionSyntaxError(ValueError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class EvaluationError(ArithmeticError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class Node:
    def evaluate(self, x, y, z):
        raise NotImplementedError

    def is_constant(self) -> bool:
        raise NotImplementedError

    def __call__(self, x, y=0.0, z=0.0):
        x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
        out = np.broadcast_to(np.asarray(self.evaluate(x, y, z), dtype=float), x.shape)
        return float(out) if out.ndim == 0 else np.array(out)


@dataclass(frozen=True)
class Num(Node):
    value: float

    def evaluate(self, x, y, z):
        return np.full(np.shape(x), self.value)

    def is_constant(self):
        return True

    def __str__(self):
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 or text.startswith("-") else text


@dataclass(frozen=True)
class Var(Node):
    name: str

    def evaluate(self, x, y, z):
        return {"x": x, "y": y, "z": z}[self.name]

    def is_constant(self):
        return False

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Neg(Node):
    operand: Node

    def evaluate(self, x, y, z):
        return -self.operand.evaluate(x, y, z)

    def is_constant(self):
        return self.operand.is_constant()

    def __str__(self):
        return f"(-{self.operand})"


@dataclass(frozen=True)
class BinOp(Node):
    op: str
    left: Node
    right: Node

    def evaluate(self, x, y, z):
        a = self.left.evaluate(x, y, z)
        b = self.right.evaluate(x, y, z)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            zero = np.flatnonzero(np.asarray(b) == 0)
            if zero.size:
                raise EvaluationError(f"division by zero in '{self}'", index=int(zero[0]))
            return a / b
        # '^': exponent is a constant by construction
        bad = np.flatnonzero((np.asarray(a) < 0) & (np.asarray(b) != np.round(b)))
        if bad.size:
            raise EvaluationError(f"negative base with fractional exponent in '{self}'", index=int(bad[0]))
        bad = np.flatnonzero((np.asarray(a) == 0) & (np.asarray(b) < 0))
        if bad.size:
            raise EvaluationError(f"zero raised to a negative power in '{self}'", index=int(bad[0]))
        return np.power(a, b)

    def is_constant(self):
        return self.left.is_constant() and self.right.is_constant()

    def __str__(self):
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Call(Node):
    name: str
    arg: Node

    def evaluate(self, x, y, z):
        a = self.arg.evaluate(x, y, z)
        if self.name == "sqrt":
            bad = np.flatnonzero(np.asarray(a) < 0)
            if bad.size:
                raise EvaluationError(f"sqrt of a negative number in '{self}'", index=int(bad[0]))
        with np.errstate(over="ignore"):
            out = FUNCTIONS[self.name](a)
        bad = np.flatnonzero(~np.isfinite(np.atleast_1d(out)))
        if bad.size:
            raise EvaluationError(f"non-finite result in '{self}'", index=int(bad[0]))
        return out

    def is_constant(self):
        return self.arg.is_constant()

    def __str__(self):
        return f"{self.name}({self.arg})"


_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(.))")


def _tokenize(text):
    tokens = []
    pos = 0
    while text[pos:].strip():
        m = _TOKEN.match(text, pos)
        num, ident, sym = m.groups()
        start = m.start(m.lastindex)
        if num is not None:
            tokens.append(("num", float(num), start))
        elif ident is not None:
            tokens.append(("id", ident, start))
        elif sym in "+-*/^()":
            tokens.append((sym, sym, start))
        else:
            raise ExpressionSyntaxError(f"unexpected character {sym!r}", start)
        pos = m.end()
    tokens.append(("end", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i][0]

    def take(self, kind=None):
        tok = self.tokens[self.i]
        if kind is not None and tok[0] != kind:
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            raise ExpressionSyntaxError(f"expected {kind!r}, found {what}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        tok = self.tokens[self.i]
        if tok[0] != "end":
            raise ExpressionSyntaxError(f"unexpected {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()[0]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() in ("*", "/"):
            op = self.take()[0]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek() == "-":
            self.take()
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Neg(operand)
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() != "^":
            return base
        start = self.take("^")[2]
        negate = False
        if self.peek() == "-":
            self.take()
            negate = True
        exponent = self.power()
        if not exponent.is_constant():
            raise ExpressionSyntaxError("exponent must be a constant", start + 1)
        value = float(exponent(0.0))
        return BinOp("^", base, Num(-value if negate else value))

    def atom(self):
        kind, value, start = self.tokens[self.i]
        if kind == "num":
            self.take()
            return Num(value)
        if kind == "(":
            self.take()
            node = self.expr()
            self.take(")")
            return node
        if kind == "id":
            self.take()
            if value in VARIABLES:
                return Var(value)
            if value in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return Call(value, arg)
            raise ExpressionSyntaxError(f"unknown identifier {value!r}", start)
        if kind == "end":
            raise ExpressionSyntaxError("unexpected end of input", start)
        raise ExpressionSyntaxError(f"unexpected {value!r}", start)


def parse_expression(text: str) -> Node:
    """Parse ``text`` into an expression tree; ``str(tree)`` pretty-prints it back."""
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return _Parser(text).parse()
