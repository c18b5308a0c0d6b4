"""A small arithmetic language for potentials V(x, t), frame motions xi(t)
and gauge functions f(x, t).

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | 'x' | 't' | FUNC '(' expr ')' | '(' expr ')'

so ``-x^2`` is ``-(x^2)`` and ``2^-1`` is ``2^(-1)``. Evaluation is
vectorised over numpy arrays and raises on domain errors instead of
producing NaN.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ExpressionError",
    "Num",
    "Var",
    "Unary",
    "Binary",
    "Call",
    "Expression",
    "parse_expression",
    "eval_expression",
    "to_source",
    "FUNCTIONS",
    "VARIABLES",
]

VARIABLES = ("x", "t")


class ExpressionError(ValueError):
    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        super().__init__(message if offset is None else f"{message} (at byte {offset})")


def _checked_log(a):
    if np.any(a <= 0):
        raise ValueError("log of non-positive value")
    return np.log(a)


def _checked_sqrt(a):
    if np.any(a < 0):
        raise ValueError("sqrt of negative value")
    return np.sqrt(a)


FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "log": _checked_log,
    "sqrt": _checked_sqrt,
    "abs": np.abs,
    "tanh": np.tanh,
}


@dataclass(frozen=True)
class Num:
    value: float
    offset: int = 0

    def __eq__(self, other):
        return isinstance(other, Num) and self.value == other.value

    def __hash__(self):
        return hash(("num", self.value))


@dataclass(frozen=True)
class Var:
    name: str
    offset: int = 0

    def __eq__(self, other):
        return isinstance(other, Var) and self.name == other.name

    def __hash__(self):
        return hash(("var", self.name))


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object
    offset: int = 0

    def __eq__(self, other):
        return isinstance(other, Unary) and (self.op, self.operand) == (other.op, other.operand)

    def __hash__(self):
        return hash(("un", self.op, self.operand))


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object
    offset: int = 0

    def __eq__(self, other):
        return (isinstance(other, Binary)
                and (self.op, self.left, self.right) == (other.op, other.left, other.right))

    def __hash__(self):
        return hash(("bin", self.op, self.left, self.right))


@dataclass(frozen=True)
class Call:
    func: str
    arg: object
    offset: int = 0

    def __eq__(self, other):
        return isinstance(other, Call) and (self.func, self.arg) == (other.func, other.arg)

    def __hash__(self):
        return hash(("call", self.func, self.arg))


# --- tokenizer -----------------------------------------------------------------

_TOKEN = re.compile(rb"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)


def _tokenize(data: bytes):
    pos = 0
    out = []
    while pos < len(data):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ExpressionError(f"unexpected character {data[pos:pos + 1]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            out.append((kind, m.group().decode("ascii"), pos))
        pos = m.end()
    out.append(("end", "", len(data)))
    return out


class _Parser:
    def __init__(self, text: str):
        data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
        self.tokens = _tokenize(data)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExpressionError(f"expected {value!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExpressionError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = Binary(op, node, self.term(), pos)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            node = Binary(op, node, self.unary(), pos)
        return node

    def unary(self):
        kind, text, pos = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Unary("-", self.unary(), pos)
        return self.power()

    def power(self):
        base = self.atom()
        kind, text, pos = self.peek()
        if kind == "op" and text == "^":
            self.take()
            return Binary("^", base, self.unary(), pos)
        return base

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(float(text), pos)
        if kind == "name":
            if text in VARIABLES:
                return Var(text, pos)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                k2, t2, p2 = self.peek()
                if t2 == ",":
                    raise ExpressionError(f"{text}() takes exactly one argument", p2)
                self.expect(")")
                return Call(text, arg, pos)
            raise ExpressionError(f"unknown identifier {text!r}", pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExpressionError(f"unexpected {found}", pos)


# --- printing ----------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _prec(node) -> int:
    if isinstance(node, Binary):
        return _PREC[node.op]
    if isinstance(node, Unary):
        return _PREC["neg"]
    return 5


def _wrap(node, need: bool) -> str:
    s = to_source(node)
    return f"({s})" if need else s


def to_source(node) -> str:
    """Canonical text; parsing it gives back an equal tree."""
    if isinstance(node, Num):
        if not np.isfinite(node.value) or node.value < 0:
            raise ExpressionError("literals must be finite and non-negative")
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    if isinstance(node, Unary):
        return "-" + _wrap(node.operand, _prec(node.operand) < 3)
    if isinstance(node, Binary):
        p = _PREC[node.op]
        if node.op == "^":
            left = _wrap(node.left, _prec(node.left) <= p)
            right = _wrap(node.right, _prec(node.right) < 3)
            return f"{left}^{right}"
        left = _wrap(node.left, _prec(node.left) < p)
        right = _wrap(node.right, _prec(node.right) <= p)
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")


# --- evaluation ----------------------------------------------------------------------

def _eval(node, env):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        arg = _eval(node.arg, env)
        try:
            with np.errstate(all="raise"):
                out = FUNCTIONS[node.func](np.asarray(arg, dtype=float))
        except (ValueError, FloatingPointError) as exc:
            raise ExpressionError(f"domain error in {node.func}(): {exc}", node.offset) from None
        return _finite(out, node)
    a = _eval(node.left, env)
    b = _eval(node.right, env)
    try:
        with np.errstate(all="raise"):
            a = np.asarray(a, dtype=float)
            b = np.asarray(b, dtype=float)
            if node.op == "+":
                out = a + b
            elif node.op == "-":
                out = a - b
            elif node.op == "*":
                out = a * b
            elif node.op == "/":
                if np.any(b == 0):
                    raise ValueError("division by zero")
                out = a / b
            else:
                if np.any((a < 0) & (b != np.round(b))):
                    raise ValueError("negative base with non-integer exponent")
                if np.any((a == 0) & (b < 0)):
                    raise ValueError("zero to a negative power")
                out = np.power(a, b)
    except (ValueError, FloatingPointError) as exc:
        raise ExpressionError(f"domain error in {node.op!r}: {exc}", node.offset) from None
    return _finite(out, node)


def _finite(value, node):
    if not np.all(np.isfinite(value)):
        raise ExpressionError("non-finite result", node.offset)
    return value


def _uses(node, name) -> bool:
    if isinstance(node, Var):
        return node.name == name
    if isinstance(node, Num):
        return False
    if isinstance(node, Unary):
        return _uses(node.operand, name)
    if isinstance(node, Call):
        return _uses(node.arg, name)
    return _uses(node.left, name) or _uses(node.right, name)


class Expression:
    """Parsed expression, callable as ``expr(x, t)`` on scalars or arrays."""

    def __init__(self, tree):
        self.tree = tree
        self.source = to_source(tree)
        self.time_dependent = _uses(tree, "t")
        self.uses_x = _uses(tree, "x")

    def __call__(self, x=0.0, t=0.0):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = _eval(self.tree, {"x": x, "t": t})
        return np.broadcast_to(out, np.broadcast(x, t).shape).astype(float)

    def __eq__(self, other):
        return isinstance(other, Expression) and self.tree == other.tree

    def __hash__(self):
        return hash(self.tree)

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __str__(self):
        return self.source


def parse_expression(text: str) -> Expression:
    if not isinstance(text, (str, bytes)):
        raise ExpressionError("expression must be text")
    return Expression(_Parser(text).parse())


def eval_expression(expr: Expression | str, x=0.0, t=0.0):
    if not isinstance(expr, Expression):
        expr = parse_expression(expr)
    out = expr(x, t)
    return float(out) if np.ndim(out) == 0 else out
