"""Map expressions: parsing, serialization, jet (value + 3 derivatives) evaluation.

Grammar (precedence from loosest to tightest)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := NUMBER | IDENT | FUNC '(' expr ')' | '(' expr ')'

Identifiers are ``x``, ``alpha``, ``beta`` and ``pi``; functions are ``sin``
and ``cos``. So ``-x^2`` is ``-(x^2)`` and ``2^3^2`` is ``2^(3^2)``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import (
    DomainError,
    ExprSyntaxError,
    MissingParameterError,
    NonFiniteError,
    UnknownIdentifierError,
)

PARAMETERS = ("alpha", "beta")
FUNCTIONS = ("sin", "cos")
_SYMBOLS = ("x", "pi") + PARAMETERS


# ---------------------------------------------------------------- nodes

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
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
    arg: "Node"


Node = Union[Num, Sym, Neg, BinOp, Call]


@dataclass(frozen=True)
class MapExpr:
    root: Node
    source_text: str

    @property
    def parameters(self) -> frozenset:
        return frozenset(n for n in _symbols(self.root) if n in PARAMETERS)

    def depends_on_x(self) -> bool:
        return _depends_on_x(self.root)

    def __str__(self):
        return serialize(self.root)


def _symbols(node):
    if isinstance(node, Sym):
        yield node.name
    elif isinstance(node, Neg):
        yield from _symbols(node.operand)
    elif isinstance(node, BinOp):
        yield from _symbols(node.left)
        yield from _symbols(node.right)
    elif isinstance(node, Call):
        yield from _symbols(node.arg)


def _depends_on_x(node) -> bool:
    return any(name == "x" for name in _symbols(node))


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}",
                                  _byte_offset(text, pos))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), _byte_offset(text, start)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(text, n)))
    return tokens


def _byte_offset(text, index):
    return len(text[:index].encode("utf-8"))


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        kind, text, off = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", off)

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", off)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text in FUNCTIONS:
                if self.peek()[1] != "(":
                    raise ExprSyntaxError(
                        f"function {text!r} requires parentheses", self.peek()[2])
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in _SYMBOLS:
                return Sym(text)
            raise UnknownIdentifierError(text, off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", off)
        raise ExprSyntaxError(f"unexpected token {text!r}", off)


def parse_map_expr(text: str) -> MapExpr:
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return MapExpr(_Parser(text).parse(), text)


# ---------------------------------------------------------------- serialization

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _prec(node):
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 3
    return 5


def _fmt_num(value):
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def serialize(node: Node) -> str:
    """Minimal-parenthesis text that parses back to the same tree."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({serialize(node.arg)})"
    if isinstance(node, Neg):
        inner = serialize(node.operand)
        return f"-({inner})" if _prec(node.operand) < 3 else f"-{inner}"
    p = _PREC[node.op]
    left, right = serialize(node.left), serialize(node.right)
    if node.op == "^":
        if _prec(node.left) <= p:
            left = f"({left})"
        if _prec(node.right) < p:
            right = f"({right})"
    else:
        if _prec(node.left) < p:
            left = f"({left})"
        if _prec(node.right) <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


# ---------------------------------------------------------------- jets

class Jet3:
    """Value and first three derivatives with respect to x."""

    __slots__ = ("v0", "v1", "v2", "v3")

    def __init__(self, v0, v1=0.0, v2=0.0, v3=0.0):
        self.v0 = float(v0)
        self.v1 = float(v1)
        self.v2 = float(v2)
        self.v3 = float(v3)

    @classmethod
    def variable(cls, x):
        return cls(x, 1.0, 0.0, 0.0)

    def as_tuple(self):
        return (self.v0, self.v1, self.v2, self.v3)

    def __iter__(self):
        return iter(self.as_tuple())

    def __eq__(self, other):
        return isinstance(other, Jet3) and self.as_tuple() == other.as_tuple()

    def __repr__(self):
        return "Jet3(%r, %r, %r, %r)" % self.as_tuple()

    def is_finite(self):
        return all(math.isfinite(v) for v in self.as_tuple())

    def __add__(self, o):
        return Jet3(self.v0 + o.v0, self.v1 + o.v1, self.v2 + o.v2, self.v3 + o.v3)

    def __sub__(self, o):
        return Jet3(self.v0 - o.v0, self.v1 - o.v1, self.v2 - o.v2, self.v3 - o.v3)

    def __neg__(self):
        return Jet3(-self.v0, -self.v1, -self.v2, -self.v3)

    def __mul__(self, o):
        a, b = self, o
        return Jet3(
            a.v0 * b.v0,
            a.v1 * b.v0 + a.v0 * b.v1,
            a.v2 * b.v0 + 2.0 * a.v1 * b.v1 + a.v0 * b.v2,
            a.v3 * b.v0 + 3.0 * a.v2 * b.v1 + 3.0 * a.v1 * b.v2 + a.v0 * b.v3,
        )

    def compose(self, d0, d1, d2, d3):
        """phi(self) given phi and its first three derivatives at self.v0."""
        g1, g2, g3 = self.v1, self.v2, self.v3
        return Jet3(
            d0,
            d1 * g1,
            d2 * g1 * g1 + d1 * g2,
            d3 * g1 ** 3 + 3.0 * d2 * g1 * g2 + d1 * g3,
        )

    def is_constant(self):
        return self.v1 == 0.0 and self.v2 == 0.0 and self.v3 == 0.0


def _jet_sin(g):
    s, c = math.sin(g.v0), math.cos(g.v0)
    return g.compose(s, c, -s, -c)


def _jet_cos(g):
    s, c = math.sin(g.v0), math.cos(g.v0)
    return g.compose(c, -s, -c, s)


def _jet_reciprocal(g):
    t = g.v0
    if t == 0.0:
        raise DomainError("division by zero")
    r = 1.0 / t
    return g.compose(r, -r * r, 2.0 * r ** 3, -6.0 * r ** 4)


def _jet_const_power(g, c):
    t = g.v0
    if t == 0.0 and c < 0:
        raise DomainError("0 raised to a negative power")
    if t < 0.0 and not float(c).is_integer():
        raise DomainError("negative base with non-integer exponent")
    if c == 0.0:
        return Jet3(1.0)

    def pw(e):
        if e == 0:
            return 1.0
        if t == 0.0:
            return 0.0 if e > 0 else math.inf
        return math.pow(t, e)

    def term(k):
        # k-th derivative of t^c; a zero falling factorial wins over t^(c-k) = inf
        coef = 1.0
        for i in range(k):
            coef *= c - i
        return 0.0 if coef == 0.0 else coef * pw(c - k)

    return g.compose(term(0), term(1), term(2), term(3))


def _jet_exp(g):
    e = math.exp(g.v0)
    return g.compose(e, e, e, e)


def _jet_log(g):
    t = g.v0
    if t <= 0.0:
        raise DomainError("power with variable exponent needs a positive base")
    r = 1.0 / t
    return g.compose(math.log(t), r, -r * r, 2.0 * r ** 3)


def _param_value(name, alpha, beta):
    value = alpha if name == "alpha" else beta
    if value is None:
        raise MissingParameterError(f"no value supplied for parameter {name!r}")
    return value


def _eval_jet_node(node, xj, alpha, beta):
    if isinstance(node, Num):
        return Jet3(node.value)
    if isinstance(node, Sym):
        if node.name == "x":
            return xj
        if node.name == "pi":
            return Jet3(math.pi)
        return Jet3(_param_value(node.name, alpha, beta))
    if isinstance(node, Neg):
        return -_eval_jet_node(node.operand, xj, alpha, beta)
    if isinstance(node, Call):
        arg = _eval_jet_node(node.arg, xj, alpha, beta)
        return _jet_sin(arg) if node.func == "sin" else _jet_cos(arg)
    left = _eval_jet_node(node.left, xj, alpha, beta)
    right = _eval_jet_node(node.right, xj, alpha, beta)
    op = node.op
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if op == "/":
        return left * _jet_reciprocal(right)
    # '^': constant exponent uses the power rule; x-dependent exponent goes
    # through exp(b*ln a), which requires a > 0
    if not _depends_on_x(node.right):
        return _jet_const_power(left, right.v0)
    return _jet_exp(right * _jet_log(left))


def eval_jet(expr: MapExpr, x, alpha=None, beta=None) -> Jet3:
    """Value and derivatives d/dx up to order 3 of `expr` at `x`.

    `x` may itself be a `Jet3`, in which case the result is the jet of the
    composition (chain rule through every node).
    """
    xj = x if isinstance(x, Jet3) else Jet3.variable(x)
    try:
        jet = _eval_jet_node(expr.root, xj, alpha, beta)
    except (OverflowError, ZeroDivisionError) as exc:
        raise DomainError(str(exc)) from exc
    if not jet.is_finite():
        raise NonFiniteError(f"non-finite jet {jet!r} for {expr.source_text!r} at x={xj.v0!r}")
    return jet


# ---------------------------------------------------------------- compilation

def _codegen(node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Sym):
        return "_pi" if node.name == "pi" else node.name
    if isinstance(node, Neg):
        return f"(-{_codegen(node.operand)})"
    if isinstance(node, Call):
        return f"_{node.func}({_codegen(node.arg)})"
    a, b = _codegen(node.left), _codegen(node.right)
    if node.op == "^":
        if _depends_on_x(node.right):
            return f"_exp({b} * _log({a}))"
        return f"_pow({a}, {b})"
    return f"({a} {node.op} {b})"


def _log_positive(t):
    if t <= 0.0:
        raise DomainError("power with variable exponent needs a positive base")
    return math.log(t)


_SCALAR_NS = {
    "_sin": math.sin, "_cos": math.cos, "_pow": math.pow,
    "_exp": math.exp, "_log": _log_positive, "_pi": math.pi,
}


def _np_log_positive(t):
    return np.log(np.where(t > 0, t, np.nan))


_VECTOR_NS = {
    "_sin": np.sin, "_cos": np.cos, "_pow": np.power,
    "_exp": np.exp, "_log": _np_log_positive, "_pi": math.pi,
}


@lru_cache(maxsize=256)
def _compile(source: str, vector: bool):
    expr = parse_map_expr(source)
    code = f"def _f(x, alpha, beta):\n    return {_codegen(expr.root)}\n"
    ns = dict(_VECTOR_NS if vector else _SCALAR_NS)
    exec(compile(code, f"<map {source}>", "exec"), ns)
    return ns["_f"]


def compile_scalar(expr: MapExpr) -> Callable[[float, float, float], float]:
    """Plain-float evaluator f(x, alpha, beta); raises DomainError on bad input."""
    raw = _compile(expr.source_text, False)

    def f(x, alpha, beta):
        try:
            return raw(x, alpha, beta)
        except (ValueError, ZeroDivisionError, OverflowError) as exc:
            raise DomainError(f"{exc} evaluating {expr.source_text!r} at x={x!r}") from exc

    f.raw = raw
    return f


def compile_vector(expr: MapExpr):
    """numpy evaluator; domain problems surface as non-finite entries."""
    return _compile(expr.source_text, True)
