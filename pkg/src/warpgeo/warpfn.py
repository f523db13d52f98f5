"""Tiny infix expression language for scalar fields on chart coordinates.

Grammar (tightest first): ``^`` with an integer literal exponent, unary
minus, ``*`` ``/``, ``+`` ``-``; parentheses; function application for
``sin`` ``cos`` ``exp`` ``log`` ``sqrt``; variables ``x1 .. xn`` for an
n-dimensional chart, with ``t`` accepted as an alias for ``x1`` when the
chart is one-dimensional.

Evaluation is exact forward-mode differentiation: a single pass propagates
value, gradient, and Hessian together, so no truncation error enters the
derivatives.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DslEvaluationError, DslNameError, DslSyntaxError

__all__ = [
    "Expr", "Const", "Var", "Neg", "Call", "Binary", "Power",
    "parse", "format_expression", "evaluate", "evaluate_many",
    "value_and_gradient", "eval2",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class Expr:
    """Base class for expression nodes."""

    def __str__(self) -> str:
        return format_expression(self)


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 0-based coordinate index


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class Call(Expr):
    name: str
    arg: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # '+', '-', '*', '/'
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Power(Expr):
    base: Expr
    exponent: int


# ---------------------------------------------------------------------------
# scanning and parsing

_TOKEN_RE = re.compile(
    r"""(?P<ws>\s+)
      | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num', 'ident', one of '+-*/^()', or 'end'
    text: str
    offset: int


def _scan(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslSyntaxError(
                f"unexpected character {text[pos]!r}", offset=pos,
            )
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        if m.lastgroup == "op":
            tokens.append(_Token(m.group(), m.group(), m.start()))
        else:
            tokens.append(_Token(m.lastgroup, m.group(), m.start()))
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dim: int):
        self.text = text
        self.dim = dim
        self.tokens = _scan(text)
        self.pos = 0

    @property
    def head(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, *expected: str) -> _Token:
        if self.head.kind != kind:
            self.fail(*expected)
        return self.advance()

    def fail(self, *expected: str):
        tok = self.head
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise DslSyntaxError(f"unexpected {what}", offset=tok.offset, expected=expected)

    # grammar, loosest binding first
    def sum(self) -> Expr:
        node = self.product()
        while self.head.kind in ("+", "-"):
            op = self.advance().kind
            node = Binary(op, node, self.product())
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.head.kind in ("*", "/"):
            op = self.advance().kind
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.head.kind == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while self.head.kind == "^":
            self.advance()
            node = Power(node, self.exponent())
        return node

    def exponent(self) -> int:
        sign = 1
        if self.head.kind == "-":
            self.advance()
            sign = -1
        tok = self.head
        if tok.kind != "num" or not tok.text.isdigit():
            self.fail("integer exponent")
        self.advance()
        return sign * int(tok.text)

    def atom(self) -> Expr:
        tok = self.head
        if tok.kind == "num":
            self.advance()
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            return self.name(tok)
        if tok.kind == "(":
            self.advance()
            node = self.sum()
            self.expect(")", "')'")
            return node
        self.fail("number", "variable", "function", "'('")

    def name(self, tok: _Token) -> Expr:
        if tok.text in FUNCTIONS:
            self.expect("(", "'('")
            arg = self.sum()
            self.expect(")", "')'")
            return Call(tok.text, arg)
        index = self.variable_index(tok)
        return Var(index)

    def variable_index(self, tok: _Token) -> int:
        if tok.text == "t" and self.dim == 1:
            return 0
        m = re.fullmatch(r"x([1-9][0-9]*)", tok.text)
        if m:
            i = int(m.group(1))
            if 1 <= i <= self.dim:
                return i - 1
        raise DslNameError(
            f"unknown identifier {tok.text!r}; variables are x1..x{self.dim}"
            + (" (or t)" if self.dim == 1 else ""),
            offset=tok.offset,
        )


def parse(text: str, dim: int) -> Expr:
    """Parse expression text for a ``dim``-dimensional chart."""
    if dim < 1:
        raise DslSyntaxError("chart dimension must be at least 1", offset=0)
    parser = _Parser(text, dim)
    node = parser.sum()
    if parser.head.kind != "end":
        parser.fail("operator", "end of input")
    return node


# ---------------------------------------------------------------------------
# printing

_LEVEL_SUM, _LEVEL_PROD, _LEVEL_NEG, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _fmt(e: Expr, required: int) -> str:
    if isinstance(e, Const):
        text, level = repr(float(e.value)), _LEVEL_ATOM
        if e.value < 0:  # only from hand-built trees; parser emits Neg
            level = _LEVEL_NEG
    elif isinstance(e, Var):
        text, level = f"x{e.index + 1}", _LEVEL_ATOM
    elif isinstance(e, Call):
        text, level = f"{e.name}({_fmt(e.arg, _LEVEL_SUM)})", _LEVEL_ATOM
    elif isinstance(e, Neg):
        text, level = f"-{_fmt(e.arg, _LEVEL_NEG)}", _LEVEL_NEG
    elif isinstance(e, Power):
        text, level = f"{_fmt(e.base, _LEVEL_ATOM)}^{e.exponent}", _LEVEL_POW
    elif isinstance(e, Binary):
        lvl = _LEVEL_SUM if e.op in "+-" else _LEVEL_PROD
        text = f"{_fmt(e.left, lvl)} {e.op} {_fmt(e.right, lvl + 1)}"
        level = lvl
    else:
        raise TypeError(f"not an expression node: {e!r}")
    return f"({text})" if level < required else text


def format_expression(e: Expr) -> str:
    """Render an expression; re-parsing the result gives an equal tree."""
    return _fmt(e, _LEVEL_SUM)


# ---------------------------------------------------------------------------
# evaluation

_DERIVS = {
    "sin": (math.sin, math.cos, lambda u: -math.sin(u)),
    "cos": (math.cos, lambda u: -math.sin(u), lambda u: -math.cos(u)),
    "exp": (math.exp, math.exp, math.exp),
    "log": (math.log, lambda u: 1.0 / u, lambda u: -1.0 / (u * u)),
    "sqrt": (math.sqrt, lambda u: 0.5 / math.sqrt(u), lambda u: -0.25 / math.sqrt(u) ** 3),
}


def _check_domain(e: Expr, name: str, u: float):
    if name == "log" and u <= 0.0:
        raise DslEvaluationError("log of non-positive value", str(e))
    if name == "sqrt" and u < 0.0:
        raise DslEvaluationError("square root of negative value", str(e))
    if name == "sqrt" and u == 0.0:
        raise DslEvaluationError("square root derivative undefined at zero", str(e))


def _ev0(e: Expr, x: tuple) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return x[e.index]
    if isinstance(e, Neg):
        return -_ev0(e.arg, x)
    if isinstance(e, Binary):
        a, b = _ev0(e.left, x), _ev0(e.right, x)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise DslEvaluationError("division by zero", str(e))
        return a / b
    if isinstance(e, Power):
        u = _ev0(e.base, x)
        if e.exponent < 0 and u == 0.0:
            raise DslEvaluationError("division by zero", str(e))
        return u ** e.exponent
    if isinstance(e, Call):
        u = _ev0(e.arg, x)
        _check_domain(e, e.name, u)
        return _DERIVS[e.name][0](u)
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, point) -> float:
    """Value of the expression at a point (sequence of coordinates)."""
    return _ev0(e, tuple(map(float, point)))


_ARRAY_FUNCTIONS = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "log": np.log,
    "sqrt": np.sqrt,
}


def _ev0_array(e: Expr, cols: tuple) -> np.ndarray:
    if isinstance(e, Const):
        return np.full(cols[0].shape, e.value)
    if isinstance(e, Var):
        return cols[e.index]
    if isinstance(e, Neg):
        return -_ev0_array(e.arg, cols)
    if isinstance(e, Binary):
        a, b = _ev0_array(e.left, cols), _ev0_array(e.right, cols)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if np.any(b == 0.0):
            raise DslEvaluationError("division by zero", str(e))
        return a / b
    if isinstance(e, Power):
        u = _ev0_array(e.base, cols)
        if e.exponent < 0 and np.any(u == 0.0):
            raise DslEvaluationError("division by zero", str(e))
        return u ** e.exponent
    if isinstance(e, Call):
        u = _ev0_array(e.arg, cols)
        if e.name == "log" and np.any(u <= 0.0):
            raise DslEvaluationError("log of non-positive value", str(e))
        if e.name == "sqrt" and np.any(u < 0.0):
            raise DslEvaluationError("square root of negative value", str(e))
        return _ARRAY_FUNCTIONS[e.name](u)
    raise TypeError(f"not an expression node: {e!r}")


def evaluate_many(e: Expr, points) -> np.ndarray:
    """Values at many points at once; ``points`` has one row per point."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return _ev0_array(e, tuple(pts.T))


def _ev1(e: Expr, x: tuple) -> tuple:
    """Value and gradient as (float, tuple of floats); tuple-based for speed."""
    n = len(x)
    if isinstance(e, Const):
        return e.value, (0.0,) * n
    if isinstance(e, Var):
        g = [0.0] * n
        g[e.index] = 1.0
        return x[e.index], tuple(g)
    if isinstance(e, Neg):
        v, g = _ev1(e.arg, x)
        return -v, tuple(-gi for gi in g)
    if isinstance(e, Binary):
        av, ag = _ev1(e.left, x)
        bv, bg = _ev1(e.right, x)
        if e.op == "+":
            return av + bv, tuple(p + q for p, q in zip(ag, bg))
        if e.op == "-":
            return av - bv, tuple(p - q for p, q in zip(ag, bg))
        if e.op == "*":
            return av * bv, tuple(p * bv + av * q for p, q in zip(ag, bg))
        if bv == 0.0:
            raise DslEvaluationError("division by zero", str(e))
        inv = 1.0 / bv
        v = av * inv
        return v, tuple((p - v * q) * inv for p, q in zip(ag, bg))
    if isinstance(e, Power):
        uv, ug = _ev1(e.base, x)
        m = e.exponent
        if m < 0 and uv == 0.0:
            raise DslEvaluationError("division by zero", str(e))
        dv = m * uv ** (m - 1) if m != 0 else 0.0
        return uv ** m, tuple(dv * gi for gi in ug)
    if isinstance(e, Call):
        uv, ug = _ev1(e.arg, x)
        _check_domain(e, e.name, uv)
        f, fp, _ = _DERIVS[e.name]
        dv = fp(uv)
        return f(uv), tuple(dv * gi for gi in ug)
    raise TypeError(f"not an expression node: {e!r}")


def value_and_gradient(e: Expr, point) -> tuple[float, np.ndarray]:
    """Value and gradient at a point, both exact to roundoff."""
    v, g = _ev1(e, tuple(map(float, point)))
    return v, np.array(g)


def _ev2(e: Expr, x: tuple, n: int):
    """Value, gradient, Hessian via second-order forward propagation."""
    if isinstance(e, Const):
        return e.value, np.zeros(n), np.zeros((n, n))
    if isinstance(e, Var):
        g = np.zeros(n)
        g[e.index] = 1.0
        return x[e.index], g, np.zeros((n, n))
    if isinstance(e, Neg):
        v, g, H = _ev2(e.arg, x, n)
        return -v, -g, -H
    if isinstance(e, Binary):
        av, ag, aH = _ev2(e.left, x, n)
        bv, bg, bH = _ev2(e.right, x, n)
        if e.op == "+":
            return av + bv, ag + bg, aH + bH
        if e.op == "-":
            return av - bv, ag - bg, aH - bH
        cross = np.outer(ag, bg)
        if e.op == "*":
            return av * bv, av * bg + bv * ag, av * bH + bv * aH + cross + cross.T
        if bv == 0.0:
            raise DslEvaluationError("division by zero", str(e))
        # a/b = a * (1/b)
        iv = 1.0 / bv
        ig = -bg * iv * iv
        iH = -bH * iv * iv + 2.0 * np.outer(bg, bg) * iv ** 3
        cross = np.outer(ag, ig)
        return av * iv, av * ig + iv * ag, av * iH + iv * aH + cross + cross.T
    if isinstance(e, Power):
        uv, ug, uH = _ev2(e.base, x, n)
        m = e.exponent
        if m < 0 and uv == 0.0:
            raise DslEvaluationError("division by zero", str(e))
        if m == 0:
            return 1.0, np.zeros(n), np.zeros((n, n))
        d1 = m * uv ** (m - 1)
        d2 = m * (m - 1) * uv ** (m - 2) if m != 1 else 0.0
        return uv ** m, d1 * ug, d1 * uH + d2 * np.outer(ug, ug)
    if isinstance(e, Call):
        uv, ug, uH = _ev2(e.arg, x, n)
        _check_domain(e, e.name, uv)
        f, fp, fpp = _DERIVS[e.name]
        d1, d2 = fp(uv), fpp(uv)
        return f(uv), d1 * ug, d1 * uH + d2 * np.outer(ug, ug)
    raise TypeError(f"not an expression node: {e!r}")


def eval2(e: Expr, point) -> tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient, and Hessian of the expression at a point."""
    x = tuple(map(float, point))
    return _ev2(e, x, len(x))
