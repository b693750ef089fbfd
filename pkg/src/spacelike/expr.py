"""Analytic expressions in x1..xn with exact second-order forward-mode jets.

Expressions are parsed into a small immutable AST.  Values can be evaluated
over whole arrays of points at once; derivatives are propagated as dense
(value, gradient, Hessian) triples, which is all any curvature formula in
this package ever needs.

    >>> e = parse("atan2(x2, x1)", 2)
    >>> jet = eval_jet2(e, (2.0, 0.0))
    >>> jet.gradient
    array([0. , 0.5])
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, ExprError, ParseError

__all__ = [
    "Node", "Const", "Var", "Add", "Sub", "Mul", "Div", "Pow", "Neg", "Call",
    "Atan2", "Expression", "Jet2", "parse", "eval_jet2", "eval_jet2_batch",
    "eval_value", "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh",
             "atan", "asinh")
NAMED_CONSTANTS = {"pi": math.pi, "e": math.e}


# --------------------------------------------------------------------------
# AST


class Node:
    """Base AST node.  Subclasses are frozen dataclasses."""

    __slots__ = ()
    prec = 100

    def children(self) -> tuple[Node, ...]:
        return ()

    def max_var(self) -> int:
        own = self.index if isinstance(self, Var) else 0
        return max([own] + [c.max_var() for c in self.children()])

    def _wrap(self, child: Node, prec: int) -> str:
        s = str(child)
        return f"({s})" if child.prec < prec else s


@dataclass(frozen=True)
class Const(Node):
    value: float
    prec = 100

    def __str__(self):
        v = self.value
        s = repr(float(v)) if v != int(v) or abs(v) > 1e15 else str(int(v))
        return f"({s})" if v < 0 else s


@dataclass(frozen=True)
class Var(Node):
    index: int
    prec = 100

    def __str__(self):
        return f"x{self.index}"


@dataclass(frozen=True)
class _Binary(Node):
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    prec = 10

    def __str__(self):
        return f"{self._wrap(self.left, 10)} + {self._wrap(self.right, 11)}"


class Sub(_Binary):
    prec = 10

    def __str__(self):
        return f"{self._wrap(self.left, 10)} - {self._wrap(self.right, 11)}"


class Mul(_Binary):
    prec = 20

    def __str__(self):
        return f"{self._wrap(self.left, 20)}*{self._wrap(self.right, 21)}"


class Div(_Binary):
    prec = 20

    def __str__(self):
        return f"{self._wrap(self.left, 20)}/{self._wrap(self.right, 21)}"


class Pow(_Binary):
    prec = 30

    def __str__(self):
        return f"{self._wrap(self.left, 41)}^{self._wrap(self.right, 30)}"


@dataclass(frozen=True)
class Neg(Node):
    arg: Node
    prec = 40

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"-{self._wrap(self.arg, 40)}"


@dataclass(frozen=True)
class Call(Node):
    func: str
    arg: Node
    prec = 100

    def __post_init__(self):
        if self.func not in FUNCTIONS:
            raise ExprError(f"unknown function {self.func!r}")

    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"{self.func}({self.arg})"


@dataclass(frozen=True)
class Atan2(Node):
    y: Node
    x: Node
    prec = 100

    def children(self):
        return (self.y, self.x)

    def __str__(self):
        return f"atan2({self.y}, {self.x})"


@dataclass(frozen=True)
class Expression:
    """A parsed expression together with its declared arity."""

    ast: Node
    arity: int
    text: str = field(default="", compare=False)

    def __post_init__(self):
        if self.arity < 1:
            raise ExprError("arity must be >= 1")
        top = self.ast.max_var()
        if top > self.arity:
            raise ExprError(f"variable x{top} exceeds arity {self.arity}")

    def __str__(self):
        return str(self.ast)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*/^(),])
""", re.VERBOSE)


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}",
                             len(text[:pos].encode()))
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            tokens.append((kind, "^" if tok == "**" else tok,
                           len(text[:pos].encode())))
        pos = m.end()
    tokens.append(("end", "", len(text.encode())))
    return tokens


class _Parser:
    # precedence, loosest first: + -  <  * /  <  ^  <  unary minus
    def __init__(self, text, arity, constants):
        self.toks = _tokenize(text)
        self.i = 0
        self.arity = arity
        self.constants = dict(NAMED_CONSTANTS)
        self.constants.update(constants or {})

    def peek(self):
        return self.toks[self.i]

    def take(self, value=None):
        tok = self.toks[self.i]
        if value is not None and tok[1] != value:
            shown = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {shown!r}", tok[2])
        self.i += 1
        return tok

    def parse(self):
        node = self.sum()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def sum(self):
        node = self.product()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.product()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def product(self):
        node = self.power()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            rhs = self.power()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def power(self):
        base = self.unary()
        if self.peek()[1] == "^":
            self.take()
            return Pow(base, self.power())
        return base

    def unary(self):
        tok = self.peek()
        if tok[1] == "-":
            self.take()
            return Neg(self.unary())
        if tok[1] == "+":
            self.take()
            return self.unary()
        return self.primary()

    def primary(self):
        kind, val, off = self.take()
        if kind == "num":
            return Const(float(val))
        if val == "(":
            node = self.sum()
            self.take(")")
            return node
        if kind == "name":
            if self.peek()[1] == "(":
                return self.call(val, off)
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.arity:
                    raise ParseError(
                        f"variable {val} out of range for arity {self.arity}", off)
                return Var(idx)
            if val in self.constants:
                return Const(float(self.constants[val]))
            raise ParseError(f"unknown identifier {val!r}", off)
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected token {val!r}", off)

    def call(self, name, off):
        self.take("(")
        args = [self.sum()]
        while self.peek()[1] == ",":
            self.take()
            args.append(self.sum())
        self.take(")")
        nargs = {"atan2": 2, "pow": 2}.get(name, 1)
        if name not in FUNCTIONS and name not in ("atan2", "pow"):
            raise ParseError(f"unknown identifier {name!r}", off)
        if len(args) != nargs:
            raise ParseError(f"{name} takes {nargs} argument(s), got {len(args)}", off)
        if name == "atan2":
            return Atan2(*args)
        if name == "pow":
            return Pow(*args)
        return Call(name, args[0])


def parse(text: str, arity: int, constants: Mapping[str, float] | None = None
          ) -> Expression:
    """Parse ``text`` into an :class:`Expression` over variables x1..x<arity>.

    ``constants`` binds extra identifiers (surface parameters) to numbers;
    ``pi`` and ``e`` are always available.  Unary minus binds tighter than
    ``^``, so ``-x1^2`` means ``(-x1)^2``.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    if arity < 1:
        raise ExprError("arity must be >= 1")
    ast = _Parser(text, arity, constants).parse()
    return Expression(ast, arity, text)


# --------------------------------------------------------------------------
# value evaluation (vectorised over points)


def _as_points(point, arity):
    pts = np.asarray(point, dtype=float)
    single = pts.ndim <= 1
    if single and pts.size != arity:
        raise ExprError(f"point has dimension {pts.size}, expected {arity}")
    pts = np.atleast_2d(pts.reshape(-1, arity) if single else pts)
    if pts.shape[-1] != arity:
        raise ExprError(f"point has dimension {pts.shape[-1]}, expected {arity}")
    return pts, single


def _check(ok, msg, node):
    if not np.all(ok):
        raise DomainError(msg, str(node))


def _int_exponent(node: Node):
    if isinstance(node, Const) and float(node.value).is_integer():
        return int(node.value)
    if isinstance(node, Neg) and isinstance(node.arg, Const) \
            and float(node.arg.value).is_integer():
        return -int(node.arg.value)
    return None


def _values(node: Node, x: np.ndarray, allow_zero_sqrt=True) -> np.ndarray:
    b = x.shape[0]
    if isinstance(node, Const):
        return np.full(b, node.value)
    if isinstance(node, Var):
        return x[:, node.index - 1].copy()
    if isinstance(node, Neg):
        return -_values(node.arg, x)
    if isinstance(node, (Add, Sub, Mul, Div)):
        a = _values(node.left, x)
        c = _values(node.right, x)
        if isinstance(node, Add):
            return a + c
        if isinstance(node, Sub):
            return a - c
        if isinstance(node, Mul):
            return a * c
        _check(c != 0, "division by zero", node)
        return a / c
    if isinstance(node, Pow):
        a = _values(node.left, x)
        k = _int_exponent(node.right)
        if k is not None:
            if k < 0:
                _check(a != 0, "zero base with negative exponent", node)
            return a ** float(k)
        c = _values(node.right, x)
        _check(a > 0, "non-integer power of non-positive base", node)
        return np.exp(c * np.log(a))
    if isinstance(node, Atan2):
        y = _values(node.y, x)
        xx = _values(node.x, x)
        _check(~((xx <= 0) & (y == 0)), "atan2 on branch cut {x <= 0, y = 0}", node)
        return np.arctan2(y, xx)
    if isinstance(node, Call):
        a = _values(node.arg, x)
        f = node.func
        if f == "log":
            _check(a > 0, "log of non-positive value", node)
            return np.log(a)
        if f == "sqrt":
            _check(a >= 0, "sqrt of negative value", node)
            return np.sqrt(a)
        if f == "tan":
            _check(np.cos(a) != 0, "tan at a pole", node)
        out = getattr(np, {"atan": "arctan", "asinh": "arcsinh"}.get(f, f))(a)
        _check(np.isfinite(out), "non-finite intermediate", node)
        return out
    raise ExprError(f"unsupported node {node!r}")


def eval_value(expr: Expression, point) -> float | np.ndarray:
    """Evaluate the expression at one point (returns float) or at an
    ``(m, n)`` array of points (returns an array of length m)."""
    pts, single = _as_points(point, expr.arity)
    with np.errstate(all="ignore"):
        out = _values(expr.ast, pts)
    _check(np.isfinite(out), "non-finite value", expr.ast)
    return float(out[0]) if single else out


# --------------------------------------------------------------------------
# second-order jets


@dataclass(frozen=True, eq=False)
class Jet2:
    """Value, gradient and (symmetric) Hessian of a scalar field at a point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray

    def __post_init__(self):
        g = np.array(self.gradient, dtype=float).reshape(-1)
        h = np.array(self.hessian, dtype=float).reshape(g.size, g.size)
        h = 0.5 * (h + h.T)
        if not (np.isfinite(self.value) and np.all(np.isfinite(g))
                and np.all(np.isfinite(h))):
            raise ExprError("jet has non-finite entries")
        g.flags.writeable = False
        h.flags.writeable = False
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "hessian", h)

    @property
    def n(self) -> int:
        return self.gradient.size

    def __repr__(self):
        return (f"Jet2(value={self.value!r}, gradient={self.gradient.tolist()!r}, "
                f"hessian={self.hessian.tolist()!r})")


class _J:
    """Batched jet: v (m,), g (m, n), h (m, n, n)."""

    __slots__ = ("v", "g", "h")

    def __init__(self, v, g, h):
        self.v, self.g, self.h = v, g, h

    def unary(self, f0, f1, f2):
        g = f1[:, None] * self.g
        h = (f1[:, None, None] * self.h
             + f2[:, None, None] * self.g[:, :, None] * self.g[:, None, :])
        return _J(f0, g, h)

    def __add__(self, o):
        return _J(self.v + o.v, self.g + o.g, self.h + o.h)

    def __sub__(self, o):
        return _J(self.v - o.v, self.g - o.g, self.h - o.h)

    def __neg__(self):
        return _J(-self.v, -self.g, -self.h)

    def __mul__(self, o):
        cross = self.g[:, :, None] * o.g[:, None, :]
        h = (self.h * o.v[:, None, None] + o.h * self.v[:, None, None]
             + cross + np.swapaxes(cross, 1, 2))
        g = self.g * o.v[:, None] + o.g * self.v[:, None]
        return _J(self.v * o.v, g, h)


def _jet(node: Node, x: np.ndarray) -> _J:
    m, n = x.shape
    if isinstance(node, Const):
        return _J(np.full(m, node.value), np.zeros((m, n)), np.zeros((m, n, n)))
    if isinstance(node, Var):
        g = np.zeros((m, n))
        g[:, node.index - 1] = 1.0
        return _J(x[:, node.index - 1].copy(), g, np.zeros((m, n, n)))
    if isinstance(node, Neg):
        return -_jet(node.arg, x)
    if isinstance(node, Add):
        return _jet(node.left, x) + _jet(node.right, x)
    if isinstance(node, Sub):
        return _jet(node.left, x) - _jet(node.right, x)
    if isinstance(node, Mul):
        return _jet(node.left, x) * _jet(node.right, x)
    if isinstance(node, Div):
        a = _jet(node.left, x)
        c = _jet(node.right, x)
        _check(c.v != 0, "division by zero", node)
        r = 1.0 / c.v
        return a * c.unary(r, -r * r, 2 * r * r * r)
    if isinstance(node, Pow):
        a = _jet(node.left, x)
        k = _int_exponent(node.right)
        if k is not None:
            if k == 0:
                return _jet(Const(1.0), x)
            if k < 0:
                _check(a.v != 0, "zero base with negative exponent", node)
            kf = float(k)
            p2 = a.v ** (kf - 2) if k != 1 else np.zeros(m)
            p1 = a.v ** (kf - 1)
            return a.unary(a.v ** kf, kf * p1, kf * (kf - 1) * p2)
        _check(a.v > 0, "non-integer power of non-positive base", node)
        if isinstance(node.right, Const):
            c = node.right.value
            return a.unary(a.v ** c, c * a.v ** (c - 1), c * (c - 1) * a.v ** (c - 2))
        c = _jet(node.right, x)
        la = a.unary(np.log(a.v), 1 / a.v, -1 / a.v ** 2)
        prod = c * la
        e = np.exp(prod.v)
        return prod.unary(e, e, e)
    if isinstance(node, Atan2):
        y = _jet(node.y, x)
        xx = _jet(node.x, x)
        _check(~((xx.v <= 0) & (y.v == 0)), "atan2 on branch cut {x <= 0, y = 0}", node)
        r2 = xx.v ** 2 + y.v ** 2
        r4 = r2 * r2
        fy, fx = xx.v / r2, -y.v / r2
        fyy = -2 * xx.v * y.v / r4
        fxx = 2 * xx.v * y.v / r4
        fxy = (y.v ** 2 - xx.v ** 2) / r4
        gy, gx = y.g, xx.g
        g = fy[:, None] * gy + fx[:, None] * gx
        oyy = gy[:, :, None] * gy[:, None, :]
        oxx = gx[:, :, None] * gx[:, None, :]
        oxy = gy[:, :, None] * gx[:, None, :]
        h = (fy[:, None, None] * y.h + fx[:, None, None] * xx.h
             + fyy[:, None, None] * oyy + fxx[:, None, None] * oxx
             + fxy[:, None, None] * (oxy + np.swapaxes(oxy, 1, 2)))
        return _J(np.arctan2(y.v, xx.v), g, h)
    if isinstance(node, Call):
        a = _jet(node.arg, x)
        u = a.v
        f = node.func
        if f == "sin":
            s, c = np.sin(u), np.cos(u)
            return a.unary(s, c, -s)
        if f == "cos":
            s, c = np.sin(u), np.cos(u)
            return a.unary(c, -s, -c)
        if f == "tan":
            c = np.cos(u)
            _check(c != 0, "tan at a pole", node)
            t = np.tan(u)
            sec2 = 1 + t * t
            return a.unary(t, sec2, 2 * t * sec2)
        if f == "exp":
            e = np.exp(u)
            return a.unary(e, e, e)
        if f == "log":
            _check(u > 0, "log of non-positive value", node)
            return a.unary(np.log(u), 1 / u, -1 / (u * u))
        if f == "sqrt":
            _check(u > 0, "sqrt of non-positive value (derivative undefined)", node)
            s = np.sqrt(u)
            return a.unary(s, 0.5 / s, -0.25 / (s * u))
        if f == "sinh":
            return a.unary(np.sinh(u), np.cosh(u), np.sinh(u))
        if f == "cosh":
            return a.unary(np.cosh(u), np.sinh(u), np.cosh(u))
        if f == "atan":
            d = 1 / (1 + u * u)
            return a.unary(np.arctan(u), d, -2 * u * d * d)
        if f == "asinh":
            q = 1 + u * u
            return a.unary(np.arcsinh(u), q ** -0.5, -u * q ** -1.5)
    raise ExprError(f"unsupported node {node!r}")


def eval_jet2_batch(expr: Expression, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jets at an ``(m, n)`` array of points: ``(values, gradients, hessians)``
    with shapes ``(m,)``, ``(m, n)``, ``(m, n, n)``."""
    pts, _ = _as_points(points, expr.arity)
    with np.errstate(all="ignore"):
        j = _jet(expr.ast, pts)
    h = 0.5 * (j.h + np.swapaxes(j.h, 1, 2))
    ok = np.isfinite(j.v) & np.isfinite(j.g).all(1) & np.isfinite(h).all((1, 2))
    _check(ok, "non-finite intermediate", expr.ast)
    return j.v, j.g, h


def eval_jet2(expr: Expression, point: Sequence[float]) -> Jet2:
    """Exact value, gradient and Hessian of ``expr`` at a single point."""
    pts, _ = _as_points(point, expr.arity)
    if pts.shape[0] != 1:
        raise ExprError("eval_jet2 takes a single point; use eval_jet2_batch")
    v, g, h = eval_jet2_batch(expr, pts)
    return Jet2(v[0], g[0], h[0])
