"""Expression trees for objectives and constraints.

Expressions are immutable trees built either with Python operators::

    x1, x2 = var(0), var(1)
    f = exp(-(x1 - 1) ** 2) + x1 * x2

or parsed from the prefix text form ``(+ (* x1 x2) 1)``.  Variables are
1-based in text (``x1``) and 0-based in code (``var(0)``).

Every expression supports point evaluation (:func:`evaluate`, vectorized
over rows of a 2-D array), natural interval extension
(:func:`eval_interval`) and symbolic differentiation (:func:`grad`).
Non-smooth nodes differentiate into ``sign`` and ``select`` nodes whose
interval extensions enclose the generalized gradient.
"""

from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import intervals as iv
from .intervals import DomainError, Interval

UNARY = ("neg", "exp", "log", "sqrt", "sin", "cos", "atan", "abs", "sign")
BINARY = ("add", "sub", "mul", "div", "min", "max")


@dataclass(frozen=True)
class Expr:
    """A node of an expression tree.

    ``value`` holds the constant for ``const``, the 0-based index for
    ``var`` and the exponent for ``pow``.
    """

    op: str
    args: tuple = ()
    value: float | None = None

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return mul(_lift(other), self)

    def __truediv__(self, other):
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __str__(self):
        return to_prefix(self)

    @functools.cached_property
    def max_var(self) -> int:
        """Largest variable index referenced, or -1."""
        if self.op == "var":
            return int(self.value)
        return max((a.max_var for a in self.args), default=-1)


def _lift(v) -> Expr:
    if isinstance(v, Expr):
        return v
    return const(v)


def const(c) -> Expr:
    return Expr("const", (), float(c))


def var(i: int) -> Expr:
    if i < 0:
        raise ValueError("variable index must be non-negative")
    return Expr("var", (), int(i))


ZERO = const(0.0)
ONE = const(1.0)


def _is_const(e: Expr, c=None) -> bool:
    return e.op == "const" and (c is None or e.value == c)


# simplifying constructors -------------------------------------------------


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Expr("add", (a, b))


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Expr("sub", (a, b))


def mul(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Expr("mul", (a, b))


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(b, 0.0):
        raise DomainError("division by constant zero")
    if _is_const(a) and _is_const(b):
        return const(a.value / b.value)
    if _is_const(a, 0.0):
        return ZERO
    if _is_const(b, 1.0):
        return a
    return Expr("div", (a, b))


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return const(-a.value)
    if a.op == "neg":
        return a.args[0]
    return Expr("neg", (a,))


def power(a: Expr, p) -> Expr:
    p = float(p)
    if p == 0.0:
        return ONE
    if p == 1.0:
        return a
    if _is_const(a) and (p.is_integer() or a.value >= 0):
        return const(a.value**p)
    return Expr("pow", (a,), p)


def _unary(op):
    fn = {
        "exp": math.exp,
        "sin": math.sin,
        "cos": math.cos,
        "atan": math.atan,
        "abs": abs,
    }.get(op)

    def build(a) -> Expr:
        a = _lift(a)
        if fn is not None and _is_const(a):
            return const(fn(a.value))
        return Expr(op, (a,))

    build.__name__ = op
    return build


exp = _unary("exp")
log = _unary("log")
sqrt = _unary("sqrt")
sin = _unary("sin")
cos = _unary("cos")
atan = _unary("atan")
fabs = _unary("abs")
sign = _unary("sign")


def minimum(a, b) -> Expr:
    return Expr("min", (_lift(a), _lift(b)))


def maximum(a, b) -> Expr:
    return Expr("max", (_lift(a), _lift(b)))


def select(a, b, then, other) -> Expr:
    """``then`` where ``a < b``, else ``other``."""
    then = _lift(then)
    other = _lift(other)
    if then == other:
        return then
    return Expr("select", (_lift(a), _lift(b), then, other))


# point evaluation ----------------------------------------------------------


def _atan_ratio(num, den):
    # arctan(num/den), continued to sign(num)*pi/2 where den == 0
    safe = np.where(den == 0.0, 1.0, den)
    val = np.arctan(num / safe)
    return np.where(den == 0.0, np.sign(num) * iv.HALF_PI, val)


def _eval(e: Expr, X):
    op = e.op
    if op == "const":
        return e.value
    if op == "var":
        return X[..., e.value]
    if op == "atan" and e.args[0].op == "div":
        num = _eval(e.args[0].args[0], X)
        den = _eval(e.args[0].args[1], X)
        return _atan_ratio(num, den)
    a = [_eval(c, X) for c in e.args]
    if op == "add":
        return a[0] + a[1]
    if op == "sub":
        return a[0] - a[1]
    if op == "mul":
        return a[0] * a[1]
    if op == "div":
        if np.any(np.asarray(a[1]) == 0.0):
            raise DomainError("division by zero")
        return a[0] / a[1]
    if op == "neg":
        return -a[0]
    if op == "pow":
        p = e.value
        if not p.is_integer() and np.any(np.asarray(a[0]) < 0.0):
            raise DomainError("real power of a negative base")
        if p < 0 and np.any(np.asarray(a[0]) == 0.0):
            raise DomainError("negative power at zero")
        if p.is_integer():
            return np.power(a[0], int(p)) if p > 0 else 1.0 / np.power(a[0], int(-p))
        return np.power(a[0], p)
    if op == "exp":
        return np.exp(a[0])
    if op == "log":
        if np.any(np.asarray(a[0]) <= 0.0):
            raise DomainError("log of a non-positive value")
        return np.log(a[0])
    if op == "sqrt":
        if np.any(np.asarray(a[0]) < 0.0):
            raise DomainError("sqrt of a negative value")
        return np.sqrt(a[0])
    if op == "sin":
        return np.sin(a[0])
    if op == "cos":
        return np.cos(a[0])
    if op == "atan":
        return np.arctan(a[0])
    if op == "abs":
        return np.abs(a[0])
    if op == "sign":
        return np.sign(a[0])
    if op == "min":
        return np.minimum(a[0], a[1])
    if op == "max":
        return np.maximum(a[0], a[1])
    if op == "select":
        return np.where(np.less(a[0], a[1]), a[2], a[3])
    raise ValueError(f"unknown operator {op!r}")


def evaluate(e: Expr, x):
    """Evaluate at a point (1-D ``x``) or at every row of a 2-D array."""
    X = np.asarray(x, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = _eval(e, X)
    shape = X.shape[:-1]
    if shape == ():
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


# interval evaluation -------------------------------------------------------


def _ieval(e: Expr, lo, hi, inflate):
    op = e.op
    if op == "const":
        r = Interval._raw(e.value, e.value)
    elif op == "var":
        r = Interval._raw(lo[..., e.value], hi[..., e.value])
    elif op == "atan" and e.args[0].op == "div":
        num = _ieval(e.args[0].args[0], lo, hi, inflate)
        den = _ieval(e.args[0].args[1], lo, hi, inflate)
        unsafe = den.contains_zero()
        den_safe = Interval._raw(np.where(unsafe, 1.0, den.lo), np.where(unsafe, 1.0, den.hi))
        q = iv.iatan(num / den_safe)
        r = Interval._raw(
            iv._as_float(np.where(unsafe, -iv.HALF_PI, q.lo)),
            iv._as_float(np.where(unsafe, iv.HALF_PI, q.hi)),
        )
    else:
        a = [_ieval(c, lo, hi, inflate) for c in e.args]
        if op == "add":
            r = a[0] + a[1]
        elif op == "sub":
            r = a[0] - a[1]
        elif op == "mul":
            r = a[0] * a[1]
        elif op == "div":
            r = a[0] / a[1]
        elif op == "neg":
            r = -a[0]
        elif op == "pow":
            r = iv.ipow(a[0], e.value)
        elif op == "exp":
            r = iv.iexp(a[0])
        elif op == "log":
            r = iv.ilog(a[0])
        elif op == "sqrt":
            r = iv.isqrt(a[0])
        elif op == "sin":
            r = iv.isin(a[0])
        elif op == "cos":
            r = iv.icos(a[0])
        elif op == "atan":
            r = iv.iatan(a[0])
        elif op == "abs":
            r = iv.iabs(a[0])
        elif op == "sign":
            r = iv.isign(a[0])
        elif op == "min":
            r = iv.imin(a[0], a[1])
        elif op == "max":
            r = iv.imax(a[0], a[1])
        elif op == "select":
            r = iv.iselect(*a)
        else:
            raise ValueError(f"unknown operator {op!r}")
    if inflate:
        r = r.inflate(inflate)
    return r


def eval_interval(e: Expr, lo, hi=None, inflate: float = 0.0) -> Interval:
    """Natural interval extension of ``e`` over a box.

    ``lo``/``hi`` are the box corners (1-D), or 2-D arrays holding one box
    per row.  A :class:`~pbbmoea.geometry.Box` may be passed as ``lo``.
    """
    if hi is None:
        lo, hi = lo.lo, lo.hi
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        r = _ieval(e, lo, hi, inflate)
    shape = lo.shape[:-1]
    if np.any(np.isnan(r.lo)) or np.any(np.isnan(r.hi)):
        raise DomainError("interval evaluation produced NaN")
    if shape == ():
        return Interval._raw(float(r.lo), float(r.hi))
    return Interval._raw(
        np.broadcast_to(r.lo, shape).astype(float), np.broadcast_to(r.hi, shape).astype(float)
    )


# differentiation -----------------------------------------------------------


@functools.lru_cache(maxsize=4096)
def derivative(e: Expr, i: int) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to variable ``i``."""
    op = e.op
    if op == "const":
        return ZERO
    if op == "var":
        return ONE if e.value == i else ZERO
    if e.max_var < i and op != "select":
        return ZERO
    d = [derivative(c, i) for c in e.args]
    a = e.args
    if op == "add":
        return add(d[0], d[1])
    if op == "sub":
        return sub(d[0], d[1])
    if op == "neg":
        return neg(d[0])
    if op == "mul":
        return add(mul(d[0], a[1]), mul(a[0], d[1]))
    if op == "div":
        if _is_const(d[1], 0.0):
            return div(d[0], a[1])
        return div(sub(mul(d[0], a[1]), mul(a[0], d[1])), power(a[1], 2))
    if op == "pow":
        p = e.value
        return mul(mul(const(p), power(a[0], p - 1.0)), d[0])
    if op == "exp":
        return mul(e, d[0])
    if op == "log":
        return div(d[0], a[0])
    if op == "sqrt":
        return div(d[0], mul(const(2.0), e))
    if op == "sin":
        return mul(cos(a[0]), d[0])
    if op == "cos":
        return neg(mul(sin(a[0]), d[0]))
    if op == "atan":
        return div(d[0], add(ONE, power(a[0], 2)))
    if op == "abs":
        return mul(sign(a[0]), d[0])
    if op == "sign":
        return ZERO
    if op == "min":
        return select(a[0], a[1], d[0], d[1])
    if op == "max":
        return select(a[0], a[1], d[1], d[0])
    if op == "select":
        return select(a[0], a[1], d[2], d[3])
    raise ValueError(f"unknown operator {op!r}")


def grad(e: Expr, n: int) -> list[Expr]:
    """Partial derivatives with respect to ``x_0 .. x_{n-1}``."""
    return [derivative(e, i) for i in range(n)]


# prefix text form ------------------------------------------------------------

_TEXT_OPS = {
    "+": "add",
    "-": "sub",
    "*": "mul",
    "/": "div",
    "^": "pow",
    "pow": "pow",
    "neg": "neg",
    "exp": "exp",
    "log": "log",
    "sqrt": "sqrt",
    "sin": "sin",
    "cos": "cos",
    "atan": "atan",
    "arctan": "atan",
    "abs": "abs",
    "sign": "sign",
    "min": "min",
    "max": "max",
    "select": "select",
}
_OP_TEXT = {
    "add": "+",
    "sub": "-",
    "mul": "*",
    "div": "/",
    "pow": "^",
    "neg": "neg",
    "exp": "exp",
    "log": "log",
    "sqrt": "sqrt",
    "sin": "sin",
    "cos": "cos",
    "atan": "atan",
    "abs": "abs",
    "sign": "sign",
    "min": "min",
    "max": "max",
    "select": "select",
}
_TOKEN = re.compile(r"\s*(?:(\()|(\))|([^\s()]+))")


class ParseError(ValueError):
    """Malformed expression text; ``pos`` is the 0-based character offset."""

    def __init__(self, msg: str, pos: int):
        super().__init__(f"{msg} at column {pos + 1}")
        self.pos = pos


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ParseError("unexpected character", pos)
        start = m.start(m.lastindex)
        out.append((m.group(m.lastindex), start))
        pos = m.end()
    return out


def _atom(tok: str, pos: int) -> Expr:
    if tok == "pi":
        return const(math.pi)
    m = re.fullmatch(r"x(\d+)", tok)
    if m:
        idx = int(m.group(1))
        if idx < 1:
            raise ParseError("variables are numbered from x1", pos)
        return var(idx - 1)
    try:
        return const(float(tok))
    except ValueError:
        raise ParseError(f"unknown symbol {tok!r}", pos) from None


def parse(text: str) -> Expr:
    """Parse the prefix form, e.g. ``(+ (* x1 x2) 1)``."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty expression", 0)
    k = 0

    def node() -> Expr:
        nonlocal k
        if k >= len(tokens):
            raise ParseError("unexpected end of expression", len(text))
        tok, pos = tokens[k]
        k += 1
        if tok == ")":
            raise ParseError("unexpected ')'", pos)
        if tok != "(":
            return _atom(tok, pos)
        if k >= len(tokens):
            raise ParseError("unexpected end of expression", len(text))
        head, hpos = tokens[k]
        k += 1
        op = _TEXT_OPS.get(head)
        if op is None:
            raise ParseError(f"unknown operator {head!r}", hpos)
        args = []
        while True:
            if k >= len(tokens):
                raise ParseError("missing ')'", len(text))
            if tokens[k][0] == ")":
                k += 1
                break
            args.append(node())
        return _build(op, args, hpos)

    e = node()
    if k != len(tokens):
        raise ParseError("trailing input", tokens[k][1])
    return e


def _build(op: str, args: list, pos: int) -> Expr:
    def need(lo, hi=None):
        hi = lo if hi is None else hi
        if not lo <= len(args) <= (hi if hi >= 0 else len(args)):
            raise ParseError(f"wrong number of arguments for {_OP_TEXT[op]!r}", pos)

    if op in ("add", "mul"):
        need(1, -1)
        out = args[0]
        for a in args[1:]:
            out = Expr(op, (out, a))
        return out
    if op == "sub":
        need(1, 2)
        return Expr("neg", (args[0],)) if len(args) == 1 else Expr("sub", tuple(args))
    if op == "pow":
        need(2)
        if args[1].op != "const":
            raise ParseError("exponent must be a number", pos)
        return Expr("pow", (args[0],), args[1].value)
    if op in BINARY:
        need(2)
        return Expr(op, tuple(args))
    if op == "select":
        need(4)
        return Expr(op, tuple(args))
    need(1)
    return Expr(op, tuple(args))


def _num(v: float) -> str:
    if v == math.pi:
        return "pi"
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def to_prefix(e: Expr) -> str:
    """Inverse of :func:`parse` (structurally)."""
    if e.op == "const":
        return _num(e.value)
    if e.op == "var":
        return f"x{e.value + 1}"
    if e.op == "pow":
        return f"(^ {to_prefix(e.args[0])} {_num(e.value)})"
    inner = " ".join(to_prefix(a) for a in e.args)
    return f"({_OP_TEXT[e.op]} {inner})"


def variables(e: Expr) -> set[int]:
    if e.op == "var":
        return {int(e.value)}
    out: set[int] = set()
    for a in e.args:
        out |= variables(a)
    return out


def total(exprs: Sequence[Expr]) -> Expr:
    out = ZERO
    for e in exprs:
        out = add(out, e)
    return out
