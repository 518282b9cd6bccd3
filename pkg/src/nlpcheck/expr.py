"""Expression language with exact first and second derivatives.

Objectives and constraints are written as small arithmetic formulas over
variables ``x1 .. xn``, for example ``x1^2 + (x2 - 1)^2 - 1``.  This module
parses such formulas into an immutable tree, evaluates them, and
differentiates them by forward propagation of (value, gradient, Hessian)
triples.  A central finite-difference routine is provided as an independent
cross-check for the propagated derivatives.

Grammar (whitespace-insensitive)::

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := ("-")? power
    power   := atom ("^" INTEGER)?
    atom    := NUMBER | VAR | FUNC "(" expr ")" | "(" expr ")"
    VAR     := "x" INTEGER          # 1-based variable index
    FUNC    := sin | cos | exp | log | sqrt

Exponents are non-negative integer literals; unary minus binds looser than
``^``, so ``-x1^2`` means ``-(x1^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "ExprError",
    "ParseError",
    "DomainError",
    "Const",
    "Var",
    "Unary",
    "Binary",
    "Power",
    "Expression",
    "Taylor2Scalar",
    "parse",
    "to_source",
    "evaluate",
    "grad_hess",
    "fd_grad_hess",
]


class ExprError(Exception):
    """Base class for expression failures."""


class ParseError(ExprError):
    """Source text could not be parsed.

    ``offset`` is the byte offset into the source at which the problem was
    detected.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.message = message
        self.offset = offset


class DomainError(ExprError):
    """Evaluation left the domain of an elementary function."""

    def __init__(self, message: str, node: "Expression | None" = None):
        super().__init__(message)
        self.message = message
        self.node = node


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based, as written in the source (x1, x2, ...)


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" | "sin" | "cos" | "exp" | "log" | "sqrt"
    arg: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str  # "add" | "sub" | "mul" | "div"
    left: "Expression"
    right: "Expression"


@dataclass(frozen=True)
class Power:
    base: "Expression"
    exponent: int  # non-negative integer


Expression = Union[Const, Var, Unary, Binary, Power]

_FUNCS = ("sin", "cos", "exp", "log", "sqrt")

_NUMBER = re.compile(r"(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_LETTERS = re.compile(r"[A-Za-z]+")
_DIGITS = re.compile(r"\d+")


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


def _tokenize(source: str) -> list[tuple[str, object, int]]:
    """Return (kind, payload, byte offset) tokens; kinds: op, num, var, func."""
    tokens: list[tuple[str, object, int]] = []
    i = 0
    while i < len(source):
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        off = _byte_offset(source, i)
        if ch in "+-*/^()":
            tokens.append(("op", ch, off))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            m = _NUMBER.match(source, i)
            if m is None:
                raise ParseError("malformed number", off)
            value = float(m.group(0))
            if not math.isfinite(value):
                raise ParseError("number literal overflows", off)
            tokens.append(("num", (value, m.group(0)), off))
            i = m.end()
            continue
        if ch.isalpha():
            m = _LETTERS.match(source, i)
            word = m.group(0)
            if word == "x":
                d = _DIGITS.match(source, m.end())
                if d is None:
                    raise ParseError("variable index expected after 'x'", off)
                tokens.append(("var", int(d.group(0)), off))
                i = d.end()
                continue
            if word in _FUNCS:
                tokens.append(("func", word, off))
                i = m.end()
                continue
            raise ParseError(f"unknown identifier '{word}'", off)
        raise ParseError(f"unexpected character {ch!r}", off)
    tokens.append(("end", None, _byte_offset(source, len(source))))
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, object, int]], n: int):
        self.tokens = tokens
        self.pos = 0
        self.n = n

    def peek(self) -> tuple[str, object, int]:
        return self.tokens[self.pos]

    def advance(self) -> tuple[str, object, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, symbol: str) -> None:
        kind, payload, off = self.peek()
        if kind != "op" or payload != symbol:
            raise ParseError(f"expected '{symbol}'", off)
        self.advance()

    def parse_expr(self) -> Expression:
        node = self.parse_term()
        while True:
            kind, payload, _ = self.peek()
            if kind == "op" and payload in "+-":
                self.advance()
                rhs = self.parse_term()
                node = Binary("add" if payload == "+" else "sub", node, rhs)
            else:
                return node

    def parse_term(self) -> Expression:
        node = self.parse_factor()
        while True:
            kind, payload, _ = self.peek()
            if kind == "op" and payload in "*/":
                self.advance()
                rhs = self.parse_factor()
                node = Binary("mul" if payload == "*" else "div", node, rhs)
            else:
                return node

    def parse_factor(self) -> Expression:
        kind, payload, _ = self.peek()
        if kind == "op" and payload == "-":
            self.advance()
            return Unary("neg", self.parse_power())
        return self.parse_power()

    def parse_power(self) -> Expression:
        base = self.parse_atom()
        kind, payload, _ = self.peek()
        if kind == "op" and payload == "^":
            self.advance()
            kind, payload, off = self.peek()
            if kind == "op" and payload == "-":
                raise ParseError("negative integer exponent not allowed", off)
            if kind != "num":
                raise ParseError("integer exponent expected after '^'", off)
            value, text = payload
            if any(c in text for c in ".eE"):
                raise ParseError("exponent must be an integer literal", off)
            self.advance()
            return Power(base, int(text))
        return base

    def parse_atom(self) -> Expression:
        kind, payload, off = self.advance()
        if kind == "num":
            value, _ = payload
            return Const(value)
        if kind == "var":
            index = int(payload)
            if index == 0:
                raise ParseError("variable index 0 (variables are x1..xn)", off)
            if index > self.n:
                raise ParseError(
                    f"variable x{index} exceeds declared dimension {self.n}", off
                )
            return Var(index)
        if kind == "func":
            self.expect_op("(")
            inner = self.parse_expr()
            self.expect_op(")")
            return Unary(str(payload), inner)
        if kind == "op" and payload == "(":
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        raise ParseError("expected a number, variable, function, or '('", off)


def parse(source: str, n: int) -> Expression:
    """Parse ``source`` into an expression over variables x1..xn."""
    if n < 0:
        raise ValueError("dimension n must be non-negative")
    parser = _Parser(_tokenize(source), n)
    node = parser.parse_expr()
    kind, _, off = parser.peek()
    if kind != "end":
        raise ParseError("unexpected trailing input", off)
    return node


def _fmt_const(value: float) -> str:
    if value < 0:
        # negative constants re-read as a negation of the positive literal
        return f"(-{-value!r})"
    return repr(value)


_BINOP_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/"}


def to_source(e: Expression) -> str:
    """Print an expression; re-parsing the result reproduces the tree.

    Binary operations are fully parenthesized so the round trip is exact.
    Negative constants (possible only in hand-built trees, the parser never
    produces them) print as negated positive literals.
    """
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return f"x{e.index}"
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"(-{to_source(e.arg)})"
        return f"{e.op}({to_source(e.arg)})"
    if isinstance(e, Binary):
        sym = _BINOP_SYMBOL[e.op]
        return f"({to_source(e.left)} {sym} {to_source(e.right)})"
    if isinstance(e, Power):
        if isinstance(e.base, (Var, Const)) and not (
            isinstance(e.base, Const) and e.base.value < 0
        ):
            return f"{to_source(e.base)}^{e.exponent}"
        return f"({to_source(e.base)})^{e.exponent}"
    raise TypeError(f"not an expression node: {e!r}")


def _ipow(v: float, k: int) -> float:
    # repeated multiplication, so evaluate() agrees bit for bit with the
    # derivative propagation below
    out = 1.0
    for _ in range(k):
        out *= v
    return out


def evaluate(e: Expression, x: np.ndarray) -> float:
    """Evaluate ``e`` at the point ``x`` (0-based array, x[i-1] backs xi)."""
    x = np.asarray(x, dtype=float)
    return _eval(e, x)


def _eval(e: Expression, x: np.ndarray) -> float:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        if e.index > x.size:
            raise ExprError(
                f"point has {x.size} coordinates but expression uses x{e.index}"
            )
        return float(x[e.index - 1])
    if isinstance(e, Unary):
        v = _eval(e.arg, x)
        if e.op == "neg":
            return -v
        if e.op == "sin":
            return math.sin(v)
        if e.op == "cos":
            return math.cos(v)
        if e.op == "exp":
            return math.exp(v)
        if e.op == "log":
            if v <= 0.0:
                raise DomainError(f"log of non-positive value {v!r}", e)
            return math.log(v)
        if e.op == "sqrt":
            if v < 0.0:
                raise DomainError(f"sqrt of negative value {v!r}", e)
            return math.sqrt(v)
        raise TypeError(f"unknown unary op {e.op!r}")
    if isinstance(e, Binary):
        u = _eval(e.left, x)
        w = _eval(e.right, x)
        if e.op == "add":
            return u + w
        if e.op == "sub":
            return u - w
        if e.op == "mul":
            return u * w
        if e.op == "div":
            if w == 0.0:
                raise DomainError("division by zero", e)
            return u / w
        raise TypeError(f"unknown binary op {e.op!r}")
    if isinstance(e, Power):
        return _ipow(_eval(e.base, x), e.exponent)
    raise TypeError(f"not an expression node: {e!r}")


@dataclass
class Taylor2Scalar:
    """Scalar quantity carrying its gradient and Hessian at a fixed point.

    Arithmetic follows the second-order Taylor propagation rules; the stored
    Hessian stays symmetric to the last bit because every update is built
    from explicitly symmetric pieces.
    """

    value: float
    grad: np.ndarray  # shape (n,)
    hess: np.ndarray  # shape (n, n)

    @staticmethod
    def constant(value: float, n: int) -> "Taylor2Scalar":
        return Taylor2Scalar(float(value), np.zeros(n), np.zeros((n, n)))

    @staticmethod
    def variable(i0: int, value: float, n: int) -> "Taylor2Scalar":
        grad = np.zeros(n)
        grad[i0] = 1.0
        return Taylor2Scalar(float(value), grad, np.zeros((n, n)))

    def __add__(self, other: "Taylor2Scalar") -> "Taylor2Scalar":
        return Taylor2Scalar(
            self.value + other.value, self.grad + other.grad, self.hess + other.hess
        )

    def __sub__(self, other: "Taylor2Scalar") -> "Taylor2Scalar":
        return Taylor2Scalar(
            self.value - other.value, self.grad - other.grad, self.hess - other.hess
        )

    def __neg__(self) -> "Taylor2Scalar":
        return Taylor2Scalar(-self.value, -self.grad, -self.hess)

    def __mul__(self, other: "Taylor2Scalar") -> "Taylor2Scalar":
        cross = np.outer(self.grad, other.grad)
        cross = cross + cross.T
        return Taylor2Scalar(
            self.value * other.value,
            self.value * other.grad + other.value * self.grad,
            (self.value * other.hess + other.value * self.hess) + cross,
        )

    def __truediv__(self, other: "Taylor2Scalar") -> "Taylor2Scalar":
        w = other.value
        if w == 0.0:
            raise DomainError("division by zero")
        value = self.value / w
        grad = (self.grad - value * other.grad) / w
        cross = np.outer(grad, other.grad)
        cross = cross + cross.T
        hess = ((self.hess - value * other.hess) - cross) / w
        return Taylor2Scalar(value, grad, hess)

    def lift(self, f0: float, f1: float, f2: float) -> "Taylor2Scalar":
        """Apply an elementary function with values f(v), f'(v), f''(v)."""
        return Taylor2Scalar(
            f0, f1 * self.grad, f1 * self.hess + f2 * np.outer(self.grad, self.grad)
        )


def _ad(e: Expression, x: np.ndarray, n: int) -> Taylor2Scalar:
    if isinstance(e, Const):
        return Taylor2Scalar.constant(e.value, n)
    if isinstance(e, Var):
        if e.index > n:
            raise ExprError(
                f"point has {n} coordinates but expression uses x{e.index}"
            )
        return Taylor2Scalar.variable(e.index - 1, x[e.index - 1], n)
    if isinstance(e, Unary):
        u = _ad(e.arg, x, n)
        v = u.value
        if e.op == "neg":
            return -u
        if e.op == "sin":
            return u.lift(math.sin(v), math.cos(v), -math.sin(v))
        if e.op == "cos":
            return u.lift(math.cos(v), -math.sin(v), -math.cos(v))
        if e.op == "exp":
            ev = math.exp(v)
            return u.lift(ev, ev, ev)
        if e.op == "log":
            if v <= 0.0:
                raise DomainError(f"log of non-positive value {v!r}", e)
            return u.lift(math.log(v), 1.0 / v, -1.0 / (v * v))
        if e.op == "sqrt":
            if v < 0.0:
                raise DomainError(f"sqrt of negative value {v!r}", e)
            if v == 0.0:
                raise DomainError("sqrt derivative undefined at zero", e)
            s = math.sqrt(v)
            return u.lift(s, 0.5 / s, -0.25 / (s * v))
        raise TypeError(f"unknown unary op {e.op!r}")
    if isinstance(e, Binary):
        u = _ad(e.left, x, n)
        w = _ad(e.right, x, n)
        if e.op == "add":
            return u + w
        if e.op == "sub":
            return u - w
        if e.op == "mul":
            return u * w
        if e.op == "div":
            if w.value == 0.0:
                raise DomainError("division by zero", e)
            return u / w
        raise TypeError(f"unknown binary op {e.op!r}")
    if isinstance(e, Power):
        u = _ad(e.base, x, n)
        out = Taylor2Scalar.constant(1.0, n)
        for _ in range(e.exponent):
            out = out * u
        return out
    raise TypeError(f"not an expression node: {e!r}")


def grad_hess(e: Expression, x: np.ndarray) -> Taylor2Scalar:
    """Value, gradient, and Hessian of ``e`` at ``x`` in a single pass.

    The returned value agrees bit for bit with :func:`evaluate` and the
    Hessian is exactly symmetric.
    """
    x = np.asarray(x, dtype=float)
    return _ad(e, x, x.size)


def fd_grad_hess(e: Expression, x: np.ndarray, step: float = 1e-4) -> Taylor2Scalar:
    """Central finite-difference gradient and Hessian, O(step^2) accurate.

    Entirely independent of :func:`grad_hess`; used to cross-check it.  If a
    stencil point leaves the domain of the expression the underlying
    :class:`DomainError` propagates.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    n = x.size
    f0 = evaluate(e, x)
    grad = np.zeros(n)
    hess = np.zeros((n, n))
    plus = np.zeros(n)
    minus = np.zeros(n)
    for i in range(n):
        xp = x.copy()
        xp[i] += step
        xm = x.copy()
        xm[i] -= step
        plus[i] = evaluate(e, xp)
        minus[i] = evaluate(e, xm)
        grad[i] = (plus[i] - minus[i]) / (2.0 * step)
        hess[i, i] = (plus[i] - 2.0 * f0 + minus[i]) / (step * step)
    for i in range(n):
        for j in range(i + 1, n):
            xpp = x.copy()
            xpp[i] += step
            xpp[j] += step
            xpm = x.copy()
            xpm[i] += step
            xpm[j] -= step
            xmp = x.copy()
            xmp[i] -= step
            xmp[j] += step
            xmm = x.copy()
            xmm[i] -= step
            xmm[j] -= step
            val = (
                evaluate(e, xpp) - evaluate(e, xpm) - evaluate(e, xmp) + evaluate(e, xmm)
            ) / (4.0 * step * step)
            hess[i, j] = val
            hess[j, i] = val
    return Taylor2Scalar(f0, grad, hess)
