"""Closed-form math expressions: parsing, evaluation, exact differentiation.

Coefficients, forcing terms, manufactured solutions and their residuals are
specified as text (``"2*t^2+8*t+7"``). Parsing produces an immutable AST
over the variables ``t, x, y, s``; evaluation is a pure function and is
safe to call concurrently. Derivatives are computed by forward-mode
truncated-Taylor arithmetic (a generalization of dual numbers) up to
order 4, which is exact for the expression as written: there is no
symbolic rewriting and no finite-difference noise.

Grammar (EBNF, also documented in the README)::

    expr    = term { ("+" | "-") term } ;
    term    = factor { ("*" | "/") factor } ;
    factor  = "-" factor | power ;
    power   = atom [ "^" factor ] ;            (* right-associative *)
    atom    = NUMBER | VARIABLE | call | "(" expr ")" ;
    call    = FUNC "(" expr [ "," expr ] ")" ;

``^`` binds tighter than unary minus, so ``-t^2`` is ``-(t^2)``. Integer
exponents are evaluated by repeated multiplication; non-integer exponents
require a positive base. ``abs`` uses subgradient 0 at the kink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    DomainError,
    ExpressionSyntaxError,
    UnboundVariable,
    UnknownIdentifier,
)

__all__ = ["Expression", "DualValue", "parse", "eval_dual", "VARIABLES"]

VARIABLES = ("t", "x", "y", "s")

_UNARY_FUNCTIONS = ("sin", "cos", "exp", "ln", "abs")
_BINARY_FUNCTIONS = ("atan2",)

MAX_ORDER = 4


# --------------------------------------------------------------------------
# AST nodes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" | "sin" | "cos" | "exp" | "ln" | "abs"
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # "+" | "-" | "*" | "/" | "^" | "atan2"
    left: "Node"
    right: "Node"


Node = Union[Num, Var, Unary, Binary]


@dataclass(frozen=True)
class DualValue:
    """Value and derivatives of an expression w.r.t. one variable.

    ``derivatives[k-1]`` holds the k-th derivative, so for
    ``t^2 + t + 1`` at t = 2 with order 2 this is ``(7.0, (5.0, 2.0))``.
    A constant expression has all-zero derivatives.
    """

    value: float
    derivatives: tuple[float, ...]


# --------------------------------------------------------------------------
# Tokenizer / parser
# --------------------------------------------------------------------------

_SYMBOLS = set("+-*/^(),")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Return (kind, lexeme, offset) triples. Kinds: num, name, sym, end."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _SYMBOLS:
            tokens.append(("sym", ch, i))
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            tokens.append(("num", text[i:j], i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        raise ExpressionSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, lexeme: str):
        kind, lex, off = self.peek()
        if kind != "sym" or lex != lexeme:
            raise ExpressionSyntaxError(f"expected {lexeme!r}", off)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, lex, off = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected trailing {lex!r}", off)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, lex, _ = self.peek()
            if kind == "sym" and lex in "+-":
                self.advance()
                node = Binary(lex, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, lex, _ = self.peek()
            if kind == "sym" and lex in "*/":
                self.advance()
                node = Binary(lex, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        kind, lex, _ = self.peek()
        if kind == "sym" and lex == "-":
            self.advance()
            return Unary("neg", self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        kind, lex, _ = self.peek()
        if kind == "sym" and lex == "^":
            self.advance()
            # exponent may itself start with a unary minus: 2^-1
            return Binary("^", base, self.factor())
        return base

    def atom(self) -> Node:
        kind, lex, off = self.advance()
        if kind == "num":
            return Num(float(lex))
        if kind == "name":
            if lex in VARIABLES:
                return Var(lex)
            if lex in _UNARY_FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(lex, arg)
            if lex in _BINARY_FUNCTIONS:
                self.expect("(")
                first = self.expr()
                self.expect(",")
                second = self.expr()
                self.expect(")")
                return Binary(lex, first, second)
            raise UnknownIdentifier(f"unknown identifier {lex!r}", off)
        if kind == "sym" and lex == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise ExpressionSyntaxError(f"unexpected {lex!r}" if lex else "unexpected end of input", off)


# --------------------------------------------------------------------------
# Truncated-Taylor (jet) arithmetic
#
# A jet is a list [c0, .., cn] of Taylor coefficients c_k = f^(k)/k! at the
# evaluation point; entries are floats or ndarrays (whole-grid evaluation().
# All loops are over at most MAX_ORDER+1 coefficients.
# --------------------------------------------------------------------------

def _any_true(mask) -> bool:
    return bool(np.any(mask))


def _jadd(a, b):
    return [x + y for x, y in zip(a, b)]


def _jsub(a, b):
    return [x - y for x, y in zip(a, b)]


def _jneg(a):
    return [-x for x in a]


def _jmul(a, b):
    n = len(a)
    return [sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(n)]


def _jdiv(a, b):
    if _any_true(np.asarray(b[0]) == 0):
        raise DomainError("division by zero")
    n = len(a)
    q = []
    for k in range(n):
        acc = a[k]
        for i in range(k):
            acc = acc - q[i] * b[k - i]
        q.append(acc / b[0])
    return q


def _jexp(a):
    n = len(a)
    e = [np.exp(a[0])]
    for k in range(1, n):
        acc = 0.0
        for j in range(1, k + 1):
            acc = acc + j * a[j] * e[k - j]
        e.append(acc / k)
    return e


def _jln(a):
    if _any_true(np.asarray(a[0]) <= 0):
        raise DomainError("ln of a non-positive value")
    n = len(a)
    out = [np.log(a[0])]
    for k in range(1, n):
        acc = k * a[k]
        for j in range(1, k):
            acc = acc - j * out[j] * a[k - j]
        out.append(acc / (k * a[0]))
    return out


def _jsin(a):
    return _jsincos(a)[0]


def _jcos(a):
    return _jsincos(a)[1]


def _jsincos(a):
    n = len(a)
    s = [np.sin(a[0])]
    c = [np.cos(a[0])]
    for k in range(1, n):
        sa = 0.0
        ca = 0.0
        for j in range(1, k + 1):
            sa = sa + j * a[j] * c[k - j]
            ca = ca + j * a[j] * s[k - j]
        s.append(sa / k)
        c.append(-ca / k)
    return s, c


def _jabs(a):
    sign = np.sign(a[0])  # subgradient 0 at the kink
    return [np.abs(a[0])] + [sign * x for x in a[1:]]


def _jpow_int(a, m: int):
    if m == 0:
        return _const_jet(1.0, len(a) - 1)
    if m < 0:
        return _jdiv(_const_jet(1.0, len(a) - 1), _jpow_int(a, -m))
    # binary exponentiation: repeated multiplication, no exp/ln round trip
    result = None
    base = a
    e = m
    while e:
        if e & 1:
            result = base if result is None else _jmul(result, base)
        e >>= 1
        if e:
            base = _jmul(base, base)
    return result


def _jpow(a, b):
    # exponent with any nonzero derivative, or non-integer value, goes
    # through exp(b ln a) and therefore needs a positive base
    b_is_const = all(_is_zero(x) for x in b[1:])
    if b_is_const:
        bval = np.asarray(b[0])
        if bval.ndim == 0 and float(bval) == int(float(bval)):
            return _jpow_int(a, int(float(bval)))
    if _any_true(np.asarray(a[0]) <= 0):
        raise DomainError("non-integer power of a non-positive base")
    return _jexp(_jmul(b, _jln(a)))


def _is_zero(x) -> bool:
    arr = np.asarray(x)
    return bool(np.all(arr == 0))


def _jderivative(a):
    """Jet of the derivative, one order shorter."""
    return [(k + 1) * a[k + 1] for k in range(len(a) - 1)]


def _jatan2(y, x):
    v0 = np.arctan2(y[0], x[0])
    n = len(y)
    if n == 1:
        return [v0]
    # d/ds atan2(y, x) = (x y' - y x') / (x^2 + y^2), integrated back
    # into Taylor coefficients: a_k = w_{k-1} / k.
    m = n - 1  # order of the derivative jet
    xt = x[:m]
    yt = y[:m]
    denom = _jadd(_jmul(xt, xt), _jmul(yt, yt))
    if _any_true(np.asarray(denom[0]) == 0):
        raise DomainError("atan2 differentiated at the origin")
    num = _jsub(_jmul(xt, _jderivative(y)[:m]), _jmul(yt, _jderivative(x)[:m]))
    w = _jdiv(num, denom)
    return [v0] + [w[k - 1] / k for k in range(1, n)]


def _const_jet(value, order: int):
    return [value] + [np.zeros_like(value) if isinstance(value, np.ndarray) else 0.0] * order


def _eval_jet(node: Node, var: str, bindings: dict, order: int):
    if isinstance(node, Num):
        return _const_jet(node.value, order)
    if isinstance(node, Var):
        if node.name not in bindings:
            raise UnboundVariable(f"variable {node.name!r} is not bound")
        value = bindings[node.name]
        jet = _const_jet(value, order)
        if node.name == var and order >= 1:
            jet[1] = np.ones_like(value) if isinstance(value, np.ndarray) else 1.0
        return jet
    if isinstance(node, Unary):
        arg = _eval_jet(node.arg, var, bindings, order)
        if node.op == "neg":
            return _jneg(arg)
        if node.op == "sin":
            return _jsin(arg)
        if node.op == "cos":
            return _jcos(arg)
        if node.op == "exp":
            return _jexp(arg)
        if node.op == "ln":
            return _jln(arg)
        if node.op == "abs":
            return _jabs(arg)
        raise AssertionError(node.op)
    left = _eval_jet(node.left, var, bindings, order)
    right = _eval_jet(node.right, var, bindings, order)
    if node.op == "+":
        return _jadd(left, right)
    if node.op == "-":
        return _jsub(left, right)
    if node.op == "*":
        return _jmul(left, right)
    if node.op == "/":
        return _jdiv(left, right)
    if node.op == "^":
        return _jpow(left, right)
    if node.op == "atan2":
        return _jatan2(left, right)
    raise AssertionError(node.op)


# --------------------------------------------------------------------------
# Pretty-printing (parse -> text -> parse is structurally the identity)
# --------------------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _node_prec(node: Node) -> int:
    if isinstance(node, Binary) and node.op in _PREC:
        return _PREC[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _PREC["neg"]
    return 5  # atoms and function calls never need parentheses


def _to_text(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            inner = _to_text(node.arg)
            if _node_prec(node.arg) < _PREC["neg"]:
                inner = f"({inner})"
            return f"-{inner}"
        return f"{node.op}({_to_text(node.arg)})"
    if node.op == "atan2":
        return f"atan2({_to_text(node.left)}, {_to_text(node.right)})"
    p = _PREC[node.op]
    left = _to_text(node.left)
    right = _to_text(node.right)
    if node.op == "^":
        if _node_prec(node.left) <= p:
            left = f"({left})"
        if _node_prec(node.right) < p:
            right = f"({right})"
    else:
        if _node_prec(node.left) < p:
            left = f"({left})"
        if _node_prec(node.right) <= p:
            right = f"({right})"
    return f"{left}{node.op}{right}"


# --------------------------------------------------------------------------
# Public surface
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Expression:
    """Immutable parsed expression over the variables t, x, y, s."""

    root: Node

    def evaluate(self, bindings: dict):
        """Evaluate at a point. Bindings may be floats or ndarrays (the
        whole grid at once); the result broadcasts accordingly."""
        return _eval_jet(self.root, "", bindings, 0)[0]

    def eval_dual(self, var: str, bindings: dict, order: int) -> DualValue:
        return eval_dual(self, var, bindings, order)

    def derivatives(self, var: str, bindings: dict, order: int) -> list:
        """Value and derivatives w.r.t. ``var``, vectorized over array
        bindings. Returns ``[f, f', .., f^(order)]``."""
        if not 0 <= order <= MAX_ORDER:
            raise ValueError(f"order must be in [0, {MAX_ORDER}]")
        jet = _eval_jet(self.root, var, bindings, order)
        return [jet[k] * math.factorial(k) for k in range(order + 1)]

    def variables(self) -> frozenset[str]:
        names = set()

        def visit(node: Node):
            if isinstance(node, Var):
                names.add(node.name)
            elif isinstance(node, Unary):
                visit(node.arg)
            elif isinstance(node, Binary):
                visit(node.left)
                visit(node.right)

        visit(self.root)
        return frozenset(names)

    def __str__(self) -> str:
        return _to_text(self.root)


def parse(text: str) -> Expression:
    """Parse expression text into an :class:`Expression`.

    Raises :class:`ExpressionSyntaxError` (with byte offset) on malformed
    input and :class:`UnknownIdentifier` for names outside the whitelist.
    """
    return Expression(_Parser(text).parse())


def eval_dual(e: Expression, var: str, bindings: dict, order: int) -> DualValue:
    """Evaluate ``e`` and its derivatives w.r.t. ``var`` at a scalar point.

    ``order`` in [0, 4]. All variables occurring in ``e`` must be bound.
    """
    if not 0 <= order <= MAX_ORDER:
        raise ValueError(f"order must be in [0, {MAX_ORDER}]")
    jet = _eval_jet(e.root, var, bindings, order)
    value = float(jet[0])
    derivs = tuple(float(jet[k]) * math.factorial(k) for k in range(1, order + 1))
    return DualValue(value, derivs)
