"""Coefficient expressions V(x) given as text.

Grammar (lowest to highest precedence)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?          # right associative
    atom    := number | 'x1' | 'x2' | func '(' expr ')' | 'abs2' '(' 'x' ')'
             | '(' expr ')'
    func    := exp | log | sqrt | sin | cos

Expressions evaluate pointwise on numpy arrays whose last axis has length 2.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "VExpr", "Num", "Var", "Unary", "Binary", "Call",
    "VExprError", "VExprSyntaxError", "VExprDomainError",
    "parse", "evaluate", "grad_log", "to_source", "check_positive",
]

FUNCTIONS = ("exp", "log", "sqrt", "sin", "cos")


class VExprError(ValueError):
    pass


class VExprSyntaxError(VExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class VExprDomainError(VExprError):
    def __init__(self, message: str, subexpr: str):
        super().__init__(f"{message} in '{subexpr}'")
        self.subexpr = subexpr


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # 'x1' or 'x2'


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node | None"  # None for abs2(x)


Node = Union[Num, Var, Unary, Binary, Call]

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise VExprSyntaxError(f"unexpected character {src[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str):
        self.tokens = _tokenize(src)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, off = self.take()
        if text != value or kind == "end":
            what = "end of input" if kind == "end" else repr(text)
            raise VExprSyntaxError(f"expected {value!r}, found {what}", off)

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("-", self.unary())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            if text in ("x1", "x2"):
                return Var(text)
            if text == "abs2":
                self.expect("(")
                k, t, o = self.take()
                if t != "x":
                    raise VExprSyntaxError("abs2 takes the point argument 'x'", o)
                self.expect(")")
                return Call("abs2", None)
            if text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            raise VExprSyntaxError(f"unknown identifier {text!r}", off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(text)
        raise VExprSyntaxError(f"unexpected {what}", off)


@dataclass(frozen=True)
class VExpr:
    """Parsed coefficient function. Immutable; evaluation is reentrant."""

    ast: Node
    source: str

    def __call__(self, p):
        return evaluate(self, p)

    def __str__(self):
        return self.source


def parse(src: str) -> VExpr:
    if not src or not src.strip():
        raise VExprSyntaxError("empty expression", 0)
    p = _Parser(src)
    node = p.expr()
    kind, text, off = p.peek()
    if kind != "end":
        raise VExprSyntaxError(f"unexpected {text!r}", off)
    return VExpr(node, src)


def _fmt(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        return f"(-{_fmt(node.arg)})"
    if isinstance(node, Binary):
        return f"({_fmt(node.left)} {node.op} {_fmt(node.right)})"
    if node.arg is None:
        return "abs2(x)"
    return f"{node.func}({_fmt(node.arg)})"


def to_source(v: VExpr | Node) -> str:
    """Fully parenthesized text that parses back to the same tree."""
    return _fmt(v.ast if isinstance(v, VExpr) else v)


def _eval(node: Node, x1, x2):
    if isinstance(node, Num):
        return np.full(np.shape(x1), node.value)
    if isinstance(node, Var):
        return x1 if node.name == "x1" else x2
    if isinstance(node, Unary):
        return -_eval(node.arg, x1, x2)
    if isinstance(node, Binary):
        a = _eval(node.left, x1, x2)
        b = _eval(node.right, x1, x2)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            if np.any(b == 0):
                raise VExprDomainError("division by zero", _fmt(node))
            return a / b
        with np.errstate(all="ignore"):
            out = np.power(a, b)
        if not np.all(np.isfinite(out)):
            raise VExprDomainError("invalid power", _fmt(node))
        return out
    if node.arg is None:
        return x1 * x1 + x2 * x2
    a = _eval(node.arg, x1, x2)
    if node.func == "log":
        if np.any(a <= 0):
            raise VExprDomainError("log of nonpositive value", _fmt(node))
        return np.log(a)
    if node.func == "sqrt":
        if np.any(a < 0):
            raise VExprDomainError("sqrt of negative value", _fmt(node))
        return np.sqrt(a)
    with np.errstate(over="ignore"):
        out = getattr(np, node.func)(a)
    if not np.all(np.isfinite(out)):
        raise VExprDomainError("overflow", _fmt(node))
    return out


def evaluate(v: VExpr, p):
    """Value of ``v`` at ``p``; ``p`` has shape (..., 2). Scalars for a single point."""
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    if not np.all(np.isfinite(p)):
        raise ValueError("points must be finite")
    out = _eval(v.ast, p[..., 0], p[..., 1])
    return float(out) if out.ndim == 0 else out


def grad_log(v: VExpr, p, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of log V at ``p`` (shape (..., 2))."""
    p = np.asarray(p, dtype=float)
    out = np.empty(p.shape)
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fp = np.asarray(evaluate(v, p + e))
        fm = np.asarray(evaluate(v, p - e))
        if np.any(fp <= 0) or np.any(fm <= 0):
            raise VExprDomainError("nonpositive coefficient sampled", v.source)
        out[..., i] = (np.log(fp) - np.log(fm)) / (2 * h)
    return out


def check_positive(v: VExpr, points, floor: float = 1e-12) -> None:
    """Reject ``v`` unless it exceeds ``floor`` at every sample point."""
    vals = np.asarray(evaluate(v, points))
    if not np.all(np.isfinite(vals)):
        raise VExprDomainError("non-finite coefficient sampled", v.source)
    if vals.min() <= floor:
        raise VExprDomainError(
            f"coefficient not positive (min {vals.min():.3e})", v.source)


def is_constant_one(v: VExpr) -> bool:
    return isinstance(v.ast, Num) and math.isclose(v.ast.value, 1.0)
