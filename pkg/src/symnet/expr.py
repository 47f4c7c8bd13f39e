"""Arithmetic expression layer for subsystem dynamics.

Expressions are parsed from a small infix grammar into an immutable AST.
Variables are state references ``x<j>`` and input references ``u<i>``;
the supported functions are sin, cos, tan, tanh, sech, abs and exp.
Evaluation is plain IEEE double precision (numpy ufuncs, so vectorised
evaluation over arrays works the same way as scalar evaluation).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

import numpy as np

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "ExprError",
    "ExprSyntaxError",
    "EvalError",
    "parse_expression",
    "format_expression",
    "eval_expr",
    "free_variables",
    "FUNCTIONS",
]


class ExprError(ValueError):
    """Base class for expression-layer errors."""


class ExprSyntaxError(ExprError):
    """Raised on malformed input; carries the character position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


class EvalError(ExprError):
    """Raised when evaluation cannot produce a finite result."""


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Var, Neg, BinOp, Call]

_sech = lambda z: 1.0 / np.cosh(z)  # noqa: E731  (not a stdlib/numpy primitive)

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "tanh": np.tanh,
    "sech": _sech,
    "abs": np.abs,
    "exp": np.exp,
}

_VAR_RE = re.compile(r"^[xu][0-9]+$")

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> Iterator[tuple[str, str, int]]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos:].strip() == "":
                return
            raise ExprSyntaxError(f"unexpected character {text[pos:].lstrip()[0]!r}", pos)
        kind = m.lastgroup
        yield kind, m.group(kind), m.start(kind)
        pos = m.end()


class _Parser:
    """Recursive-descent parser over the token stream.

    Grammar (loosest binding first)::

        expr   := term (('+' | '-') term)*
        term   := unary (('*' | '/') unary)*
        unary  := '-' unary | power
        power  := atom ('^' unary)?
        atom   := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'
    """

    def __init__(self, text: str):
        self.text = text
        self.tokens = list(_tokenize(text))
        self.i = 0

    def _peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _next(self) -> tuple[str, str, int]:
        tok = self._peek()
        if tok is None:
            raise ExprSyntaxError("unexpected end of input", len(self.text))
        self.i += 1
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        tok = self._peek()
        if tok is not None:
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def expr(self) -> Expr:
        node = self.term()
        while (tok := self._peek()) is not None and tok[1] in "+-":
            self._next()
            node = BinOp(tok[1], node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while (tok := self._peek()) is not None and tok[1] in "*/":
            self._next()
            rhs = self.unary()
            if tok[1] == "/" and isinstance(rhs, Num) and rhs.value == 0.0:
                raise ExprSyntaxError("division by constant zero", tok[2])
            node = BinOp(tok[1], node, rhs)
        return node

    def unary(self) -> Expr:
        tok = self._peek()
        if tok is not None and tok[1] == "-":
            self._next()
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        tok = self._peek()
        if tok is not None and tok[1] == "^":
            self._next()
            node = BinOp("^", node, self.unary())
        return node

    def atom(self) -> Expr:
        kind, value, pos = self._next()
        if kind == "num":
            return Num(float(value))
        if kind == "ident":
            nxt = self._peek()
            if nxt is not None and nxt[1] == "(":
                if value not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {value!r}", pos)
                self._next()
                arg = self.expr()
                closing = self._next()
                if closing[1] != ")":
                    raise ExprSyntaxError("expected ')'", closing[2])
                return Call(value, arg)
            if not _VAR_RE.match(value):
                raise ExprSyntaxError(f"unknown variable {value!r}", pos)
            return Var(value)
        if value == "(":
            node = self.expr()
            closing = self._next()
            if closing[1] != ")":
                raise ExprSyntaxError("expected ')'", closing[2])
            return node
        raise ExprSyntaxError(f"unexpected token {value!r}", pos)


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an expression AST.

    No algebraic simplification is performed: ``tanh(x2) - tanh(x2)``
    keeps both function nodes.
    """
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _fmt(node: Expr, parent_prec: int) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg, 0)})"
    if isinstance(node, Neg):
        inner = _fmt(node.operand, 3)
        text = f"-{inner}"
        return f"({text})" if parent_prec > 3 else text
    prec = _PRECEDENCE[node.op]
    if node.op == "^":
        # right-associative; exponent may itself be a unary minus
        text = f"{_fmt(node.left, prec + 1)}^{_fmt(node.right, 3)}"
    else:
        text = f"{_fmt(node.left, prec)} {node.op} {_fmt(node.right, prec + 1)}"
    return f"({text})" if prec < parent_prec else text


def format_expression(node: Expr) -> str:
    """Render an AST back to parseable text; parsing the result yields a
    structurally equal AST."""
    return _fmt(node, 0)


def free_variables(node: Expr) -> set[str]:
    """Exact set of variable names occurring in the AST."""
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, Neg):
        return free_variables(node.operand)
    if isinstance(node, Call):
        return free_variables(node.arg)
    return free_variables(node.left) | free_variables(node.right)


def _eval(node: Expr, bindings: Mapping[str, object]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        try:
            return bindings[node.name]
        except KeyError:
            raise EvalError(f"unbound variable {node.name!r}") from None
    if isinstance(node, Neg):
        return -_eval(node.operand, bindings)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, bindings))
    left = _eval(node.left, bindings)
    right = _eval(node.right, bindings)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.divide(left, right)
    return np.power(left, right)


def eval_expr(expr: Expr, bindings: Mapping[str, object]):
    """Evaluate ``expr`` under ``bindings`` (name -> float or ndarray).

    Scalar inputs give a float; array inputs broadcast elementwise.
    A non-finite result (overflow, division by zero) raises EvalError
    instead of propagating silently.
    """
    with np.errstate(all="ignore"):
        result = _eval(expr, bindings)
    if not np.all(np.isfinite(result)):
        raise EvalError(f"non-finite value from {format_expression(expr)!r}")
    if np.ndim(result) == 0:
        return float(result)
    return result
