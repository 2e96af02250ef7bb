"""Tiny arithmetic expression language for coefficient and forcing fields.

Expressions are functions of the spatial variables ``x`` (horizontal) and
``z`` (vertical).  Supported syntax: ``+ - * / ^``, unary minus, parentheses,
the functions ``sin cos exp sqrt abs`` and numeric literals.  Precedence is
``^`` above unary minus above ``* /`` above ``+ -``; binary operators are
left-associative except ``^`` which is right-associative.

Evaluation accepts scalars or numpy arrays and never returns NaN or Inf:
division by zero and domain errors raise :class:`EvaluationError`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import EvaluationError, ExprSyntaxError, UnknownIdentifier

FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}

VARIABLES = ("x", "z")

_BIN_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_PRECEDENCE = 3


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
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


Node = Union[Num, Var, Neg, BinOp, Call]


@dataclass(frozen=True)
class Expr:
    """Parsed expression; evaluate with :meth:`__call__`."""

    root: Node
    source: str = ""

    def __call__(self, x, z):
        return evaluate(self.root, x, z)

    def __str__(self) -> str:
        return unparse(self.root)


class _Token:
    __slots__ = ("kind", "text", "offset")

    def __init__(self, kind: str, text: str, offset: int):
        self.kind = kind
        self.text = text
        self.offset = offset


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c in "+-*/^()":
            tokens.append(_Token(c, c, i))
            i += 1
            continue
        if c.isdigit() or c == ".":
            j = i
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            lit = text[i:j]
            try:
                float(lit)
            except ValueError:
                raise ExprSyntaxError(f"malformed number '{lit}'", i) from None
            tokens.append(_Token("num", lit, i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(_Token("ident", text[i:j], i))
            i = j
            continue
        raise ExprSyntaxError(f"unexpected character {c!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ExprSyntaxError(
                f"expected {kind!r}, found {tok.text or 'end of input'!r}", tok.offset
            )
        return self.advance()

    # expr := term (('+'|'-') term)*
    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind in ("+", "-"):
            op = self.advance().kind
            node = BinOp(op, node, self.term())
        return node

    # term := unary (('*'|'/') unary)*
    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind in ("*", "/"):
            op = self.advance().kind
            node = BinOp(op, node, self.unary())
        return node

    # unary := '-' unary | power
    def unary(self) -> Node:
        if self.peek().kind == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    # power := atom ('^' unary)?   -- right-associative, binds above unary minus
    def power(self) -> Node:
        node = self.atom()
        if self.peek().kind == "^":
            self.advance()
            return BinOp("^", node, self.unary())
        return node

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if self.peek().kind == "(":
                if name not in FUNCTIONS:
                    raise UnknownIdentifier(name, tok.offset)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name not in VARIABLES:
                raise UnknownIdentifier(name, tok.offset)
            return Var(name)
        raise ExprSyntaxError(
            f"expected a value, found {tok.text or 'end of input'!r}", tok.offset
        )


def parse_expr(text: str) -> Expr:
    """Parse ``text`` into an :class:`Expr`.

    Raises:
        ExprSyntaxError: malformed input, with the byte offset of the error.
        UnknownIdentifier: name outside {x, z, sin, cos, exp, sqrt, abs}.
    """
    parser = _Parser(text)
    root = parser.expr()
    tok = parser.peek()
    if tok.kind != "end":
        raise ExprSyntaxError(f"trailing input {tok.text!r}", tok.offset)
    return Expr(root, source=text)


def evaluate(node: Node, x, z):
    """Evaluate an AST at ``x, z`` (scalars or numpy arrays, broadcast)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else z
    if isinstance(node, Neg):
        return -evaluate(node.operand, x, z)
    if isinstance(node, BinOp):
        lhs = evaluate(node.left, x, z)
        rhs = evaluate(node.right, x, z)
        if node.op == "/" and np.any(rhs == 0):
            raise EvaluationError(f"division by zero in '{unparse(node)}'")
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            if node.op == "+":
                out = lhs + rhs
            elif node.op == "-":
                out = lhs - rhs
            elif node.op == "*":
                out = lhs * rhs
            elif node.op == "/":
                out = lhs / rhs
            else:
                out = np.power(lhs, rhs)
        return _check_finite(out, node)
    if isinstance(node, Call):
        arg = evaluate(node.arg, x, z)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            out = FUNCTIONS[node.func](arg)
        return _check_finite(out, node)
    raise TypeError(f"not an expression node: {node!r}")


def _check_finite(value, node: Node):
    if not np.all(np.isfinite(value)):
        raise EvaluationError(f"undefined value in '{unparse(node)}'")
    return value


def _precedence(node: Node) -> int:
    if isinstance(node, BinOp):
        return _BIN_PRECEDENCE[node.op]
    if isinstance(node, Neg):
        return _UNARY_PRECEDENCE
    return 9


def unparse(node: Node) -> str:
    """Render an AST back to text; ``parse_expr(unparse(n)).root == n``."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        inner = unparse(node.operand)
        # operand binding below unary minus, or '^' which would otherwise
        # capture the minus (-x^2 parses as -(x^2))
        if _precedence(node.operand) <= _UNARY_PRECEDENCE + 1:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Call):
        return f"{node.func}({unparse(node.arg)})"
    if isinstance(node, BinOp):
        prec = _BIN_PRECEDENCE[node.op]
        left = unparse(node.left)
        right = unparse(node.right)
        lprec = _precedence(node.left)
        rprec = _precedence(node.right)
        if node.op == "^":
            # right-associative; parenthesize any structured left operand
            if lprec <= _BIN_PRECEDENCE["^"]:
                left = f"({left})"
            if rprec < _BIN_PRECEDENCE["^"]:
                right = f"({right})"
        else:
            if lprec < prec:
                left = f"({left})"
            # left-associative: the right operand needs parens on ties for
            # the non-commutative cases, and for mixed * / chains
            if rprec < prec or (rprec == prec and node.op in ("-", "/", "*", "+")):
                right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an expression node: {node!r}")
