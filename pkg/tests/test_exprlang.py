"""Expression language: parsing, printing, evaluation policy."""

import math
import random

import numpy as np
import pytest

from fisslab.errors import EvaluationError, ExprSyntaxError, UnknownIdentifier
from fisslab.exprlang import (
    BinOp,
    Call,
    Neg,
    Num,
    Var,
    parse_expr,
    unparse,
)


def test_constant():
    e = parse_expr("1")
    assert e(0.0, 0.0) == 1.0
    assert e(3.5, -2.0) == 1.0


def test_example_mixed():
    e = parse_expr("2*x + sin(z)")
    assert e(0.0, 0.0) == 0.0
    assert e(1.5, 0.0) == 3.0
    assert e(0.0, math.pi / 2) == pytest.approx(1.0, abs=1e-15)


def test_division_by_zero_is_error_not_nan():
    e = parse_expr("1/(x-x)")
    with pytest.raises(EvaluationError):
        e(0.7, 0.0)
    with pytest.raises(EvaluationError):
        e(np.array([0.1, 0.2]), np.array([0.0, 0.0]))


def test_precedence_unary_minus_vs_power():
    # '^' binds above unary minus: -2^2 == -(2^2)
    assert parse_expr("-2^2")(0, 0) == -4.0
    assert parse_expr("(-2)^2")(0, 0) == 4.0
    assert parse_expr("2^-1")(0, 0) == 0.5


def test_power_right_associative():
    assert parse_expr("2^3^2")(0, 0) == 2.0 ** 9


def test_left_associativity():
    assert parse_expr("8 - 3 - 2")(0, 0) == 3.0
    assert parse_expr("8 / 4 / 2")(0, 0) == 1.0


def test_syntax_error_offsets():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("1 + * 2")
    assert err.value.offset == 4
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("(1 + 2")
    assert err.value.offset == 6
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("1 @ 2")
    assert err.value.offset == 2


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        parse_expr("y + 1")
    with pytest.raises(UnknownIdentifier):
        parse_expr("tan(x)")


MALFORMED = ["", "(", ")", "1 +", "* 2", "sin()", "sin(x", "1..2", "x y",
             "2 ** 3", "exp", "1e", "((x)", "x + (z *)", "abs x"]


def test_malformed_corpus_raises_located_errors():
    for text in MALFORMED:
        with pytest.raises((ExprSyntaxError, UnknownIdentifier)) as err:
            parse_expr(text)
        assert hasattr(err.value, "offset")


def test_evaluation_never_nan():
    # domain errors surface as exceptions, not silent NaN
    with pytest.raises(EvaluationError):
        parse_expr("sqrt(0 - x)")(4.0, 0.0)
    with pytest.raises(EvaluationError):
        parse_expr("(0-8)^(1/2)")(0.0, 0.0)


# --- randomized round-trip against an independent evaluator -----------------------


def _reference_eval(node, x, z):
    """Straight recursive evaluator over python scalars (independent of the
    numpy-based production path); raises on any non-finite node, mirroring
    the eager error policy."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x if node.name == "x" else z
    if isinstance(node, Neg):
        return -_reference_eval(node.operand, x, z)
    if isinstance(node, Call):
        fn = {"sin": math.sin, "cos": math.cos, "exp": math.exp,
              "sqrt": math.sqrt, "abs": abs}[node.func]
        return _finite(fn(_reference_eval(node.arg, x, z)))
    lhs = _reference_eval(node.left, x, z)
    rhs = _reference_eval(node.right, x, z)
    if node.op == "+":
        return _finite(lhs + rhs)
    if node.op == "-":
        return _finite(lhs - rhs)
    if node.op == "*":
        return _finite(lhs * rhs)
    if node.op == "/":
        return _finite(lhs / rhs)
    if lhs < 0 and rhs != int(rhs):
        raise ValueError("fractional power of a negative base")
    return _finite(lhs ** rhs)


def _finite(v):
    if not math.isfinite(v):
        raise ValueError("non-finite value")
    return v


def _random_node(rng: random.Random, depth: int):
    if depth <= 0:
        kind = rng.randrange(3)
        if kind == 0:
            return Num(round(rng.uniform(0.0, 4.0), 3))
        return Var("x") if kind == 1 else Var("z")
    kind = rng.randrange(8)
    if kind < 4:
        op = "+-*/"[kind]
        return BinOp(op, _random_node(rng, depth - 1), _random_node(rng, depth - 1))
    if kind == 4:
        return Neg(_random_node(rng, depth - 1))
    if kind == 5:
        return BinOp("^", _random_node(rng, depth - 1), Num(float(rng.randrange(3))))
    fn = rng.choice(["sin", "cos", "exp", "abs"])
    return Call(fn, _random_node(rng, depth - 1))


def test_random_roundtrip_and_reference_agreement():
    rng = random.Random(20240817)
    points = [(0.3, 0.7), (1.1, 0.2), (2.0, 1.5)]
    checked = 0
    while checked < 500:
        node = _random_node(rng, rng.randrange(1, 5))
        text = unparse(node)
        reparsed = parse_expr(text)
        assert reparsed.root == node, f"round-trip changed {text!r}"
        # print-parse-print fixpoint
        assert unparse(reparsed.root) == text
        for x, z in points:
            try:
                want = _reference_eval(node, x, z)
            except (ZeroDivisionError, ValueError, OverflowError):
                with pytest.raises(EvaluationError):
                    reparsed(x, z)
                continue
            got = float(reparsed(x, z))
            assert got == pytest.approx(want, rel=1e-14, abs=1e-14)
        checked += 1
