import math

import numpy as np
import pytest

from gelfandlab.vexpr import (Binary, Call, Num, Unary, Var, VExprDomainError, VExprSyntaxError,
                              check_positive, evaluate, grad_log, parse, to_source)


def test_constant_parses_to_number():
    assert parse("1").ast == Num(1.0)


def test_structural_parse():
    expected = Call("exp", Binary("*", Num(2.0), Binary("-", Num(1.0), Call("abs2", None))))
    assert parse("exp(2*(1 - abs2(x)))").ast == expected


def test_syntax_error_offset():
    with pytest.raises(VExprSyntaxError) as exc:
        parse("1 + + 2")
    assert exc.value.offset == 4


@pytest.mark.parametrize("src", ["", "   ", "foo(x1)", "x3", "exp x1", "(1", "1)", "abs2(x1)", "2 $ 3"])
def test_rejects_bad_input(src):
    with pytest.raises(VExprSyntaxError):
        parse(src)


def test_precedence():
    # ^ binds tighter than unary minus, which binds tighter than * and /
    assert evaluate(parse("-2^2"), (0, 0)) == -4.0
    assert evaluate(parse("2*3^2"), (0, 0)) == 18.0
    assert evaluate(parse("2^3^2"), (0, 0)) == 512.0
    assert evaluate(parse("1 - 2 - 3"), (0, 0)) == -4.0
    assert evaluate(parse("8 / 4 / 2"), (0, 0)) == 1.0
    assert parse("-2^2").ast == Unary("-", Binary("^", Num(2.0), Num(2.0)))


def test_eval_examples():
    assert evaluate(parse("1"), (0.3, 0.4)) == 1.0
    assert evaluate(parse("exp(1 - abs2(x))"), (0, 0)) == pytest.approx(math.e, abs=1e-9)
    assert evaluate(parse("exp(1 - abs2(x))"), (1, 0)) == 1.0


def test_eval_vectorized():
    pts = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 0.0]])
    vals = evaluate(parse("x1 + 2*x2"), pts)
    assert np.allclose(vals, [0.0, 1.5, 1.0])


@pytest.mark.parametrize("src, sub", [("log(x1)", "log(x1)"), ("1/x1", "(1.0 / x1)"),
                                      ("sqrt(x1 - 1)", "sqrt((x1 - 1.0))")])
def test_domain_errors_name_the_subexpression(src, sub):
    with pytest.raises(VExprDomainError) as exc:
        evaluate(parse(src), (0.0, 0.0))
    assert exc.value.subexpr == sub


def test_grad_log_constant():
    assert np.array_equal(grad_log(parse("1"), (0.2, -0.7)), [0.0, 0.0])


def test_grad_log_gaussian():
    g = grad_log(parse("exp(2*(1-abs2(x)))"), (0.5, 0.0), h=1e-5)
    assert g == pytest.approx([-2.0, 0.0], abs=1e-8)


def test_grad_log_symmetric_point():
    g = grad_log(parse("exp(2*(1-abs2(x)))"), (0.0, 0.0), h=1e-5)
    assert np.max(np.abs(g)) <= 1e-10


def test_grad_log_rejects_nonpositive():
    with pytest.raises(VExprDomainError):
        grad_log(parse("x1"), (0.0, 0.0))


def test_grad_log_second_order():
    # analytic gradients of log V for smooth expressions
    cases = [
        ("exp(sin(x1) * cos(x2))", lambda x, y: (math.cos(x) * math.cos(y), -math.sin(x) * math.sin(y))),
        ("2 + sin(x1 + 2*x2)", lambda x, y: (math.cos(x + 2 * y) / (2 + math.sin(x + 2 * y)),
                                             2 * math.cos(x + 2 * y) / (2 + math.sin(x + 2 * y)))),
        ("sqrt(1 + abs2(x))", lambda x, y: (x / (1 + x * x + y * y), y / (1 + x * x + y * y))),
    ]
    pts = [(0.3, -0.2), (0.1, 0.6), (-0.5, 0.4)]
    for src, grad in cases:
        v = parse(src)
        for p in pts:
            exact = np.array(grad(*p))
            e1 = np.max(np.abs(grad_log(v, p, h=1e-2) - exact))
            e2 = np.max(np.abs(grad_log(v, p, h=5e-3) - exact))
            assert e1 / e2 >= 3.5, (src, p, e1, e2)


def test_round_trip_examples():
    for src in ["1", "exp(2*(1 - abs2(x)))", "-x1^2 + 3*x2", "log(2 + cos(x1*x2)) / 4", "1e-3*x1"]:
        v = parse(src)
        assert parse(to_source(v)).ast == v.ast


def test_truncated_expressions_rejected():
    src = "exp(2*(1 - abs2(x)))"
    for k in range(1, len(src)):
        prefix = src[:k]
        try:
            parse(prefix)
        except VExprSyntaxError:
            continue
        raise AssertionError(f"prefix {prefix!r} accepted")


def test_check_positive():
    pts = np.array([[0.0, 0.0], [0.9, 0.0]])
    check_positive(parse("exp(x1)"), pts)
    with pytest.raises(VExprDomainError):
        check_positive(parse("x1"), pts)


def test_vars():
    assert parse("x2").ast == Var("x2")
