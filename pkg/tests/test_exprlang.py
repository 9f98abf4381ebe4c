import math
import random

import pytest

from genqm.exprlang import (
    BinaryOp,
    Call,
    Constant,
    EvaluationError,
    ExprSyntaxError,
    Literal,
    Negate,
    NonIntegerExponentError,
    Power,
    UnknownIdentifierError,
    Variable,
    eval_jet,
    parse,
    to_source,
    FUNCTION_NAMES,
)


def test_parse_literal():
    assert parse("1") == Literal(1.0)


def test_parse_precedence():
    ast = parse("1 + 0.5*x^2")
    assert ast == BinaryOp(
        "+", Literal(1.0), BinaryOp("*", Literal(0.5), Power(Variable(), 2))
    )


def test_parse_imaginary_constant():
    ast = parse("x^2 + i*x")
    assert ast == BinaryOp(
        "+", Power(Variable(), 2), BinaryOp("*", Constant("i"), Variable())
    )


def test_parse_incomplete_input_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse("1 +")
    assert err.value.offset == 3


def test_parse_reports_expected_token():
    with pytest.raises(ExprSyntaxError, match="expected"):
        parse("(1 + 2")


def test_parse_unknown_identifier():
    with pytest.raises(UnknownIdentifierError, match="'y'"):
        parse("x + y")
    with pytest.raises(UnknownIdentifierError, match="'log'"):
        parse("log(x)")


def test_parse_non_integer_exponent():
    with pytest.raises(NonIntegerExponentError):
        parse("x^2.5")
    with pytest.raises(ExprSyntaxError):
        parse("x^x")


def test_parse_negative_exponent():
    assert parse("x^-2") == Power(Variable(), -2)


def test_unary_minus_binds_looser_than_power():
    assert parse("-x^2") == Negate(Power(Variable(), 2))


def test_left_associativity():
    assert parse("1 - 2 - 3") == BinaryOp(
        "-", BinaryOp("-", Literal(1.0), Literal(2.0)), Literal(3.0)
    )


def test_whitespace_insignificant():
    assert parse(" 1+0.5 * x ^ 2 ") == parse("1+0.5*x^2")


def test_empty_source_rejected():
    with pytest.raises(ExprSyntaxError):
        parse("   ")


def test_jet_polynomial():
    jet = eval_jet(parse("x^2"), 3.0)
    assert (jet.value, jet.d1, jet.d2) == (9.0, 6.0, 2.0)


def test_jet_chain_rule():
    jet = eval_jet(parse("exp(2*x)"), 0.0)
    assert jet.value == pytest.approx(1.0)
    assert jet.d1 == pytest.approx(2.0)
    assert jet.d2 == pytest.approx(4.0)


def test_jet_complex_linearity():
    jet = eval_jet(parse("x^2 + i*x"), 2.0)
    assert jet.value == pytest.approx(4 + 2j)
    assert jet.d1 == pytest.approx(4 + 1j)
    assert jet.d2 == pytest.approx(2 + 0j)


def test_variable_seed():
    jet = eval_jet(parse("x"), 1.75)
    assert (jet.value, jet.d1, jet.d2) == (1.75, 1.0, 0.0)


def test_division_by_zero_carries_point():
    with pytest.raises(EvaluationError) as err:
        eval_jet(parse("1/x"), 0.0)
    assert err.value.x == 0.0


def test_sqrt_branch_cut_rejected():
    with pytest.raises(EvaluationError, match="negative real axis"):
        eval_jet(parse("sqrt(x)"), -1.0)
    # off-axis arguments are fine
    jet = eval_jet(parse("sqrt(i + x)"), -1.0)
    assert jet.value == pytest.approx((1j - 1) ** 0.5)


def test_sqrt_derivative_singular_at_zero():
    with pytest.raises(EvaluationError):
        eval_jet(parse("sqrt(x)"), 0.0)


def test_nonfinite_point_rejected():
    with pytest.raises(EvaluationError):
        eval_jet(parse("x"), float("inf"))


# second-order finite differences of the jet *value* provide an oracle
# for the jet derivatives that never touches the derivative rules
_SMOOTH_CASES = [
    ("exp(x)", (-1.5, 1.5)),
    ("sin(x)", (-3.0, 3.0)),
    ("cos(x)", (-3.0, 3.0)),
    ("sinh(x/2)", (-2.0, 2.0)),
    ("cosh(x/2)", (-2.0, 2.0)),
    ("tanh(x)", (-2.0, 2.0)),
    ("sqrt(2 + x^2)", (-2.0, 2.0)),
    ("x^3 - 2*x + 1", (-2.0, 2.0)),
    ("x^-2 + x", (0.5, 2.0)),
    ("(1 + x^2)/(2 + cos(x))", (-2.0, 2.0)),
    ("exp(-x^2/2)*sin(3*x)", (-1.5, 1.5)),
    ("i*x^3 + sqrt(1 + i + x^2)", (-1.5, 1.5)),
]


@pytest.mark.parametrize("source,interval", _SMOOTH_CASES)
def test_derivatives_match_finite_differences(source, interval):
    ast = parse(source)
    rng = random.Random(hash(source) & 0xFFFF)
    delta = 1e-4
    for _ in range(8):
        x = rng.uniform(*interval)
        f = lambda t: eval_jet(ast, t).value
        jet = eval_jet(ast, x)
        d1_fd = (f(x + delta) - f(x - delta)) / (2 * delta)
        d2_fd = (f(x + delta) - 2 * f(x) + f(x - delta)) / delta**2
        scale1 = max(1.0, abs(jet.d1))
        scale2 = max(1.0, abs(jet.d2))
        assert abs(jet.d1 - d1_fd) / scale1 < 1e-6
        assert abs(jet.d2 - d2_fd) / scale2 < 1e-6


def _random_ast(rng: random.Random, depth: int):
    # the grammar spells negative numbers as Negate(Literal), so leaf
    # literals are nonnegative exactly as the parser produces them
    if depth == 0:
        kind = rng.randrange(3)
        if kind == 0:
            return Literal(round(rng.uniform(0, 4), 3))
        if kind == 1:
            return Constant(rng.choice(("pi", "i")))
        return Variable()
    kind = rng.randrange(5)
    if kind == 0:
        return Negate(_random_ast(rng, depth - 1))
    if kind == 1:
        op = rng.choice("+-*/")
        return BinaryOp(op, _random_ast(rng, depth - 1), _random_ast(rng, depth - 1))
    if kind == 2:
        return Power(_random_ast(rng, depth - 1), rng.randint(-3, 4))
    if kind == 3:
        return Call(rng.choice(FUNCTION_NAMES), _random_ast(rng, depth - 1))
    return _random_ast(rng, depth - 1)


def test_round_trip_random_asts():
    rng = random.Random(20240901)
    for _ in range(1000):
        ast = _random_ast(rng, rng.randint(0, 6))
        assert parse(to_source(ast)) == ast


def test_round_trip_parenthesization_cases():
    # structure must survive printing even against associativity defaults
    cases = [
        BinaryOp("+", Literal(1.0), BinaryOp("+", Literal(2.0), Literal(3.0))),
        BinaryOp("-", BinaryOp("-", Literal(1.0), Literal(2.0)), Literal(3.0)),
        Power(Negate(Variable()), 2),
        Negate(Power(Variable(), 2)),
        BinaryOp("/", Literal(1.0), BinaryOp("/", Literal(2.0), Literal(3.0))),
        Power(Power(Variable(), 2), 3),
    ]
    for ast in cases:
        assert parse(to_source(ast)) == ast


def test_eval_jet_is_deterministic():
    ast = parse("exp(-x^2/2)*cos(3*x) + i*tanh(x)")
    a = eval_jet(ast, 0.7)
    b = eval_jet(ast, 0.7)
    assert (a.value, a.d1, a.d2) == (b.value, b.d1, b.d2)


def test_pi_constant():
    assert eval_jet(parse("pi"), 0.0).value == pytest.approx(math.pi)
