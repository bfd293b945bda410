import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamperti.spec_lang import (
    BinOp,
    Call,
    DivisionByZero,
    DomainError,
    EvalOverflow,
    ExprSyntaxError,
    Neg,
    Num,
    UnknownIdentifier,
    Var,
    evaluate,
    evaluate_array,
    parse,
    to_source,
)

X = Var()


def test_family_expression_tree():
    assert parse("0.5 + 2/(4*x)") == BinOp("+", Num(0.5), BinOp("/", Num(2.0), BinOp("*", Num(4.0), X)))


def test_clip_call_tree():
    assert parse("clip01(1 - 3/x)") == Call("clip01", (BinOp("-", Num(1.0), BinOp("/", Num(3.0), X)),))


def test_no_unary_plus():
    with pytest.raises(ExprSyntaxError) as info:
        parse("0.5 + + x")
    assert info.value.offset == 6


@pytest.mark.parametrize(
    "src, value",
    [
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("(-2)^2", 4.0),
        ("x^-2", 0.25),
        ("1 - 2 - 3", -4.0),
        ("8 / 4 / 2", 1.0),
        ("1 + 2 * 3", 7.0),
        ("-x * 3", -6.0),
        ("--x", 2.0),
        ("min(x, 1) + max(x, 3)", 4.0),
        ("clip01(2)", 1.0),
        ("clip01(-0.5)", 0.0),
        ("1.5e1", 15.0),
        (".5", 0.5),
    ],
)
def test_precedence_and_associativity(src, value):
    assert evaluate(parse(src), 2) == value


def test_examples_evaluate():
    assert evaluate(parse("0.5 + 2/(4*x)"), 25) == pytest.approx(0.52, abs=1e-15)
    assert evaluate(parse("clip01(2)"), 1) == 1.0


def test_division_by_zero_is_located():
    with pytest.raises(DivisionByZero) as info:
        evaluate(parse("1/(x-3)"), 3)
    assert info.value.x == 3
    assert to_source(info.value.subexpression) == "1.0 / (x - 3.0)"


def test_overflow_and_domain_errors():
    with pytest.raises(EvalOverflow):
        evaluate(parse("10^x"), 10_000)
    with pytest.raises(DomainError):
        evaluate(parse("x^0.5"), -1)


@pytest.mark.parametrize(
    "src, offset",
    [
        ("", 0),
        ("(", 1),
        ("x x", 2),
        ("min(x)", 5),
        ("max(1,2,3)", 7),
        ("1e400", 0),
        ("2 $ 3", 2),
        ("y + 1", 0),
        ("x +", 3),
    ],
)
def test_syntax_errors_carry_offsets(src, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(src)
    assert info.value.offset == offset


def test_unknown_identifier_is_a_syntax_error():
    with pytest.raises(UnknownIdentifier):
        parse("sin(x)")


def test_invalid_utf8_is_located():
    with pytest.raises(ExprSyntaxError) as info:
        parse(b"x + \xff")
    assert info.value.offset == 4


def test_deep_nesting_is_rejected_not_crashing():
    with pytest.raises(ExprSyntaxError):
        parse("(" * 5000 + "x" + ")" * 5000)
    with pytest.raises(ExprSyntaxError):
        parse("-" * 5000 + "x")


def test_array_evaluation_matches_scalar():
    e = parse("clip01(0.5 + 2/(4*x) - x^-2) * min(x, 7)")
    xs = np.arange(1, 200)
    ref = [evaluate(e, int(x)) for x in xs]
    np.testing.assert_allclose(evaluate_array(e, xs), ref, rtol=1e-15)


def test_array_evaluation_reports_first_bad_state():
    with pytest.raises(DivisionByZero) as info:
        evaluate_array(parse("1/(x-5)"), np.arange(1, 10))
    assert info.value.x == 5


# -- round trip ------------------------------------------------------------

numbers = st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num)
leaves = st.one_of(numbers, st.just(X))


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(["min", "max"]), children, children).map(lambda t: Call(t[0], (t[1], t[2]))),
        children.map(lambda c: Call("clip01", (c,))),
    )


trees = st.recursive(leaves, _extend, max_leaves=25)


@given(trees)
@settings(max_examples=500, deadline=None)
def test_print_parse_round_trip(tree):
    assert parse(to_source(tree)) == tree


@given(trees, st.integers(min_value=1, max_value=10**6))
@settings(max_examples=300, deadline=None)
def test_printed_source_evaluates_identically(tree, x):
    reparsed = parse(to_source(tree))
    try:
        a = evaluate(tree, x)
    except Exception as exc:  # noqa: BLE001
        with pytest.raises(type(exc)):
            evaluate(reparsed, x)
        return
    b = evaluate(reparsed, x)
    assert a == b or (math.isnan(a) and math.isnan(b))


@given(st.binary(max_size=64))
@settings(max_examples=2000, deadline=None)
def test_random_bytes_never_crash(data):
    try:
        parse(data)
    except ExprSyntaxError as exc:
        assert 0 <= exc.offset <= len(data)


@given(st.text(alphabet="x0123456789.e+-*/^(),minaxclp ", max_size=40))
@settings(max_examples=3000, deadline=None)
def test_grammar_alphabet_never_crashes(text):
    try:
        e = parse(text)
    except ExprSyntaxError as exc:
        assert 0 <= exc.offset <= len(text.encode())
    else:
        assert parse(to_source(e)) == e
