import math

import pytest
from hypothesis import given, settings, strategies as st

from helixchaos.errors import (
    DomainError,
    ExprSyntaxError,
    MissingParameterError,
    UnknownIdentifierError,
)
from helixchaos.expr import (
    BinOp,
    Jet3,
    Neg,
    Num,
    Sym,
    compile_scalar,
    eval_jet,
    parse_map_expr,
    serialize,
)
from oracles import central_derivative, rel_error


def test_sine_expression_parameters():
    e = parse_map_expr("0.4*sin(pi*x)+x+beta")
    assert e.parameters == {"beta"}


def test_identity_has_no_parameters():
    e = parse_map_expr("x")
    assert e.parameters == frozenset()
    assert e.root == Sym("x")


def test_power_family_parameters():
    e = parse_map_expr("((sin(pi*x)+1.1)/2)^(alpha+x+beta)")
    assert e.parameters == {"alpha", "beta"}


def test_precedence_and_associativity():
    # ^ binds tighter than unary minus, which binds tighter than * and +
    assert parse_map_expr("-x^2").root == Neg(BinOp("^", Sym("x"), Num(2.0)))
    assert parse_map_expr("2^3^2").root == BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))
    assert parse_map_expr("x-1-2").root == BinOp("-", BinOp("-", Sym("x"), Num(1.0)), Num(2.0))
    assert parse_map_expr("x/2/4").root == BinOp("/", BinOp("/", Sym("x"), Num(2.0)), Num(4.0))
    assert parse_map_expr("1+2*x").root == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Sym("x")))


def test_scientific_literals():
    f = compile_scalar(parse_map_expr("1.5e-3*x+2E2"))
    assert f(2.0, None, None) == pytest.approx(200.003)


@pytest.mark.parametrize("text", ["", "   ", "x+", "sin x", "(x", "x)", "2**x", "x $ 1", "sin()"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse_map_expr(text)


def test_syntax_error_reports_byte_offset():
    with pytest.raises(ExprSyntaxError) as info:
        parse_map_expr("x + * 2")
    assert info.value.offset == 4
    assert "offset 4" in str(info.value)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_map_expr("x + gamma")
    assert info.value.name == "gamma"
    assert info.value.offset == 4
    with pytest.raises(UnknownIdentifierError):
        parse_map_expr("tan(x)")


def test_identity_jet():
    assert eval_jet(parse_map_expr("x"), 3.0).as_tuple() == (3.0, 1.0, 0.0, 0.0)


def test_sine_jet_at_half():
    j = eval_jet(parse_map_expr("0.4*sin(pi*x)+x+1"), 0.5)
    assert j.v0 == pytest.approx(1.9, abs=1e-15)
    assert j.v1 == pytest.approx(1.0, abs=1e-15)
    assert j.v2 == pytest.approx(-0.4 * math.pi ** 2, rel=1e-14)
    assert j.v2 == pytest.approx(-3.94784176, rel=1e-8)
    assert j.v3 == pytest.approx(0.0, abs=1e-13)


def test_square_jet():
    assert eval_jet(parse_map_expr("x^2"), 3.0).as_tuple() == (9.0, 6.0, 2.0, 0.0)


def test_integer_power_at_zero_is_finite():
    assert eval_jet(parse_map_expr("x^2"), 0.0).as_tuple() == (0.0, 0.0, 2.0, 0.0)
    assert eval_jet(parse_map_expr("x^3"), 0.0).as_tuple() == (0.0, 0.0, 0.0, 6.0)


def test_general_power_jet():
    # d/dx x^x = x^x (ln x + 1)
    j = eval_jet(parse_map_expr("x^x"), 2.0)
    assert j.v0 == pytest.approx(4.0)
    assert j.v1 == pytest.approx(4.0 * (math.log(2.0) + 1.0))


def test_missing_parameter():
    with pytest.raises(MissingParameterError):
        eval_jet(parse_map_expr("alpha*x"), 1.0)


def test_domain_errors():
    with pytest.raises(DomainError):
        eval_jet(parse_map_expr("1/(x-1)"), 1.0)
    with pytest.raises(DomainError):
        eval_jet(parse_map_expr("x^(-1)"), 0.0)
    with pytest.raises(DomainError):
        eval_jet(parse_map_expr("(x-2)^x"), 1.0)  # negative base, variable exponent
    with pytest.raises(DomainError):
        compile_scalar(parse_map_expr("1/(x-1)"))(1.0, None, None)


TEXTS = [
    "alpha*sin(pi*x)+x+beta",
    "alpha*cos(x)^3-x/(2+sin(x))+beta",
    "((sin(pi*x)+1.1)/2)^(alpha+x+beta)",
    "alpha*x^2*sin(x)-beta*cos(pi*x)",
]


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 1.9), st.floats(0.1, 1.0), st.floats(0.0, 1.0), st.sampled_from(TEXTS))
def test_jet_matches_finite_differences(x, alpha, beta, text):
    e = parse_map_expr(text)
    f = compile_scalar(e)
    j = eval_jet(e, x, alpha, beta)
    g = lambda t: f(t, alpha, beta)  # noqa: E731
    for order, v in ((1, j.v1), (2, j.v2), (3, j.v3)):
        assert rel_error(v, central_derivative(g, x, order)) < 1e-6


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3))
def test_sum_and_product_rules(x):
    a = parse_map_expr("sin(x)+x^2")
    b = parse_map_expr("cos(2*x)-3*x")
    ja, jb = eval_jet(a, x), eval_jet(b, x)
    js = eval_jet(parse_map_expr(f"({a})+({b})"), x)
    jp = eval_jet(parse_map_expr(f"({a})*({b})"), x)
    for u, v in zip(js, ja + jb):
        assert u == pytest.approx(v, rel=1e-12, abs=1e-12)
    for u, v in zip(jp, ja * jb):
        assert u == pytest.approx(v, rel=1e-12, abs=1e-12)


def test_jet_composition_chain_rule():
    inner = parse_map_expr("sin(x)")
    outer = parse_map_expr("x^3+x")
    direct = eval_jet(parse_map_expr("sin(x)^3+sin(x)"), 0.7)
    chained = eval_jet(outer, eval_jet(inner, 0.7))
    for u, v in zip(direct, chained):
        assert u == pytest.approx(v, rel=1e-13, abs=1e-14)


_atoms = st.sampled_from(["x", "alpha", "beta", "pi", "2", "0.5", "3.25"])


def _combine(children):
    return st.one_of(
        st.tuples(children, st.sampled_from("+-*/^"), children).map(lambda t: f"({t[0]}){t[1]}({t[2]})"),
        children.map(lambda c: f"-({c})"),
        st.tuples(st.sampled_from(["sin", "cos"]), children).map(lambda t: f"{t[0]}({t[1]})"),
    )


_exprs = st.recursive(_atoms, _combine, max_leaves=8)


@settings(max_examples=200, deadline=None)
@given(_exprs)
def test_serialize_round_trip(text):
    e = parse_map_expr(text)
    again = parse_map_expr(serialize(e.root))
    assert again.root == e.root
    assert serialize(again.root) == serialize(e.root)


def test_jet_value_type():
    j = Jet3.variable(2.0)
    assert isinstance(j, Jet3)
    assert j.as_tuple() == (2.0, 1.0, 0.0, 0.0)
