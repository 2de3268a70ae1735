"""Parser, printer and jet evaluation."""

import cmath

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bltk.errors import DomainError, ParseError, UnknownIdentifierError
from bltk.expr import (BinOp, Call, Const, Neg, Num, Var, as_function, eval_jet, parse,
                       polynomial_coeffs, to_source)
from bltk.gallery import GALLERY


def test_parse_precedence_sum_of_power():
    assert parse("z^2 + 1") == BinOp("+", BinOp("^", Var(), Num(2)), Num(1))


def test_power_binds_tighter_than_unary_minus():
    assert parse("-z^2") == Neg(BinOp("^", Var(), Num(2)))


def test_power_is_right_associative():
    assert parse("2^3^2") == BinOp("^", Num(2), BinOp("^", Num(3), Num(2)))


def test_parse_e2_expression_tree():
    tree = parse("exp(2*pi*i*z^2)*sin(pi*z)/pi")
    assert isinstance(tree, BinOp) and tree.op == "/"
    assert tree.right == Const("pi")
    left = tree.left
    assert left.op == "*" and isinstance(left.left, Call) and left.left.func == "exp"
    assert left.left.arg.right == BinOp("^", Var(), Num(2))
    assert left.right == Call("sin", BinOp("*", Const("pi"), Var()))


def test_unbalanced_paren_reports_offset():
    with pytest.raises(ParseError) as exc:
        parse("sin(")
    assert exc.value.offset == 4


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError):
        parse("foo(z)")


def test_empty_source_is_error():
    with pytest.raises(ParseError):
        parse("")


def test_imaginary_literal():
    assert complex(as_function("2i")(0.0)) == 2j


def test_jet_of_square():
    j = eval_jet(parse("z^2"), 1 + 1j, 3)
    assert np.allclose(j.values(), [2j, 2 + 2j, 2, 0], atol=1e-15)


def test_jet_of_exp_at_zero():
    j = eval_jet(parse("exp(z)"), 0.0, 3)
    assert np.allclose(j.values(), [1, 1, 1, 1], atol=1e-15)


def test_e2_at_one_has_unit_derivative():
    j = eval_jet(parse("exp(2*pi*i*z^2)*sin(pi*z)/pi"), 1.0, 1)
    assert abs(j.d0) < 1e-15
    assert abs(abs(j.d1) - 1) < 1e-14


def test_log_on_branch_cut_is_domain_error():
    with pytest.raises(DomainError):
        eval_jet(parse("log(z)"), -2.0, 1)


def test_pole_is_domain_error():
    with pytest.raises(DomainError):
        eval_jet(parse("1/z"), 0.0, 1)


def test_integer_power_has_no_cut():
    j = eval_jet(parse("z^3"), -2.0, 1)
    assert np.allclose([j.d0, j.d1], [-8, 12])


def test_polynomial_coeffs():
    assert polynomial_coeffs(parse("3*z^2 - z + 1")) == [1, -1, 3]
    assert polynomial_coeffs(parse("exp(z)")) is None


def test_scalar_and_jet_agree():
    f = as_function("sinh(z)*cos(z)/(1+z^2) + sqrt(z+4)")
    for z in (0.3 + 0.2j, -1.5 + 2j, 2.5 - 0.7j):
        assert abs(f.scalar(z) - complex(f.jet(z, 0).d0)) < 1e-14


def test_huge_values_stay_finite_through_log_scale():
    j = as_function("exp(exp(z))").jet(7.0, 2)
    assert np.isfinite(j.lsc) and float(j.log_abs()) == pytest.approx(np.exp(7.0), rel=1e-12)


# -- properties ---------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(n for n, e in GALLERY.items()))
def test_gallery_expressions_round_trip(name):
    entry = GALLERY[name]
    for fn in (entry.E, entry.A, entry.f):
        expr = getattr(fn, "expr", None)
        if expr is not None:
            assert parse(to_source(expr)) == expr


_FUNCS = ["exp", "sin", "cos", "tan", "sinh", "cosh", "log", "sqrt"]


@st.composite
def expressions(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from([Var(), Const("pi"), Const("i"), Const("e"),
                                     Num(draw(st.integers(0, 9))),
                                     Num(draw(st.floats(0.001, 100.0, allow_nan=False)))]))
    kind = draw(st.sampled_from(["neg", "bin", "call"]))
    if kind == "neg":
        return Neg(draw(expressions(depth=depth - 1)))
    if kind == "call":
        return Call(draw(st.sampled_from(_FUNCS)), draw(expressions(depth=depth - 1)))
    return BinOp(draw(st.sampled_from(["+", "-", "*", "/", "^"])),
                 draw(expressions(depth=depth - 1)), draw(expressions(depth=depth - 1)))


@given(expressions())
def test_print_parse_round_trip(tree):
    assert parse(to_source(tree)) == tree


_JET_EXPRS = ["z^3 - 2*z + 1", "exp(z)*sin(z)", "cos(z^2)/(2+z)", "tan(z/3)", "sqrt(z+5)",
              "log(z+4)", "exp(2*pi*i*z^2)*sin(pi*z)/pi", "sinh(z)*cosh(2*z)", "(z+3)^(1/3)",
              "exp(-z)*z^2", "1/(z^2+9)", "exp(exp(z/2))"]


def _central(f, z, k):
    if k == 1:
        h = 1e-5
        return (f(z + h) - f(z - h)) / (2 * h)
    if k == 2:
        h = 1e-4
        return (f(z + h) - 2 * f(z) + f(z - h)) / h ** 2
    def d3(h):
        return (f(z + 2 * h) - 2 * f(z + h) + 2 * f(z - h) - f(z - 2 * h)) / (2 * h ** 3)
    # Richardson extrapolation removes the O(h^2) truncation term
    return (4 * d3(1e-3) - d3(2e-3)) / 3


def test_jets_match_finite_differences_at_200_seeded_points():
    rng = np.random.default_rng(2024)
    worst = {1: 0.0, 2: 0.0, 3: 0.0}
    for _ in range(200):
        src = _JET_EXPRS[rng.integers(len(_JET_EXPRS))]
        z = complex(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        f = as_function(src)
        j = f.jet(z, 3)
        vals = j.values()
        for k in (1, 2, 3):
            fd = _central(lambda w: complex(f.jet(w, 0).d0), z, k)
            worst[k] = max(worst[k], abs(vals[k] - fd) / (1 + abs(vals[k])))
    assert worst[1] <= 1e-6
    assert worst[2] <= 1e-5
    assert worst[3] <= 1e-4


def test_jet_matches_closed_form_derivatives():
    z = 0.4 - 0.9j
    j = as_function("exp(z)*sin(z)").jet(z, 3)
    e, s, c = cmath.exp(z), cmath.sin(z), cmath.cos(z)
    expected = [e * s, e * (s + c), 2 * e * c, 2 * e * (c - s)]
    assert np.allclose(j.values(), expected, rtol=1e-14, atol=1e-14)
