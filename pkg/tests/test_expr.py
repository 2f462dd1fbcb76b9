import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ucsys.expr import Expr, ExprError, evaluate_matrix, parse_entry_expression, to_source


def test_precedence_and_power():
    e = parse_entry_expression("1 + 2*x1^2 - xi2/4")
    assert e.evaluate([3.0], [0.0, 8.0]) == pytest.approx(1 + 18 - 2)


def test_leading_sign_and_functions():
    e = parse_entry_expression("-x2*xi2 + sqrt(abs(-9))")
    assert e.evaluate([0.0, 2.0], [0.0, 5.0]) == pytest.approx(-10 + 3)


def test_negative_exponent():
    assert parse_entry_expression("x1^(-2)").evaluate([2.0]) == pytest.approx(0.25)


@pytest.mark.parametrize("src, offset", [("1 + * x1", 4), ("x1 $ 2", 3), ("(x1 + 1", 7),
                                         ("y1", 0), ("x1^1.5", 3)])
def test_error_offsets(src, offset):
    with pytest.raises(ExprError) as info:
        parse_entry_expression(src)
    assert info.value.offset == offset


def test_dimension_bound():
    with pytest.raises(ExprError):
        parse_entry_expression("x3", dim=2)


def test_unbound_and_division():
    with pytest.raises(ExprError):
        parse_entry_expression("x2").evaluate([1.0])
    with pytest.raises(ExprError):
        parse_entry_expression("1/x1").evaluate([0.0])


def test_sqrt_slack_and_negative():
    e = parse_entry_expression("sqrt(x1)")
    assert e.evaluate([-1e-15]) == 0.0
    with pytest.raises(ExprError):
        e.evaluate([-1e-3])


def test_vectorised_matrix():
    m = [[parse_entry_expression("x1"), parse_entry_expression("xi1*x1")],
         [parse_entry_expression("2"), parse_entry_expression("x1^2")]]
    x = np.linspace(0, 1, 5)
    out = evaluate_matrix(m, [x], [np.full(5, 3.0)])
    assert out.shape == (5, 2, 2)
    assert np.allclose(out[:, 0, 1], 3 * x)
    assert np.allclose(out[:, 1, 0], 2.0)


def test_simplifying_constructors():
    x = Expr.x(1)
    assert (x * 0).is_const(0.0)
    assert (x + 0) is x
    assert (-(-x)) is x
    assert (Expr.const(2) ** 3).value == 8.0


# random trees for the round-trip property
_leaf = st.one_of(
    st.floats(-5, 5, allow_nan=False).map(Expr.const),
    st.integers(1, 3).map(Expr.x),
    st.integers(1, 3).map(Expr.xi),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from(["add", "sub", "mul"]), children, children)
        .map(lambda t: Expr(t[0], (t[1], t[2]))),
        children.map(lambda c: Expr("neg", (c,))),
        st.tuples(children, st.integers(0, 3)).map(lambda t: Expr("pow", (t[0],), index=t[1])),
        children.map(lambda c: Expr("abs", (c,))),
    )


trees = st.recursive(_leaf, _extend, max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(trees, st.lists(st.floats(-2, 2), min_size=3, max_size=3),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_source_round_trip(e, x, xi):
    back = parse_entry_expression(to_source(e))
    a, b = e.evaluate(x, xi), back.evaluate(x, xi)
    assert np.isclose(a, b, rtol=1e-12, atol=1e-12) or (np.isinf(a) and a == b)
    assert to_source(back) == to_source(parse_entry_expression(to_source(back)))
