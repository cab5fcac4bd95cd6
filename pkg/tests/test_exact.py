from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cprigid.exact import PoleError, RatFn, RatMatrix, SingularMatrixError, solve_linear

M = sp.Symbol("m")

small = st.integers(-6, 6)
polys = st.lists(small, min_size=1, max_size=4)


@st.composite
def ratfns(draw):
    num = draw(polys)
    den = draw(polys.filter(lambda c: any(c)))
    return RatFn(num, den)


def to_sympy(f: RatFn):
    n = sum(sp.Rational(c.numerator, c.denominator) * M**k for k, c in enumerate(f.num))
    d = sum(sp.Rational(c.numerator, c.denominator) * M**k for k, c in enumerate(f.den))
    return n / d


def same(f: RatFn, expr) -> bool:
    return sp.cancel(to_sympy(f) - expr) == 0


@settings(max_examples=60, deadline=None)
@given(ratfns(), ratfns())
def test_field_operations_match_sympy(a, b):
    A, B = to_sympy(a), to_sympy(b)
    assert same(a + b, A + B)
    assert same(a - b, A - B)
    assert same(a * b, A * B)
    if not b.is_zero():
        assert same(a / b, A / B)


@settings(max_examples=60, deadline=None)
@given(ratfns(), ratfns())
def test_canonical_form_is_unique(a, b):
    # equal values give identical representations and hashes
    c = (a * b) / b if not b.is_zero() else a
    assert c == a and hash(c) == hash(a)
    assert c.canonical_str() == a.canonical_str()


@settings(max_examples=40, deadline=None)
@given(ratfns(), st.integers(-5, 5))
def test_eval_matches_sympy(f, m0):
    expr = to_sympy(f)
    den = sp.fraction(sp.together(expr))[1]
    if den.subs(M, m0) == 0:
        with pytest.raises(PoleError):
            f.eval(m0)
    else:
        assert f.eval(m0) == Fraction(str(expr.subs(M, m0)))


@settings(max_examples=40, deadline=None)
@given(ratfns(), ratfns())
def test_compose_matches_sympy(f, q):
    try:
        got = f.compose(q)
    except ZeroDivisionError:
        return
    assert same(got, to_sympy(f).subs(M, to_sympy(q)))


def test_factored_string_of_total():
    m = RatFn.symbol()
    f = -24 * (m - 1) * (4 * m**3 - m**2 + m + 2) / ((m + 1) * (2 * m + 1) * (2 * m + 3) * (3 * m + 2))
    assert f.factored_str() == "-24*(m - 1)*(4*m^3 - m^2 + m + 2)/((m + 1)*(2*m + 1)*(2*m + 3)*(3*m + 2))"
    assert f.canonical_str() == "(-96*m^4 + 120*m^3 - 48*m^2 - 24*m + 48)/(12*m^4 + 44*m^3 + 57*m^2 + 31*m + 6)"


def test_rational_roots():
    m = RatFn.symbol()
    assert sorted(((m - 1) * (2 * m + 3) / (m + 5)).rational_roots()) == [Fraction(-3, 2), Fraction(1)]


def test_zero_denominator_rejected():
    with pytest.raises(ZeroDivisionError):
        RatFn((1,), (0,))
    with pytest.raises(ZeroDivisionError):
        RatFn.const(1) / RatFn()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.lists(small, min_size=3, max_size=3), min_size=3, max_size=3))
def test_inverse_matches_sympy(rows):
    m = RatFn.symbol()
    # a symbolic diagonal shift keeps the matrix generically invertible
    R = RatMatrix([[RatFn.const(rows[i][j]) + (m if i == j else 0) for j in range(3)] for i in range(3)])
    S = sp.Matrix(3, 3, lambda i, j: rows[i][j] + (M if i == j else 0))
    inv = R.inverse()
    Sinv = S.inv()
    for i in range(3):
        for j in range(3):
            assert same(inv[i, j], Sinv[i, j])
    assert R @ inv == RatMatrix.identity(3)


def test_singular_matrix_raises():
    with pytest.raises(SingularMatrixError):
        RatMatrix([[1, 2], [2, 4]]).inverse()


def test_solve_linear_round_trip():
    m = RatFn.symbol()
    A = RatMatrix([[m, 1], [1, m + 2]])
    b = [RatFn.const(3), m]
    x = solve_linear(A, b)
    assert A @ x == b


def test_matrix_eval_reports_pole_position():
    m = RatFn.symbol()
    with pytest.raises(PoleError, match=r"entry \(0,1\)"):
        RatMatrix([[1, 1 / (m - 2)]]).eval(2)
