from fractions import Fraction
from math import factorial

import pytest
import sympy as sp

from cprigid.exact import RatFn
from cprigid.obstruction import (
    EXPECTED,
    average_l4,
    compute_i1,
    compute_i2,
    compute_i2_direct,
    diagonal_criterion_slope,
    expected_value,
    i11_integrand,
    i12_integrand,
    mc_i12,
    reduction_to_h0,
    second_order_criterion,
    sign_for_all_m_ge,
    total_obstruction,
    total_with_derived_source,
)
from cprigid.scalar_algebra import GlobalParams, UPoly

SYM = GlobalParams(m="sym")
M = sp.Symbol("m")


def to_sympy(f: RatFn):
    n = sum(sp.Rational(c.numerator, c.denominator) * M**k for k, c in enumerate(f.num))
    d = sum(sp.Rational(c.numerator, c.denominator) * M**k for k, c in enumerate(f.den))
    return n / d


@pytest.fixture(scope="module")
def report():
    return total_obstruction(SYM)


def test_total_matches_sympy_factorization(report):
    want = -24 * (M - 1) * (4 * M**3 - M**2 + M + 2) / ((M + 1) * (2 * M + 1) * (2 * M + 3) * (3 * M + 2))
    got = to_sympy(report.total)
    assert sp.cancel(got - want) == 0
    assert sp.factor(got) == sp.factor(want)
    assert sp.cancel(to_sympy(report.I1) + to_sympy(report.I2) - got) == 0


def test_closed_forms_computed_not_copied(report):
    assert compute_i1(SYM) == EXPECTED["I1"] == report.I1
    assert compute_i2(SYM) == EXPECTED["I2"] == report.I2
    assert report.total == EXPECTED["total"]


def test_i2_two_routes():
    for params in (SYM, GlobalParams(m=2), GlobalParams(m=5)):
        assert compute_i2(params) == compute_i2_direct(params)


def test_values_at_m2():
    r = total_obstruction(GlobalParams(m=2))
    assert r.I1 == Fraction(-66, 35)
    assert r.I2 == Fraction(34, 35)
    assert r.total == Fraction(-32, 35)


def test_numeric_m_agrees_with_symbolic(report):
    for m0 in (3, 4, 7):
        r = total_obstruction(GlobalParams(m=m0), table_range=range(2, 3))
        assert r.total == report.total.eval(m0)


def test_table_and_sign(report):
    assert [row[0] for row in report.table] == list(range(2, 51))
    for m0, i1, i2, tot in report.table:
        assert i1 + i2 == tot
        assert tot < 0
        assert tot == Fraction(str(to_sympy(report.total).subs(M, m0)))
    assert report.nonzero_for_all_m
    assert sign_for_all_m_ge(report.total, 2) == -1


def test_sign_certificate_declines_sign_change():
    m = RatFn.symbol()
    assert sign_for_all_m_ge(m - 5, 2) is None
    assert sign_for_all_m_ge((m + 1) / (m + 3), 0) == 1


def test_integrands_match_frozen_forms(report):
    frozen = EXPECTED["integrands"]
    for key in ("I11", "I12", "I1", "I21", "I2_over_3"):
        assert report.intermediates[f"{key}_integrand"] == frozen[key]
    assert report.intermediates["H0"] == frozen["H0"]
    assert average_l4(report.intermediates["I1_integrand"], SYM) == report.I1
    assert i11_integrand(SYM) + i12_integrand(SYM) == report.intermediates["I1_integrand"]


def test_expected_value_specializes():
    assert expected_value(GlobalParams(m=2), "total") == Fraction(-32, 35)
    assert expected_value(GlobalParams(m=2), "H0") == expected_value(SYM, "H0").subs_m(2)


def test_average_l4_rejects_wrong_weight():
    with pytest.raises(ValueError):
        average_l4(UPoly.u(2), SYM)


def test_total_with_rederived_source():
    """With f_ttt taken from the triple-differentiated Euler-Lagrange equation,
    the total is 48(m-1)²/((m+1)(2m+1)(2m+3)): still nonzero for m >= 2, with
    the opposite sign."""
    m = RatFn.symbol()
    got = total_with_derived_source(SYM)
    assert got == 48 * (m - 1) ** 2 / ((m + 1) * (2 * m + 1) * (2 * m + 3))
    assert sign_for_all_m_ge(got, 2) == 1


def test_m1_excluded():
    with pytest.raises(ValueError):
        total_obstruction(GlobalParams(m=1))


def test_reduction_to_h0():
    r = reduction_to_h0(SYM)
    assert not r.coefficient.is_zero()
    assert r.balanced_vanishes is None
    for m0 in (2, 3):
        assert reduction_to_h0(GlobalParams(m=m0)).balanced_vanishes
    assert r.trusted


@pytest.mark.parametrize("k", range(3, 9))
def test_slope_closed_form(k):
    assert diagonal_criterion_slope(k) == Fraction(2 * factorial(k - 1), factorial(k + 2))


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5])
def test_second_order_criterion(N):
    v = second_order_criterion(N)
    balanced = v.surviving_patterns
    if N % 2 == 1:
        # only patterns with as many +1 as -1 survive
        assert balanced and all(sum(eps) == 0 for eps in balanced)
        assert not v.all_obstructed
    else:
        assert v.all_obstructed
    assert v.obstructed_patterns + len(v.surviving_patterns) == 2 ** N - 1


def test_second_order_rejects_bad_n():
    with pytest.raises(ValueError):
        second_order_criterion(0)


@pytest.mark.parametrize("m", [2, 3])
def test_mc_i12_within_three_standard_errors(m):
    est, exact = mc_i12(m, 40000, 17 + m)
    assert est.zscore(exact) < 3
