import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from cprigid.chart_geometry import ChartPoint
from cprigid.exact import RatFn
from cprigid.finite_diff import Stencil
from cprigid.product_rigidity import (
    ProductConfig,
    QuadExt,
    conclusion_pipeline,
    cross_phi2_product,
    du_form,
    einstein_commutation_check,
    metric_field,
    obstruction_coefficients,
    odd_slot_obstruction,
    product_obstruction,
    root_identity_check,
    u2g_field,
)

fracs = st.fractions(min_value=-20, max_value=20, max_denominator=12)
# λ = n2/(4(2m-1)) > 0 in every product case; 1 + 4d > 0 keeps the roots real
ds = st.fractions(min_value=Fraction(1, 12), max_value=10, max_denominator=12)


@st.composite
def ext_elems(draw, d):
    return QuadExt(draw(fracs), draw(fracs), d)


@settings(max_examples=60, deadline=None)
@given(st.data(), ds)
def test_quadratic_extension_field_axioms(data, d):
    a, b, c = (data.draw(ext_elems(d)) for _ in range(3))
    assert a + b == b + a and a * b == b * a
    assert (a + b) + c == a + (b + c)
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert QuadExt.x(d) * QuadExt.x(d) == QuadExt.x(d) + d
    assert (a * b).norm() == a.norm() * b.norm()
    assume(not a.is_zero() and not a.norm().is_zero())
    assert a * a.inverse() == 1
    assert (b / a) * a == b


@settings(max_examples=40, deadline=None)
@given(fracs, fracs, ds)
def test_extension_float_evaluation(a, b, d):
    e = QuadExt(a, b, d)
    s = math.sqrt(1 + 4 * float(d))
    assert e.to_float("x") == pytest.approx(float(a) + float(b) * (1 + s) / 2, abs=1e-12)
    assert e.conjugate().to_float("x") == pytest.approx(e.to_float("y"), abs=1e-12)


def test_extensions_do_not_mix():
    with pytest.raises(ValueError):
        QuadExt.x(1) + QuadExt.x(2)
    assert QuadExt.x(1) != QuadExt.x(2)


@pytest.mark.parametrize("m, n2", [("sym", 1), ("sym", 7), (2, 1), (2, 5), (3, 2)])
def test_cross_variation_matches_closed_forms(m, n2):
    res = cross_phi2_product(ProductConfig(m, n2)).matches()
    assert res and all(res.values())


@pytest.mark.parametrize("n2", [1, 4])
def test_coefficient_triples_symbolic(n2):
    cfg = ProductConfig("sym", n2)
    co = obstruction_coefficients(cfg)
    m, n = RatFn.symbol(), 4 * RatFn.symbol() + n2
    assert co.g_trace == (n - 2, 2 * (2 * m - 1), n + 4 * m - 4)
    assert co.g1_trace == ((4 * m + n - 4) / 2, 2 * (2 * m - 1), 4 * (2 * m - 1))
    assert co.pure_conformal_ok and co.matches()


def test_psi_forms_in_lambda():
    po = product_obstruction(ProductConfig("sym", 3))
    assert po.psi_in_lambda
    m = RatFn.symbol()
    assert po.lam == RatFn.const(3) / (4 * (2 * m - 1))


@pytest.mark.parametrize("m, n2", [("sym", 1), ("sym", 10), (2, 1), (5, 13)])
def test_root_identity(m, n2):
    r = root_identity_check(ProductConfig(m, n2))
    assert r.exact_ok and r.vieta_ok and r.psi_in_lambda
    assert r.ok
    if m != "sym":
        assert r.float_residual <= 1e-14


def test_float_identity_small_lambda():
    # λ = 1/68: the recombination weights are about 68
    r = root_identity_check(ProductConfig(9, 1))
    assert r.float_residual <= 1e-14 and r.ok
    assert root_identity_check(ProductConfig(1, 3)).float_residual <= 1e-14


def test_root_identity_random_pairs():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        m, n2 = int(rng.integers(1, 13)), int(rng.integers(1, 41))
        assert root_identity_check(ProductConfig(m, n2)).ok


def test_lambda_zero_rejected():
    cfg = ProductConfig(2, 0)
    assert cfg.lam.is_zero()
    with pytest.raises(ValueError, match="λ = 0"):
        root_identity_check(cfg)
    co = obstruction_coefficients(cfg)
    assert co.g_trace == co.g1_trace and co.matches()


def test_config_validation():
    for bad in (-1, 1.5, True):
        with pytest.raises(ValueError):
            ProductConfig(2, bad)
    with pytest.raises(ValueError):
        ProductConfig(0, 1)


@pytest.mark.parametrize("m, n2", [("sym", 2), (2, 1), (3, 6)])
def test_conclusion(m, n2):
    v = conclusion_pipeline(ProductConfig(m, n2))
    assert v.squares_vanish and v.u_zero and v.v_zero
    lam = ProductConfig(m, n2).lam
    assert v.determinant_norm == -(1 + 4 * lam)
    assert v.factor_obstructed is (None if m == "sym" else True)


@pytest.mark.parametrize("slots", [3, 5, 7, 9, 11])
def test_odd_slot_obstruction(slots):
    assert odd_slot_obstruction(slots)


@pytest.mark.parametrize("slots", [2, 4, 6])
def test_even_slots_not_obstructed(slots):
    assert not odd_slot_obstruction(slots)


P = ChartPoint(np.array([0.3 + 0.1j, -0.2 + 0.4j]), 2)


def test_commutation_for_metric():
    r = einstein_commutation_check(P, metric_field(2), du_form(2), Stencil(1e-2, True))
    assert r.max() < 1e-6


def test_commutation_for_u2g():
    r = einstein_commutation_check(P, u2g_field(2), du_form(2), Stencil(1e-2, True))
    assert r.max() < 1e-4
    # a wrong Einstein constant is detected
    bad = einstein_commutation_check(P, u2g_field(2), du_form(2), Stencil(1e-2, True), einstein=1.0)
    assert bad.max() > 1e-2
