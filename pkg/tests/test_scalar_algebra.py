from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cprigid.chart_geometry import ChartPoint
from cprigid.eigenfunction import diagonal_average, sphere_moment, u_at
from cprigid.exact import RatFn
from cprigid.finite_diff import Stencil, fd_rough_laplacian
from cprigid.montecarlo import ball_point
from cprigid.scalar_algebra import (
    GlobalParams,
    HelmholtzSingularError,
    UPoly,
    apply_helmholtz,
    grad_inner,
    integrate,
    laplacian,
    moment,
    solve_helmholtz,
)


SYM = GlobalParams(m="sym")


@st.composite
def upolys(draw, max_deg=4):
    """Homogeneous-or-not small polynomials in u and λ² with rational coefficients."""
    terms = {}
    for _ in range(draw(st.integers(1, 4))):
        i = draw(st.integers(0, max_deg))
        j = draw(st.integers(0, 2))
        terms[(i, j)] = Fraction(draw(st.integers(-9, 9)), draw(st.integers(1, 5)))
    return UPoly(terms)


params_strategy = st.sampled_from([SYM, GlobalParams(m=2), GlobalParams(m=3), GlobalParams(m=7)])


@settings(max_examples=60, deadline=None)
@given(upolys(), params_strategy)
def test_divergence_theorem(p, params):
    assert integrate(laplacian(p, params), params).is_zero()


@settings(max_examples=60, deadline=None)
@given(upolys(), upolys(), params_strategy)
def test_laplacian_self_adjoint(p, q, params):
    assert integrate(p * laplacian(q, params) - q * laplacian(p, params), params).is_zero()


@settings(max_examples=50, deadline=None)
@given(upolys(), upolys(), params_strategy)
def test_leibniz_rule(p, q, params):
    lhs = laplacian(p * q, params)
    rhs = p * laplacian(q, params) + q * laplacian(p, params) + grad_inner(p, q, params) * 2
    assert lhs == rhs


@settings(max_examples=50, deadline=None)
@given(upolys(), st.sampled_from([Fraction(1, 2), Fraction(1), Fraction(-3, 7)]))
def test_helmholtz_round_trip(rhs, c):
    try:
        f = solve_helmholtz(c, rhs, SYM)
    except HelmholtzSingularError:
        return
    assert apply_helmholtz(c, f, SYM) == rhs


def test_helmholtz_singular_at_eigenvalue():
    # Δu = -u, so Δ + 1 has u in its kernel
    with pytest.raises(HelmholtzSingularError):
        solve_helmholtz(1, UPoly.u(), SYM)


def _compositions(k, parts):
    if parts == 1:
        yield (k,)
        return
    for first in range(k + 1):
        for rest in _compositions(k - first, parts - 1):
            yield (first,) + rest


def sphere_oracle_moment(m: int, k: int) -> Fraction:
    """⨍u^k for u = Σ±s_i by the multinomial theorem over Dirichlet moments."""
    eps = [1] * m + [-1] * m
    total = Fraction(0)
    for a in _compositions(k, 2 * m):
        coeff = factorial(k)
        sign = 1
        for e, ai in zip(eps, a):
            coeff //= factorial(ai)
            sign *= e**ai
        total += sign * coeff * sphere_moment(a)
    return total


@pytest.mark.parametrize("m", [2, 3, 4, 5])
@pytest.mark.parametrize("k", range(0, 9))
def test_moment_recurrence_vs_sphere_oracle(m, k):
    assert moment(k, GlobalParams(m=m)).constant_value() == sphere_oracle_moment(m, k)


def test_multinomial_oracle_matches_monomial_expansion():
    eps = [1, 1, -1, -1]
    assert sphere_oracle_moment(2, 4) == diagonal_average([eps] * 4)


def test_low_moments_closed_form():
    m = RatFn.symbol()
    assert moment(2, SYM) == 1 / (2 * m + 1)
    assert moment(4, SYM) == 3 / ((2 * m + 1) * (2 * m + 3))
    assert moment(3, SYM).is_zero()


def test_grading_is_preserved():
    p = UPoly({(2, 0): 1, (0, 1): 3})  # weight 2
    assert laplacian(p, SYM).weights() <= {2}
    assert integrate(p * p, SYM).weights() == {4}


@pytest.mark.parametrize("k", [1, 2, 3])
def test_laplacian_of_powers_matches_fd(k):
    """The exact rule for Δu^k agrees with a finite-difference Laplacian in the chart."""
    m = 2
    rng = np.random.default_rng(k)
    params = GlobalParams(m=m)
    exact = laplacian(UPoly.u(k), params)

    def f(x):
        return np.asarray(float(u_at(ChartPoint.from_real(x, m))) ** k)

    st_ = Stencil(1e-3, True)
    for _ in range(3):
        p = ball_point(rng, m)
        u = float(u_at(p))
        got = float(fd_rough_laplacian(f, p.real, st_))
        assert got == pytest.approx(exact.evaluate(u), abs=1e-6)


def test_grad_u_sq():
    g = UPoly.grad_u_sq(GlobalParams(m=3))
    assert g.evaluate(0.5) == pytest.approx((1 - 0.25) / 6)


def test_params_validation():
    with pytest.raises(ValueError):
        GlobalParams(m=0)
    with pytest.raises(ValueError):
        GlobalParams(m="x")
    assert GlobalParams(m="sym").n_fn == 4 * RatFn.symbol() - 2


def test_records_serialization():
    rec = UPoly({(2, 0): Fraction(3, 2), (0, 1): RatFn((1,), (0, 1))}).to_records()
    assert rec == [
        {"u_power": 0, "lambda2_power": 1, "num_poly": [1], "den_poly": [0, 1]},
        {"u_power": 2, "lambda2_power": 0, "num_poly": [3], "den_poly": [2]},
    ]
