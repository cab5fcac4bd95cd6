from fractions import Fraction

import numpy as np
import pytest

from cprigid.deformation_basis import BasisCoeffs, solve_h0
from cprigid.exact import RatFn
from cprigid.finite_diff import Stencil
from cprigid.montecarlo import ball_point
from cprigid.scalar_algebra import GlobalParams, UPoly, apply_helmholtz, integrate
from cprigid.variational import (
    Atom,
    QuadScalar,
    TensorExpr,
    conformal_series,
    conformal_table_mismatches,
    conformal_variation,
    fd_validate_variation,
    fttt_source,
    fttt_source_derived,
    ftt_source,
    ftt_source_derived,
    phi_st_conformal,
    phi_st_conformal_dim,
    phi_st_mixed,
    phi_tt,
    phi_tt_derived,
    phi_ttt,
    phi_ttt_derived,
    polarize,
    reduce_single,
    trace_two,
)

SYM = GlobalParams(m="sym")
ALL = [SYM, GlobalParams(m=2), GlobalParams(m=3)]


def test_conformal_table_matches_series():
    assert conformal_table_mismatches() == []


def test_variation_is_factorial_times_taylor_coefficient():
    series = conformal_series("Rc", 3)
    assert len(series) == 4
    assert conformal_variation("Rc", 2) == series[2].scale(2)
    assert conformal_variation("Rc", 3) == series[3].scale(6)
    with pytest.raises((ValueError, KeyError)):
        conformal_variation("nope", 1)


@pytest.mark.parametrize("params", ALL, ids=str)
def test_ftt_source_two_routes(params):
    assert ftt_source(params) == ftt_source_derived(params)


@pytest.mark.parametrize("params", ALL, ids=str)
def test_phi_tt_two_routes(params):
    assert phi_tt(params).triple(params) == phi_tt_derived(params).triple(params)


@pytest.mark.parametrize("params", ALL, ids=str)
def test_phi_ttt_two_routes(params):
    assert phi_ttt(params).triple(params) == phi_ttt_derived(params).triple(params)


@pytest.mark.parametrize("params", ALL, ids=str)
def test_potential_variations_solve_their_equations(params):
    r = phi_ttt(params)
    half = Fraction(1, 2)
    assert apply_helmholtz(half, r.scalars.f_tt, params) == ftt_source(params)
    assert apply_helmholtz(half, r.scalars.f_ttt, params) == fttt_source(params)


def test_fttt_sources_differ_by_known_term():
    """The closed-form source of f_ttt and the one obtained by differentiating
    the Euler-Lagrange equation three times are not equal.  Their difference
    is c(m)(λ²u - u³) with c = 6(m-1)(4m²+m-2)/(m(3m+2)), which vanishes only
    at m = 1."""
    m = RatFn.symbol()
    diff = fttt_source(SYM) - fttt_source_derived(SYM)
    c = 6 * (m - 1) * (4 * m**2 + m - 2) / (m * (3 * m + 2))
    assert diff == UPoly({(1, 1): c, (3, 0): -c})
    assert not integrate(diff * UPoly.u(1), SYM).is_zero()
    assert phi_ttt(SYM, "derived").triple(SYM) != phi_ttt(SYM).triple(SYM)
    with pytest.raises(ValueError):
        phi_ttt(SYM, "other")


@pytest.mark.parametrize("params", ALL, ids=str)
def test_polarization_recovers_phi_tt(params):
    expr, eqs = phi_st_conformal(params, "u", "v")
    pol = reduce_single(polarize(expr, eqs, params, {"f_st": "f_tt"}), params)
    assert pol == phi_tt(params).triple(params)


def test_phi_st_symmetric_in_functions():
    a, ea = phi_st_conformal_dim(6, "u", "v")
    b, eb = phi_st_conformal_dim(6, "v", "u")
    assert trace_two(a, 6) == trace_two(b, 6)
    assert ea["f_st"].rhs == eb["f_st"].rhs


def test_trace_two_rules():
    expr = TensorExpr.of(
        (QuadScalar.one(3), Atom.G),
        (QuadScalar.one(1), Atom.DU_DV, ("u", "v")),
        (QuadScalar.one(1), Atom.UHV_VHU, ("u", "v")),
    )
    tr = trace_two(expr, 5)
    assert tr == QuadScalar.one(15) + QuadScalar.grad("u", "v", 2) + QuadScalar.prod("u", "v", -2)
    with pytest.raises(ValueError):
        trace_two(TensorExpr.of((QuadScalar.prod("u", "v"), Atom.DU_DV, ("u", "v"))), 5)


@pytest.mark.parametrize("params", ALL, ids=str)
def test_mixed_trace_two_routes(params):
    r = phi_st_mixed(solve_h0(params), params)
    assert r.trace == r.trace_closed


def test_mixed_rejects_non_divergence_free():
    with pytest.raises(ValueError, match="divergence-free"):
        phi_st_mixed(BasisCoeffs((0, 0, 0, 1, 0)), GlobalParams(m=2))


@pytest.mark.parametrize("order, tol", [(1, 1e-6), (2, 1e-4)])
def test_conformal_ricci_variation_against_fd(order, tol):
    rng = np.random.default_rng(60 + order)
    for _ in range(2):
        p = ball_point(rng, 2)
        rep = fd_validate_variation(order, p, t_step=1e-2, space=Stencil(5e-3, True))
        assert rep.relative_error < tol


def test_fd_validate_rejects_order_three():
    p = ball_point(np.random.default_rng(0), 2)
    with pytest.raises(ValueError):
        fd_validate_variation(3, p)
