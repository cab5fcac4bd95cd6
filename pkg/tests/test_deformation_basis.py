import numpy as np
import pytest
import sympy as sp

from cprigid.chart_geometry import metric_at, rm_action, to_real
from cprigid.deformation_basis import (
    BasisCoeffs,
    _basis_values,
    basis_field,
    divergence_coeffs,
    divergence_of,
    gram_matrix,
    h0_expected,
    hess_pairing,
    inner_table,
    l_inverse,
    l_matrix,
    realize,
    require_m2,
    rhs_vector,
    solve_h0,
    trace_table,
)
from cprigid.eigenfunction import grad_u_real, hess_u_at, u_at
from cprigid.exact import RatFn, RatMatrix
from cprigid.finite_diff import Stencil, fd_divergence, fd_rough_laplacian
from cprigid.montecarlo import ball_point
from cprigid.scalar_algebra import GlobalParams

SYM = GlobalParams(m="sym")
M = sp.Symbol("m")


def to_sympy(f: RatFn):
    n = sum(sp.Rational(c.numerator, c.denominator) * M**k for k, c in enumerate(f.num))
    d = sum(sp.Rational(c.numerator, c.denominator) * M**k for k, c in enumerate(f.den))
    return n / d


def points(m, n, seed):
    rng = np.random.default_rng(seed)
    return [ball_point(rng, m) for _ in range(n)]


def test_inverse_against_sympy():
    L = l_matrix(SYM)
    S = sp.Matrix(5, 5, lambda i, j: to_sympy(L[i, j]))
    Sinv = S.inv()
    inv = l_inverse(SYM)
    for i in range(5):
        for j in range(5):
            assert sp.cancel(to_sympy(inv[i, j]) - Sinv[i, j]) == 0
    assert L @ inv == RatMatrix.identity(5)


def test_h0_symbolic():
    h0 = solve_h0(SYM)
    assert h0 == h0_expected(SYM)
    L = l_matrix(SYM)
    assert BasisCoeffs(tuple(v / 2 for v in L @ list(h0))) == rhs_vector(SYM)
    assert divergence_of(h0, SYM).is_zero()


def test_h0_against_sympy_solve():
    L = l_matrix(SYM)
    S = sp.Matrix(5, 5, lambda i, j: to_sympy(L[i, j]))
    b = sp.Matrix([to_sympy(x) for x in rhs_vector(SYM)])
    x = 2 * S.LUsolve(b)
    for got, want in zip(solve_h0(SYM), x):
        assert sp.cancel(to_sympy(got) - want) == 0


@pytest.mark.parametrize("m", [2, 3, 4, 10])
def test_h0_numeric_m(m):
    p = GlobalParams(m=m)
    assert solve_h0(p) == h0_expected(p)
    assert solve_h0(p).eval(m) == h0_expected(SYM).eval(m)


def test_m1_excluded():
    with pytest.raises(ValueError, match="m >= 2"):
        require_m2(GlobalParams(m=1))
    with pytest.raises(ValueError):
        solve_h0(GlobalParams(m=1))


def test_basis_coeffs_length():
    with pytest.raises(ValueError):
        BasisCoeffs((1, 2, 3))


@pytest.mark.parametrize("m", [2, 3])
def test_tables_pointwise(m):
    params = GlobalParams(m=m)
    traces = trace_table(params)
    inner = inner_table(params)
    hp = hess_pairing(params)
    for p in points(m, 4, m):
        u = float(u_at(p))
        gi = metric_at(p).g_real_inv
        vals = [e.real() for e in _basis_values(p, 1.0)]
        H = hess_u_at(p)
        hess = to_real(H.herm, H.hol)
        for k in range(5):
            assert np.trace(gi @ vals[k]) == pytest.approx(traces[k].evaluate(u), abs=1e-12)
            assert np.trace(gi @ vals[k] @ gi @ hess) == pytest.approx(hp[k].evaluate(u), abs=1e-12)
            for l in range(5):
                got = np.trace(gi @ vals[k] @ gi @ vals[l])
                assert got == pytest.approx(inner[k][l].evaluate(u), abs=1e-12)


@pytest.mark.parametrize("m", [2, 3])
def test_gram_positive_definite(m):
    G = np.array([[float(x) for x in row] for row in gram_matrix(GlobalParams(m=m)).eval(m)])
    assert np.allclose(G, G.T)
    assert np.all(np.linalg.eigvalsh(G) > 0)


def test_divergence_coefficients_fd():
    m = 2
    d = divergence_coeffs(GlobalParams(m=m)).floats()
    st_ = Stencil(1e-3, True)
    for p in points(m, 2, 7):
        u = float(u_at(p))
        du = grad_u_real(p)
        for k in range(5):
            got = fd_divergence(basis_field(np.eye(5)[k], m), p.real, st_)
            assert np.allclose(got, d[k] * u * du, atol=1e-7)


def test_l_matrix_column_fd():
    """One column of L checked by finite differences; the harness checks all of them."""
    m = 2
    L = np.array([[float(x) for x in row] for row in l_matrix(GlobalParams(m=m)).eval(m)])
    st_ = Stencil(1e-3, True)
    for p in points(m, 2, 8):
        md = metric_at(p)
        f = basis_field(np.eye(5)[4], m)
        got = fd_rough_laplacian(f, p.real, st_) + 2 * rm_action(md, f(p.real))
        want = realize(L[:, 4], p).real()
        assert np.allclose(got, want, atol=1e-7)
