"""Chart geometry, finite-difference operators and uniform sampling."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cprigid.chart_geometry import (
    ChartPoint,
    GaussRat,
    apply_block_unitary,
    from_real,
    metric_at,
    real_j,
    real_metric_at,
    rm_action,
    to_real,
)
from cprigid.finite_diff import (
    MAX_STEP,
    MIN_STEP,
    Stencil,
    StepUnderflowError,
    fd_christoffel,
    fd_partials,
    fd_ricci,
    fd_riemann,
)
from cprigid.montecarlo import ball_point, mc_integrate, sample_point, sample_points

coords = st.floats(-1.2, 1.2, allow_nan=False)


@st.composite
def chart_points(draw, m=2):
    N = 2 * m - 1
    re = [draw(coords) for _ in range(N)]
    im = [draw(coords) for _ in range(N)]
    return ChartPoint.for_m(np.array(re) + 1j * np.array(im), m)


def exact_point(m=2):
    return ChartPoint.exact([(Fraction(1, 2), Fraction(-1, 3)), (Fraction(2, 5), 0), (0, Fraction(3, 4))][: 2 * m - 1], m)


def test_inverse_metric_exact():
    md = metric_at(exact_point())
    prod = md.G @ md.gi.T
    N = md.N
    assert all(prod[i, j] == GaussRat(1 if i == j else 0) for i in range(N) for j in range(N))


def test_christoffel_symmetric_exact():
    g = metric_at(exact_point()).gamma
    N = g.shape[0]
    assert all(g[k, i, j] == g[k, j, i] for k in range(N) for i in range(N) for j in range(N))


def test_metric_at_origin():
    md = metric_at(ChartPoint.for_m(np.zeros(3), 2))
    assert np.allclose(md.G, 8 * np.eye(3))  # c = 2(N+1)


@settings(max_examples=25, deadline=None)
@given(chart_points())
def test_metric_is_hermitian_positive_and_kahler(p):
    md = metric_at(p)
    g = md.g_real
    assert np.allclose(g, g.T)
    assert np.all(np.linalg.eigvalsh(g) > 0)
    J = real_j(p.N)
    assert np.allclose(J.T @ g @ J, g)


@settings(max_examples=25, deadline=None)
@given(chart_points())
def test_real_complex_round_trip(p):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((2 * p.N, 2 * p.N))
    T = A + A.T
    H, h = from_real(T)
    assert np.allclose(to_real(H, h), T)
    assert np.allclose(H, H.conj().T)
    assert np.allclose(h, h.T)


@settings(max_examples=20, deadline=None)
@given(chart_points())
def test_einstein_constant_half(p):
    md = metric_at(p)
    assert np.allclose(md.ricci_real, md.g_real / 2)
    assert np.allclose(rm_action(md, md.g_real), md.g_real / 2)


def test_christoffel_matches_fd():
    rng = np.random.default_rng(1)
    st_ = Stencil(1e-4, True)
    for _ in range(5):
        p = ball_point(rng, 2)
        want = metric_at(p).gamma
        got = fd_christoffel(p, st_)
        assert np.max(np.abs(got - want)) < 1e-7


def test_curvature_from_metric_alone():
    rng = np.random.default_rng(2)
    p = ball_point(rng, 2)
    md = metric_at(p)
    st_ = Stencil(1e-3, True)
    R = fd_riemann(p.real, st_)
    assert np.max(np.abs(R - md.riemann_real)) / np.max(np.abs(md.riemann_real)) < 1e-6
    Rc = fd_ricci(real_metric_at, p.real, st_)
    assert np.max(np.abs(Rc - md.g_real / 2)) / np.max(np.abs(md.g_real)) < 1e-6


def test_unitaries_are_isometries():
    """Pulling g back along the chart map induced by a unitary returns g."""
    rng = np.random.default_rng(3)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
    p = ball_point(rng, 2, radius=0.5)

    def phi(x):
        return apply_block_unitary(ChartPoint.from_real(x, 2), Q).real

    Jac = fd_partials(phi, p.real, Stencil(1e-4, True))  # Jac[a, r] = ∂_a phi^r
    pulled = Jac @ real_metric_at(phi(p.real), 2) @ Jac.T
    assert np.allclose(pulled, metric_at(p).g_real, atol=1e-7)


# finite differences ---------------------------------------------------------


def test_stencil_bounds():
    for bad in (MIN_STEP / 10, MAX_STEP * 10):
        with pytest.raises(StepUnderflowError):
            Stencil(bad)


def test_richardson_improves_accuracy():
    def f(x):
        return np.asarray(np.sin(3 * x[0]) * np.exp(x[1]))

    x = np.array([0.3, -0.2])
    exact = np.array([3 * np.cos(0.9) * np.exp(-0.2), np.sin(0.9) * np.exp(-0.2)])
    plain = np.max(np.abs(fd_partials(f, x, Stencil(1e-2)) - exact))
    rich = np.max(np.abs(fd_partials(f, x, Stencil(1e-2, True)) - exact))
    assert rich < plain / 100


# sampling -------------------------------------------------------------------


def test_mc_uniform_measure_first_moment():
    # E|w_0|^2/|w|^2 = 1/(N+1) under the uniform measure
    est = mc_integrate(lambda W: np.abs(W[:, 0]) ** 2 / np.sum(np.abs(W) ** 2, axis=1), 4, 20000, 11)
    assert est.zscore(0.25) < 3
    assert est.stderr < 0.01


def test_mc_reproducible_bitwise():
    f = lambda W: np.abs(W[:, 1]) ** 2 / np.sum(np.abs(W) ** 2, axis=1)  # noqa: E731
    assert mc_integrate(f, 4, 1000, 5) == mc_integrate(f, 4, 1000, 5)
    assert mc_integrate(f, 4, 1000, 5) != mc_integrate(f, 4, 1000, 6)


def test_mc_minimum_samples():
    with pytest.raises(ValueError):
        mc_integrate(lambda W: W[:, 0].real, 4, 50, 1)


def test_chart_rejection_threshold():
    rng = np.random.default_rng(4)
    W = sample_points(rng, 500, 4, threshold=0.3)
    assert np.all(np.abs(W[:, 0]) >= 0.3 * np.linalg.norm(W, axis=1))
    p = sample_point(rng, 2)
    assert p.N == 3 and p.n_plus == 2


def test_ball_point_radius():
    rng = np.random.default_rng(5)
    assert all(np.linalg.norm(ball_point(rng, 3, radius=0.5).z) <= 0.5 for _ in range(50))


def test_chart_point_validation():
    with pytest.raises(ValueError):
        ChartPoint.for_m(np.zeros(2), 2)
    with pytest.raises(ValueError):
        ChartPoint(np.zeros(3), 5)
    with pytest.raises(TypeError):
        exact_point().real


@settings(max_examples=25, deadline=None)
@given(chart_points(m=3))
def test_real_metric_fast_path_matches_closed_form(p):
    a = real_metric_at(p.real)
    b = metric_at(p).g_real
    assert np.max(np.abs(a - b)) <= 1e-14 * np.max(np.abs(b))
