"""The verification suites.

Each builder returns :class:`CheckSpec` objects whose functions are module
level (so they can run in worker processes) and take plain arguments.
Expensive shared computations are cached per process.

Numeric tolerances are committed here, one constant per check.  Finite
difference steps scale from the configured base step by the nesting depth
of the operator (one level: base; two levels: ×10; the variational oracles
difference a two-level operator in a parameter: ×50 in space, ×100 in the
parameter).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import factorial

import numpy as np

from .chart_geometry import ChartPoint, GaussRat, from_real, metric_at, real_metric_at, rm_action, to_real
from .deformation_basis import (
    BasisCoeffs,
    _basis_values,
    basis_field,
    divergence_of,
    h0_expected,
    l_inverse,
    l_matrix,
    rhs_vector,
    solve_h0,
    trace_table,
)
from .eigenfunction import (
    criterion_integral,
    criterion_vector,
    diagonal_average,
    grad_u_at,
    grad_u_real,
    hess_u_at,
    hessian_norm2,
    u_at,
    u_batch,
    xi_combination,
    xi_contraction,
    xi_piecewise,
)
from .exact import RatFn, RatMatrix
from .finite_diff import Stencil, fd_christoffel, fd_hessian, fd_partials, fd_ricci, fd_rough_laplacian
from .montecarlo import ball_point, mc_integrate
from .numeric_harness import MC_SIGMAS, CheckSpec, Outcome, RunParams, derive_seed, register
from .obstruction import (
    EXPECTED,
    compute_i1,
    compute_i2,
    compute_i2_direct,
    diagonal_criterion_slope,
    expected_value,
    mc_i12,
    reduction_to_h0,
    second_order_criterion,
    sign_for_all_m_ge,
    total_obstruction,
    total_with_derived_source,
)
from .product_rigidity import (
    ProductConfig,
    conclusion_pipeline,
    cross_phi2_product,
    du_form,
    einstein_commutation_check,
    metric_field,
    obstruction_coefficients,
    root_identity_check,
    u2g_field,
)
from .scalar_algebra import GlobalParams, UPoly, moment
from .variational import (
    conformal_table_mismatches,
    fd_validate_variation,
    ftt_source,
    ftt_source_derived,
    phi_prime_fd,
    phi_st_conformal,
    phi_st_mixed,
    phi_tt,
    phi_tt_derived,
    phi_ttt,
    phi_ttt_derived,
    polarize,
    reduce_single,
)

# tolerances, one per numeric check
TOL_GEOMETRY_FD = 1e-6
TOL_EVAL = 1e-10
TOL_L_ENTRY = 1e-4
TOL_TYPE = 1e-6
TOL_RC1 = 1e-5
TOL_RC2 = 1e-4
TOL_PHI_PRIME = 1e-5
TOL_COMMUTE_PARALLEL = 1e-6
TOL_COMMUTE = 1e-4
GEOMETRY_POINTS = 100
SECOND_ORDER_MAX_SLOTS = 8
PRODUCT_RANDOM_PAIRS = 20


def _s(x) -> str:
    if isinstance(x, RatFn):
        return x.canonical_str()
    if isinstance(x, BasisCoeffs):
        return "[" + ", ".join(c.canonical_str() for c in x) + "]"
    if isinstance(x, (list, tuple)):
        return "[" + ", ".join(_s(c) for c in x) + "]"
    return str(x)


def _params(m) -> GlobalParams:
    return GlobalParams(m=m)


def _step(params: RunParams, factor: float) -> Stencil:
    return Stencil(min(params.fd.step * factor, 1e-1), params.fd.richardson)


# ---------------------------------------------------------------------------
# h0


def chk_h0_closed_form(m) -> Outcome:
    p = _params(m)
    got, want = solve_h0(p), h0_expected(p)
    return Outcome(_s(got), got == want, "solve by elimination vs frozen closed form")


def chk_h0_round_trip(m) -> Outcome:
    p = _params(m)
    h0 = solve_h0(p)
    L = l_matrix(p)
    img = tuple(sum((L[j, k] * h0[k] / 2 for k in range(5)), RatFn()) for j in range(5))
    return Outcome(_s(img), BasisCoeffs(img) == rhs_vector(p), "L·(h0/2) against the right-hand side")


def chk_h0_divergence(m) -> Outcome:
    p = _params(m)
    d = divergence_of(solve_h0(p), p)
    return Outcome(_s(d), d.is_zero(), "multiple of u du in δh0")


def chk_l_inverse(m) -> Outcome:
    p = _params(m)
    prod_ = l_matrix(p) @ l_inverse(p)
    return Outcome("identity" if prod_ == RatMatrix.identity(5) else repr(prod_), prod_ == RatMatrix.identity(5))


@register("h0", exact_only=True)
def suite_h0(params: RunParams) -> list[CheckSpec]:
    m = params.m
    return [
        CheckSpec("h0.closed-form", "exact", chk_h0_closed_form, (m,)),
        CheckSpec("h0.round-trip", "exact", chk_h0_round_trip, (m,)),
        CheckSpec("h0.divergence-free", "exact", chk_h0_divergence, (m,)),
        CheckSpec("h0.l-inverse-identity", "exact", chk_l_inverse, (m,)),
    ]


# ---------------------------------------------------------------------------
# obstruction


@lru_cache(maxsize=None)
def _report(m):
    return total_obstruction(_params(m))


def chk_closed_form(m, key) -> Outcome:
    r = _report(m)
    got = {"I1": r.I1, "I2": r.I2, "total": r.total}[key]
    return Outcome(_s(got), got == expected_value(_params(m), key))


def chk_i1_function(m) -> Outcome:
    got = compute_i1(_params(m))
    return Outcome(_s(got), got == _report(m).I1, "compute_i1 against the report")


def chk_i2_routes(m) -> Outcome:
    a, b = compute_i2(_params(m)), compute_i2_direct(_params(m))
    return Outcome(_s(a), a == b, "reduced integrand vs full trace with f_st solved")


def chk_sum_table(m) -> Outcome:
    r = _report(m)
    bad = [m0 for m0, i1, i2, t in r.table if i1 + i2 != t or t != EXPECTED["total"].eval(m0)]
    return Outcome(f"{len(r.table)} rows, {len(bad)} mismatches", not bad and len(r.table) == 49, "m = 2..50")


def chk_values_m2() -> Outcome:
    r = _report(2)
    got = (r.I1.constant_value(), r.I2.constant_value(), r.total.constant_value())
    want = (Fraction(-66, 35), Fraction(34, 35), Fraction(-32, 35))
    return Outcome(", ".join(map(str, got)), got == want, "I1, I2, total at m = 2 (units Vol·λ⁴)")


def chk_nonzero() -> Outcome:
    sign = sign_for_all_m_ge(_report("sym").total, 2)
    return Outcome(str(sign), sign == -1, "sign of the total for every m >= 2")


def chk_derived_source(m) -> Outcome:
    got = total_with_derived_source(_params(m))
    mm = _params(m).m_fn
    want = 48 * (mm - 1) ** 2 / ((mm + 1) * (2 * mm + 1) * (2 * mm + 3))
    return Outcome(_s(got), got == want, "total with the re-derived f_ttt source; still nonzero for m >= 2")


def chk_reduction(m) -> Outcome:
    r = reduction_to_h0(_params(m))
    want = 4 * _params(m).m_fn - 4
    ok = r.coefficient == want and r.balanced_vanishes in (None, True)
    return Outcome(_s(r.coefficient), ok, f"⨍⟨Φ_st(u,v),ug⟩ = c⨍u²v; balanced vanishing: {r.balanced_vanishes}")


def chk_mc_i12(m, samples, seed) -> Outcome:
    est, exact = mc_i12(m, samples, seed)
    z = est.zscore(exact)
    return Outcome(z, None, f"mean {est.mean:.6g} ± {est.stderr:.3g}, exact {exact:.6g}")


@register("obstruction")
def suite_obstruction(params: RunParams) -> list[CheckSpec]:
    m = params.m
    out = [
        CheckSpec("obstruction.i1-closed-form", "exact", chk_closed_form, (m, "I1")),
        CheckSpec("obstruction.i2-closed-form", "exact", chk_closed_form, (m, "I2")),
        CheckSpec("obstruction.total-closed-form", "exact", chk_closed_form, (m, "total")),
        CheckSpec("obstruction.i1-function", "exact", chk_i1_function, (m,)),
        CheckSpec("obstruction.i2-two-routes", "exact", chk_i2_routes, (m,)),
        CheckSpec("obstruction.sum-table", "exact", chk_sum_table, (m,)),
        CheckSpec("obstruction.values-m2", "exact", chk_values_m2),
        CheckSpec("obstruction.nonzero-all-m", "exact", chk_nonzero),
        CheckSpec("obstruction.derived-source-total", "exact", chk_derived_source, (m,)),
        CheckSpec("obstruction.reduction-to-h0", "exact", chk_reduction, (m,)),
    ]
    if not params.symbolic:
        cid = "obstruction.mc-i12"
        seed = derive_seed(params.mc.seed, cid)
        out.append(CheckSpec(cid, "mc", chk_mc_i12, (m, params.mc.samples, seed), MC_SIGMAS, seed))
    return out


# ---------------------------------------------------------------------------
# intermediates


def chk_integrand(m, key, inter_key) -> Outcome:
    got = _report(m).intermediates[inter_key]
    return Outcome(str(got), got == expected_value(_params(m), key))


def chk_i1_integrand_sum(m) -> Outcome:
    inter = _report(m).intermediates
    got = inter["I1_integrand"]
    return Outcome(str(got), got == inter["I11_integrand"] + inter["I12_integrand"], "I1 integrand = I11 + I12")


def chk_conformal_table() -> Outcome:
    bad = conformal_table_mismatches()
    return Outcome(str(bad), not bad, "hand table of conformal variations vs series expansion")


def chk_ftt_sources(m) -> Outcome:
    a, b = ftt_source(_params(m)), ftt_source_derived(_params(m))
    return Outcome(str(a), a == b, "source of f_tt: closed form vs differentiated Euler-Lagrange equation")


def chk_phi_tt_routes(m) -> Outcome:
    p = _params(m)
    a, b = phi_tt(p).triple(p), phi_tt_derived(p).triple(p)
    return Outcome(f"a={a.a}; b={a.b}; c={a.c}", a == b, "Φ_tt closed form vs conformal-formula route")


def chk_phi_ttt_routes(m) -> Outcome:
    p = _params(m)
    a, b = phi_ttt(p).triple(p), phi_ttt_derived(p).triple(p)
    return Outcome(f"a={a.a}; b={a.b}; c={a.c}", a == b, "Φ_ttt closed form vs conformal-formula route")


def chk_polarization(m) -> Outcome:
    p = _params(m)
    expr, eqs = phi_st_conformal(p, "u", "v")
    pol = reduce_single(polarize(expr, eqs, p, {"f_st": "f_tt"}), p)
    want = phi_tt(p).triple(p)
    return Outcome(f"a={pol.a}; b={pol.b}; c={pol.c}", pol == want, "Φ_st(u, v) at v = u equals Φ_tt")


def chk_mixed_trace(m) -> Outcome:
    p = _params(m)
    r = phi_st_mixed(solve_h0(p), p)
    return Outcome(str(r.trace), r.trace == r.trace_closed, "trace of Φ_st(h0, ug) by atom rules vs closed trace")


@register("intermediates", exact_only=True)
def suite_intermediates(params: RunParams) -> list[CheckSpec]:
    m = params.m
    rows = [
        ("I11", "I11_integrand"),
        ("I12", "I12_integrand"),
        ("I21", "I21_integrand"),
        ("I2_over_3", "I2_over_3_integrand"),
        ("H0", "H0"),
    ]
    out = [CheckSpec(f"intermediates.{k.lower()}", "exact", chk_integrand, (m, k, ik)) for k, ik in rows]
    out += [
        CheckSpec("intermediates.i1-sum", "exact", chk_i1_integrand_sum, (m,)),
        CheckSpec("intermediates.conformal-table", "exact", chk_conformal_table),
        CheckSpec("intermediates.ftt-source-routes", "exact", chk_ftt_sources, (m,)),
        CheckSpec("intermediates.phi-tt-routes", "exact", chk_phi_tt_routes, (m,)),
        CheckSpec("intermediates.phi-ttt-routes", "exact", chk_phi_ttt_routes, (m,)),
        CheckSpec("intermediates.polarization", "exact", chk_polarization, (m,)),
        CheckSpec("intermediates.mixed-trace", "exact", chk_mixed_trace, (m,)),
    ]
    return out


# ---------------------------------------------------------------------------
# integrals


def chk_moment_closed(m, k) -> Outcome:
    mm = _params(m).m_fn
    want = {2: 1 / (2 * mm + 1), 4: 3 / ((2 * mm + 1) * (2 * mm + 3))}[k]
    got = moment(k, _params(m))
    return Outcome(_s(got), got == want, f"⨍u^{k} by the moment recurrence (units λ^{k})")


def _sphere_moment_value(m0: int, k: int) -> Fraction:
    eps = [1] * m0 + [-1] * m0
    return diagonal_average([eps] * k)


def chk_moment_oracle(m, k) -> Outcome:
    ms = [m] if m != "sym" else list(range(2, 7))
    bad = [m0 for m0 in ms if moment(k, _params(m0)).constant_value() != _sphere_moment_value(m0, k)]
    return Outcome(f"m in {ms}: {len(bad)} mismatches", not bad, "recurrence vs Dirichlet sphere moments")


def chk_mc_moment(m, k, samples, seed) -> Outcome:
    est = mc_integrate(lambda W: u_batch(W, m) ** k, 2 * m, samples, seed)
    exact = float(moment(k, _params(m)))
    return Outcome(est.zscore(exact), None, f"mean {est.mean:.6g} ± {est.stderr:.3g}, exact {exact:.6g}")


@register("integrals")
def suite_integrals(params: RunParams) -> list[CheckSpec]:
    m = params.m
    out = []
    for k in (2, 4):
        out.append(CheckSpec(f"integrals.u{k}-recurrence", "exact", chk_moment_closed, (m, k)))
        out.append(CheckSpec(f"integrals.u{k}-sphere-oracle", "exact", chk_moment_oracle, (m, k)))
        if not params.symbolic:
            cid = f"integrals.u{k}-mc"
            seed = derive_seed(params.mc.seed, cid)
            out.append(CheckSpec(cid, "mc", chk_mc_moment, (m, k, params.mc.samples, seed), MC_SIGMAS, seed))
    return out


# ---------------------------------------------------------------------------
# pointwise geometry


def _points(m: int, seed: int, count: int) -> list[ChartPoint]:
    rng = np.random.default_rng(seed)
    return [ball_point(rng, m) for _ in range(count)]


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(b)))))


def _u_field(m: int):
    return lambda x: np.asarray(float(u_at(ChartPoint.from_real(x, m))))


def chk_christoffel(m, seed, count, step, rich) -> Outcome:
    st = Stencil(step, rich)
    err = max(_rel(fd_christoffel(p, st), metric_at(p).gamma) for p in _points(m, seed, count))
    return Outcome(err, None, f"{count} points, closed Γ vs differentiated metric")


def chk_grad_fd(m, seed, count, step, rich) -> Outcome:
    st = Stencil(step, rich)
    err = max(_rel(fd_partials(_u_field(m), p.real, st), grad_u_real(p)) for p in _points(m, seed, count))
    return Outcome(err, None, f"{count} points")


def chk_hess_fd(m, seed, count, step, rich) -> Outcome:
    st = Stencil(step, rich)
    err = 0.0
    for p in _points(m, seed, count):
        H = hess_u_at(p)
        err = max(err, _rel(fd_hessian(_u_field(m), p.real, st), to_real(H.herm, H.hol)))
    return Outcome(err, None, f"{count} points, covariant Hessian")


def chk_ricci_fd(m, seed, count, step, rich) -> Outcome:
    st = Stencil(step, rich)
    err = max(_rel(fd_ricci(real_metric_at, p.real, st), metric_at(p).g_real / 2) for p in _points(m, seed, count))
    return Outcome(err, None, f"{count} points, Rc = g/2 from the metric alone")


def chk_grad_norm(m, seed, count) -> Outcome:
    err = 0.0
    for p in _points(m, seed, count):
        md = metric_at(p)
        du = grad_u_at(p)
        herm = 2 * float(np.real(np.sum(md.gi * np.outer(du, np.conj(du)))))
        gr = grad_u_real(p)
        real = float(gr @ md.g_real_inv @ gr)
        u = float(u_at(p))
        want = (1 - u * u) / (2 * m)
        err = max(err, abs(herm - want), abs(real - want))
    return Outcome(err, None, f"{count} points, |∇u|² = (λ² - u²)/(2m)")


def chk_xi(m, seed, count) -> Outcome:
    err = 0.0
    for p in _points(m, seed, count):
        a, b, c = xi_contraction(p), xi_combination(p), xi_piecewise(p)
        err = max(err, _rel(b, a), _rel(c, a))
    return Outcome(err, None, f"{count} points, contraction vs combination vs block form")


def chk_hess_norm(m, seed, count) -> Outcome:
    err = 0.0
    for p in _points(m, seed, count):
        u = float(u_at(p))
        want = ((m - 1) + (m + 1) * u * u) / (4 * m * m)
        err = max(err, abs(hessian_norm2(p) - want))
    return Outcome(err, None, f"{count} points")


def _exact_point(m: int) -> ChartPoint:
    coords = [(Fraction(k + 1, k + 3), Fraction((-1) ** k, k + 2)) for k in range(2 * m - 1)]
    return ChartPoint.exact(coords, m)


def chk_exact_point(m) -> Outcome:
    p = _exact_point(m)
    a, b, c = xi_contraction(p), xi_combination(p), xi_piecewise(p)
    same = all(a[i, j] == b[i, j] == c[i, j] for i in range(p.N) for j in range(p.N))
    md = metric_at(p)
    du = grad_u_at(p)
    g2 = sum((md.gi[i, j] * du[i] * du[j].conjugate() for i in range(p.N) for j in range(p.N)), GaussRat(0)) * 2
    u = u_at(p)
    u = u.re if isinstance(u, GaussRat) else Fraction(u)
    ok = same and g2 == GaussRat((1 - u * u) / (2 * m))
    return Outcome(f"|∇u|² = {g2.re}", ok, "rational point: ξ forms and the |∇u|² identity exactly")


@register("geometry")
def suite_geometry(params: RunParams) -> list[CheckSpec]:
    m = params.m
    out = []
    if params.symbolic:
        return [CheckSpec(f"geometry.exact-point-m{k}", "exact", chk_exact_point, (k,)) for k in (2, 3)]
    one, two = _step(params, 1), _step(params, 10)
    for name, fn, st in (
        ("christoffel-fd", chk_christoffel, one),
        ("grad-u-fd", chk_grad_fd, one),
        ("hess-u-fd", chk_hess_fd, two),
        ("ricci-fd", chk_ricci_fd, two),
    ):
        cid = f"geometry.{name}"
        seed = derive_seed(params.mc.seed, cid)
        out.append(CheckSpec(cid, "fd", fn, (m, seed, GEOMETRY_POINTS, st.step, st.richardson), TOL_GEOMETRY_FD, seed))
    for name, fn in (("grad-norm-identity", chk_grad_norm), ("xi-two-forms", chk_xi), ("hessian-norm", chk_hess_norm)):
        cid = f"geometry.{name}"
        seed = derive_seed(params.mc.seed, cid)
        out.append(CheckSpec(cid, "fd", fn, (m, seed, GEOMETRY_POINTS), TOL_EVAL, seed))
    out.append(CheckSpec("geometry.exact-point", "exact", chk_exact_point, (m,)))
    return out


# ---------------------------------------------------------------------------
# L matrix by finite differences


@lru_cache(maxsize=8)
def _l_fd(m: int, seed: int, count: int, step: float, rich: bool):
    """Joint least-squares fit of FD ``L(e_k)`` over all sample points.

    A single point cannot separate ``λ²g`` from ``u²g``, so the fit stacks
    every point into one system per column.
    """
    st = Stencil(step, rich)
    L = np.array([[float(v) for v in row] for row in l_matrix(_params(m)).eval(m)])
    rows, images = [], [[] for _ in range(5)]
    typ = 0.0
    fields = [basis_field(np.eye(5)[k], m) for k in range(5)]
    for p in _points(m, seed, count):
        md = metric_at(p)
        rows.append(np.stack([t.real().ravel() for t in _basis_values(p, 1.0)], axis=1))
        for k, f in enumerate(fields):
            Lk = fd_rough_laplacian(f, p.real, st) + 2 * rm_action(md, f(p.real))
            herm, hol = from_real(Lk)
            scale = max(1.0, float(np.max(np.abs(Lk))))
            typ = max(typ, float(np.max(np.abs(hol if k < 4 else herm))) / scale)
            images[k].append(Lk.ravel())
    A = np.concatenate(rows)
    entry = np.zeros((5, 5))
    span = 0.0
    for k in range(5):
        b = np.concatenate(images[k])
        coef, *_ = np.linalg.lstsq(A, b, rcond=None)
        entry[:, k] = np.abs(coef - L[:, k])
        span = max(span, float(np.max(np.abs(A @ coef - b))) / max(1.0, float(np.max(np.abs(b)))))
    return entry, typ, span


def chk_l_entry(m, seed, count, step, rich, j, k) -> Outcome:
    entry, _, _ = _l_fd(m, seed, count, step, rich)
    return Outcome(float(entry[j, k]), None, f"entry ({j + 1},{k + 1}), {count} points")


def chk_l_type(m, seed, count, step, rich) -> Outcome:
    return Outcome(_l_fd(m, seed, count, step, rich)[1], None, "off-type block of L(e_k), relative")


def chk_l_span(m, seed, count, step, rich) -> Outcome:
    return Outcome(_l_fd(m, seed, count, step, rich)[2], None, "distance of L(e_k) from the basis span, relative")


@register("l-matrix-fd")
def suite_l_matrix(params: RunParams) -> list[CheckSpec]:
    m = params.m
    out = [CheckSpec("l-matrix.inverse-identity", "exact", chk_l_inverse, (m,))]
    if params.symbolic:
        return out
    st = _step(params, 10)
    seed = derive_seed(params.mc.seed, "l-matrix")
    args = (m, seed, params.points, st.step, st.richardson)
    for j, k in product(range(5), range(5)):
        out.append(CheckSpec(f"l-matrix.entry-{j + 1}{k + 1}", "fd", chk_l_entry, args + (j, k), TOL_L_ENTRY, seed, "l-matrix-fd"))
    out.append(CheckSpec("l-matrix.type-preservation", "fd", chk_l_type, args, TOL_TYPE, seed, "l-matrix-fd"))
    out.append(CheckSpec("l-matrix.span", "fd", chk_l_span, args, TOL_L_ENTRY, seed, "l-matrix-fd"))
    return out


# ---------------------------------------------------------------------------
# variational formulas by finite differences


def chk_rc_variation(m, order, seed, count, t_step, space, rich) -> Outcome:
    st = Stencil(space, rich)
    err = max(fd_validate_variation(order, p, t_step, st).relative_error for p in _points(m, seed, count))
    return Outcome(err, None, f"order {order}, {count} points")


def _isd_field(m: int):
    n = 4 * m - 2

    def f(x):
        p = ChartPoint.from_real(x, m)
        H = hess_u_at(p)
        return float(u_at(p)) * metric_at(p).g_real + 2 * to_real(H.herm, H.hol)

    return f, UPoly.u(1, n - 2)


def chk_phi_prime(m, which, seed, count, s_step, space, rich) -> Outcome:
    params = _params(m)
    st = Stencil(space, rich)
    if which == "h0":
        h0 = solve_h0(params)
        field = basis_field(h0.floats(), m)
        H = sum((trace_table(params)[k] * h0[k] for k in range(5)), UPoly())
        L = l_matrix(params)
        Lh = [float(sum((L[j, k] * h0[k] for k in range(5)), RatFn())) for j in range(5)]
    else:
        field, H = _isd_field(m)
        Lh = [0.0] * 5
    err = 0.0
    for p in _points(m, seed, count):
        got = phi_prime_fd(field, H, p, params, s_step, st)
        want = sum((c * t.real() for c, t in zip(Lh, _basis_values(p, 1.0))), np.zeros_like(got))
        scale = max(1.0, float(np.max(np.abs(field(p.real)))))
        err = max(err, float(np.max(np.abs(got - want))) / scale)
    return Outcome(err, None, f"2Φ'(h) vs Lh, {count} points")


@register("variational-fd")
def suite_variational(params: RunParams) -> list[CheckSpec]:
    if params.symbolic:
        return []
    m = params.m
    t_step = min(params.fd.step * 100, 1e-1)
    space = min(params.fd.step * 50, 1e-1)
    rich = params.fd.richardson
    out = []
    for order, tol in ((1, TOL_RC1), (2, TOL_RC2)):
        cid = f"variational.rc-order{order}"
        seed = derive_seed(params.mc.seed, cid)
        out.append(CheckSpec(cid, "fd", chk_rc_variation, (m, order, seed, params.points, t_step, space, rich), tol, seed))
    for which in ("h0", "isd"):
        cid = f"variational.phi-prime-{which}"
        seed = derive_seed(params.mc.seed, cid)
        count = min(params.points, 3)
        out.append(CheckSpec(cid, "fd", chk_phi_prime, (m, which, seed, count, t_step, space, rich), TOL_PHI_PRIME, seed))
    return out


# ---------------------------------------------------------------------------
# second-order criterion


def chk_patterns(slots: int) -> Outcome:
    v = second_order_criterion(slots - 1)
    balanced = tuple(
        (1,) + e for e in product((1, -1), repeat=slots - 1) if sum((1,) + e) == 0
    )
    ok = set(v.surviving_patterns) == set(balanced)
    if slots % 2:
        ok = ok and v.all_obstructed
    return Outcome(
        f"{len(v.surviving_patterns)} surviving, {v.obstructed_patterns} obstructed",
        ok,
        "survivors are exactly the balanced sign patterns",
    )


def chk_slope(slots: int) -> Outcome:
    s = diagonal_criterion_slope(slots)
    want = Fraction(2 * factorial(slots - 1), factorial(slots + 2))
    return Outcome(str(s), s == want and s > 0, "⨍u²w_k = δλ_k² + const with δ = 2(k-1)!/(k+2)!")


def chk_closed_vs_monomial(slots: int) -> Outcome:
    rng = np.random.default_rng(slots)
    bad = 0
    for _ in range(4):
        raw = [Fraction(int(x)) for x in rng.integers(-5, 6, size=slots)]
        mean = sum(raw) / slots
        u = [x - mean for x in raw]
        vec = criterion_vector(u)
        for k in range(slots):
            w = [Fraction(-1, slots - 1)] * slots
            w[k] = Fraction(1)
            if criterion_integral(u, w) != vec[k] - sum(vec[i] for i in range(slots) if i != k) / (slots - 1):
                bad += 1
    return Outcome(f"{bad} mismatches", bad == 0, "closed-form criterion vector vs monomial expansion")


@register("second-order", exact_only=True)
def suite_second_order(params: RunParams) -> list[CheckSpec]:
    out = []
    for slots in range(2, SECOND_ORDER_MAX_SLOTS + 1):
        out.append(CheckSpec(f"second-order.patterns-{slots}-slots", "exact", chk_patterns, (slots,)))
        if slots >= 3:  # two slots force |λ_1| = |λ_2|, no slope to check
            out.append(CheckSpec(f"second-order.slope-{slots}-slots", "exact", chk_slope, (slots,)))
    for slots in (3, 4, 5):
        out.append(CheckSpec(f"second-order.closed-vs-monomial-{slots}", "exact", chk_closed_vs_monomial, (slots,)))
    return out


# ---------------------------------------------------------------------------
# product


def chk_cross(m, n2) -> Outcome:
    res = cross_phi2_product(ProductConfig(m, n2)).matches()
    return Outcome(str(res), all(res.values()), "Φ_st(ug, vg₁), f_st and both traces vs closed forms")


def chk_coefficients(m, n2) -> Outcome:
    co = obstruction_coefficients(ProductConfig(m, n2))
    obs = f"g: {_s(list(co.g_trace))}; g1: {_s(list(co.g1_trace))}"
    return Outcome(obs, co.matches(), "six integral coefficients from second variations")


def chk_root(m, n2) -> Outcome:
    r = root_identity_check(ProductConfig(m, n2))
    return Outcome(f"float residual {r.float_residual}", r.ok, "square completions in the quadratic extension")


def chk_root_random(seed, pairs) -> Outcome:
    rng = np.random.default_rng(seed)
    bad = []
    for _ in range(pairs):
        m, n2 = int(rng.integers(1, 13)), int(rng.integers(1, 41))
        r = root_identity_check(ProductConfig(m, n2))
        if not r.ok:
            bad.append((m, n2))
    return Outcome(f"{pairs} pairs, failures {bad}", not bad, f"random (m, n2), seed {seed}")


def chk_conclusion(m, n2) -> Outcome:
    v = conclusion_pipeline(ProductConfig(m, n2))
    return Outcome(f"u=0: {v.u_zero}, v=0: {v.v_zero}", v.u_zero and v.v_zero and v.squares_vanish, _s(v.determinant_norm))


def chk_degenerate(m) -> Outcome:
    co = obstruction_coefficients(ProductConfig(m, 0))
    return Outcome(_s(list(co.g_trace)), co.g_trace == co.g1_trace and co.matches(), "n2 = 0: g = g₁")


def chk_lambda_zero(m) -> Outcome:
    try:
        root_identity_check(ProductConfig(m, 0))
    except ValueError as exc:
        return Outcome("rejected", True, str(exc))
    return Outcome("accepted", False)


def chk_commutation(field_name, step, rich) -> Outcome:
    p = ChartPoint(np.array([0.3 + 0.1j, -0.2 + 0.4j]), 2)
    h = metric_field(2) if field_name == "metric" else u2g_field(2)
    r = einstein_commutation_check(p, h, du_form(2), Stencil(step, rich))
    return Outcome(r.max(), None, f"δL, Lδ*, Tr L residuals {r.divergence:.2e}, {r.dstar:.2e}, {r.trace:.2e} on CP²")


@register("product")
def suite_product(params: RunParams) -> list[CheckSpec]:
    m, n2 = params.m, params.n2
    out = [
        CheckSpec("product.cross-variation", "exact", chk_cross, (m, n2)),
        CheckSpec("product.coefficients", "exact", chk_coefficients, (m, n2)),
        CheckSpec("product.root-identity", "exact", chk_root, (m, n2)),
        CheckSpec("product.conclusion", "exact", chk_conclusion, (m, n2)),
        CheckSpec("product.degenerate-single-factor", "exact", chk_degenerate, (m,)),
        CheckSpec("product.lambda-zero-rejected", "exact", chk_lambda_zero, (m,)),
        CheckSpec(
            "product.root-identity-random",
            "exact",
            chk_root_random,
            (derive_seed(params.mc.seed, "product.root-identity-random"), PRODUCT_RANDOM_PAIRS),
        ),
    ]
    if not params.symbolic:
        st = Stencil(min(params.fd.step * 100, 1e-1), params.fd.richardson)
        out.append(CheckSpec("product.commutation-metric", "fd", chk_commutation, ("metric", st.step, st.richardson), TOL_COMMUTE_PARALLEL))
        out.append(CheckSpec("product.commutation-u2g", "fd", chk_commutation, ("u2g", st.step, st.richardson), TOL_COMMUTE))
    return out


# ---------------------------------------------------------------------------
# determinism


def chk_mc_rerun(m, seed) -> Outcome:
    a, _ = mc_i12(m, 2000, seed)
    b, _ = mc_i12(m, 2000, seed)
    same = (a.mean, a.stderr) == (b.mean, b.stderr)
    return Outcome(f"{a.mean!r}", same, "two Monte Carlo runs with one seed agree bitwise")


def chk_point_rerun(m, seed) -> Outcome:
    a = [p.z.tolist() for p in _points(m, seed, 5)]
    b = [p.z.tolist() for p in _points(m, seed, 5)]
    return Outcome("5 points", a == b, "sampled chart points reproduce")


def chk_seed_derivation() -> Outcome:
    a = derive_seed(7, "obstruction.mc-i12")
    return Outcome(str(a), a == derive_seed(7, "obstruction.mc-i12") and a != derive_seed(8, "obstruction.mc-i12"))


@register("determinism")
def suite_determinism(params: RunParams) -> list[CheckSpec]:
    out = [CheckSpec("determinism.seed-derivation", "exact", chk_seed_derivation)]
    if not params.symbolic:
        m, seed = params.m, params.mc.seed
        out.append(CheckSpec("determinism.mc-rerun", "exact", chk_mc_rerun, (m, seed)))
        out.append(CheckSpec("determinism.point-rerun", "exact", chk_point_rerun, (m, seed)))
    return out
