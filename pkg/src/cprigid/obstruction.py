"""Third-order obstruction for the balanced eigenfunction direction.

Integrals are averages over the manifold in units of ``λ⁴``:

    I₁ = ⨍⟨Φ_ttt, ug⟩ = I₁₁ + I₁₂,   I₁₁ = -⨍uΔf_ttt
    I₂ = 3⨍⟨Φ_st(h₀, ug), ug⟩,        I = I₁ + I₂

Every intermediate integrand is kept as a u-polynomial so that each line of
the computation can be compared separately.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

from .deformation_basis import require_m2, solve_h0
from .eigenfunction import (
    criterion_vector,
    grad_sq_batch,
    sphere_moment,
    traceless_pattern,
    u_batch,
)
from .exact import RatFn
from .montecarlo import MCEstimate, mc_integrate
from .scalar_algebra import GlobalParams, UPoly, integrate, laplacian
from .variational import (
    Atom,
    TensorExpr,
    fttt_source,
    fttt_source_derived,
    formal_average,
    phi_st_conformal,
    phi_st_mixed,
    phi_ttt,
    reduce_single,
    trace_two,
)

__all__ = [
    "ObstructionReport",
    "EXPECTED",
    "expected_value",
    "average_l4",
    "i11_integrand",
    "i12_integrand",
    "compute_i1",
    "compute_i2",
    "compute_i2_direct",
    "total_obstruction",
    "total_with_derived_source",
    "sign_for_all_m_ge",
    "ReductionChecklist",
    "reduction_to_h0",
    "SecondOrderVerdict",
    "second_order_criterion",
    "diagonal_criterion_slope",
    "mc_i12",
]


def _m() -> RatFn:
    return RatFn.symbol()


def _closed_forms() -> dict[str, RatFn]:
    m = _m()
    d3 = (2 * m + 1) * (2 * m + 3) * (3 * m + 2)
    return {
        "I1": -6 * (20 * m**3 - 15 * m**2 - 9 * m + 6) / d3,
        "I2": 6 * (4 * m**4 + 25 * m**3 - 32 * m**2 - 7 * m + 14) / ((m + 1) * d3),
        "total": -24 * (m - 1) * (4 * m**3 - m**2 + m + 2) / ((m + 1) * d3),
    }


def _expected_integrands() -> dict[str, UPoly]:
    """Frozen closed-form integrands, as ``u⁴`` and ``λ²u²`` coefficients."""
    m = _m()
    k = m * (3 * m + 2)
    return {
        "I11": UPoly({(4, 0): 3 * (36 * m**2 + 3 * m - 22) / (3 * m + 2), (2, 1): -3 * (16 * m**2 + 7 * m - 14) / (3 * m + 2)}),
        "I12": UPoly({(4, 0): -6 * (2 * m + 3) * (5 * m**2 - m - 2) / k, (2, 1): -6 * (2 * m**3 - 14 * m**2 + m + 6) / k}),
        "I1": UPoly({(4, 0): 3 * (16 * m**3 - 23 * m**2 - 8 * m + 12) / k, (2, 1): -3 * (20 * m**3 - 21 * m**2 - 12 * m + 12) / k}),
        "I21": UPoly({(4, 0): -(8 * m**2 - 3 * m - 2) / k, (2, 1): -(2 * m**3 - 7 * m**2 + m + 2) / ((m + 1) * k)}),
        "I2_over_3": UPoly(
            {
                (4, 0): (32 * m**4 - 5 * m**3 - 29 * m**2 + 4 * m + 4) / ((m + 1) * k),
                (2, 1): (4 * m**4 - 29 * m**3 + 19 * m**2 + 8 * m - 4) / ((m + 1) * k),
            }
        ),
        "H0": UPoly(
            {
                (0, 1): -2 * (11 * m**2 - 3 * m - 6) / ((m + 1) * (3 * m + 2)),
                (2, 0): 2 * (16 * m**3 + m**2 - 9 * m - 2) / ((m + 1) * (3 * m + 2)),
            }
        ),
    }


EXPECTED = {**_closed_forms(), "integrands": _expected_integrands()}


def expected_value(params: GlobalParams, key: str):
    """Frozen closed form (``I1``, ``I2``, ``total``) or integrand (``I11``,
    ``I12``, ``I1``, ``I21``, ``I2_over_3``, ``H0``) at ``params``."""
    val = EXPECTED[key] if key in EXPECTED else EXPECTED["integrands"][key]
    if params.symbolic:
        return val
    if isinstance(val, UPoly):
        return val.subs_m(params.m)
    return val.subs(params.m)


def average_l4(p: UPoly, params: GlobalParams) -> RatFn:
    """``⨍p`` for a weight-4 polynomial, as a multiple of ``λ⁴``."""
    v = integrate(p, params)
    if set(v.terms) - {(0, 2)}:
        raise ValueError(f"integrand {p} is not homogeneous of weight 4")
    return v.coeff(0, 2)


# ---------------------------------------------------------------------------
# I₁


def i11_integrand(params: GlobalParams, source: str = "closed") -> UPoly:
    """``-2u·(source of f_ttt)``, whose average is ``⨍u f_ttt = I₁₁``."""
    f_tt = phi_ttt(params).scalars.f_tt
    rhs = fttt_source(params, f_tt) if source == "closed" else fttt_source_derived(params, f_tt)
    return -(UPoly.u(1) * rhs) * 2


def i12_integrand(params: GlobalParams) -> UPoly:
    """``u · Tr(Φ_ttt + ∇²f_ttt)``."""
    res = phi_ttt(params)
    hess = TensorExpr.of((UPoly.const(-1), Atom.HESS_AUX, "f_ttt"), aux={"f_ttt": res.scalars.f_ttt})
    rest = res.triple(params) - reduce_single(hess, params)
    return UPoly.u(1) * rest.trace(params)


def _i1_parts(params: GlobalParams, source: str = "closed") -> dict[str, object]:
    res = phi_ttt(params, source)
    u = UPoly.u(1)
    i11_direct = average_l4(-(u * laplacian(res.scalars.f_ttt, params)), params)
    i11_int = i11_integrand(params, source)
    i11 = average_l4(i11_int, params)
    if i11 != i11_direct:
        raise AssertionError("the two evaluations of I11 disagree")
    i12_int = i12_integrand(params) if source == "closed" else _i12_for(res, params)
    i12 = average_l4(i12_int, params)
    full = average_l4(u * res.triple(params).trace(params), params)
    if full != i11 + i12:
        raise AssertionError("I1 is not the sum of I11 and I12")
    return {"I11": i11, "I12": i12, "I1": full, "I11_integrand": i11_int, "I12_integrand": i12_int}


def _i12_for(res, params):
    hess = TensorExpr.of((UPoly.const(-1), Atom.HESS_AUX, "f_ttt"), aux={"f_ttt": res.scalars.f_ttt})
    return UPoly.u(1) * (res.triple(params) - reduce_single(hess, params)).trace(params)


def compute_i1(params: GlobalParams) -> RatFn:
    """``I₁ = ⨍⟨Φ_ttt, ug⟩``."""
    require_m2(params)
    return _i1_parts(params)["I1"]


# ---------------------------------------------------------------------------
# I₂


def _i2_parts(params: GlobalParams) -> dict[str, object]:
    h0 = solve_h0(params)
    mixed = phi_st_mixed(h0, params)
    u = UPoly.u(1)
    m = params.m_fn
    i21_int = u * mixed.P
    reduced = i21_int * (-2 * (m - 1)) + u * u * mixed.H * Fraction(1, 2)
    third = average_l4(reduced, params)
    direct = average_l4(u * mixed.trace, params)
    if params.n is None and third != direct:
        raise AssertionError("the reduced and direct evaluations of I2 disagree")
    return {
        "I21": average_l4(i21_int, params),
        "I21_integrand": i21_int,
        "I2_over_3_integrand": reduced,
        "H0": mixed.H,
        "I2": 3 * direct,
        "h0": h0,
    }


def compute_i2(params: GlobalParams) -> RatFn:
    """``I₂ = 3⨍⟨Φ_st(h₀, ug), ug⟩`` through ``⨍[-2(m-1)u⟨h₀,∇²u⟩ + u²H₀/2]``."""
    require_m2(params)
    return 3 * average_l4(_i2_parts(params)["I2_over_3_integrand"], params)


def compute_i2_direct(params: GlobalParams) -> RatFn:
    """``I₂`` from the full trace of the mixed variation, with ``f_st`` solved."""
    require_m2(params)
    return _i2_parts(params)["I2"]


# ---------------------------------------------------------------------------
# the full report


def sign_for_all_m_ge(f: RatFn, m0: int) -> int | None:
    """Sign of ``f(m)`` valid for every real ``m >= m0``, or ``None``.

    After substituting ``m = m0 + k``, a numerator and denominator whose
    coefficients all share one sign fix the sign for every ``k >= 0``.
    """
    g = f.compose(RatFn.symbol() + m0)
    signs = []
    for poly in (g.num, g.den):
        nz = {c > 0 for c in poly if c != 0}
        if len(nz) != 1 or poly[0] == 0:
            return None
        signs.append(1 if nz.pop() else -1)
    return signs[0] * signs[1]


@dataclass(frozen=True)
class ObstructionReport:
    I11: RatFn
    I12: RatFn
    I1: RatFn
    I21: RatFn
    I2: RatFn
    total: RatFn
    intermediates: dict = field(repr=False)
    nonzero_for_all_m: bool
    table: list = field(repr=False)


def total_obstruction(params: GlobalParams, table_range: range = range(2, 51)) -> ObstructionReport:
    """Assemble ``I = I₁ + I₂`` with every intermediate and a per-m table."""
    require_m2(params)
    p1 = _i1_parts(params)
    p2 = _i2_parts(params)
    total = p1["I1"] + p2["I2"]
    sym = GlobalParams(m="sym", n=params.n)
    i1s = p1["I1"] if params.symbolic else _i1_parts(sym)["I1"]
    i2s = p2["I2"] if params.symbolic else _i2_parts(sym)["I2"]
    total_sym = i1s + i2s
    table = [(m0, i1s.eval(m0), i2s.eval(m0), total_sym.eval(m0)) for m0 in table_range]
    nonzero = sign_for_all_m_ge(total_sym, 2) is not None
    inter = {
        "I11_integrand": p1["I11_integrand"],
        "I12_integrand": p1["I12_integrand"],
        "I1_integrand": p1["I11_integrand"] + p1["I12_integrand"],
        "I21_integrand": p2["I21_integrand"],
        "I2_over_3_integrand": p2["I2_over_3_integrand"],
        "H0": p2["H0"],
        "h0": p2["h0"],
    }
    return ObstructionReport(p1["I11"], p1["I12"], p1["I1"], p2["I21"], p2["I2"], total, inter, nonzero, table)


def total_with_derived_source(params: GlobalParams) -> RatFn:
    """``I`` when ``f_ttt`` solves the re-derived source equation instead of
    the closed-form one."""
    require_m2(params)
    return _i1_parts(params, "derived")["I1"] + _i2_parts(params)["I2"]


# ---------------------------------------------------------------------------
# reduction to h₀ and the second-order criterion


@dataclass(frozen=True)
class ReductionChecklist:
    coefficient: RatFn  # ⨍⟨Φ_st(u,v), ug⟩ = coefficient · ⨍u²v
    balanced_vanishes: bool | None  # ⨍u²v = 0 for all diagonal traceless v
    trusted: tuple[str, ...]


def reduction_to_h0(params: GlobalParams) -> ReductionChecklist:
    """Check the computable legs of the reduction to ``I(h₀)``.

    The mixed conformal variation pairs with ``ug`` to a multiple of
    ``⨍u²v``, which vanishes for the balanced ``u``.  Gauge invariance of the
    obstruction under diffeomorphisms is recorded as trusted.
    """
    expr, eqs = phi_st_conformal(params, "u", "v")
    avg = formal_average("u", trace_two(expr, params.n_fn), eqs)
    if set(avg) - {("u", "u", "v")}:
        raise AssertionError(f"unexpected triple integrals {sorted(avg)}")
    coeff = avg.get(("u", "u", "v"), RatFn())
    balanced = None
    if not params.symbolic:
        u = traceless_pattern([1] * params.m + [-1] * params.m)
        balanced = len(set(criterion_vector(u))) == 1
    return ReductionChecklist(coeff, balanced, ("gauge terms drop out of the obstruction (diffeomorphism invariance)",))


def diagonal_criterion_slope(slots: int) -> Fraction:
    """``δ`` in ``⨍u² s_k = δ λ_k² + const`` for traceless diagonal ``u``.

    Expanding ``u² s_k`` in sphere moments gives
    ``δ = M₃ - 3M₂₁ + 2M₁₁₁``; it is positive, so ``⨍u²w`` vanishes for all
    traceless ``w`` iff all ``|λ_k|`` agree.
    """
    k = slots
    m3 = sphere_moment([3] + [0] * (k - 1))
    m21 = sphere_moment([2, 1] + [0] * (k - 2))
    m111 = sphere_moment([1, 1, 1] + [0] * (k - 3)) if k >= 3 else Fraction(0)
    return m3 - 3 * m21 + 2 * m111


@dataclass(frozen=True)
class SecondOrderVerdict:
    N: int
    obstructed_patterns: int
    surviving_patterns: tuple  # sign patterns with ⨍u²w = 0 for all w
    slope: Fraction
    all_obstructed: bool


def second_order_criterion(N: int) -> SecondOrderVerdict:
    """Exhaustive search over sign patterns on ``CP^N`` (``N+1`` slots).

    Patterns are taken up to a global sign and the constant patterns are
    skipped.  A pattern survives when its criterion vector is constant.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    k = N + 1
    surviving = []
    obstructed = 0
    for eps in product((1, -1), repeat=k - 1):
        eps = (1,) + eps
        if len(set(eps)) == 1:
            continue
        c = criterion_vector(traceless_pattern(eps))
        if len(set(c)) == 1:
            surviving.append(eps)
        else:
            obstructed += 1
    return SecondOrderVerdict(N, obstructed, tuple(surviving), diagonal_criterion_slope(k), not surviving)


# ---------------------------------------------------------------------------
# Monte Carlo cross-check


def mc_i12(m: int, samples: int, seed: int) -> tuple[MCEstimate, float]:
    """Average the ``I₁₂`` integrand over uniform samples, evaluated from
    the pointwise ``u`` and ``|∇u|²`` (so the ``|∇u|²`` identity is not
    assumed).  Returns the estimate and the exact value (``λ = 1``)."""
    params = GlobalParams(m=m)
    n = params.n_fn
    f_tt = phi_ttt(params).scalars.f_tt
    df = f_tt.derivative()
    # u·Tr(rest) with ⟨∇u,∇f_tt⟩ = f_tt'(u)|∇u|²; rest = Φ_ttt + ∇²f_ttt
    c_grad = float(3 - 3 * n / 2)
    c_du = float(6 * (n - 2))
    c_u2h = float(3 * (n - 2))
    c_g = float(n)
    c_u3 = -3.0
    c_ugu = float(-3 * (n - 6) / 2)

    def integrand(W):
        u = u_batch(W, m)
        g2 = grad_sq_batch(W, m)
        fp = df.evaluate(u)
        tr = c_grad * fp * g2 + c_g * (c_u3 * u**3 + c_ugu * u * g2) + c_du * u * g2 - c_u2h * u**3
        return u * tr

    exact = float(average_l4(i12_integrand(params), params))
    return mc_integrate(integrand, 2 * m, samples, seed), exact
