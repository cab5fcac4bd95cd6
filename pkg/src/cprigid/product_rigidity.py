"""Second-order obstruction on ``CP^{2m} × M₂``.

``M₂`` is never realized: it enters only through its dimension ``n₂`` and the
spectral assumption flag.  Everything else lives on the ``CP^{2m}`` factor:

* the mixed second variation of ``Φ`` along ``u g`` and ``v g₁`` is derived
  from the first-order conformal table (validated against the series
  expansion) by differentiating the first variation along a second
  direction;
* the six integral coefficients are formal averages against a third
  eigenfunction ``w``;
* the two quadratic forms are recombined into the squares ``(xu+v)²`` and
  ``(yu+v)²`` with ``x, y`` the roots of ``x² - x - λ``, exactly in the
  quadratic extension and in floating point;
* the Einstein commutation identities for ``L = Δ + 2Rm`` are checked by
  finite differences on the chart.

Coefficients are :class:`RatFn` in ``m`` (symbolic) or constants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .chart_geometry import ChartPoint, metric_at, real_metric_at, rm_action, to_real
from .eigenfunction import criterion_vector, grad_u_real, hess_u_at, traceless_pattern, u_at
from .exact import RatFn
from .finite_diff import Stencil, covariant_derivative, fd_divergence, fd_rough_laplacian
from .obstruction import sign_for_all_m_ge
from .scalar_algebra import GlobalParams
from .variational import (
    CONFORMAL_TABLE,
    Atom,
    AuxEq,
    QuadScalar,
    Scal,
    Ten,
    TensorExpr,
    formal_average,
    phi_st_conformal_dim,
    trace_two,
)

__all__ = [
    "ProductConfig",
    "CrossVariation",
    "cross_phi2_product",
    "mixed_second_variation",
    "split_metric",
    "ObstructionCoefficients",
    "obstruction_coefficients",
    "QuadExt",
    "QuadForm",
    "ProductObstruction",
    "product_obstruction",
    "RootIdentityReport",
    "root_identity_check",
    "ConclusionVerdict",
    "conclusion_pipeline",
    "odd_slot_obstruction",
    "CommutationResiduals",
    "einstein_commutation_check",
    "metric_field",
    "u2g_field",
    "hess_u_field",
    "du_form",
]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ProductConfig:
    """``CP^{2m} × M₂`` with ``n₁ = 4m``, ``n = n₁ + n₂``.

    ``m`` is an integer or ``"sym"``.  ``n₂ = 0`` is accepted as the
    degenerate single-factor case; the root algebra rejects it.
    """

    m: int | str
    n2: int
    dagger_assumed: bool = True

    def __post_init__(self):
        GlobalParams(m=self.m)  # validates m
        if isinstance(self.n2, bool) or not isinstance(self.n2, int) or self.n2 < 0:
            raise ValueError(f"n2 must be a non-negative integer, got {self.n2!r}")

    @property
    def m_fn(self) -> RatFn:
        return RatFn.symbol() if self.m == "sym" else RatFn.const(self.m)

    @property
    def n1(self) -> RatFn:
        return 4 * self.m_fn

    @property
    def n(self) -> RatFn:
        return self.n1 + self.n2

    @property
    def lam(self) -> RatFn:
        """``λ = (n - 4m) / (4(2m - 1))``."""
        return (self.n - 4 * self.m_fn) / (4 * (2 * self.m_fn - 1))


# ---------------------------------------------------------------------------
# first-order conformal coefficients in a given dimension


@lru_cache(maxsize=4096)
def _tcoef(q: str, ten: Ten, scal: Scal, upow: int, dim: RatFn) -> RatFn:
    # RatFn is immutable and hashable; the same entries recur for every (m, n2)
    return CONFORMAL_TABLE[(q, 1)].terms.get((ten, scal, upow), RatFn()).compose(dim)


def _lap_var(phi: str, psi: str, c: RatFn, dim: RatFn) -> QuadScalar:
    """``Δ'(cψ)`` along ``φ g_B`` (``dim B = dim``), ``Δψ = -ψ``."""
    a = _tcoef("Lap", Ten.SCALAR, Scal.LAP_PSI, 1, dim)
    b = _tcoef("Lap", Ten.SCALAR, Scal.GRAD_U_PSI, 0, dim)
    return QuadScalar.prod(phi, psi, -a * c) + QuadScalar.grad(phi, psi, b * c)


def _hess_var(phi: str, psi: str, c: RatFn, dim: RatFn, metric: Atom) -> TensorExpr:
    """``(∇²(cψ))'`` along ``φ g_B``."""
    a = _tcoef("Hess", Ten.DU_DPSI, Scal.ONE, 0, dim)
    b = _tcoef("Hess", Ten.G, Scal.GRAD_U_PSI, 0, dim)
    return TensorExpr.of(
        (QuadScalar.one(a * c), Atom.DU_DV, (phi, psi)),
        (QuadScalar.grad(phi, psi, b * c), metric),
    )


def _ricci_var_product(u: str, v: str, dim: RatFn, metric: Atom) -> TensorExpr:
    """``Rc'(uv g_B)`` with ``∇²(uv) = u∇²v + v∇²u + du⊗dv + dv⊗du`` and
    ``Δ(uv) = -2uv + 2⟨∇u,∇v⟩``."""
    a = _tcoef("Rc", Ten.HESS_U, Scal.ONE, 0, dim)
    b = _tcoef("Rc", Ten.G, Scal.LAP_U, 0, dim)
    return TensorExpr.of(
        (QuadScalar.one(a), Atom.UHV_VHU, (u, v)),
        (QuadScalar.one(a), Atom.DU_DV, (u, v)),
        (QuadScalar.prod(u, v, -2 * b) + QuadScalar.grad(u, v, 2 * b), metric),
    )


def _scalar_var(phi_terms: QuadScalar, lap_terms: QuadScalar, dim: RatFn) -> QuadScalar:
    """``R'(φ g_B) = -φ R_B - (dim-1) Δφ`` with ``R_B = dim/2``; the caller
    passes ``φ`` and ``Δφ`` as formal scalars."""
    a = _tcoef("R", Ten.SCALAR, Scal.R, 1, dim)
    b = _tcoef("R", Ten.SCALAR, Scal.LAP_U, 0, dim)
    return phi_terms * (a * dim / 2) + lap_terms * b


def _first_f(dim: RatFn) -> RatFn:
    """``f' = c φ`` for ``φ`` an eigenfunction: ``(2Δ + 1) f' = -R'``."""
    r = _scalar_var(QuadScalar.one(1), QuadScalar.one(-1), dim).coeff("one")
    return -r / (2 * (-1) + 1)


# ---------------------------------------------------------------------------
# mixed second variation


@dataclass
class CrossVariation:
    """Mixed second variation of ``Φ`` along ``u g`` and ``v g_B``."""

    phi_st: TensorExpr
    rc_st: TensorExpr
    r_st: QuadScalar
    f_st: AuxEq
    f_t: RatFn  # f_t = f_t·u
    f_s: RatFn
    trace_g: QuadScalar
    trace_g1: QuadScalar | None = None
    expected: dict = field(default_factory=dict)

    def matches(self) -> dict[str, bool]:
        got = {"phi_st": split_metric(self.phi_st), "f_st": self.f_st, "trace_g": self.trace_g, "trace_g1": self.trace_g1}
        return {k: got[k] == v for k, v in self.expected.items()}


def split_metric(expr: TensorExpr) -> TensorExpr:
    """Rewrite ``g`` as ``g₁ + g₂``."""
    items = []
    for (atom, tag), c in expr.terms.items():
        if atom is Atom.G:
            items += [(c, Atom.G1), (c, Atom.G2)]
        else:
            items.append((c, atom) if tag is None else (c, atom, tag))
    return TensorExpr.of(*items, aux=expr.aux)


def mixed_second_variation(n, k, u: str = "u", v: str = "v", aux: str = "f_st", factor: bool = True) -> CrossVariation:
    """``Φ_st`` for ``g + t u g + s v g_B`` on an Einstein product with
    constant ½, total dimension ``n`` and ``dim B = k``.

    ``factor=True`` takes ``g_B = g₁`` (the ``CP`` factor); ``factor=False``
    takes ``g_B = g`` with ``k = n``.  The path is reparametrized as
    ``(1+tu)(g + s v g_B)`` minus the ``ts`` correction ``Rc'(uv g_B)``, and
    the first ``t``-variation is differentiated in ``s``.
    """
    n, k = RatFn.coerce(n), RatFn.coerce(k)
    B = Atom.G1 if factor else Atom.G
    one = QuadScalar.one

    # d/ds of Rc_t(g_s) = a ∇²_{g_s} u + b (Δ_{g_s} u) g_s
    a = _tcoef("Rc", Ten.HESS_U, Scal.ONE, 0, n)
    b = _tcoef("Rc", Ten.G, Scal.LAP_U, 0, n)
    rc_tilde = (
        _hess_var(v, u, RatFn.const(1), k, B).scale(a)
        + TensorExpr.of((_lap_var(v, u, RatFn.const(1), k) * b, Atom.G))
        + TensorExpr.of((QuadScalar.prod(u, v, -b), B))  # (Δu) v g_B with Δu = -u
    )
    rc_st = rc_tilde - _ricci_var_product(u, v, k, B)

    # d/ds of R_t(g_s) = c u R_{g_s} + d Δ_{g_s} u
    c = _tcoef("R", Ten.SCALAR, Scal.R, 1, n)
    d = _tcoef("R", Ten.SCALAR, Scal.LAP_U, 0, n)
    r_s_of_v = _scalar_var(QuadScalar.prod(u, v), QuadScalar.prod(u, v, -1), k)  # u·R'(v g_B)
    r_tilde = r_s_of_v * c + _lap_var(v, u, RatFn.const(1), k) * d
    lap_uv = QuadScalar.prod(u, v, -2) + QuadScalar.grad(u, v, 2)
    r_st = r_tilde - _scalar_var(QuadScalar.prod(u, v), lap_uv, k)

    # 2Δf_st + 2Δ_t f_s + 2Δ_s f_t - 2⟨∇f_s,∇f_t⟩ + R_st + f_st = 0
    f_t, f_s = _first_f(n), _first_f(k)
    src = (
        _lap_var(u, v, f_s, n) * 2
        + _lap_var(v, u, f_t, k) * 2
        - QuadScalar.grad(u, v, 2 * f_s * f_t)
        + r_st
    )
    f_eq = AuxEq(RatFn.const(Fraction(1, 2)), src * Fraction(-1, 2))

    hess_f = (
        TensorExpr.of((one(1), Atom.HESS_AUX, aux))
        + _hess_var(u, v, f_s, n, Atom.G)
        + _hess_var(v, u, f_t, k, B)
    )
    phi = -rc_st - hess_f
    return CrossVariation(phi, rc_st, r_st, f_eq, f_t, f_s, trace_two(phi, n, {Atom.G1: k, Atom.G2: n - k}))


def _closed_form_cross(cfg: ProductConfig) -> dict:
    """The closed forms for ``Φ_st(ug, vg₁)`` and its two traces."""
    n, n1 = cfg.n, cfg.n1
    one, prod, grad = QuadScalar.one, QuadScalar.prod, QuadScalar.grad
    phi = TensorExpr.of(
        (one(-1), Atom.HESS_AUX, "f_st"),
        (one(-(n1 - 2) / 4), Atom.DU_DV, ("u", "v")),
        (grad("u", "v", -1), Atom.G1),
        (prod("u", "v", Fraction(1, 2)), Atom.G),
        (prod("u", "v", Fraction(1, 2)), Atom.G1),
        (one(-(n1 - 2) / 2), Atom.UHV_VHU, ("u", "v")),
    )
    f_st = AuxEq(RatFn.const(Fraction(1, 2)), prod("u", "v", n1 / 2) - grad("u", "v", (3 * n1 - 2) / 4))
    lap = QuadScalar.lap("f_st", -1)
    return {
        "phi_st": split_metric(phi),
        "f_st": f_st,
        "trace_g": lap + grad("u", "v", (2 - 3 * n1) / 2) + prod("u", "v", (n + 3 * n1 - 4) / 2),
        "trace_g1": lap + grad("u", "v", (2 - 3 * n1) / 2) + prod("u", "v", 2 * (n1 - 1)),
    }


def _g1_trace(expr: TensorExpr, n1) -> QuadScalar:
    return trace_two(expr, n1, {Atom.G1: n1, Atom.G2: 0})


def cross_phi2_product(cfg: ProductConfig) -> CrossVariation:
    """``Φ^{(2)}(ug, vg₁)`` with its ``g``- and ``g₁``-traces, derived and
    compared with the closed forms (see :meth:`CrossVariation.matches`)."""
    res = mixed_second_variation(cfg.n, cfg.n1)
    res.trace_g1 = _g1_trace(res.phi_st, cfg.n1)
    res.expected = _closed_form_cross(cfg)
    return res


# ---------------------------------------------------------------------------
# integral coefficients


@dataclass(frozen=True)
class ObstructionCoefficients:
    """Coefficients of ``(⨍u²w, ⨍v²w, ⨍uvw)`` in ``⨍⟨Φ^{(2)}(h,h), wg⟩``
    (``g_trace``) and ``⨍⟨Φ^{(2)}(h,h), wg₁⟩`` (``g1_trace``) for
    ``h = ug + vg₁``, with the three parts of each."""

    parts_g: tuple[RatFn, RatFn, RatFn]
    parts_g1: tuple[RatFn, RatFn, RatFn]
    expected_g: tuple[RatFn, RatFn, RatFn]
    expected_g1: tuple[RatFn, RatFn, RatFn]
    pure_conformal_ok: bool  # Φ_st(ug, ug') from the mixed route equals the direct formula

    @property
    def g_trace(self) -> tuple[RatFn, RatFn, RatFn]:
        return self.parts_g

    @property
    def g1_trace(self) -> tuple[RatFn, RatFn, RatFn]:
        return self.parts_g1

    def matches(self) -> bool:
        return self.parts_g == self.expected_g and self.parts_g1 == self.expected_g1 and self.pure_conformal_ok


def _avg(trace: QuadScalar, eqs: dict, key: tuple) -> RatFn:
    out = formal_average("w", trace, eqs)
    extra = set(out) - {key}
    if extra:
        raise ArithmeticError(f"unexpected triple integrals {sorted(extra)}")
    return out.get(key, RatFn())


def obstruction_coefficients(cfg: ProductConfig) -> ObstructionCoefficients:
    """The six coefficients, each part computed from a second variation.

    ``I₁``: ``Φ^{(2)}(ug,ug)`` in dimension ``n``; ``I₂``: ``Φ^{(2)}(vg₁,vg₁)``
    lives on the factor (dimension ``n₁``) and is tangent to it, so both
    traces agree; ``I₃``: twice the cross term.
    """
    n, n1, m = cfg.n, cfg.n1, cfg.m_fn
    uu = ("u", "u", "w")
    vv = ("v", "v", "w")
    uv = ("u", "v", "w")

    pure = mixed_second_variation(n, n, "u", "u2", aux="f_1", factor=False)
    direct, eq_direct = phi_st_conformal_dim(n, "u", "u2", aux="f_1")
    pure_ok = pure.phi_st == direct and pure.f_st == eq_direct["f_1"]
    # rename the second copy to u
    phi1, eq1 = phi_st_conformal_dim(n, "u", "u", aux="f_1")
    eqs1 = {"f_1": AuxEq(eq1["f_1"].c, eq1["f_1"].rhs)}
    i1 = _avg(trace_two(phi1, n), eqs1, uu)
    i1p = _avg(trace_two(phi1, n, {Atom.G: n1}), eqs1, uu)

    phi2, eq2 = phi_st_conformal_dim(n1, "v", "v", aux="f_2")
    i2 = _avg(trace_two(phi2, n1), eq2, vv)

    cross = cross_phi2_product(cfg)
    eqs3 = {"f_st": cross.f_st}
    i3 = 2 * _avg(cross.trace_g, eqs3, uv)
    i3p = 2 * _avg(cross.trace_g1, eqs3, uv)

    expected_g = (n - 2, 2 * (2 * m - 1), n + 4 * m - 4)
    expected_g1 = ((4 * m + n - 4) / 2, 2 * (2 * m - 1), 4 * (2 * m - 1))
    return ObstructionCoefficients((i1, i2, i3), (i1p, i2, i3p), expected_g, expected_g1, pure_ok)


# ---------------------------------------------------------------------------
# quadratic extension and quadratic forms


class QuadExt:
    """``a + b x`` in ``F[x]/(x² - x - d)`` with ``F`` the field of ``d``
    (Fraction or RatFn).  The conjugate root is ``y = 1 - x``."""

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b, d):
        self.a, self.b, self.d = RatFn.coerce(a), RatFn.coerce(b), RatFn.coerce(d)

    @classmethod
    def x(cls, d) -> "QuadExt":
        return cls(0, 1, d)

    @classmethod
    def y(cls, d) -> "QuadExt":
        return cls(1, -1, d)

    def _lift(self, o) -> "QuadExt":
        if isinstance(o, QuadExt):
            if o.d != self.d:
                raise ValueError("elements of different extensions")
            return o
        return QuadExt(o, 0, self.d)

    def __add__(self, o):
        o = self._lift(o)
        return QuadExt(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadExt(-self.a, -self.b, self.d)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        o = self._lift(o)
        bd = self.b * o.b
        return QuadExt(self.a * o.a + bd * self.d, self.a * o.b + self.b * o.a + bd, self.d)

    __rmul__ = __mul__

    def conjugate(self) -> "QuadExt":
        """``x ↦ y = 1 - x``."""
        return QuadExt(self.a + self.b, -self.b, self.d)

    def norm(self) -> RatFn:
        """``(a+bx)(a+by) = a² + ab - b²d``."""
        return self.a * self.a + self.a * self.b - self.b * self.b * self.d

    def inverse(self) -> "QuadExt":
        nm = self.norm()
        if nm.is_zero():
            raise ZeroDivisionError("zero divisor in the quadratic extension")
        c = self.conjugate()
        return QuadExt(c.a / nm, c.b / nm, self.d)

    def __truediv__(self, o):
        return self * self._lift(o).inverse()

    def __rtruediv__(self, o):
        return self._lift(o) * self.inverse()

    def is_zero(self) -> bool:
        return self.a.is_zero() and self.b.is_zero()

    def __eq__(self, o):
        try:
            o = self._lift(o)
        except ValueError:
            return False
        return self.a == o.a and self.b == o.b

    def __hash__(self):
        return hash((self.a, self.b, self.d))

    def to_float(self, which: str = "x", m0: int | None = None) -> float:
        """Value at the root ``x = (1+√(1+4d))/2`` (or ``y`` for ``which="y"``)."""
        ev = (lambda r: float(r.eval(m0))) if m0 is not None else float
        d = ev(self.d)
        s = math.sqrt(1 + 4 * d)
        root = (1 + s) / 2 if which == "x" else (1 - s) / 2
        return ev(self.a) + ev(self.b) * root

    def __repr__(self):
        return f"QuadExt({self.a.canonical_str()} + ({self.b.canonical_str()})x)"


@dataclass(frozen=True)
class QuadForm:
    """``uu·u² + uv·uv + vv·v²`` with coefficients in a common ring."""

    uu: object
    uv: object
    vv: object

    def __add__(self, o: "QuadForm") -> "QuadForm":
        return QuadForm(self.uu + o.uu, self.uv + o.uv, self.vv + o.vv)

    def __sub__(self, o: "QuadForm") -> "QuadForm":
        return QuadForm(self.uu - o.uu, self.uv - o.uv, self.vv - o.vv)

    def scale(self, s) -> "QuadForm":
        return QuadForm(self.uu * s, self.uv * s, self.vv * s)

    @classmethod
    def square(cls, a, b) -> "QuadForm":
        """``(a u + b v)²``."""
        return cls(a * a, 2 * a * b, b * b)

    def lift(self, d) -> "QuadForm":
        return QuadForm(*(QuadExt(c, 0, d) if not isinstance(c, QuadExt) else c for c in (self.uu, self.uv, self.vv)))

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in (self.uu, self.uv, self.vv))


@dataclass(frozen=True)
class ProductObstruction:
    psi1: QuadForm
    psi2: QuadForm
    lam: RatFn
    x: QuadExt
    y: QuadExt
    coeff_tables: ObstructionCoefficients

    @property
    def psi_in_lambda(self) -> bool:
        """``ψ₁ = (1+2λ)u² + 2(1+λ)uv + v²`` and ``ψ₂ = (1+λ)u² + 2uv + v²``."""
        lam = self.lam
        return self.psi1 == QuadForm(1 + 2 * lam, 2 + 2 * lam, RatFn.const(1)) and self.psi2 == QuadForm(
            1 + lam, RatFn.const(2), RatFn.const(1)
        )


def product_obstruction(cfg: ProductConfig) -> ProductObstruction:
    """``ψ₁, ψ₂`` from the two coefficient triples, normalized by ``2(2m-1)``."""
    co = obstruction_coefficients(cfg)
    s = 1 / (2 * (2 * cfg.m_fn - 1))
    u2, v2, uv = co.g_trace
    psi1 = QuadForm(u2 * s, uv * s, v2 * s)
    u2, v2, uv = co.g1_trace
    psi2 = QuadForm(u2 * s, uv * s, v2 * s)
    lam = cfg.lam
    return ProductObstruction(psi1, psi2, lam, QuadExt.x(lam), QuadExt.y(lam), co)


# ---------------------------------------------------------------------------
# root identities


@dataclass(frozen=True)
class RootIdentityReport:
    exact_ok: bool  # both squares recombine exactly in the extension
    vieta_ok: bool  # x + y = 1, xy = -λ
    float_residual: float | None  # None for symbolic m
    psi_in_lambda: bool
    combination_x: tuple[QuadExt, QuadExt]  # (α, β): (xu+v)² = αψ₁ + βψ₂
    combination_y: tuple[QuadExt, QuadExt]

    @property
    def ok(self) -> bool:
        return self.exact_ok and self.vieta_ok and self.psi_in_lambda and (self.float_residual is None or self.float_residual <= 1e-14)


def _combination(r: QuadExt, lam: RatFn) -> tuple[QuadExt, QuadExt]:
    """``(xu+v)² = -(y/λ)ψ₁ + (1 + y/λ)ψ₂`` and its conjugate, with ``r`` the
    other root."""
    c = r * (1 / lam)
    return -c, 1 + c


def _float_identity(po: ProductObstruction, m0: int | None) -> float:
    ev = (lambda r: float(r.eval(m0))) if m0 is not None else float
    lam = ev(po.lam)
    s = math.sqrt(1 + 4 * lam)
    worst = 0.0
    for r, other in (((1 + s) / 2, (1 - s) / 2), ((1 - s) / 2, (1 + s) / 2)):
        alpha, beta = -other / lam, 1 + other / lam
        lhs = (r * r, 2 * r, 1.0)
        p1 = (ev(po.psi1.uu), ev(po.psi1.uv), ev(po.psi1.vv))
        p2 = (ev(po.psi2.uu), ev(po.psi2.uv), ev(po.psi2.vv))
        # α, β grow like 1/λ, so rounding scales with the summed terms
        for a, c1, c2 in zip(lhs, p1, p2):
            size = max(1.0, abs(a), abs(alpha * c1) + abs(beta * c2))
            worst = max(worst, abs(a - (alpha * c1 + beta * c2)) / size)
    return worst


def root_identity_check(cfg: ProductConfig) -> RootIdentityReport:
    """Both square completions as polynomial identities in ``(u, v)``."""
    if cfg.n2 == 0:
        raise ValueError("λ = 0 (n2 = 0): the roots x, y coincide with 1, 0 and the recombination divides by λ")
    po = product_obstruction(cfg)
    lam, x, y = po.lam, po.x, po.y
    p1, p2 = po.psi1.lift(lam), po.psi2.lift(lam)
    ok = True
    combos = []
    for r, other in ((x, y), (y, x)):
        alpha, beta = _combination(other, lam)
        combos.append((alpha, beta))
        diff = QuadForm.square(r, QuadExt(1, 0, lam)) - (p1.scale(alpha) + p2.scale(beta))
        ok = ok and diff.is_zero()
    vieta = (x + y) == 1 and (x * y) == QuadExt(-lam, 0, lam)
    resid = None if cfg.m == "sym" else _float_identity(po, None)
    return RootIdentityReport(ok, vieta, resid, po.psi_in_lambda, combos[0], combos[1])


# ---------------------------------------------------------------------------
# conclusion


def odd_slot_obstruction(slots: int) -> bool:
    """On ``CP^{slots-1}`` with ``slots`` odd, no nonzero eigenfunction ``φ``
    has ``⨍φ²w = 0`` for every ``w``.

    After a unitary change ``φ`` is diagonal with traceless real weights; the
    criterion vanishes iff all weights have equal modulus, which with an odd
    number of slots and zero sum forces all weights to vanish.  For small
    slot counts the sign patterns are also checked exhaustively.
    """
    if slots % 2 == 0:
        return False
    if slots <= 9:
        from itertools import product

        for eps in product((1, -1), repeat=slots - 1):
            eps = (1,) + eps
            if len(set(eps)) == 1:
                continue
            if len(set(criterion_vector(traceless_pattern(eps)))) == 1:
                return False
    return True


@dataclass(frozen=True)
class ConclusionVerdict:
    squares_vanish: bool  # ⨍(xu+v)²w = ⨍(yu+v)²w = 0 for all w
    factor_obstructed: bool | None  # None for symbolic m: argument only
    determinant_norm: RatFn  # N(x - y) = -(1 + 4λ)
    u_zero: bool
    v_zero: bool


def conclusion_pipeline(cfg: ProductConfig) -> ConclusionVerdict:
    """From ``⨍ψ₁w = ⨍ψ₂w = 0`` to ``u = v = 0``.

    The square completions make ``xu + v`` and ``yu + v`` eigenfunctions with
    vanishing second-order criterion, hence zero on ``CP^{2m}``; the linear
    system has determinant ``x - y`` whose norm is nonzero for ``λ > 0``.
    """
    rep = root_identity_check(cfg)
    if cfg.m == "sym":
        factor = None
        obstructed = True  # odd slot count 2m+1 for every m
    else:
        factor = odd_slot_obstruction(2 * cfg.m + 1)
        obstructed = factor
    lam = cfg.lam
    det = QuadExt.x(lam) - QuadExt.y(lam)
    nm = det.norm()
    # -(1+4λ) < 0 for every m ≥ 1: exact sign proof in the symbolic case
    invertible = sign_for_all_m_ge(nm, 1) == -1 if cfg.m == "sym" else nm.constant_value() != 0
    forced = rep.ok and obstructed
    return ConclusionVerdict(rep.ok, factor, nm, forced and invertible, forced and invertible)


# ---------------------------------------------------------------------------
# Einstein commutation identities by finite differences

Field = Callable[[np.ndarray], np.ndarray]


def _point(x: np.ndarray, n_plus: int) -> ChartPoint:
    return ChartPoint.from_real(x, n_plus)


def metric_field(n_plus: int = 1) -> Field:
    return lambda x: real_metric_at(x)


def u2g_field(n_plus: int, lam: float = 1.0) -> Field:
    """``u² g``."""

    def f(x):
        p = _point(x, n_plus)
        return float(u_at(p, lam)) ** 2 * metric_at(p).g_real

    return f


def hess_u_field(n_plus: int, lam: float = 1.0) -> Field:
    """``∇²u`` (Hermitian, since ``u`` is the real part of a Kähler potential
    combination)."""

    def f(x):
        H = hess_u_at(_point(x, n_plus), lam)
        return to_real(H.herm, H.hol)

    return f


def du_form(n_plus: int, lam: float = 1.0) -> Field:
    """The 1-form ``du`` in real components."""
    return lambda x: grad_u_real(_point(x, n_plus), lam)


@dataclass(frozen=True)
class CommutationResiduals:
    divergence: float  # |δ(Lh) - (Δ + ½)δh|
    dstar: float  # |L(δ*α) - δ*((Δ + ½)α)|
    trace: float  # |Tr(Lh) - (Δ + 1) Tr h|
    scale: float  # max magnitude of the compared terms

    def max(self) -> float:
        return max(self.divergence, self.dstar, self.trace)


def _L(h: Field, n_plus: int, st: Stencil) -> Field:
    def f(x):
        return fd_rough_laplacian(h, x, st) + 2 * rm_action(metric_at(_point(x, n_plus)), np.asarray(h(x)))

    return f


def _div(h: Field, st: Stencil) -> Field:
    return lambda x: fd_divergence(h, x, st)


def _lap(f: Field, st: Stencil) -> Field:
    return lambda x: fd_rough_laplacian(f, x, st)


def _dstar(a: Field, st: Stencil) -> Field:
    def f(x):
        D = covariant_derivative(a, x, st)
        return 0.5 * (D + D.T)

    return f


def _trace(h: Field) -> Field:
    return lambda x: float(np.einsum("ab,ab->", np.linalg.inv(real_metric_at(x)), h(x)))


def einstein_commutation_check(
    p: ChartPoint, h: Field, alpha: Field, st: Stencil = Stencil(1e-2, True), einstein: float = 0.5
) -> CommutationResiduals:
    """Residuals of ``δL(h) = (Δ+λ)δh``, ``L(δ*α) = δ*((Δ+λ)α)`` and
    ``Tr(Lh) = (Δ+2λ)Tr h`` at ``p`` with ``λ`` the Einstein constant."""
    x = p.real
    n_plus = p.n_plus
    Lh = _L(h, n_plus, st)
    dh = _div(h, st)
    lhs1, rhs1 = _div(Lh, st)(x), _lap(dh, st)(x) + einstein * dh(x)

    def shifted(y):
        return _lap(alpha, st)(y) + einstein * np.asarray(alpha(y))

    lhs2, rhs2 = _L(_dstar(alpha, st), n_plus, st)(x), _dstar(shifted, st)(x)
    trh = _trace(h)
    lhs3 = _trace(Lh)(x)
    rhs3 = _lap(trh, st)(x) + 2 * einstein * trh(x)
    scale = max(np.max(np.abs(v)) for v in (lhs1, rhs1, lhs2, rhs2, lhs3, rhs3))
    return CommutationResiduals(
        float(np.max(np.abs(lhs1 - rhs1))),
        float(np.max(np.abs(lhs2 - rhs2))),
        float(abs(lhs3 - rhs3)),
        float(scale),
    )
