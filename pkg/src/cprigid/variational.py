"""Variations of curvature and of the shrinker operator as exact expressions.

Three layers:

* a generic layer where ``u`` is any function and the dimension ``n`` is the
  symbol of :class:`RatFn`; conformal variations of ``Rc``, ``R``, ``∇²ψ``
  and ``Δψ`` are obtained by expanding ``g̃ = (1+tu)g`` as a power series in
  ``t`` and compared with a hand-entered table;
* :class:`TensorExpr`, a formal sum over a closed set of tensor atoms with
  :class:`UPoly` (one eigenfunction) or :class:`QuadScalar` (several
  eigenfunctions) coefficients;
* the second and third variations of ``Φ(g) = g/2 - Rc - ∇²f`` along the
  conformal direction and along a divergence-free direction ``h``.

Finite-difference oracles at the end compare the closed forms with the Ricci
tensor of the deformed metric computed from scratch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Callable, Mapping

import numpy as np

from .chart_geometry import ChartPoint, TensorValue, metric_at
from .deformation_basis import BasisCoeffs, divergence_of, hess_pairing, trace_table
from .eigenfunction import grad_u_at, hess_u_at, u_at
from .exact import RatFn
from .finite_diff import Stencil, StepUnderflowError, fd_ricci
from .scalar_algebra import (
    GlobalParams,
    UPoly,
    grad_inner,
    integrate,
    laplacian,
    solve_helmholtz,
)

__all__ = [
    "Quantity",
    "Scal",
    "Ten",
    "GenExpr",
    "conformal_series",
    "conformal_variation",
    "CONFORMAL_TABLE",
    "conformal_table_mismatches",
    "specialize",
    "Atom",
    "TensorExpr",
    "Triple",
    "reduce_single",
    "QuadScalar",
    "AuxEq",
    "formal_average",
    "VariationScalars",
    "PhiResult",
    "phi_tt",
    "phi_tt_derived",
    "phi_ttt",
    "phi_ttt_derived",
    "fttt_source",
    "fttt_source_derived",
    "ftt_source",
    "ftt_source_derived",
    "phi_st_conformal",
    "phi_st_conformal_dim",
    "trace_two",
    "polarize",
    "MixedResult",
    "phi_st_mixed",
    "VariationFDReport",
    "fd_validate_variation",
    "fd_ricci_derivative",
    "phi_prime_fd",
]

MAX_ORDER = {"Rc": 3, "R": 3, "Hess": 2, "Lap": 2}
N_SYM = RatFn.symbol()  # the dimension in the generic formulas


class Quantity(str, Enum):
    RC = "Rc"
    R = "R"
    HESS = "Hess"
    LAP = "Lap"


# ---------------------------------------------------------------------------
# generic conformal layer


class Scal(str, Enum):
    """Scalar factors in the generic formulas."""

    ONE = "1"
    LAP_U = "Δu"
    GRAD_U2 = "|∇u|²"
    R = "R"
    LAP_PSI = "Δψ"
    GRAD_U_PSI = "⟨∇u,∇ψ⟩"


class Ten(str, Enum):
    """Tensor factors in the generic formulas; ``SCALAR`` marks a function."""

    SCALAR = "scalar"
    G = "g"
    HESS_U = "∇²u"
    DU_DU = "du⊗du"
    DU_DPSI = "du⊗dψ+dψ⊗du"
    HESS_PSI = "∇²ψ"
    RC = "Rc"


GenKey = tuple  # (Ten, Scal, power of u)


class GenExpr:
    """``Σ c · u^k · scal · ten`` with coefficients rational in ``n``."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[GenKey, object] | None = None):
        clean = {}
        for k, c in (terms or {}).items():
            c = RatFn.coerce(c)
            if not c.is_zero():
                clean[k] = c
        self.terms = clean

    def __add__(self, o: "GenExpr") -> "GenExpr":
        out = dict(self.terms)
        for k, c in o.terms.items():
            out[k] = out.get(k, RatFn()) + c
        return GenExpr(out)

    def __neg__(self):
        return GenExpr({k: -c for k, c in self.terms.items()})

    def __sub__(self, o):
        return self + (-o)

    def scale(self, s) -> "GenExpr":
        return GenExpr({k: c * s for k, c in self.terms.items()})

    def __eq__(self, o):
        return isinstance(o, GenExpr) and self.terms == o.terms

    def __repr__(self):
        parts = [f"({c.canonical_str()})*u^{k}*{s.value}*{t.value}" for (t, s, k), c in sorted(self.terms.items(), key=str)]
        return "GenExpr(" + " + ".join(parts) + ")"


# A truncated series in t whose coefficients are polynomials in u:
# {t power: {u power: Fraction}}.
USeries = dict


def _smul(a: USeries, b: USeries, order: int) -> USeries:
    out: USeries = {}
    for ta, pa in a.items():
        for tb, pb in b.items():
            t = ta + tb
            if t > order:
                continue
            row = out.setdefault(t, {})
            for ua, ca in pa.items():
                for ub, cb in pb.items():
                    row[ua + ub] = row.get(ua + ub, Fraction(0)) + ca * cb
    return out


def _sadd(*series: tuple) -> USeries:
    """Linear combination of ``(coefficient, series)`` pairs."""
    out: USeries = {}
    for s, a in series:
        for t, p in a.items():
            row = out.setdefault(t, {})
            for k, c in p.items():
                row[k] = row.get(k, Fraction(0)) + Fraction(s) * c
    return out


def _a_series(order: int) -> USeries:
    """Coefficient of ``du`` in ``dφ``, ``φ = ½ log(1+tu)``."""
    return {k: {k - 1: Fraction((-1) ** (k - 1), 2)} for k in range(1, order + 1)}


def _b_series(order: int) -> USeries:
    """Coefficient of ``du⊗du`` in ``∇²φ``."""
    return {k: {k - 2: Fraction(-(k - 1) * (-1) ** (k - 2), 2)} for k in range(2, order + 1)}


def _e_series(order: int) -> USeries:
    """``e^{-2φ} = 1/(1+tu)``."""
    return {k: {k: Fraction((-1) ** k)} for k in range(order + 1)}


_ONE: USeries = {0: {0: Fraction(1)}}


def _attach(s: USeries, ten: Ten, scal: Scal, coeff, order: int) -> list[GenExpr]:
    """Series ``coeff · s(t,u) · scal · ten`` as a list over powers of ``t``."""
    coeff = RatFn.coerce(coeff)
    out = [GenExpr() for _ in range(order + 1)]
    for t, p in s.items():
        if t <= order:
            out[t] = out[t] + GenExpr({(ten, scal, k): coeff * c for k, c in p.items()})
    return out


def _ssum(*parts: list[GenExpr]) -> list[GenExpr]:
    out = [GenExpr() for _ in range(len(parts[0]))]
    for p in parts:
        out = [x + y for x, y in zip(out, p)]
    return out


def conformal_series(q: Quantity, order: int) -> list[GenExpr]:
    """Taylor coefficients ``[t^k]`` of ``q`` for ``g̃ = (1+tu)g = e^{2φ}g``.

    Standard conformal change formulas with ``dφ = a du`` and
    ``∇²φ = a∇²u + b du⊗du``:

        Rc̃ = Rc - (n-2)(∇²φ - dφ⊗dφ) - (Δφ + (n-2)|∇φ|²) g
        R̃  = e^{-2φ}(R - 2(n-1)Δφ - (n-2)(n-1)|∇φ|²)
        ∇̃²ψ = ∇²ψ - dφ⊗dψ - dψ⊗dφ + ⟨∇φ,∇ψ⟩ g
        Δ̃ψ = e^{-2φ}(Δψ + (n-2)⟨∇φ,∇ψ⟩)
    """
    n = N_SYM
    a, b, e = _a_series(order), _b_series(order), _e_series(order)
    a2 = _smul(a, a, order)
    q = Quantity(q)
    if q is Quantity.RC:
        return _ssum(
            _attach(_ONE, Ten.RC, Scal.ONE, 1, order),
            _attach(a, Ten.HESS_U, Scal.ONE, -(n - 2), order),
            _attach(_sadd((1, b), (-1, a2)), Ten.DU_DU, Scal.ONE, -(n - 2), order),
            _attach(a, Ten.G, Scal.LAP_U, -1, order),
            _attach(b, Ten.G, Scal.GRAD_U2, -1, order),
            _attach(a2, Ten.G, Scal.GRAD_U2, -(n - 2), order),
        )
    if q is Quantity.R:
        return _ssum(
            _attach(e, Ten.SCALAR, Scal.R, 1, order),
            _attach(_smul(e, a, order), Ten.SCALAR, Scal.LAP_U, -2 * (n - 1), order),
            _attach(_smul(e, b, order), Ten.SCALAR, Scal.GRAD_U2, -2 * (n - 1), order),
            _attach(_smul(e, a2, order), Ten.SCALAR, Scal.GRAD_U2, -(n - 2) * (n - 1), order),
        )
    if q is Quantity.HESS:
        return _ssum(
            _attach(_ONE, Ten.HESS_PSI, Scal.ONE, 1, order),
            _attach(a, Ten.DU_DPSI, Scal.ONE, -1, order),
            _attach(a, Ten.G, Scal.GRAD_U_PSI, 1, order),
        )
    return _ssum(
        _attach(e, Ten.SCALAR, Scal.LAP_PSI, 1, order),
        _attach(_smul(e, a, order), Ten.SCALAR, Scal.GRAD_U_PSI, n - 2, order),
    )


def conformal_variation(q: Quantity | str, order: int) -> GenExpr:
    """``∂_t^k q`` at ``t = 0``, i.e. ``k!`` times the Taylor coefficient."""
    q = Quantity(q)
    if not 1 <= order <= MAX_ORDER[q.value]:
        raise ValueError(f"order {order} unsupported for {q.value} (max {MAX_ORDER[q.value]})")
    return conformal_series(q, order)[order].scale(math.factorial(order))


def _tab(*rows) -> GenExpr:
    return GenExpr({(t, s, k): c for t, s, k, c in rows})


_n = N_SYM
CONFORMAL_TABLE: dict[tuple[str, int], GenExpr] = {
    ("Rc", 1): _tab((Ten.HESS_U, Scal.ONE, 0, -(_n - 2) / 2), (Ten.G, Scal.LAP_U, 0, Fraction(-1, 2))),
    # the trailing factor of the last bracket is the metric
    ("Rc", 2): _tab(
        (Ten.HESS_U, Scal.ONE, 1, _n - 2),
        (Ten.DU_DU, Scal.ONE, 0, 3 * (_n - 2) / 2),
        (Ten.G, Scal.LAP_U, 1, 1),
        (Ten.G, Scal.GRAD_U2, 0, -(_n - 4) / 2),
    ),
    ("Rc", 3): _tab(
        (Ten.HESS_U, Scal.ONE, 2, -3 * (_n - 2)),
        (Ten.DU_DU, Scal.ONE, 1, -9 * (_n - 2)),
        (Ten.G, Scal.LAP_U, 2, -3),
        (Ten.G, Scal.GRAD_U2, 1, 3 * (_n - 4)),
    ),
    ("R", 1): _tab((Ten.SCALAR, Scal.R, 1, -1), (Ten.SCALAR, Scal.LAP_U, 0, -(_n - 1))),
    ("R", 2): _tab(
        (Ten.SCALAR, Scal.R, 2, 2),
        (Ten.SCALAR, Scal.LAP_U, 1, 4 * (_n - 1)),
        (Ten.SCALAR, Scal.GRAD_U2, 0, -(_n - 1) * (_n - 6) / 2),
    ),
    ("R", 3): _tab(
        (Ten.SCALAR, Scal.R, 3, -6),
        (Ten.SCALAR, Scal.LAP_U, 2, -18 * (_n - 1)),
        (Ten.SCALAR, Scal.GRAD_U2, 1, 9 * (_n - 1) * (_n - 6) / 2),
    ),
    ("Hess", 1): _tab((Ten.DU_DPSI, Scal.ONE, 0, Fraction(-1, 2)), (Ten.G, Scal.GRAD_U_PSI, 0, Fraction(1, 2))),
    ("Hess", 2): _tab((Ten.DU_DPSI, Scal.ONE, 1, 1), (Ten.G, Scal.GRAD_U_PSI, 1, -1)),
    ("Lap", 1): _tab((Ten.SCALAR, Scal.LAP_PSI, 1, -1), (Ten.SCALAR, Scal.GRAD_U_PSI, 0, (_n - 2) / 2)),
    ("Lap", 2): _tab((Ten.SCALAR, Scal.LAP_PSI, 2, 2), (Ten.SCALAR, Scal.GRAD_U_PSI, 1, -2 * (_n - 2))),
}
del _n


def conformal_table_mismatches() -> list[tuple[str, int]]:
    """Entries of the hand table that differ from the series expansion."""
    return [key for key, expr in CONFORMAL_TABLE.items() if conformal_variation(key[0], key[1]) != expr]


# ---------------------------------------------------------------------------
# tensor expressions


class Atom(str, Enum):
    G = "g"
    G1 = "g1"
    G2 = "g2"
    DU_DU = "du⊗du"
    DU_DV = "du⊗dv+dv⊗du"
    DU_DPSI = "du⊗dψ+dψ⊗du"
    HESS_U = "∇²u"
    U_HESS_U = "u∇²u"
    U2_HESS_U = "u²∇²u"
    UHV_VHU = "u∇²v+v∇²u"
    HESS_AUX = "∇²f"
    H = "h"
    UH = "uh"
    RM_UH = "Rm(uh)"
    DSTAR_DELTA_UH = "δ*δ(uh)"
    HESS_UH = "∇²(uH)"
    C_H_DU = "C(h)·∇u"
    LAP_UH = "Δ(uh)"


# atoms that need a tag: the auxiliary scalar or the pair of functions
_TAGGED = {Atom.DU_DV, Atom.DU_DPSI, Atom.UHV_VHU, Atom.HESS_AUX}
H_ATOMS = (Atom.H, Atom.UH, Atom.RM_UH, Atom.DSTAR_DELTA_UH, Atom.HESS_UH, Atom.C_H_DU, Atom.LAP_UH)


def _zero_like(c):
    return type(c)()


@dataclass
class TensorExpr:
    """Formal sum ``Σ coeff · atom``.

    Keys are ``(Atom, tag)`` with ``tag`` the auxiliary scalar name for
    ``∇²f`` / ``du⊗dψ`` atoms, a sorted pair of function names for the
    two-function atoms, and ``None`` otherwise.  ``aux`` holds values of the
    auxiliary scalars when they are known as u-polynomials.
    """

    terms: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (atom, tag), c in self.terms.items():
            atom = Atom(atom)
            if (atom in _TAGGED) != (tag is not None):
                raise ValueError(f"atom {atom.value} tag mismatch: {tag!r}")
            if isinstance(tag, tuple):
                tag = tuple(sorted(tag))
            if not c.is_zero():
                key = (atom, tag)
                clean[key] = clean[key] + c if key in clean else c
        self.terms = {k: c for k, c in clean.items() if not c.is_zero()}

    @classmethod
    def of(cls, *items, aux=None) -> "TensorExpr":
        """Build from ``(coeff, atom)`` or ``(coeff, atom, tag)`` items."""
        terms: dict = {}
        for it in items:
            c, atom = it[0], Atom(it[1])
            tag = it[2] if len(it) > 2 else None
            if isinstance(tag, tuple):
                tag = tuple(sorted(tag))
            key = (atom, tag)
            terms[key] = terms[key] + c if key in terms else c
        return cls(terms, dict(aux or {}))

    def _merge_aux(self, o: "TensorExpr") -> dict:
        aux = dict(self.aux)
        for k, v in o.aux.items():
            if k in aux and aux[k] != v:
                raise ValueError(f"conflicting values for auxiliary scalar {k}")
            aux[k] = v
        return aux

    def __add__(self, o: "TensorExpr") -> "TensorExpr":
        terms = dict(self.terms)
        for k, c in o.terms.items():
            terms[k] = terms[k] + c if k in terms else c
        return TensorExpr(terms, self._merge_aux(o))

    def __neg__(self):
        return TensorExpr({k: -c for k, c in self.terms.items()}, dict(self.aux))

    def __sub__(self, o):
        return self + (-o)

    def scale(self, s) -> "TensorExpr":
        """Multiply every coefficient by ``s`` (a RatFn, or a coefficient of
        the same ring)."""
        return TensorExpr({k: c * s for k, c in self.terms.items()}, dict(self.aux))

    def coefficient(self, atom: Atom | str, tag=None):
        if isinstance(tag, tuple):
            tag = tuple(sorted(tag))
        return self.terms.get((Atom(atom), tag))

    def atoms(self) -> set[Atom]:
        return {a for a, _ in self.terms}

    def normalized(self) -> "TensorExpr":
        """Fold ``u∇²u`` and ``u²∇²u`` into ``∇²u`` (u-polynomial coefficients)."""
        out: dict = {}
        for (atom, tag), c in self.terms.items():
            if atom is Atom.U_HESS_U:
                atom, c = Atom.HESS_U, c * UPoly.u(1)
            elif atom is Atom.U2_HESS_U:
                atom, c = Atom.HESS_U, c * UPoly.u(2)
            key = (atom, tag)
            out[key] = out[key] + c if key in out else c
        return TensorExpr(out, dict(self.aux))

    def __eq__(self, o):
        if not isinstance(o, TensorExpr):
            return NotImplemented
        return self.normalized().terms == o.normalized().terms

    def __str__(self):
        parts = []
        for (atom, tag), c in self.terms.items():
            name = atom.value if tag is None else f"{atom.value}[{tag if isinstance(tag, str) else ','.join(tag)}]"
            parts.append(f"[{c}]·{name}")
        return " + ".join(parts) or "0"


# ---------------------------------------------------------------------------
# single eigenfunction: reduction to a·g + b·du⊗du + c·∇²u


@dataclass(frozen=True)
class Triple:
    """``a g + b du⊗du + c ∇²u`` with u-polynomial coefficients."""

    a: UPoly
    b: UPoly
    c: UPoly

    def __add__(self, o: "Triple") -> "Triple":
        return Triple(self.a + o.a, self.b + o.b, self.c + o.c)

    def __sub__(self, o: "Triple") -> "Triple":
        return Triple(self.a - o.a, self.b - o.b, self.c - o.c)

    def is_zero(self) -> bool:
        return self.a.is_zero() and self.b.is_zero() and self.c.is_zero()

    def trace(self, params: GlobalParams) -> UPoly:
        """``n a + b |∇u|² - c u``."""
        return self.a * params.n_fn + self.b * UPoly.grad_u_sq(params) - self.c * UPoly.u(1)

    def pair_hess(self, params: GlobalParams) -> UPoly:
        """``⟨·, ∇²u⟩`` using ``∇²u(∇u,∇u) = ½⟨∇|∇u|², ∇u⟩``."""
        m = params.m_fn
        gu = UPoly.grad_u_sq(params)
        hess2 = UPoly({(0, 1): (m - 1) / (4 * m * m), (2, 0): (m + 1) / (4 * m * m)})
        return -(self.a * UPoly.u(1)) + self.b * grad_inner(gu, UPoly.u(1), params) * Fraction(1, 2) + self.c * hess2

    def value(self, p: ChartPoint, lam: float = 1.0, m0: int | None = None) -> TensorValue:
        """Pointwise tensor at a numeric chart point."""
        md = metric_at(p)
        u = float(u_at(p, lam))
        du = grad_u_at(p, lam).astype(complex)
        U = hess_u_at(p, lam).herm.astype(complex)
        a, b, c = (x.evaluate(u, lam, m0) for x in (self.a, self.b, self.c))
        herm = a * md.G + b * np.outer(du, np.conj(du)) + c * U
        hol = b * np.outer(du, du)
        return TensorValue(herm, hol)


def reduce_single(expr: TensorExpr, params: GlobalParams) -> Triple:
    """Rewrite a one-eigenfunction expression as a :class:`Triple`.

    Auxiliary scalars must be u-polynomials in ``expr.aux``; then
    ``∇²ψ = ψ'' du⊗du + ψ' ∇²u`` and ``du⊗dψ + dψ⊗du = 2ψ' du⊗du``.
    """
    a = b = c = UPoly()
    for (atom, tag), k in expr.normalized().terms.items():
        if not isinstance(k, UPoly):
            raise TypeError("reduce_single needs u-polynomial coefficients")
        if atom is Atom.G:
            a = a + k
        elif atom is Atom.DU_DU:
            b = b + k
        elif atom is Atom.HESS_U:
            c = c + k
        elif atom in (Atom.HESS_AUX, Atom.DU_DPSI):
            if tag not in expr.aux:
                raise KeyError(f"auxiliary scalar {tag} has no value")
            psi = expr.aux[tag]
            d1 = psi.derivative()
            if atom is Atom.HESS_AUX:
                b = b + k * d1.derivative()
                c = c + k * d1
            else:
                b = b + k * d1 * 2
        else:
            raise ValueError(f"atom {atom.value} is not reducible on one eigenfunction")
    return Triple(a, b, c)


def specialize(expr: GenExpr, params: GlobalParams, psi: tuple[str, UPoly] | None = None):
    """Evaluate a generic formula on the eigenfunction ``u`` of the Einstein
    metric with ``Rc = g/2``: ``Δu = -u``, ``R = n/2``.

    Returns a :class:`UPoly` for scalar quantities and a :class:`TensorExpr`
    otherwise.  ``psi`` is ``(name, value)`` for the ``ψ`` slots.
    """
    n = params.n_fn
    gu = UPoly.grad_u_sq(params)
    scal = {
        Scal.ONE: UPoly.const(1),
        Scal.LAP_U: UPoly.u(1, -1),
        Scal.GRAD_U2: gu,
        Scal.R: UPoly.const(n / 2),
    }
    if psi is not None:
        name, val = psi
        scal[Scal.LAP_PSI] = laplacian(val, params)
        scal[Scal.GRAD_U_PSI] = grad_inner(UPoly.u(1), val, params)
    scalar_out = UPoly()
    items = []
    for (ten, s, k), c in expr.terms.items():
        if s not in scal:
            raise ValueError("formula involves ψ; pass psi=(name, value)")
        coeff = scal[s] * UPoly.u(k) * c.compose(n)
        if ten is Ten.SCALAR:
            scalar_out = scalar_out + coeff
        elif ten is Ten.G:
            items.append((coeff, Atom.G))
        elif ten is Ten.RC:
            items.append((coeff * Fraction(1, 2), Atom.G))
        elif ten is Ten.HESS_U:
            items.append((coeff, Atom.HESS_U))
        elif ten is Ten.DU_DU:
            items.append((coeff, Atom.DU_DU))
        elif ten is Ten.DU_DPSI:
            items.append((coeff, Atom.DU_DPSI, psi[0]))
        elif ten is Ten.HESS_PSI:
            items.append((coeff, Atom.HESS_AUX, psi[0]))
    if all(t is Ten.SCALAR for t, _, _ in expr.terms):
        return scalar_out
    aux = {psi[0]: psi[1]} if psi is not None else {}
    return TensorExpr.of(*items, aux=aux)


# ---------------------------------------------------------------------------
# several eigenfunctions: formal scalars


class QuadScalar:
    """Formal scalar built from eigenfunctions with eigenvalue 1.

    Keys: ``("one",)`` for the constant, ``("prod", x, y)`` for ``xy``,
    ``("grad", x, y)`` for ``⟨∇x,∇y⟩``, ``("aux", f)`` and ``("lap", f)``
    for an auxiliary function ``f`` and its Laplacian.  Coefficients are
    :class:`RatFn`.
    """

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple, object] | None = None):
        clean: dict = {}
        for k, c in (terms or {}).items():
            if k[0] in ("prod", "grad"):
                k = (k[0],) + tuple(sorted(k[1:]))
            elif k[0] not in ("aux", "lap", "one"):
                raise ValueError(f"unknown formal scalar {k}")
            c = RatFn.coerce(c)
            clean[k] = clean.get(k, RatFn()) + c
        self.terms = {k: c for k, c in sorted(clean.items()) if not c.is_zero()}

    @classmethod
    def one(cls, c=1):
        return cls({("one",): c})

    @classmethod
    def prod(cls, x: str, y: str, c=1):
        return cls({("prod", x, y): c})

    @classmethod
    def grad(cls, x: str, y: str, c=1):
        return cls({("grad", x, y): c})

    @classmethod
    def aux(cls, f: str, c=1):
        return cls({("aux", f): c})

    @classmethod
    def lap(cls, f: str, c=1):
        return cls({("lap", f): c})

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, o):
        if not isinstance(o, QuadScalar):
            return NotImplemented
        out = dict(self.terms)
        for k, c in o.terms.items():
            out[k] = out.get(k, RatFn()) + c
        return QuadScalar(out)

    def __neg__(self):
        return QuadScalar({k: -c for k, c in self.terms.items()})

    def __sub__(self, o):
        return self + (-o)

    def __mul__(self, s):
        s = RatFn.coerce(s)
        return QuadScalar({k: c * s for k, c in self.terms.items()})

    __rmul__ = __mul__

    def __eq__(self, o):
        return isinstance(o, QuadScalar) and self.terms == o.terms

    def __hash__(self):
        return hash(tuple(self.terms.items()))

    def coeff(self, *key) -> RatFn:
        if key[0] in ("prod", "grad"):
            key = (key[0],) + tuple(sorted(key[1:]))
        return self.terms.get(key, RatFn())

    def map_coeffs(self, f) -> "QuadScalar":
        return QuadScalar({k: f(c) for k, c in self.terms.items()})

    def __repr__(self):
        return "QuadScalar(" + " + ".join(f"({c.canonical_str()})*{k}" for k, c in self.terms.items()) + ")"


@dataclass(frozen=True)
class AuxEq:
    """``(Δ + c) f = rhs``."""

    c: RatFn
    rhs: QuadScalar


def formal_average(z: str, q: QuadScalar, eqs: Mapping[str, AuxEq]) -> dict[tuple, RatFn]:
    """``⨍ z·q`` as a combination of triple integrals ``⨍xyz``.

    Rules for eigenfunctions with eigenvalue 1:
    ``⨍z⟨∇x,∇y⟩ = ½⨍xyz`` (integrate ``zΔ(xy)`` by parts),
    ``⨍zΔf = -⨍zf`` and, if ``(Δ+c)f = R``, ``⨍zf = ⨍zR/(c-1)``.
    Keys of the result are sorted name triples.
    """
    out: dict[tuple, RatFn] = {}

    def add(key, c):
        key = tuple(sorted(key))
        out[key] = out.get(key, RatFn()) + c

    for k, c in q.terms.items():
        kind = k[0]
        if kind == "one":
            continue  # eigenfunctions have mean zero
        if kind == "prod":
            add((k[1], k[2], z), c)
        elif kind == "grad":
            add((k[1], k[2], z), c / 2)
        else:
            eq = eqs[k[1]]
            if eq.c == 1:
                raise ZeroDivisionError("Δ + 1 is not invertible on the eigenspace")
            scale = c / (eq.c - 1) * (-1 if kind == "lap" else 1)
            for key, v in formal_average(z, eq.rhs, eqs).items():
                add(key, v * scale)
    return {k: v for k, v in out.items() if not v.is_zero()}


# ---------------------------------------------------------------------------
# variations of Φ along the conformal direction


@dataclass(frozen=True)
class VariationScalars:
    f_t: UPoly
    f_tt: UPoly
    f_ttt: UPoly | None = None


@dataclass(frozen=True)
class PhiResult:
    expr: TensorExpr
    scalars: VariationScalars

    def triple(self, params: GlobalParams) -> Triple:
        return reduce_single(self.expr, params)


def _f_t(params: GlobalParams) -> UPoly:
    """``f_t = (n-2)u/2``."""
    return UPoly.u(1, (params.n_fn - 2) / 2)


def ftt_source(params: GlobalParams) -> UPoly:
    n = params.n_fn
    return UPoly.u(2, n / 2) - UPoly.grad_u_sq(params) * ((3 * n - 2) / 4)


def _conformal_term(q: str, k: int, params: GlobalParams, psi=None):
    return specialize(conformal_variation(q, k), params, psi)


def ftt_source_derived(params: GlobalParams) -> UPoly:
    """Source of ``f_tt`` from twice differentiating the Euler-Lagrange
    equation ``2Δf - |∇f|² + R + f - n = μ`` at a constant ``f``."""
    ft = _f_t(params)
    lap_t = _conformal_term("Lap", 1, params, ("f_t", ft))
    r_tt = _conformal_term("R", 2, params)
    return (lap_t * 4 - grad_inner(ft, ft, params) * 2 + r_tt) * Fraction(-1, 2)


def phi_tt(params: GlobalParams) -> PhiResult:
    """``Φ_tt = -∇²f_tt - (n-2)/2 du⊗du + (u² - |∇u|²)g - (n-2)u∇²u``."""
    n = params.n_fn
    f_tt = solve_helmholtz(Fraction(1, 2), ftt_source(params), params)
    expr = TensorExpr.of(
        (UPoly.const(-1), Atom.HESS_AUX, "f_tt"),
        (UPoly.const(-(n - 2) / 2), Atom.DU_DU),
        (UPoly.u(2) - UPoly.grad_u_sq(params), Atom.G),
        (UPoly.const(-(n - 2)), Atom.U_HESS_U),
        aux={"f_tt": f_tt},
    )
    return PhiResult(expr, VariationScalars(_f_t(params), f_tt))


def phi_tt_derived(params: GlobalParams) -> PhiResult:
    """``Φ_tt = -Rc_tt - ∇²f_tt - 2∇²_t f_t`` from the conformal formulas."""
    f_t = _f_t(params)
    f_tt = solve_helmholtz(Fraction(1, 2), ftt_source_derived(params), params)
    expr = (
        -_conformal_term("Rc", 2, params)
        - TensorExpr.of((UPoly.const(1), Atom.HESS_AUX, "f_tt"), aux={"f_tt": f_tt})
        - _conformal_term("Hess", 1, params, ("f_t", f_t)).scale(RatFn.const(2))
    )
    return PhiResult(expr, VariationScalars(f_t, f_tt))


def fttt_source(params: GlobalParams, f_tt: UPoly | None = None) -> UPoly:
    """Right-hand side of the closed-form ``f_ttt`` equation, including the
    ``(n-2)/2 ⨍u³`` term (which vanishes)."""
    n = params.n_fn
    if f_tt is None:
        f_tt = phi_tt(params).scalars.f_tt
    u = UPoly.u(1)
    gu = UPoly.grad_u_sq(params)
    avg_u3 = integrate(UPoly.u(3), params)
    return (
        u * laplacian(f_tt, params) * 3
        - grad_inner(f_tt, u, params) * (3 * (n - 2) / 2)
        - UPoly.u(3, 3 * (3 * n - 2) / 2)
        + u * gu * (9 * (3 * n - 2) / 4)
        + avg_u3 * ((n - 2) / 2)
    )


def fttt_source_derived(params: GlobalParams, f_tt: UPoly | None = None) -> UPoly:
    """``f_ttt`` source re-derived from the third derivative of the
    Euler-Lagrange equation, with ``μ_ttt = (n-2)⨍u³``."""
    n = params.n_fn
    if f_tt is None:
        f_tt = phi_tt(params).scalars.f_tt
    ft = _f_t(params)
    mu = integrate(UPoly.u(3), params) * (n - 2)
    rest = (
        _conformal_term("Lap", 1, params, ("f_tt", f_tt)) * 6
        + _conformal_term("Lap", 2, params, ("f_t", ft)) * 6
        + UPoly.u(1) * grad_inner(ft, ft, params) * 6
        - grad_inner(ft, f_tt, params) * 6
        + _conformal_term("R", 3, params)
        - mu
    )
    return rest * Fraction(-1, 2)


def _phi_ttt_expr(params: GlobalParams, f_tt: UPoly, f_ttt: UPoly) -> TensorExpr:
    n = params.n_fn
    u = UPoly.u(1)
    gu = UPoly.grad_u_sq(params)
    return TensorExpr.of(
        (UPoly.const(-1), Atom.HESS_AUX, "f_ttt"),
        (UPoly.const(Fraction(3, 2)), Atom.DU_DPSI, "f_tt"),
        (grad_inner(f_tt, u, params) * Fraction(-3, 2) - UPoly.u(3, 3) - u * gu * (3 * (n - 6) / 2), Atom.G),
        (UPoly.u(1, 6 * (n - 2)), Atom.DU_DU),
        (UPoly.const(3 * (n - 2)), Atom.U2_HESS_U),
        aux={"f_tt": f_tt, "f_ttt": f_ttt},
    )


def phi_ttt(params: GlobalParams, source: str = "closed") -> PhiResult:
    """``Φ_ttt`` with ``f_ttt`` solved from the closed-form source, or from the
    re-derived one when ``source="derived"``."""
    f_tt = phi_tt(params).scalars.f_tt
    if source == "closed":
        rhs = fttt_source(params, f_tt)
    elif source == "derived":
        rhs = fttt_source_derived(params, f_tt)
    else:
        raise ValueError(f"unknown source {source!r}")
    f_ttt = solve_helmholtz(Fraction(1, 2), rhs, params)
    return PhiResult(_phi_ttt_expr(params, f_tt, f_ttt), VariationScalars(_f_t(params), f_tt, f_ttt))


def phi_ttt_derived(params: GlobalParams) -> PhiResult:
    """``Φ_ttt = -Rc_ttt - ∇²f_ttt - 3∇²_t f_tt - 3∇²_tt f_t``; ``f_ttt`` is
    taken from the closed-form source so the tensor structure can be compared."""
    ref = phi_ttt(params)
    f_t, f_tt, f_ttt = ref.scalars.f_t, ref.scalars.f_tt, ref.scalars.f_ttt
    three = RatFn.const(3)
    expr = (
        -_conformal_term("Rc", 3, params)
        - TensorExpr.of((UPoly.const(1), Atom.HESS_AUX, "f_ttt"), aux={"f_ttt": f_ttt})
        - _conformal_term("Hess", 1, params, ("f_tt", f_tt)).scale(three)
        - _conformal_term("Hess", 2, params, ("f_t", f_t)).scale(three)
    )
    return PhiResult(expr, ref.scalars)


# ---------------------------------------------------------------------------
# two eigenfunctions


def phi_st_conformal(params: GlobalParams, u: str = "u", v: str = "v") -> tuple[TensorExpr, dict[str, AuxEq]]:
    """Mixed second variation along ``(1 + tu + sv)g``.

    ``Φ_st = -∇²f_st - (n-2)/4 (du⊗dv + dv⊗du) + (uv - ⟨∇u,∇v⟩)g
    - (n-2)/2 (u∇²v + v∇²u)`` with ``(Δ+½)f_st = n/2 uv - (3n-2)/4 ⟨∇u,∇v⟩``.
    Atoms that carry their functions get constant coefficients.
    """
    return phi_st_conformal_dim(params.n_fn, u, v)


def phi_st_conformal_dim(n, u: str = "u", v: str = "v", aux: str = "f_st") -> tuple[TensorExpr, dict[str, AuxEq]]:
    """:func:`phi_st_conformal` in dimension ``n`` (a RatFn or number)."""
    n = RatFn.coerce(n)
    expr = TensorExpr.of(
        (QuadScalar.one(-1), Atom.HESS_AUX, aux),
        (QuadScalar.one(-(n - 2) / 4), Atom.DU_DV, (u, v)),
        (QuadScalar.prod(u, v) - QuadScalar.grad(u, v), Atom.G),
        (QuadScalar.one(-(n - 2) / 2), Atom.UHV_VHU, (u, v)),
    )
    rhs = QuadScalar.prod(u, v, n / 2) - QuadScalar.grad(u, v, (3 * n - 2) / 4)
    return expr, {aux: AuxEq(RatFn.const(Fraction(1, 2)), rhs)}


def _const_of(q: QuadScalar, atom: Atom) -> RatFn:
    if set(q.terms) - {("one",)}:
        raise ValueError(f"atom {atom.value} needs a constant coefficient")
    return q.coeff("one")


def trace_two(expr: TensorExpr, n, traces: Mapping[Atom, object] | None = None) -> QuadScalar:
    """Trace of a several-function expression with respect to a metric in
    which ``Tr g = n``.  ``traces`` overrides the traces of ``g``, ``g1`` and
    ``g2`` for product metrics; the other atoms must then be tangent to the
    factor the trace is taken on.
    """
    tr = {Atom.G: RatFn.coerce(n)}
    tr.update({k: RatFn.coerce(v) for k, v in (traces or {}).items()})
    out = QuadScalar()
    for (atom, tag), q in expr.terms.items():
        if atom in (Atom.G, Atom.G1, Atom.G2):
            if atom not in tr:
                raise ValueError(f"no trace given for {atom.value}")
            out = out + q * tr[atom]
        elif atom is Atom.DU_DV:
            out = out + QuadScalar.grad(*tag, 2 * _const_of(q, atom))
        elif atom is Atom.UHV_VHU:
            # xΔy + yΔx = -2xy
            out = out + QuadScalar.prod(*tag, -2 * _const_of(q, atom))
        elif atom is Atom.HESS_AUX:
            out = out + QuadScalar.lap(tag, _const_of(q, atom))
        else:
            raise ValueError(f"atom {atom.value} not supported in several-function traces")
    return out


def _subst_scalar(q: QuadScalar, params: GlobalParams, rename: Mapping[str, str]) -> UPoly:
    """Set every function name to ``u`` and map auxiliary names."""
    out = UPoly()
    for k, c in q.terms.items():
        if k[0] == "one":
            out = out + UPoly.const(c)
        elif k[0] == "prod":
            out = out + UPoly.u(2, c)
        elif k[0] == "grad":
            out = out + UPoly.grad_u_sq(params) * c
        else:
            raise ValueError("auxiliary scalars have no u-polynomial value here")
    return out


def polarize(expr: TensorExpr, eqs: Mapping[str, AuxEq], params: GlobalParams, rename: Mapping[str, str]) -> TensorExpr:
    """Set every eigenfunction equal to ``u`` in a several-function
    expression; auxiliary scalars are renamed and solved exactly."""
    items = []
    aux = {}
    for (atom, tag), q in expr.terms.items():
        if atom is Atom.G:
            items.append((_subst_scalar(q, params, rename), Atom.G))
        elif atom is Atom.DU_DV:
            items.append((UPoly.const(2 * _const_of(q, atom)), Atom.DU_DU))
        elif atom is Atom.UHV_VHU:
            items.append((UPoly.const(2 * _const_of(q, atom)), Atom.U_HESS_U))
        elif atom is Atom.HESS_AUX:
            name = rename.get(tag, tag)
            eq = eqs[tag]
            aux[name] = solve_helmholtz(eq.c, _subst_scalar(eq.rhs, params, rename), params)
            items.append((UPoly.const(_const_of(q, atom)), Atom.HESS_AUX, name))
        else:
            raise ValueError(f"atom {atom.value} cannot be polarized")
    return TensorExpr.of(*items, aux=aux)


# ---------------------------------------------------------------------------
# a conformal direction mixed with a divergence-free direction


@dataclass(frozen=True)
class MixedResult:
    """Mixed variation along ``(1+tu)g + sh``.

    ``H`` is ``Tr h`` and ``P`` is ``⟨h, ∇²u⟩``; ``trace`` comes from the
    tensor formula through the atom trace rules and ``trace_closed`` from
    the closed trace formula.
    """

    rc_st: TensorExpr
    phi_st: TensorExpr
    f_st: UPoly
    H: UPoly
    P: UPoly
    trace: UPoly
    trace_closed: UPoly


def _mixed_trace(expr: TensorExpr, H: UPoly, P: UPoly, params: GlobalParams) -> UPoly:
    """Traces of the atoms for ``δh = 0``:
    ``Tr Rm(uh) = uH/2``, ``Tr Δ(uh) = Tr ∇²(uH) = Δ(uH)``,
    ``Tr δ*δ(uh) = -⟨h,∇²u⟩``, ``Tr C(h)·∇u = -½⟨∇H,∇u⟩``."""
    n = params.n_fn
    u = UPoly.u(1)
    uH = u * H
    rules = {
        Atom.G: UPoly.const(n),
        Atom.H: H,
        Atom.UH: uH,
        Atom.RM_UH: uH * Fraction(1, 2),
        Atom.LAP_UH: laplacian(uH, params),
        Atom.HESS_UH: laplacian(uH, params),
        Atom.DSTAR_DELTA_UH: -P,
        Atom.C_H_DU: grad_inner(H, u, params) * Fraction(-1, 2),
        Atom.DU_DU: UPoly.grad_u_sq(params),
        Atom.HESS_U: -u,
    }
    out = UPoly()
    for (atom, tag), k in expr.normalized().terms.items():
        if atom is Atom.HESS_AUX:
            out = out + k * laplacian(expr.aux[tag], params)
        elif atom is Atom.DU_DPSI:
            out = out + k * grad_inner(u, expr.aux[tag], params) * 2
        elif atom in rules:
            out = out + k * rules[atom]
        else:
            raise ValueError(f"no trace rule for {atom.value}")
    return out


def phi_st_mixed(h: BasisCoeffs, params: GlobalParams) -> MixedResult:
    """Mixed variation for ``h`` in the five-dimensional tensor space.

    ``h`` must be divergence free.  ``Rc_st`` and ``Φ_st`` are built as
    tensor expressions, ``f_st`` solves
    ``(Δ+½)f_st = -½uΔH - ¾⟨∇u,∇H⟩`` exactly.
    """
    if not divergence_of(h, params).is_zero():
        raise ValueError("phi_st_mixed needs a divergence-free h")
    n = params.n_fn
    u = UPoly.u(1)
    H = sum((trace_table(params)[k] * h[k] for k in range(5)), UPoly())
    P = sum((hess_pairing(params)[k] * h[k] for k in range(5)), UPoly())
    gHu = grad_inner(H, u, params)
    f_st = solve_helmholtz(Fraction(1, 2), u * laplacian(H, params) * Fraction(-1, 2) - gHu * Fraction(3, 4), params)
    half = UPoly.const(Fraction(1, 2))
    rc_st = TensorExpr.of(
        (UPoly.const((n - 2) / 2), Atom.C_H_DU),
        (u * Fraction(1, 2), Atom.H),
        (P * Fraction(1, 2) - gHu * Fraction(1, 4), Atom.G),
        (half, Atom.LAP_UH),
        (UPoly.const(1), Atom.RM_UH),
        (-half, Atom.UH),
        (half, Atom.HESS_UH),
        (UPoly.const(1), Atom.DSTAR_DELTA_UH),
    )
    phi = (
        -rc_st
        - TensorExpr.of((UPoly.const(1), Atom.HESS_AUX, "f_st"), aux={"f_st": f_st})
        + TensorExpr.of(
            (UPoly.const((n - 2) / 2), Atom.C_H_DU),
            (UPoly.const(Fraction(1, 4)), Atom.DU_DPSI, "H"),
            (gHu * Fraction(-1, 4), Atom.G),
            aux={"H": H},
        )
    )
    trace = _mixed_trace(phi, H, P, params)
    closed = (
        P * (-(n - 2) / 2)
        - gHu * Fraction(3, 2)
        - u * laplacian(H, params)
        + u * H * Fraction(1, 2)
        - laplacian(f_st, params)
    )
    return MixedResult(rc_st, phi, f_st, H, P, trace, closed)


# ---------------------------------------------------------------------------
# finite-difference oracles


@dataclass(frozen=True)
class VariationFDReport:
    order: int
    max_error: float
    scale: float
    expected: np.ndarray = field(repr=False)
    observed: np.ndarray = field(repr=False)

    @property
    def relative_error(self) -> float:
        return self.max_error / max(1.0, self.scale)


def _conformal_metric(p: ChartPoint, t: float, lam: float) -> Callable[[np.ndarray], np.ndarray]:
    n_plus = p.n_plus

    def metric(x):
        q = ChartPoint.from_real(x, n_plus)
        return (1 + t * float(u_at(q, lam))) * metric_at(q).g_real

    return metric


def fd_ricci_derivative(
    metric_of: Callable[[float], Callable[[np.ndarray], np.ndarray]],
    x: np.ndarray,
    order: int,
    step: float,
    space: Stencil,
) -> np.ndarray:
    """``∂_s^k Rc(g_s)`` at ``s = 0`` by five-point differences in ``s``."""
    if not (1e-8 <= step <= 1e-1):
        raise StepUnderflowError(f"parameter step {step} outside [1e-8, 1e-1]")
    R = {k: fd_ricci(metric_of(k * step), x, space) for k in (-2, -1, 1, 2)}
    if order == 1:
        return (8 * (R[1] - R[-1]) - (R[2] - R[-2])) / (12 * step)
    if order == 2:
        R0 = fd_ricci(metric_of(0.0), x, space)
        return (-R[2] + 16 * R[1] - 30 * R0 + 16 * R[-1] - R[-2]) / (12 * step * step)
    raise ValueError("only orders 1 and 2 are supported")


def fd_validate_variation(
    order: int,
    p: ChartPoint,
    t_step: float = 1e-2,
    space: Stencil = Stencil(5e-3, richardson=True),
    lam: float = 1.0,
) -> VariationFDReport:
    """Compare ``∂_t^k Rc((1+tu)g)`` with the closed form at a numeric point
    of the chart with the balanced block split."""
    if order not in (1, 2):
        raise ValueError("fd_validate_variation supports orders 1 and 2")
    m = p.n_plus
    params = GlobalParams(m=m)
    expr = specialize(conformal_variation("Rc", order), params)
    expected = reduce_single(expr, params).value(p, lam).real()
    observed = fd_ricci_derivative(lambda t: _conformal_metric(p, t, lam), p.real, order, t_step, space)
    err = float(np.max(np.abs(observed - expected)))
    return VariationFDReport(order, err, float(np.max(np.abs(expected))), expected, observed)


def phi_prime_fd(
    h_field: Callable[[np.ndarray], np.ndarray],
    H: UPoly,
    p: ChartPoint,
    params: GlobalParams,
    s_step: float = 1e-2,
    space: Stencil = Stencil(5e-3, richardson=True),
    lam: float = 1.0,
) -> np.ndarray:
    """``2Φ'(h) = h - 2Rc'(h) - ∇²H`` for divergence-free ``h``.

    For such ``h`` the first variation of the potential is ``H/2``; ``Rc'`` is
    computed by differencing the Ricci tensor of ``g + sh`` and ``∇²H`` comes
    from the exact reduction of the u-polynomial ``H``.
    """
    n_plus = p.n_plus

    def metric_of(s):
        def metric(x):
            return metric_at(ChartPoint.from_real(x, n_plus)).g_real + s * h_field(x)

        return metric

    rc1 = fd_ricci_derivative(metric_of, p.real, 1, s_step, space)
    hess_H = reduce_single(TensorExpr.of((UPoly.const(1), Atom.HESS_AUX, "H"), aux={"H": H}), params)
    return h_field(p.real) - 2 * rc1 - hess_H.value(p, lam).real()
