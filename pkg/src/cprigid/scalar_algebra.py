"""Exact calculus on polynomials in the eigenfunction ``u``.

On the space spanned by ``u^i λ^{2j}`` the three identities

    Δu = -u,   |∇u|² = (λ² - u²)/(2m),   ⨍u = 0

close everything up: Laplacians, gradient pairings and averages of such
polynomials are again such polynomials, computed here with exact
coefficients in :class:`~cprigid.exact.RatFn`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Union

from .exact import RatFn

__all__ = [
    "GlobalParams",
    "UPoly",
    "HelmholtzSingularError",
    "laplacian",
    "grad_inner",
    "solve_helmholtz",
    "integrate",
    "apply_helmholtz",
    "moment",
]

MLike = Union[int, str]


@dataclass(frozen=True)
class GlobalParams:
    """Parameters shared by the exact layer.

    ``m`` is an integer or the string ``"sym"`` for a symbolic parameter.
    ``n`` is the real dimension used by the general-dimension variational
    formulas; it defaults to ``4m - 2``.  ``λ`` is never given a value: it is
    carried as a grading on :class:`UPoly`, and integrals are averages, i.e.
    multiples of the volume.
    """

    m: MLike = "sym"
    n: RatFn | None = field(default=None)

    def __post_init__(self):
        if isinstance(self.m, bool) or not (self.m == "sym" or isinstance(self.m, int)):
            raise ValueError(f"m must be an integer or 'sym', got {self.m!r}")
        if isinstance(self.m, int) and self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.n is not None and not isinstance(self.n, RatFn):
            object.__setattr__(self, "n", RatFn.coerce(self.n))

    @property
    def symbolic(self) -> bool:
        return self.m == "sym"

    @property
    def m_fn(self) -> RatFn:
        return RatFn.symbol() if self.symbolic else RatFn.const(self.m)

    @property
    def n_fn(self) -> RatFn:
        return self.n if self.n is not None else 4 * self.m_fn - 2

    def with_m(self, m: MLike) -> "GlobalParams":
        return GlobalParams(m=m, n=self.n)


class HelmholtzSingularError(ArithmeticError):
    """``Δ + c`` has a vanishing diagonal entry on some ``u``-degree."""

    def __init__(self, degree: int, c: RatFn):
        super().__init__(f"Δ + ({c}) is singular on u^{degree}: eigenvalue {degree} + {degree}({degree}-1)/(2m) equals c")
        self.degree = degree


Key = tuple  # (u power, λ² power)


class UPoly:
    """``Σ c_ij λ^{2j} u^i`` with :class:`RatFn` coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[Key, object] | None = None):
        clean = {}
        for (i, j), c in (terms or {}).items():
            if i < 0 or j < 0:
                raise ValueError(f"negative exponent in key {(i, j)}")
            c = RatFn.coerce(c)
            if not c.is_zero():
                clean[(int(i), int(j))] = c
        self.terms: dict[Key, RatFn] = dict(sorted(clean.items()))

    # constructors -------------------------------------------------------
    @classmethod
    def zero(cls) -> "UPoly":
        return cls()

    @classmethod
    def const(cls, c) -> "UPoly":
        return cls({(0, 0): c})

    @classmethod
    def u(cls, k: int = 1, c=1) -> "UPoly":
        return cls({(k, 0): c})

    @classmethod
    def lam2(cls, j: int = 1, c=1) -> "UPoly":
        return cls({(0, j): c})

    @classmethod
    def grad_u_sq(cls, params: GlobalParams) -> "UPoly":
        """``|∇u|² = (λ² - u²)/(2m)``."""
        k = 1 / (2 * params.m_fn)
        return cls({(0, 1): k, (2, 0): -k})

    # queries ------------------------------------------------------------
    def coeff(self, i: int, j: int = 0) -> RatFn:
        return self.terms.get((i, j), RatFn())

    def is_zero(self) -> bool:
        return not self.terms

    def u_degree(self) -> int:
        return max((i for i, _ in self.terms), default=-1)

    def weights(self) -> set[int]:
        """Set of total degrees ``i + 2j``; a singleton for homogeneous input."""
        return {i + 2 * j for i, j in self.terms}

    def is_homogeneous(self) -> bool:
        return len(self.weights()) <= 1

    def is_constant_in_u(self) -> bool:
        return all(i == 0 for i, _ in self.terms)

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, UPoly):
            return other
        if isinstance(other, (int, Fraction, RatFn)):
            return UPoly.const(other)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        out = dict(self.terms)
        for k, c in o.terms.items():
            out[k] = out.get(k, RatFn()) + c
        return UPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return UPoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        out: dict[Key, RatFn] = {}
        for (i1, j1), c1 in self.terms.items():
            for (i2, j2), c2 in o.terms.items():
                k = (i1 + i2, j1 + j2)
                out[k] = out.get(k, RatFn()) + c1 * c2
        return UPoly(out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        out = UPoly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.terms == o.terms

    def __hash__(self):
        return hash(tuple(self.terms.items()))

    def derivative(self) -> "UPoly":
        """Formal ``d/du``."""
        return UPoly({(i - 1, j): c * i for (i, j), c in self.terms.items() if i > 0})

    def map_coeffs(self, f) -> "UPoly":
        return UPoly({k: f(c) for k, c in self.terms.items()})

    def subs_m(self, m0: int) -> "UPoly":
        return self.map_coeffs(lambda c: c.subs(m0))

    # evaluation ---------------------------------------------------------
    def evaluate(self, u, lam=1.0, m0: int | None = None):
        """Numeric value at given ``u`` (scalar or numpy array) and ``λ``."""
        total = 0.0
        for (i, j), c in self.terms.items():
            cv = float(c.eval(m0)) if m0 is not None else float(c.constant_value())
            total = total + cv * (lam ** (2 * j)) * u**i
        return total

    # rendering ----------------------------------------------------------
    def __repr__(self):
        return f"UPoly({self})"

    def __str__(self):
        if not self.terms:
            return "0"
        parts = []
        for (i, j), c in sorted(self.terms.items(), key=lambda kv: (-kv[0][0], kv[0][1])):
            mono = []
            if j:
                mono.append("lambda^2" if j == 1 else f"lambda^{2 * j}")
            if i:
                mono.append("u" if i == 1 else f"u^{i}")
            cs = c.factored_str()
            if mono:
                parts.append(f"({cs})*" + "*".join(mono))
            else:
                parts.append(f"({cs})")
        return " + ".join(parts)

    def to_records(self) -> list[dict]:
        out = []
        for (i, j), c in self.terms.items():
            num, den = c.int_parts()
            out.append({"u_power": i, "lambda2_power": j, "num_poly": list(num), "den_poly": list(den)})
        return out


# ---------------------------------------------------------------------------
# operators


def laplacian(p: UPoly, params: GlobalParams) -> UPoly:
    """Δ on the u-polynomial space: Δu^k = -k u^k + k(k-1)/(2m)(λ² u^{k-2} - u^k)."""
    inv2m = 1 / (2 * params.m_fn)
    out: dict[Key, RatFn] = {}
    for (i, j), c in p.terms.items():
        if i == 0:
            continue
        diag = -i - i * (i - 1) * inv2m
        out[(i, j)] = out.get((i, j), RatFn()) + c * diag
        if i >= 2:
            k = (i - 2, j + 1)
            out[k] = out.get(k, RatFn()) + c * (i * (i - 1) * inv2m)
    return UPoly(out)


def grad_inner(p: UPoly, q: UPoly, params: GlobalParams) -> UPoly:
    """⟨∇p, ∇q⟩ = p'(u) q'(u) |∇u|²."""
    return p.derivative() * q.derivative() * UPoly.grad_u_sq(params)


def apply_helmholtz(c, p: UPoly, params: GlobalParams) -> UPoly:
    """(Δ + c) p."""
    return laplacian(p, params) + p * RatFn.coerce(c)


def solve_helmholtz(c, rhs: UPoly, params: GlobalParams) -> UPoly:
    """Solve (Δ + c) f = rhs on the u-polynomial space.

    Δ maps u^k to a multiple of itself plus a term two u-degrees lower, so the
    system is triangular and is solved from the top degree down.
    """
    c = RatFn.coerce(c)
    inv2m = 1 / (2 * params.m_fn)
    sol = UPoly()
    resid = rhs
    while not resid.is_zero():
        (i, j), a = max(resid.terms.items(), key=lambda kv: (kv[0][0], -kv[0][1]))
        d = c - i - i * (i - 1) * inv2m
        if d.is_zero():
            raise HelmholtzSingularError(i, c)
        step = UPoly({(i, j): a / d})
        sol = sol + step
        resid = resid - apply_helmholtz(c, step, params)
    return sol


def moment(k: int, params: GlobalParams) -> RatFn:
    """⨍u^k as a multiple of λ^k.

    Integrating Δu^k = 0 gives ⨍u^k = (k-1)/(2m+k-1) ⨍u^{k-2}; odd moments
    vanish because ⨍u = 0.
    """
    if k < 0:
        raise ValueError("negative moment")
    if k % 2:
        return RatFn()
    m = params.m_fn
    out = RatFn.const(1)
    for s in range(2, k + 1, 2):
        out = out * (s - 1) / (2 * m + s - 1)
    return out


def integrate(p: UPoly, params: GlobalParams) -> UPoly:
    """Normalized average ⨍p, returned as a polynomial in λ² only."""
    out: dict[Key, RatFn] = {}
    for (i, j), c in p.terms.items():
        mk = moment(i, params)
        if mk.is_zero():
            continue
        key = (0, j + i // 2)
        out[key] = out.get(key, RatFn()) + c * mk
    return UPoly(out)


def from_coeffs(pairs: Iterable[tuple[Key, object]]) -> UPoly:
    return UPoly(dict(pairs))
