"""The five-dimensional tensor space spanned by the distinguished eigenfunction.

Ordered basis (``u`` the balanced first eigenfunction):

    e1 = λ² g
    e2 = u² g
    e3 = ∂u ⊗ ∂̄u + ∂̄u ⊗ ∂u        (Hermitian block u_i u_j̄)
    e4 = u ∇²u                     (Hermitian block u u_{ij̄})
    e5 = ∂u ⊗ ∂u + ∂̄u ⊗ ∂̄u         (holomorphic block u_i u_j)

so ``du ⊗ du = e3 + e5``.  ``L = Δ + 2Rm`` maps this space to itself; the
matrix below has ``L(e_k)`` in column ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .chart_geometry import ChartPoint, TensorValue, metric_at
from .eigenfunction import grad_u_at, hess_u_at, u_at
from .exact import RatFn, RatMatrix, solve_linear
from .scalar_algebra import GlobalParams, UPoly, integrate

__all__ = [
    "BASIS_NAMES",
    "BasisCoeffs",
    "l_matrix",
    "l_inverse",
    "rhs_vector",
    "solve_h0",
    "h0_expected",
    "divergence_coeffs",
    "divergence_of",
    "realize",
    "basis_field",
    "trace_table",
    "inner_table",
    "hess_pairing",
    "gram_matrix",
    "require_m2",
]

BASIS_NAMES = ("lambda2_g", "u2_g", "du_dubar", "u_hess_u", "du_du")


def require_m2(params: GlobalParams) -> None:
    if not params.symbolic and params.m < 2:
        raise ValueError(f"m = {params.m} is excluded: the deformation problem needs m >= 2")


@dataclass(frozen=True)
class BasisCoeffs:
    """Coefficient vector over the ordered basis."""

    c: tuple

    def __post_init__(self):
        if len(self.c) != 5:
            raise ValueError("BasisCoeffs needs exactly 5 coefficients")
        object.__setattr__(self, "c", tuple(RatFn.coerce(x) for x in self.c))

    def __getitem__(self, k: int) -> RatFn:
        return self.c[k]

    def __iter__(self):
        return iter(self.c)

    def __eq__(self, other):
        return isinstance(other, BasisCoeffs) and self.c == other.c

    def scale(self, s) -> "BasisCoeffs":
        return BasisCoeffs(tuple(s * x for x in self.c))

    def eval(self, m0: int) -> tuple[Fraction, ...]:
        return tuple(x.eval(m0) for x in self.c)

    def floats(self, m0: int | None = None) -> np.ndarray:
        vals = self.eval(m0) if m0 is not None else tuple(x.constant_value() for x in self.c)
        return np.array([float(v) for v in vals])


def _m(params: GlobalParams) -> RatFn:
    return params.m_fn


def l_matrix(params: GlobalParams) -> RatMatrix:
    """Matrix of ``L = Δ + 2Rm`` on the basis; column ``k`` is ``L(e_k)``."""
    m = _m(params)
    q = 1 / (4 * m * m)
    return RatMatrix(
        [
            [1, 1 / m, q, -q, 0],
            [0, -1 - 1 / m, -q, q, 0],
            [0, 0, -1, -1 / m, 0],
            [0, 0, -1 / m, -1, 0],
            [0, 0, 0, 0, -1 / m - 1],
        ]
    )


def l_inverse(params: GlobalParams) -> RatMatrix:
    """Exact inverse; entries have poles at ``m = ±1``."""
    require_m2(params)
    return l_matrix(params).inverse()


def rhs_vector(params: GlobalParams) -> BasisCoeffs:
    """``Lh/2`` for the second-order equation, on the basis."""
    m = _m(params)
    k = 2 * m * (m + 2) / (3 * m + 2)
    return BasisCoeffs((1 / (2 * m), -1 - 1 / (2 * m), -k, (4 * m * m - 6 * m - 4) / (3 * m + 2), -k))


def solve_h0(params: GlobalParams) -> BasisCoeffs:
    """``h₀ = 2 L⁻¹ (rhs)`` by exact elimination."""
    require_m2(params)
    x = solve_linear(l_matrix(params), list(rhs_vector(params)))
    return BasisCoeffs(tuple(2 * v for v in x))


def h0_expected(params: GlobalParams) -> BasisCoeffs:
    """Closed form of ``h₀`` used as the frozen reference."""
    m = _m(params)
    d = (m + 1) * (3 * m + 2)
    return BasisCoeffs(
        (
            -2 / (m + 1),
            2 * m / (m + 1),
            4 * m * (m * m + 5 * m + 2) / d,
            -8 * m**3 / d,
            4 * m * m * (m + 2) / d,
        )
    )


def divergence_coeffs(params: GlobalParams) -> BasisCoeffs:
    """``δ(e_k) = d_k · u du`` with ``δT_b = g^{ac}∇_a T_cb``."""
    m = _m(params)
    t = -(1 / (2 * m) + Fraction(1, 2))
    return BasisCoeffs((0, 2, Fraction(-1, 2), t, t))


def divergence_of(c: BasisCoeffs, params: GlobalParams) -> RatFn:
    """Multiple of ``u du`` in ``δ(Σ c_k e_k)``."""
    d = divergence_coeffs(params)
    return sum((a * b for a, b in zip(c, d)), RatFn())


# ---------------------------------------------------------------------------
# pointwise realization


def _basis_values(p: ChartPoint, lam: float) -> list[TensorValue]:
    md = metric_at(p)
    u = float(u_at(p, lam))
    du = grad_u_at(p, lam).astype(complex)
    U = hess_u_at(p, lam).herm.astype(complex)
    N = p.N
    Z = np.zeros((N, N), dtype=complex)
    return [
        TensorValue(lam**2 * md.G, Z),
        TensorValue(u * u * md.G, Z),
        TensorValue(np.outer(du, np.conj(du)), Z),
        TensorValue(u * U, Z),
        TensorValue(Z.copy(), np.outer(du, du)),
    ]


def realize(c: Sequence, p: ChartPoint, lam: float = 1.0) -> TensorValue:
    """``Σ c_k e_k`` at ``p``; ``c`` is numeric or a :class:`BasisCoeffs` with
    constant entries."""
    if isinstance(c, BasisCoeffs):
        c = c.floats()
    out = TensorValue.zeros(p.N)
    for ck, e in zip(c, _basis_values(p, lam)):
        out = out + e * float(ck)
    return out


def basis_field(c: Sequence, m: int, lam: float = 1.0) -> Callable[[np.ndarray], np.ndarray]:
    """Real-coordinate field ``x -> Σ c_k e_k`` for finite differences."""
    c = list(BasisCoeffs(tuple(c)).floats()) if not isinstance(c, np.ndarray) else list(c)

    def field(x: np.ndarray) -> np.ndarray:
        return realize(c, ChartPoint.from_real(x, m), lam).real()

    return field


# ---------------------------------------------------------------------------
# exact pointwise contractions as u-polynomials


def trace_table(params: GlobalParams) -> list[UPoly]:
    """``Tr e_k``."""
    n = params.n_fn
    return [UPoly.lam2(1, n), UPoly.u(2, n), UPoly.grad_u_sq(params), UPoly.u(2, -1), UPoly()]


def _hess_norm2(params: GlobalParams) -> UPoly:
    """``|∇²u|² = ((m-1)λ² + (m+1)u²)/(4m²)``."""
    m = _m(params)
    return UPoly({(0, 1): (m - 1) / (4 * m * m), (2, 0): (m + 1) / (4 * m * m)})


def inner_table(params: GlobalParams) -> list[list[UPoly]]:
    """Pointwise ``⟨e_k, e_l⟩`` as u-polynomials."""
    m = _m(params)
    n = params.n_fn
    gu = UPoly.grad_u_sq(params)
    lam2 = UPoly.lam2()
    u2 = UPoly.u(2)
    # pairings of g with the basis
    gg = [lam2 * n, u2 * n, gu, -u2, UPoly()]
    e33 = gu * gu * Fraction(1, 2)
    e34 = -u2 * (lam2 - u2) * (1 / (4 * m * m))
    e44 = u2 * _hess_norm2(params)
    T = [[UPoly()] * 5 for _ in range(5)]
    for k in range(5):
        T[0][k] = T[k][0] = lam2 * gg[k]
        T[1][k] = T[k][1] = u2 * gg[k]
    T[2][2] = e33
    T[2][3] = T[3][2] = e34
    T[3][3] = e44
    T[4][4] = e33
    return T


def hess_pairing(params: GlobalParams) -> list[UPoly]:
    """Pointwise ``⟨e_k, ∇²u⟩``."""
    m = _m(params)
    lam2 = UPoly.lam2()
    u = UPoly.u()
    u2 = UPoly.u(2)
    return [
        -(lam2 * u),
        -(u2 * u),
        -u * (lam2 - u2) * (1 / (4 * m * m)),
        u * _hess_norm2(params),
        UPoly(),
    ]


def gram_matrix(params: GlobalParams) -> RatMatrix:
    """``⨍⟨e_k, e_l⟩`` in units of ``λ⁴``."""
    T = inner_table(params)
    rows = []
    for k in range(5):
        row = []
        for l in range(5):
            v = integrate(T[k][l], params)
            if not v.is_zero() and set(v.terms) != {(0, 2)}:
                raise AssertionError("Gram entry is not homogeneous of weight 4")
            row.append(v.coeff(0, 2))
        rows.append(row)
    return RatMatrix(rows)
