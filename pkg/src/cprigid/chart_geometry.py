"""Pointwise geometry of complex projective space in the affine chart ``z₀ = 1``.

The Fubini–Study metric is scaled so that ``Rc = g/2``:

    g_{ij̄} = c (δ_ij / S - z̄_i z_j / S²),   S = 1 + |z|²,   c = 2(N + 1).

Complex tensors are stored as a Hermitian block ``H[i, j] = T(∂_i, ∂_j̄)`` and a
holomorphic block ``h[i, j] = T(∂_i, ∂_j)``.  Real coordinates are
``x = (Re z, Im z)``; all real-coordinate arrays use that ordering.

Everything here accepts either complex floating point coordinates or exact
Gaussian rationals (:class:`GaussRat`), the latter through numpy object arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

__all__ = [
    "GaussRat",
    "ChartPoint",
    "MetricData",
    "TensorValue",
    "metric_at",
    "metric_scale",
    "to_real",
    "from_real",
    "real_j",
    "real_metric_at",
    "real_christoffel_at",
    "rm_action",
    "apply_block_unitary",
]


# ---------------------------------------------------------------------------
# exact complex numbers


class GaussRat:
    """Complex number with :class:`~fractions.Fraction` parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        if isinstance(re, GaussRat):
            re, im = re.re, re.im
        self.re = Fraction(re)
        self.im = Fraction(im)

    @staticmethod
    def _c(x):
        if isinstance(x, GaussRat):
            return x
        if isinstance(x, (int, Fraction)):
            return GaussRat(x)
        return None

    def __add__(self, o):
        o = self._c(o)
        return NotImplemented if o is None else GaussRat(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, o):
        o = self._c(o)
        return NotImplemented if o is None else GaussRat(self.re - o.re, self.im - o.im)

    def __rsub__(self, o):
        o = self._c(o)
        return NotImplemented if o is None else o - self

    def __neg__(self):
        return GaussRat(-self.re, -self.im)

    def __mul__(self, o):
        o = self._c(o)
        if o is None:
            return NotImplemented
        return GaussRat(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = self._c(o)
        if o is None:
            return NotImplemented
        d = o.re * o.re + o.im * o.im
        if d == 0:
            raise ZeroDivisionError("GaussRat division by zero")
        return GaussRat((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)

    def __rtruediv__(self, o):
        o = self._c(o)
        return NotImplemented if o is None else o / self

    def __eq__(self, o):
        o = self._c(o)
        return NotImplemented if o is None else (self.re == o.re and self.im == o.im)

    def __hash__(self):
        return hash((self.re, self.im))

    def conjugate(self):
        return GaussRat(self.re, -self.im)

    @property
    def real(self):
        return self.re

    @property
    def imag(self):
        return self.im

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        return f"GaussRat({self.re}, {self.im})"


def _is_exact(a: np.ndarray) -> bool:
    return a.dtype == object


def _eye(n: int, exact: bool):
    if exact:
        e = np.empty((n, n), dtype=object)
        for i in range(n):
            for j in range(n):
                e[i, j] = GaussRat(1 if i == j else 0)
        return e
    return np.eye(n, dtype=complex)


def _abs2_sum(z: np.ndarray):
    if _is_exact(z):
        return sum((x.abs2() for x in z), Fraction(0))
    return float(np.sum(np.abs(z) ** 2))


# ---------------------------------------------------------------------------
# points


def metric_scale(N: int) -> int:
    """Scale making the Einstein constant 1/2 on CP^N."""
    return 2 * (N + 1)


@dataclass(frozen=True)
class ChartPoint:
    """Point ``[1 : z_1 : ... : z_N]``.

    The first ``n_plus`` homogeneous slots (``z₀`` and the chart coordinates
    ``z[0 : n_plus-1]``) form the positive block of the distinguished
    eigenfunction; the rest form the negative block.
    """

    z: np.ndarray
    n_plus: int

    def __post_init__(self):
        z = np.asarray(self.z)
        if z.dtype != object:
            z = z.astype(complex)
        object.__setattr__(self, "z", z)
        if not 1 <= self.n_plus <= len(z) + 1:
            raise ValueError(f"n_plus must lie in [1, {len(z) + 1}], got {self.n_plus}")

    @classmethod
    def for_m(cls, z, m: int) -> "ChartPoint":
        """Point of CP^{2m-1} with the balanced ``(m, m)`` block split."""
        z = np.asarray(z)
        if len(z) != 2 * m - 1:
            raise ValueError(f"CP^{2 * m - 1} needs {2 * m - 1} coordinates, got {len(z)}")
        return cls(z, m)

    @classmethod
    def exact(cls, coords, n_plus: int) -> "ChartPoint":
        """Exact point from ``(re, im)`` pairs or rationals."""
        arr = np.empty(len(coords), dtype=object)
        for i, c in enumerate(coords):
            arr[i] = GaussRat(*c) if isinstance(c, tuple) else GaussRat(c)
        return cls(arr, n_plus)

    @classmethod
    def from_real(cls, x: np.ndarray, n_plus: int) -> "ChartPoint":
        N = len(x) // 2
        return cls(x[:N] + 1j * x[N:], n_plus)

    @classmethod
    def from_homogeneous(cls, w: np.ndarray, n_plus: int) -> "ChartPoint":
        return cls(np.asarray(w[1:]) / w[0], n_plus)

    @property
    def N(self) -> int:
        return len(self.z)

    @property
    def is_exact(self) -> bool:
        return _is_exact(self.z)

    @property
    def real(self) -> np.ndarray:
        if self.is_exact:
            raise TypeError("real coordinates are only available in float mode")
        return np.concatenate([self.z.real, self.z.imag])

    @property
    def A(self):
        return 1 + _abs2_sum(self.z[: self.n_plus - 1])

    @property
    def B(self):
        return _abs2_sum(self.z[self.n_plus - 1 :])

    @property
    def S(self):
        return 1 + _abs2_sum(self.z)

    def homogeneous(self) -> np.ndarray:
        return np.concatenate([[1.0 + 0j], self.z])


def apply_block_unitary(p: ChartPoint, U: np.ndarray) -> ChartPoint:
    """Image of ``p`` under a unitary of the homogeneous coordinates."""
    return ChartPoint.from_homogeneous(U @ p.homogeneous(), p.n_plus)


# ---------------------------------------------------------------------------
# metric data


@dataclass(frozen=True)
class MetricData:
    """Closed-form metric quantities at a point.

    ``G[i, j] = g_{ij̄}``, ``gi[i, j] = g^{ij̄}`` (so ``G @ gi.T = I``) and
    ``gamma[k, i, j] = Γ^k_{ij}``.
    """

    point: ChartPoint
    G: np.ndarray
    gi: np.ndarray
    gamma: np.ndarray = field(repr=False)

    @property
    def N(self) -> int:
        return self.point.N

    @property
    def c(self) -> int:
        return metric_scale(self.N)

    @property
    def curvature_const(self):
        """Holomorphic sectional curvature ``1/(N+1)``."""
        return Fraction(1, self.N + 1)

    def curvature_hermitian(self) -> np.ndarray:
        """``R[i, j, k, l] = R_{ij̄kl̄} = K/2 (g_{ij̄} g_{kl̄} + g_{il̄} g_{kj̄})``.

        With ``K = 1/(N+1)`` this is ``(1/4m)(...)`` on CP^{2m-1}.
        """
        G = self.G
        half_k = self.curvature_const / 2
        if not self.point.is_exact:
            half_k = float(half_k)
        return half_k * (np.einsum("ij,kl->ijkl", G, G) + np.einsum("il,kj->ijkl", G, G))

    # real-coordinate views ------------------------------------------------
    @cached_property
    def g_real(self) -> np.ndarray:
        return to_real(self.G, None)

    @cached_property
    def g_real_inv(self) -> np.ndarray:
        return np.linalg.inv(self.g_real)

    @cached_property
    def gamma_real(self) -> np.ndarray:
        """``Γ[r, a, b]`` in real coordinates."""
        C = _cmat(self.N)
        W = np.einsum("ai,bj,kij->kab", C, C, self.gamma)
        return np.concatenate([W.real, W.imag], axis=0)

    @cached_property
    def riemann_real(self) -> np.ndarray:
        """``R[a, b, c, d] = ⟨R(∂_a, ∂_b)∂_c, ∂_d⟩`` from the constant
        holomorphic sectional curvature formula."""
        g = self.g_real
        J = real_j(self.N)
        Om = J.T @ g  # Om[a, b] = g(J e_a, e_b)
        K = float(self.curvature_const)
        t = (
            np.einsum("bc,ad->abcd", g, g)
            - np.einsum("ac,bd->abcd", g, g)
            + np.einsum("bc,ad->abcd", Om, Om)
            - np.einsum("ac,bd->abcd", Om, Om)
            + 2 * np.einsum("ba,cd->abcd", Om, Om)
        )
        return (K / 4) * t

    @cached_property
    def ricci_real(self) -> np.ndarray:
        return np.einsum("ad,abcd->bc", self.g_real_inv, self.riemann_real)


def metric_at(p: ChartPoint) -> MetricData:
    """Closed-form ``g``, ``g⁻¹`` and ``Γ`` at ``p``."""
    z = p.z
    N = p.N
    exact = p.is_exact
    c = metric_scale(N)
    S = p.S
    if exact:
        S = GaussRat(S)
    zb = np.conj(z)
    I = _eye(N, exact)
    G = c * (I / S - np.outer(zb, z) / (S * S))
    gi = (S / c) * (I + np.outer(z, zb))
    gamma = _christoffel(z, zb, S, exact)
    return MetricData(p, G, gi, gamma)


def _christoffel(z, zb, S, exact):
    """Γ^k_ij = -(δ_ik z̄_j + δ_jk z̄_i) / S."""
    N = len(z)
    if exact:
        out = np.empty((N, N, N), dtype=object)
        zero = GaussRat(0)
        for k in range(N):
            for i in range(N):
                for j in range(N):
                    v = zero
                    if i == k:
                        v = v + zb[j]
                    if j == k:
                        v = v + zb[i]
                    out[k, i, j] = -v / S
        return out
    I = np.eye(N)
    return -(np.einsum("ki,j->kij", I, zb) + np.einsum("kj,i->kij", I, zb)) / S


# ---------------------------------------------------------------------------
# real <-> complex conversions


def _cmat(N: int) -> np.ndarray:
    """Rows give the holomorphic parts of the real basis ``∂x_a``, ``∂y_a``."""
    I = np.eye(N)
    return np.vstack([I, 1j * I])


def _pmat(N: int) -> np.ndarray:
    """Columns give ``∂_i = (∂x_i - i ∂y_i)/2`` in the real basis."""
    I = np.eye(N)
    return 0.5 * np.vstack([I, -1j * I])


def real_j(N: int) -> np.ndarray:
    """Complex structure on real components: ``J ∂x = ∂y``, ``J ∂y = -∂x``."""
    Z = np.zeros((N, N))
    I = np.eye(N)
    return np.block([[Z, -I], [I, Z]])


def to_real(H: np.ndarray | None, h: np.ndarray | None) -> np.ndarray:
    """Real symmetric tensor from its Hermitian and holomorphic blocks."""
    N = (H if H is not None else h).shape[0]
    C = _cmat(N)
    out = np.zeros((2 * N, 2 * N))
    if H is not None:
        out = out + 2 * np.real(C @ np.asarray(H, dtype=complex) @ C.conj().T)
    if h is not None:
        out = out + 2 * np.real(C @ np.asarray(h, dtype=complex) @ C.T)
    return out


def from_real(T: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`to_real` for symmetric real ``T``."""
    P = _pmat(T.shape[0] // 2)
    return P.T @ T @ P.conj(), P.T @ T @ P


def real_metric_at(x: np.ndarray, n_plus: int = 1) -> np.ndarray:
    """``g`` in real coordinates; same formula as :func:`metric_at` without
    building the point, inverse and Christoffel symbols (FD inner loops)."""
    x = np.asarray(x, dtype=float)
    N = len(x) // 2
    z = x[:N] + 1j * x[N:]
    S = 1 + float(np.vdot(z, z).real)
    G = metric_scale(N) * (np.eye(N) / S - np.outer(np.conj(z), z) / (S * S))
    # to_real(G, None) for C = [I; iI]
    re, im = 2 * G.real, 2 * G.imag
    return np.block([[re, im], [-im, re]])


def real_christoffel_at(x: np.ndarray, n_plus: int = 1) -> np.ndarray:
    return metric_at(ChartPoint.from_real(x, n_plus)).gamma_real


def rm_action(md: MetricData, T: np.ndarray) -> np.ndarray:
    """``Rm(h)_{ac} = -R_{abcd} h^{bd}`` on a real symmetric tensor; ``Rm(g) = Rc``."""
    gi = md.g_real_inv
    up = gi @ T @ gi
    return -np.einsum("abcd,bd->ac", md.riemann_real, up)


# ---------------------------------------------------------------------------
# tensor values


@dataclass(frozen=True)
class TensorValue:
    """Symmetric real 2-tensor at a point, split by complex type."""

    herm: np.ndarray
    hol: np.ndarray

    @classmethod
    def zeros(cls, N: int) -> "TensorValue":
        return cls(np.zeros((N, N), dtype=complex), np.zeros((N, N), dtype=complex))

    @classmethod
    def from_real(cls, T: np.ndarray) -> "TensorValue":
        return cls(*from_real(T))

    @property
    def N(self) -> int:
        return self.herm.shape[0]

    def real(self) -> np.ndarray:
        return to_real(self.herm, self.hol)

    def __add__(self, o: "TensorValue") -> "TensorValue":
        return TensorValue(self.herm + o.herm, self.hol + o.hol)

    def __sub__(self, o: "TensorValue") -> "TensorValue":
        return TensorValue(self.herm - o.herm, self.hol - o.hol)

    def __mul__(self, s) -> "TensorValue":
        return TensorValue(self.herm * s, self.hol * s)

    __rmul__ = __mul__

    def trace(self, md: MetricData):
        """``g^{ab} T_ab = 2 g^{ij̄} T_{ij̄}``."""
        return 2 * np.sum(md.gi * self.herm).real

    def inner(self, o: "TensorValue", md: MetricData):
        """Full contraction ``T_ab S_cd g^ac g^bd``."""
        gi = md.gi
        t1 = np.einsum("ik,ij,lj,lk->", self.herm, gi, o.herm, gi)
        t2 = np.einsum("ik,ij,jl,kl->", self.hol, gi, np.conj(o.hol), gi)
        return 2 * (t1 + t2).real

    def norm2(self, md: MetricData):
        return self.inner(self, md)

    def max_abs(self) -> float:
        return float(max(np.max(np.abs(self.herm)), np.max(np.abs(self.hol))))
