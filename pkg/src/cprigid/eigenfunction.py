"""First eigenfunctions of CP^N and the distinguished balanced eigenfunction.

Every first eigenfunction is ``w_H([Z]) = λ Z*HZ / Z*Z`` for a traceless
Hermitian ``H`` on C^{N+1}.  The distinguished one on CP^{2m-1} is

    u = λ (A - B)/S,   A = 1 + Σ_{+ block}|z_i|²,   B = Σ_{- block}|z_i|²,

i.e. ``H = diag(+1, ..., +1, -1, ..., -1)`` with ``m`` of each sign.  Its
gradient, Hessian and ξ tensor are given here by piecewise closed forms, kept
separate from the generic ``w_H`` formulas so each can check the other.

Also here: the exact Dirichlet moment oracle for averages of monomials in
``|Z_a|²/|Z|²`` and the Euclidean-Laplacian test on diagonal quadratics.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from math import factorial
from typing import Sequence

import numpy as np

from .chart_geometry import ChartPoint, GaussRat, TensorValue, metric_at, metric_scale

__all__ = [
    "EigenFn",
    "u_at",
    "grad_u_at",
    "grad_u_real",
    "hess_u_at",
    "xi_contraction",
    "xi_combination",
    "xi_piecewise",
    "hessian_norm2",
    "sphere_moment",
    "diagonal_average",
    "criterion_integral",
    "criterion_vector",
    "traceless_pattern",
    "euclid_laplacian",
    "euclid_laplacian_check",
    "u_batch",
    "grad_sq_batch",
    "chart_batch",
]


# ---------------------------------------------------------------------------
# generic first eigenfunctions


@dataclass(frozen=True)
class EigenFn:
    """``w_H = λ Z*HZ/Z*Z`` with ``H`` Hermitian and traceless."""

    H: np.ndarray
    lam: float = 1.0

    def __post_init__(self):
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise ValueError("H must be square")
        if np.abs(H - H.conj().T).max() > 1e-12:
            raise ValueError("H must be Hermitian")
        if abs(np.trace(H)) > 1e-12:
            raise ValueError("H must be traceless")
        object.__setattr__(self, "H", H)

    @classmethod
    def diagonal(cls, weights: Sequence, lam: float = 1.0) -> "EigenFn":
        return cls(np.diag(np.asarray(weights, dtype=float)), lam)

    @classmethod
    def distinguished(cls, m: int, lam: float = 1.0) -> "EigenFn":
        return cls.diagonal([1.0] * m + [-1.0] * m, lam)

    @classmethod
    def random(cls, rng: np.random.Generator, slots: int, lam: float = 1.0) -> "EigenFn":
        X = rng.standard_normal((slots, slots)) + 1j * rng.standard_normal((slots, slots))
        H = (X + X.conj().T) / 2
        H -= np.trace(H).real / slots * np.eye(slots)
        return cls(H, lam)

    @property
    def slots(self) -> int:
        return self.H.shape[0]

    def _parts(self, p: ChartPoint):
        Z = p.homogeneous()
        S = float(p.S)
        P = float(np.real(Z.conj() @ self.H @ Z))
        Pi = (Z.conj() @ self.H)[1:]  # ∂_i P
        Pjb = (self.H @ Z)[1:]  # ∂_j̄ P
        return Z, S, P, Pi, Pjb

    def value(self, p: ChartPoint) -> float:
        _, S, P, _, _ = self._parts(p)
        return self.lam * P / S

    def grad(self, p: ChartPoint) -> np.ndarray:
        """Holomorphic components ``w_i``."""
        _, S, P, Pi, _ = self._parts(p)
        return self.lam * (Pi / S - P * np.conj(p.z) / S**2)

    def hess(self, p: ChartPoint) -> TensorValue:
        """``w_{ij̄}``; the holomorphic block vanishes identically."""
        _, S, P, Pi, Pjb = self._parts(p)
        z, zb = p.z, np.conj(p.z)
        Hs = self.H[1:, 1:]
        N = p.N
        W = (
            Hs.T / S
            - np.outer(Pi, z) / S**2
            - np.outer(zb, Pjb) / S**2
            - P * np.eye(N) / S**2
            + 2 * P * np.outer(zb, z) / S**3
        )
        return TensorValue(self.lam * W, np.zeros((N, N), dtype=complex))

    def laplacian(self, p: ChartPoint) -> float:
        """``Δw = 2 g^{ij̄} w_{ij̄}``."""
        return self.hess(p).trace(metric_at(p))

    def grad_sq(self, p: ChartPoint) -> float:
        w = self.grad(p)
        return float(2 * np.real(np.conj(w) @ metric_at(p).gi.T @ w))

    def value_batch(self, W: np.ndarray) -> np.ndarray:
        num = np.real(np.einsum("sa,ab,sb->s", W.conj(), self.H, W))
        return self.lam * num / np.sum(np.abs(W) ** 2, axis=1)


# ---------------------------------------------------------------------------
# distinguished eigenfunction, piecewise closed forms


def _zeros(N: int, exact: bool) -> np.ndarray:
    if exact:
        out = np.empty((N, N), dtype=object)
        out[...] = GaussRat(0)
        return out
    return np.zeros((N, N), dtype=complex)


def _plus(i: int, p: ChartPoint) -> bool:
    return i < p.n_plus - 1


def _conj(x):
    return x.conjugate()


def u_at(p: ChartPoint, lam=1):
    """``λ(A - B)/S``."""
    return lam * (p.A - p.B) / p.S


def grad_u_at(p: ChartPoint, lam=1) -> np.ndarray:
    """``u_i = 2λB z̄_i/S²`` on the positive block, ``-2λA z̄_i/S²`` on the negative."""
    A, B, S = p.A, p.B, p.S
    out = np.empty(p.N, dtype=object if p.is_exact else complex)
    for i in range(p.N):
        k = B if _plus(i, p) else -A
        out[i] = 2 * lam * k * _conj(p.z[i]) / (S * S)
    return out


def grad_u_real(p: ChartPoint, lam=1.0) -> np.ndarray:
    """Real components ``(∂_x u, ∂_y u) = (2 Re u_i, -2 Im u_i)``."""
    du = grad_u_at(p, lam).astype(complex)
    return np.concatenate([2 * du.real, -2 * du.imag])


def hess_u_at(p: ChartPoint, lam=1) -> TensorValue:
    """Piecewise ``u_{ij̄}``; ``u_ij = 0``."""
    A, B, S = p.A, p.B, p.S
    z = p.z
    N = p.N
    H = _zeros(N, p.is_exact)
    for i in range(N):
        for j in range(N):
            zz = _conj(z[i]) * z[j]
            d = 1 if i == j else 0
            if _plus(i, p) and _plus(j, p):
                H[i, j] = 2 * lam * B / (S * S) * (d - 2 * zz / S)
            elif not _plus(i, p) and not _plus(j, p):
                H[i, j] = -2 * lam * A / (S * S) * (d - 2 * zz / S)
            else:
                H[i, j] = 2 * lam * (A - B) / (S * S * S) * zz
    return TensorValue(H, _zeros(N, p.is_exact))


def _m_of(p: ChartPoint) -> int:
    if p.N + 1 != 2 * p.n_plus:
        raise ValueError("the distinguished eigenfunction needs a balanced block split")
    return p.n_plus


def xi_contraction(p: ChartPoint, lam=1) -> np.ndarray:
    """``ξ_{ij̄} = g^{k̄l} u_{ik̄} u_{lj̄}``."""
    U = hess_u_at(p, lam).herm
    gi = metric_at(p).gi
    return U @ gi.T @ U


def xi_combination(p: ChartPoint, lam=1) -> np.ndarray:
    """``(λ² - u²)/(16m²) g - u_i u_j̄/(4m) - u u_{ij̄}/(2m)``."""
    m = _m_of(p)
    md = metric_at(p)
    u = u_at(p, lam)
    du = grad_u_at(p, lam)
    U = hess_u_at(p, lam).herm
    if p.is_exact:
        m = Fraction(m)
    return (lam * lam - u * u) / (16 * m * m) * md.G - np.outer(du, np.conj(du)) / (4 * m) - u * U / (2 * m)


def xi_piecewise(p: ChartPoint, lam=1) -> np.ndarray:
    """Block-by-block closed form of ξ."""
    m = _m_of(p)
    if p.is_exact:
        m = Fraction(m)
    A, B, S = p.A, p.B, p.S
    z = p.z
    N = p.N
    X = _zeros(N, p.is_exact)
    l2 = lam * lam
    for i in range(N):
        for j in range(N):
            zz = _conj(z[i]) * z[j]
            d = 1 if i == j else 0
            if _plus(i, p) and _plus(j, p):
                X[i, j] = l2 / (m * S**3) * (B * B * d + (B - 4 * B * B / S) * zz)
            elif not _plus(i, p) and not _plus(j, p):
                X[i, j] = l2 / (m * S**3) * (A * A * d + (A - 4 * A * A / S) * zz)
            else:
                X[i, j] = -l2 * (A - B) ** 2 / (m * S**4) * zz
    return X


def hessian_norm2(p: ChartPoint, lam=1):
    """``|∇²u|² = 2 g^{ij̄} ξ_{ij̄}``."""
    gi = metric_at(p).gi
    xi = xi_contraction(p, lam)
    val = 2 * np.sum(gi * xi)
    return val.re if isinstance(val, GaussRat) else float(np.real(val))


# ---------------------------------------------------------------------------
# exact moments


def sphere_moment(a: Sequence[int]) -> Fraction:
    """``E[Π s_i^{a_i}]`` for ``s_i = |Z_i|²/|Z|²`` under the uniform measure.

    The vector ``s`` is uniform on the simplex with ``k = len(a)`` vertices,
    so the moment is ``(k-1)! Π a_i! / (k-1+Σa_i)!``.
    """
    if any(x < 0 for x in a):
        raise ValueError("exponents must be non-negative")
    k = len(a)
    num = factorial(k - 1)
    for x in a:
        num *= factorial(x)
    return Fraction(num, factorial(k - 1 + sum(a)))


def diagonal_average(factors: Sequence[Sequence]) -> Fraction:
    """``⨍ Π_f (Σ_i c_{f,i} s_i)`` exactly, by monomial expansion."""
    factors = [[Fraction(c) for c in f] for f in factors]
    k = len(factors[0])
    if any(len(f) != k for f in factors):
        raise ValueError("all factors need the same number of slots")
    total = Fraction(0)
    cache: dict[tuple, Fraction] = {}
    for idx in itertools.product(range(k), repeat=len(factors)):
        c = Fraction(1)
        for f, i in zip(factors, idx):
            c *= f[i]
            if c == 0:
                break
        if c == 0:
            continue
        a = [0] * k
        for i in idx:
            a[i] += 1
        key = tuple(a)
        if key not in cache:
            cache[key] = sphere_moment(key)
        total += c * cache[key]
    return total


def _check_traceless(w: Sequence, name: str):
    if sum(Fraction(x) for x in w) != 0:
        raise ValueError(f"{name} must be traceless (weights summing to 0)")


def criterion_integral(u: Sequence, w: Sequence) -> Fraction:
    """``⨍u²w`` for diagonal eigenfunctions given by their weights."""
    if len(u) != len(w):
        raise ValueError("u and w must have the same number of slots")
    _check_traceless(u, "u")
    _check_traceless(w, "w")
    return diagonal_average([u, u, w])


def criterion_vector(u: Sequence) -> list[Fraction]:
    """``c_k = ⨍u² s_k``.  ``⨍u²w = Σ w_k c_k``, so ``⨍u²w`` vanishes for
    every traceless diagonal ``w`` iff all ``c_k`` agree.

    ``E[s_i s_j s_k]`` only depends on how many indices coincide, so with
    ``S = Σu_i`` and ``Q = Σu_i²`` each ``c_k`` is a short combination of
    three sphere moments.
    """
    u = [Fraction(x) for x in u]
    k = len(u)
    pad = [0] * k
    m3 = sphere_moment(([3] + pad)[:k])
    m21 = sphere_moment(([2, 1] + pad)[:k]) if k >= 2 else Fraction(0)
    m111 = sphere_moment(([1, 1, 1] + pad)[:k]) if k >= 3 else Fraction(0)
    S, Q = sum(u), sum(x * x for x in u)
    out = []
    for x in u:
        rs, rq = S - x, Q - x * x  # sums over the other slots
        out.append(x * x * m3 + 2 * x * rs * m21 + rq * m21 + (rs * rs - rq) * m111)
    return out


def traceless_pattern(eps: Sequence[int]) -> list[Fraction]:
    """Traceless projection ``ε - mean(ε)`` of a sign pattern."""
    mean = Fraction(sum(eps), len(eps))
    return [Fraction(e) - mean for e in eps]


# ---------------------------------------------------------------------------
# Euclidean Laplacian on polynomials in s_i = |z_i|²


def euclid_laplacian(poly: dict[tuple, Fraction], k: int) -> dict[tuple, Fraction]:
    """Flat Laplacian on C^k of ``Σ c_a Π s_i^{a_i}``.

    For ``F(s)``, ``Δ_E F = Σ_i 4 (∂F/∂s_i + s_i ∂²F/∂s_i²)``, so a monomial
    ``s^a`` maps to ``Σ_i 4 a_i² s^{a - e_i}``.
    """
    out: dict[tuple, Fraction] = {}
    for a, c in poly.items():
        for i in range(k):
            if a[i] == 0:
                continue
            b = list(a)
            b[i] -= 1
            key = tuple(b)
            out[key] = out.get(key, Fraction(0)) + 4 * a[i] * a[i] * c
    return {key: v for key, v in out.items() if v != 0}


def _square_linear(lams: Sequence[Fraction]) -> dict[tuple, Fraction]:
    k = len(lams)
    out: dict[tuple, Fraction] = {}
    for i in range(k):
        for j in range(k):
            a = [0] * k
            a[i] += 1
            a[j] += 1
            key = tuple(a)
            out[key] = out.get(key, Fraction(0)) + lams[i] * lams[j]
    return {key: v for key, v in out.items() if v != 0}


@dataclass(frozen=True)
class EuclidCheck:
    lap_f2: list[Fraction]  # coefficients of s_i in Δ_E f²
    lap_r4: Fraction  # Δ_E r⁴ = lap_r4 · r²
    balanced: bool  # Δ_E f² is a multiple of r², i.e. |λ_i| all equal


def euclid_laplacian_check(lams: Sequence) -> EuclidCheck:
    """Decide whether ``f² ∈ H_{2,2} ⊕ R r⁴`` for ``f = Σ λ_i |z_i|²`` traceless.

    Since ``Δ_E`` kills ``H_{2,2}``, that membership forces ``Δ_E f²`` to be a
    multiple of ``Δ_E r⁴``, which is a multiple of ``r²``.
    """
    lams = [Fraction(x) for x in lams]
    _check_traceless(lams, "f")
    k = len(lams)
    lf = euclid_laplacian(_square_linear(lams), k)
    lr = euclid_laplacian(_square_linear([Fraction(1)] * k), k)
    unit = [tuple(1 if i == j else 0 for i in range(k)) for j in range(k)]
    lap_f2 = [lf.get(e, Fraction(0)) for e in unit]
    r4 = {lr.get(e, Fraction(0)) for e in unit}
    if len(r4) != 1 or any(key not in unit for key in lr):
        raise AssertionError("Δ_E r⁴ is not a multiple of r²")
    return EuclidCheck(lap_f2, r4.pop(), len(set(lap_f2)) == 1)


# ---------------------------------------------------------------------------
# batched evaluation on homogeneous samples


def chart_batch(W: np.ndarray):
    """Chart coordinates, ``S`` and the homogeneous vector ``Z = (1, z)``."""
    Z = W / W[:, :1]
    z = Z[:, 1:]
    S = np.sum(np.abs(Z) ** 2, axis=1)
    return Z, z, S


def u_batch(W: np.ndarray, m: int, lam: float = 1.0) -> np.ndarray:
    """``u`` on rows of homogeneous samples in C^{2m}."""
    a = np.abs(W) ** 2
    return lam * (a[:, :m].sum(1) - a[:, m:].sum(1)) / a.sum(1)


def grad_sq_batch(W: np.ndarray, m: int, lam: float = 1.0) -> np.ndarray:
    """``|∇u|² = 2 g^{ij̄} u_i u_j̄`` from chart formulas, vectorized."""
    Z, z, S = chart_batch(W)
    a = np.abs(Z) ** 2
    A = a[:, :m].sum(1)
    B = a[:, m:].sum(1)
    coef = np.concatenate([np.repeat(B[:, None], m - 1, 1), np.repeat(-A[:, None], m, 1)], axis=1)
    du = 2 * lam * coef * np.conj(z) / S[:, None] ** 2
    c = metric_scale(2 * m - 1)
    return 2 * S / c * (np.sum(np.abs(du) ** 2, 1) + np.abs(np.sum(z * du, 1)) ** 2)
