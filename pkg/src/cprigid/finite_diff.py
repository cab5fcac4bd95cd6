"""Finite-difference operators used as oracles for the closed forms.

Fields are callables ``x -> ndarray`` on real chart coordinates.  Covariant
derivatives are nested central differences corrected with a Christoffel
callable, so each derivative level only ever differentiates numerically once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chart_geometry import ChartPoint, metric_at, real_christoffel_at, real_metric_at

__all__ = [
    "Stencil",
    "StepUnderflowError",
    "fd_partials",
    "covariant_derivative",
    "fd_rough_laplacian",
    "fd_divergence",
    "fd_christoffel",
    "fd_real_christoffel",
    "fd_riemann",
    "fd_ricci",
    "fd_hessian",
]

Field = Callable[[np.ndarray], np.ndarray]

MIN_STEP = 1e-8
MAX_STEP = 1e-1


class StepUnderflowError(ValueError):
    pass


@dataclass(frozen=True)
class Stencil:
    """Central differences with optional one-step Richardson extrapolation."""

    step: float = 1e-4
    richardson: bool = False

    def __post_init__(self):
        if not (MIN_STEP <= self.step <= MAX_STEP):
            raise StepUnderflowError(f"step {self.step} outside [{MIN_STEP}, {MAX_STEP}]")


def _central(f: Field, x: np.ndarray, h: float) -> np.ndarray:
    rows = []
    for a in range(len(x)):
        e = np.zeros_like(x)
        e[a] = h
        rows.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.stack(rows)


def fd_partials(f: Field, x: np.ndarray, st: Stencil) -> np.ndarray:
    """``out[a, ...] = ∂_a f(x)``."""
    x = np.asarray(x, dtype=float)
    d = _central(f, x, st.step)
    if st.richardson:
        d = (4 * _central(f, x, st.step / 2) - d) / 3
    return d


def _correct(T: np.ndarray, dT: np.ndarray, gam: np.ndarray) -> np.ndarray:
    """Subtract Christoffel terms from ``dT[a, i1, ..., ir] = ∂_a T``."""
    out = dT.copy()
    r = T.ndim
    letters = "bcdefgh"[:r]
    for s in range(r):
        src = letters[:s] + "r" + letters[s + 1 :]
        out -= np.einsum(f"r{'a'}{letters[s]},{src}->a{letters}", gam, T)
    return out


def covariant_derivative(field: Field, x: np.ndarray, st: Stencil, gamma: Field | None = None) -> np.ndarray:
    """``(∇T)[a, ...] = ∇_a T`` with Christoffel symbols from ``gamma``."""
    gamma = gamma or real_christoffel_at
    T = np.asarray(field(x))
    dT = fd_partials(field, x, st)
    if T.ndim == 0:
        return dT
    return _correct(T, dT, gamma(x))


def fd_hessian(field: Field, x: np.ndarray, st: Stencil, gamma: Field | None = None) -> np.ndarray:
    """``∇_a ∇_b T`` as nested covariant differences."""

    def first(y):
        return covariant_derivative(field, y, st, gamma)

    return covariant_derivative(first, x, st, gamma)


def fd_rough_laplacian(field: Field, x: np.ndarray, st: Stencil, gamma: Field | None = None, ginv: np.ndarray | None = None) -> np.ndarray:
    """``g^{ab} ∇_a ∇_b T``."""
    if ginv is None:
        ginv = np.linalg.inv(real_metric_at(x))
    H = fd_hessian(field, x, st, gamma)
    return np.einsum("ab,ab...->...", ginv, H)


def fd_divergence(field: Field, x: np.ndarray, st: Stencil, gamma: Field | None = None, ginv: np.ndarray | None = None) -> np.ndarray:
    """``(δT)_b = g^{ac} ∇_a T_cb``."""
    if ginv is None:
        ginv = np.linalg.inv(real_metric_at(x))
    D = covariant_derivative(field, x, st, gamma)
    return np.einsum("ac,ac...->...", ginv, D)


# ---------------------------------------------------------------------------
# curvature oracles


def fd_christoffel(p: ChartPoint, st: Stencil) -> np.ndarray:
    """``Γ^k_ij = g^{kl̄} ∂_i g_{jl̄}`` with ``∂_i = (∂x_i - i ∂y_i)/2`` by FD."""
    N = p.N

    def G(x):
        return metric_at(ChartPoint.from_real(x, p.n_plus)).G

    dG = fd_partials(G, p.real, st)
    dhol = 0.5 * (dG[:N] - 1j * dG[N:])  # dhol[i, j, l] = ∂_i G[j, l]
    gi = metric_at(p).gi
    return np.einsum("kl,ijl->kij", gi, dhol)


def fd_real_christoffel(metric: Field, x: np.ndarray, st: Stencil) -> np.ndarray:
    """Levi-Civita ``Γ[r, a, b]`` of a real metric field by FD."""
    g = np.asarray(metric(x))
    dg = fd_partials(metric, x, st)  # dg[s, a, b] = ∂_s g_ab
    low = 0.5 * (np.einsum("abs->sab", dg) + np.einsum("bas->sab", dg) - dg)
    # low[s, a, b] = Γ_{s, ab} = (∂_a g_bs + ∂_b g_as - ∂_s g_ab)/2
    return np.einsum("rs,sab->rab", np.linalg.inv(g), low)


def _riemann_from(gam: np.ndarray, dgam: np.ndarray) -> np.ndarray:
    """``Rup[r, a, b, c]`` with ``R(∂a, ∂b)∂c = Rup[:, a, b, c]``."""
    # dgam[a, r, b, c] = ∂_a Γ^r_bc
    t = np.einsum("arbc->rabc", dgam) - np.einsum("brac->rabc", dgam)
    t += np.einsum("sbc,ras->rabc", gam, gam) - np.einsum("sac,rbs->rabc", gam, gam)
    return t


def fd_riemann(x: np.ndarray, st: Stencil, gamma: Field | None = None, metric: Field | None = None) -> np.ndarray:
    """``R_abcd = ⟨R(∂a,∂b)∂c, ∂d⟩`` from FD of a Christoffel field."""
    gamma = gamma or real_christoffel_at
    metric = metric or real_metric_at
    Rup = _riemann_from(gamma(x), fd_partials(gamma, x, st))
    return np.einsum("rabc,rd->abcd", Rup, metric(x))


def fd_ricci(metric: Field, x: np.ndarray, st: Stencil, inner: Stencil | None = None) -> np.ndarray:
    """Ricci tensor of an arbitrary real metric field, FD all the way down."""
    inner = inner or st

    def gam(y):
        return fd_real_christoffel(metric, y, inner)

    Rup = _riemann_from(gam(x), fd_partials(gam, x, st))
    return np.einsum("rrbc->bc", Rup)
