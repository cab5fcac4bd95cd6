"""Uniform sampling of complex projective space and batch-mean integration.

A standard complex Gaussian vector in C^{N+1} projects to the Fubini–Study
uniform measure.  Samples are kept in homogeneous form ``w``; chart points are
produced only when needed, after rejecting draws near the hyperplane
``w₀ = 0`` where the chart degenerates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chart_geometry import ChartPoint

__all__ = ["MCEstimate", "gaussian_homogeneous", "sample_point", "sample_points", "ball_point", "mc_integrate"]

CHART_THRESHOLD = 1e-3
MAX_RETRIES = 1000


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int

    def zscore(self, exact: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == exact else float("inf")
        return abs(self.mean - exact) / self.stderr


def gaussian_homogeneous(rng: np.random.Generator, count: int, slots: int) -> np.ndarray:
    return rng.standard_normal((count, slots)) + 1j * rng.standard_normal((count, slots))


def _accept(w: np.ndarray, threshold: float) -> np.ndarray:
    return np.abs(w[:, 0]) >= threshold * np.linalg.norm(w, axis=1)


def sample_points(rng: np.random.Generator, count: int, slots: int, threshold: float = CHART_THRESHOLD) -> np.ndarray:
    """``count`` homogeneous samples with ``|w₀| >= threshold·|w|``."""
    out = []
    have = 0
    for _ in range(MAX_RETRIES):
        w = gaussian_homogeneous(rng, count - have, slots)
        w = w[_accept(w, threshold)]
        out.append(w)
        have += len(w)
        if have >= count:
            return np.concatenate(out)[:count]
    raise RuntimeError("chart rejection exceeded retry cap")


def sample_point(rng: np.random.Generator, m: int, threshold: float = CHART_THRESHOLD) -> ChartPoint:
    """One uniform point of CP^{2m-1} in the chart ``z₀ = 1``."""
    w = sample_points(rng, 1, 2 * m, threshold)[0]
    return ChartPoint.from_homogeneous(w, m)


def ball_point(rng: np.random.Generator, m: int, radius: float = 2.0) -> ChartPoint:
    """Chart point with ``|z| <= radius``.

    Finite differences lose accuracy far out in the chart where ``S`` is
    large, so pointwise oracles draw from a bounded ball instead of the
    uniform measure.
    """
    N = 2 * m - 1
    for _ in range(MAX_RETRIES):
        z = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) * (radius / 2)
        if np.linalg.norm(z) <= radius:
            return ChartPoint.for_m(z, m)
    raise RuntimeError("ball sampling exceeded retry cap")


def mc_integrate(
    integrand: Callable[[np.ndarray], np.ndarray],
    slots: int,
    samples: int,
    seed: int,
    batches: int = 20,
    threshold: float = CHART_THRESHOLD,
) -> MCEstimate:
    """Normalized average of ``integrand(W)`` over uniform samples.

    ``integrand`` maps an array of homogeneous samples (rows) to values.  Each
    batch draws from its own child of ``SeedSequence(seed)``, so the result is
    reproducible bit for bit.  The standard error comes from batch means.
    """
    if samples < 100:
        raise ValueError("mc_integrate needs at least 100 samples")
    sizes = [samples // batches + (1 if b < samples % batches else 0) for b in range(batches)]
    children = np.random.SeedSequence(seed).spawn(batches)
    means = np.empty(batches)
    for b, (ss, size) in enumerate(zip(children, sizes)):
        rng = np.random.default_rng(ss)
        W = sample_points(rng, size, slots, threshold)
        means[b] = float(np.mean(integrand(W)))
    weights = np.asarray(sizes, dtype=float) / samples
    mean = float(np.sum(weights * means))
    se = float(np.std(means, ddof=1) / np.sqrt(batches))
    return MCEstimate(mean, se, samples, seed)
