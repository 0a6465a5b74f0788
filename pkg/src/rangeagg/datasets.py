"""Synthetic datasets and query workloads."""

from __future__ import annotations

import numpy as np

from rangeagg.core import PointSet
from rangeagg.io import QueryRecord

DISTRIBUTIONS = ("uniform-cube", "gaussian-clusters", "planted-shells")


def generate(
    n: int,
    d: int,
    distribution: str = "uniform-cube",
    seed: int = 0,
    k: int = 8,
    sigma: float = 0.5,
    spread: float = 4.0,
    shells: tuple[float, float] = (1.0, 1.4),
) -> np.ndarray:
    """n x d points.

    uniform-cube: uniform in [0, 1)^d.
    gaussian-clusters: k centers drawn from N(0, spread^2 I), points N(center, sigma^2 I).
    planted-shells: alternating points on two spheres around the origin with the given radii.
    """
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"unknown distribution {distribution!r}; choose from {', '.join(DISTRIBUTIONS)}")
    rng = np.random.default_rng(seed)
    if distribution == "uniform-cube":
        return rng.random((n, d))
    if distribution == "gaussian-clusters":
        if k < 1 or not sigma > 0:
            raise ValueError("need k >= 1 clusters and sigma > 0")
        centers = rng.standard_normal((k, d)) * spread
        return centers[rng.integers(0, k, n)] + rng.standard_normal((n, d)) * sigma
    dirs = rng.standard_normal((n, d))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    radii = np.where(np.arange(n) % 2 == 0, shells[0], shells[1])
    return dirs / norms * radii[:, None]


def make_workload(
    points: PointSet | np.ndarray,
    count: int,
    seed: int = 0,
    kinds: tuple[str, ...] = ("aifp",),
    radius_range: tuple[float, float] = (0.5, 4.0),
    center_jitter: float = 0.3,
    far_fraction: float = 0.1,
    far_factor: float = 40.0,
) -> list[QueryRecord]:
    """Seeded query records around data points.

    Radii are log-uniform in ``radius_range``. For AIFP records q is jittered
    around the center, except for a ``far_fraction`` share placed
    ``far_factor`` radii away.
    """
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    n, d = coords.shape
    rng = np.random.default_rng(seed)
    out = []
    lo, hi = np.log(radius_range[0]), np.log(radius_range[1])
    for i in range(count):
        kind = kinds[i % len(kinds)]
        center = coords[rng.integers(n)] + rng.standard_normal(d) * center_jitter
        radius = float(np.exp(rng.uniform(lo, hi)))
        q = None
        if kind == "aifp":
            if rng.random() < far_fraction:
                u = rng.standard_normal(d)
                q = center + u / np.linalg.norm(u) * far_factor * radius
            else:
                q = center + rng.standard_normal(d) * center_jitter
        out_c = out_r = None
        if kind == "bd":
            out_c = coords[rng.integers(n)]
            out_r = radius
        out.append(QueryRecord(kind, center, radius, q, int(rng.integers(2**31)), out_c, out_r))
    return out
