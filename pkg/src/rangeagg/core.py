"""Geometric primitives, parameter bundles and seeded random streams."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

# Relative slack used wherever a real is compared against an exact power or
# a ball boundary.
REL_TOL = 1e-9

Profile = Literal["theory", "practical"]


@dataclass(frozen=True, eq=False)
class PointSet:
    """``n`` points in ``d`` dimensions; point identity is the row index."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.ascontiguousarray(np.asarray(self.coords, dtype=np.float64))
        if coords.ndim != 2:
            raise ValueError(f"coords must be 2-D, got shape {coords.shape}")
        if coords.shape[0] < 1 or coords.shape[1] < 1:
            raise ValueError(f"need n >= 1 and d >= 1, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def ids(self) -> np.ndarray:
        return np.arange(self.n)

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i) -> np.ndarray:
        return self.coords[i]

    def subset(self, ids: Sequence[int]) -> "PointSet":
        return PointSet(self.coords[np.asarray(ids, dtype=np.int64)])

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.asarray(self.coords.shape, dtype="<i8").tobytes())
        h.update(self.coords.astype("<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class Ball:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(center)):
            raise ValueError("ball center must be finite")
        radius = float(self.radius)
        if not (radius >= 0.0) or not math.isfinite(radius):
            raise ValueError(f"ball radius must be finite and >= 0, got {self.radius}")
        center.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "radius", radius)

    @property
    def d(self) -> int:
        return self.center.shape[0]

    def contains(self, p, tol: float = REL_TOL) -> bool:
        """Closed-ball membership with relative boundary slack."""
        return dist(self.center, p) <= self.radius * (1.0 + tol)

    def expanded(self, y: float) -> "Ball":
        return expand_ball(self, y)

    def __repr__(self) -> str:
        return f"Ball(center={np.array2string(self.center, precision=4)}, radius={self.radius:.6g})"


def dist(p, q) -> float:
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {q.shape}")
    return float(np.sqrt(np.sum((p - q) ** 2)))


def dists_to(coords: np.ndarray, q) -> np.ndarray:
    """Distances from every row of ``coords`` to ``q``."""
    q = np.asarray(q, dtype=np.float64)
    if coords.shape[-1] != q.shape[-1]:
        raise ValueError(f"dimension mismatch: {coords.shape[-1]} vs {q.shape[-1]}")
    diff = coords - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def expand_ball(ball: Ball, y: float) -> Ball:
    """The concentric ball with radius scaled by ``y`` (shrinks when y < 1)."""
    if not y > 0:
        raise ValueError(f"scale factor must be positive, got {y}")
    return Ball(ball.center, ball.radius * y)


def ceil_log(x: float, base: float) -> int:
    """Smallest integer t with base**t >= x, exact powers snapped to t."""
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    raw = math.log(x) / math.log(base)
    t = math.ceil(raw - REL_TOL * max(1.0, abs(raw)))
    # guard against the tolerance pulling t one step too low
    if base**t < x * (1.0 - REL_TOL):
        t += 1
    return t


def ceil_log_array(x: np.ndarray, base: float) -> np.ndarray:
    """Vectorized ``ceil_log`` for positive finite entries."""
    x = np.asarray(x, dtype=np.float64)
    raw = np.log(x) / math.log(base)
    t = np.ceil(raw - REL_TOL * np.maximum(1.0, np.abs(raw)))
    t = t + (np.power(base, t) < x * (1.0 - REL_TOL))
    return t.astype(np.int64)


def align_up(x: float, lam: float) -> float:
    """Round ``x`` up to the nearest integer power of ``1 + lam``."""
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    return (1.0 + lam) ** ceil_log(x, 1.0 + lam)


def aligned_exponent(r: float, lam: float) -> int:
    """The integer t with (1 + lam)**t == r; raises if r is not aligned."""
    base = 1.0 + lam
    t = round(math.log(r) / math.log(base))
    if abs(base**t - r) > 1e-9 * r:
        raise ValueError(f"radius {r} is not aligned to powers of {base}")
    return t


def _key_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("stream keys must be non-negative")
        return int(key)
    return zlib.crc32(str(key).encode())


@dataclass(frozen=True)
class RngStream:
    """Splittable seeded stream: the same (seed, path) always yields the same draws.

    ``generator()`` hands out a fresh ``numpy.random.Generator`` positioned at the
    start of the stream; ``child(*keys)`` derives an independent sub-stream.
    """

    seed: int
    path: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)
        object.__setattr__(self, "path", tuple(_key_int(k) for k in self.path))

    @property
    def stream_id(self) -> tuple:
        return self.path

    def child(self, *keys) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(_key_int(k) for k in keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class GlobalConfig:
    eps: float = 0.3
    gamma: float = 0.3
    delta: float = 0.2
    profile: Profile = "practical"
    seed: int = 0
    # practical-profile overrides; None means the profile default
    lambda_override: float | None = None
    a_override: int | None = None
    c_multiplier: float = 4.0
    b_offset: int = -1  # added to the BD block count b in the practical profile
    c_cap: int = 1_000_000
    theory_c_limit: int = 10_000_000
    kappa: float = 4.0
    gap_override: float | None = None
    caifp_accuracy: float | None = None
    ameb_aifp_accuracy: float | None = None
    ameb_eps0: float | None = None
    ameb_c_multiplier: float = 1.0  # practical BD c multiplier inside the AMEB sub-index
    ann_mode: Literal["exact-scan", "lsh"] = "exact-scan"
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("eps", "gamma", "delta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.profile not in ("theory", "practical"):
            raise ValueError(f"unknown profile {self.profile!r}")
