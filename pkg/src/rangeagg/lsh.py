"""Gaussian (2-stable) LSH functions, their collision model, and random sign maps."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from rangeagg.core import RngStream

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(x: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    x = x ^ (x >> np.uint64(30))
    x = x * _M1
    x = x ^ (x >> np.uint64(27))
    x = x * _M2
    return x ^ (x >> np.uint64(31))


def salt_coefficients(salts) -> tuple[np.ndarray, np.ndarray]:
    """Multiplier (odd) and increment derived from 64-bit salts."""
    with np.errstate(over="ignore"):
        s = np.asarray(salts, dtype=np.uint64)
        mul = _mix64(s) | np.uint64(1)
        add = _mix64(s ^ _GOLDEN)
    return mul, add


def sign_bits(values: np.ndarray, mul: np.ndarray, add: np.ndarray) -> np.ndarray:
    """Top bit of (mul * value + add) mod 2^64, one (mul, add) pair per column."""
    with np.errstate(over="ignore"):
        v = np.asarray(values, dtype=np.int64).view(np.uint64)
        mixed = v * mul + add
    return (mixed >> np.uint64(63)).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class StableHashFunction:
    """h(p) = floor((direction . p + offset) / width)."""

    direction: np.ndarray
    offset: float
    width: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width}")


@dataclass(frozen=True)
class SignMap:
    """A consistent random map from the integers to {0, 1}."""

    salt: int

    def __call__(self, value) -> int:
        return int(self.bits([value])[0])

    def bits(self, values) -> np.ndarray:
        mul, add = salt_coefficients(np.uint64(self.salt & 0xFFFFFFFFFFFFFFFF))
        return sign_bits(np.asarray(values, dtype=np.int64), mul, add)


@dataclass(frozen=True)
class SensitiveFamilySpec:
    r_near: float
    r_far: float
    width: float
    p1: float
    p2: float


def sample_hash(d: int, width: float, rng: RngStream | np.random.Generator) -> StableHashFunction:
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if not width > 0:
        raise ValueError(f"width must be positive, got {width}")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    direction = gen.standard_normal(d)
    offset = float(gen.uniform(0.0, width))
    return StableHashFunction(direction, offset, float(width))


def eval_hash(h: StableHashFunction, p) -> int:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != h.direction.shape:
        raise ValueError(f"dimension mismatch: {p.shape} vs {h.direction.shape}")
    return int(math.floor((float(h.direction @ p) + h.offset) / h.width))


def eval_bit(h: StableHashFunction, f: SignMap, p) -> int:
    return f(eval_hash(h, p))


def collision_prob(s: float, width: float) -> float:
    """Probability that two points at distance ``s`` share a Gaussian hash cell of width ``width``.

    p(s) = 1 - 2 Phi(-W/s) - 2 s / (sqrt(2 pi) W) * (1 - exp(-W^2 / (2 s^2)))
    """
    if not s > 0 or not width > 0:
        raise ValueError(f"distance and width must be positive, got s={s}, W={width}")
    u = width / s
    phi = 0.5 * math.erfc(u / math.sqrt(2.0))
    return 1.0 - 2.0 * phi - (2.0 / (math.sqrt(2.0 * math.pi) * u)) * (-math.expm1(-u * u / 2.0))


def make_sensitive_family(r_near: float, r_far: float, kappa: float = 4.0) -> SensitiveFamilySpec:
    if not 0 < r_near < r_far:
        raise ValueError(f"need 0 < r_near < r_far, got {r_near}, {r_far}")
    if not kappa > 0:
        raise ValueError("width multiplier must be positive")
    width = kappa * r_near
    p1 = collision_prob(r_near, width)
    p2 = collision_prob(r_far, width)
    return SensitiveFamilySpec(r_near, r_far, width, p1, p2)
