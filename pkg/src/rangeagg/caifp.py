"""Constrained AIFP by ball peeling over a ladder of BD indices.

Under the promise that the farthest distance from q to P within the query
ball lies in [d_min, d_max], BD queries with excluded balls of radius
d_min (1+xi)^i around q are issued for i = 0, 1, ... and the last non-NULL
answer before the first NULL is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rangeagg.bd import (BdOverrides, BdParams, BoostedBd, CapacityError, boost_repetitions, derive_bd_params,
                         overrides_from)
from rangeagg.core import REL_TOL, Ball, GlobalConfig, PointSet, RngStream, ceil_log
from rangeagg.lsh import make_sensitive_family


@dataclass(frozen=True)
class Constraint:
    r_b: float
    d_min: float
    d_max: float

    def __post_init__(self):
        if not self.r_b > 0:
            raise ValueError(f"r_B must be positive, got {self.r_b}")
        if not 0 < self.d_min < self.d_max:
            raise ValueError(f"need 0 < d_min < d_max, got {self.d_min}, {self.d_max}")


def peel_factor(eps: float, gamma: float) -> float:
    """xi = min((1-eps)^(-1/2) - 1, gamma)."""
    return min((1.0 - eps) ** -0.5 - 1.0, gamma)


@dataclass
class CaifpAnswer:
    point: int | None
    probes: int = 0
    bd_queries: int = 0
    rungs: int = 0  # rungs answered non-NULL


class CaifpIndex:
    """Rung i answers BD queries with r_in = r_B and r_out = d_min (1+xi)^i, i = 0..m.

    Rungs are boosted BD structures created on first use from ``rng.child(i)``.
    """

    def __init__(
        self,
        coords: np.ndarray,
        ids: np.ndarray,
        eps: float,
        gamma: float,
        delta: float,
        constraint: Constraint,
        rng: RngStream,
        profile: str = "practical",
        overrides: BdOverrides | None = None,
        kappa: float = 4.0,
    ):
        for name, v in (("eps", eps), ("gamma", gamma), ("delta", delta)):
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        self.coords = np.ascontiguousarray(coords, dtype=np.float64)
        self.ids = np.asarray(ids, dtype=np.int64)
        self.eps, self.gamma, self.delta = float(eps), float(gamma), float(delta)
        self.constraint = constraint
        self.rng = rng
        self.kappa = float(kappa)
        self.xi = peel_factor(eps, gamma)
        self.m = max(1, ceil_log(constraint.d_max / constraint.d_min, 1.0 + self.xi))
        self.radii = constraint.d_min * (1.0 + self.xi) ** np.arange(self.m + 1)
        self.delta_prime = self.delta / self.m
        self.repetitions = boost_repetitions(self.delta_prime)
        fam = make_sensitive_family(1.0, 1.0 + self.xi, self.kappa)
        if overrides is None:  # same practical defaults as the full engine
            overrides = overrides_from(GlobalConfig())
        self.bd_params: BdParams = derive_bd_params(self.xi, self.coords.shape[0], fam.p1, fam.p2, profile, overrides)
        if self.bd_params.c > self.bd_params.c_limit:
            p = self.bd_params
            raise CapacityError("c", p.c if p.log_c < 50 else f"e^{p.log_c:.1f}", p.c_limit)
        self.coords_t = np.ascontiguousarray(self.coords.T)
        self._rungs: list[BoostedBd | None] = [None] * (self.m + 1)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    def rung(self, i: int) -> BoostedBd:
        bd = self._rungs[i]
        if bd is None:
            bd = BoostedBd(
                self.coords, self.ids, self.xi, self.constraint.r_b, float(self.radii[i]),
                self.bd_params, self.repetitions, self.rng.child(i), self.kappa,
                self.coords_t,
            )
            self._rungs[i] = bd
        return bd

    def query(self, ball: Ball, q, rng) -> CaifpAnswer:
        if abs(ball.radius - self.constraint.r_b) > REL_TOL * self.constraint.r_b:
            raise ValueError(f"ball radius {ball.radius} does not match the constraint radius {self.constraint.r_b}")
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        q = np.asarray(q, dtype=np.float64)
        ans = CaifpAnswer(None)
        for i in range(self.m + 1):
            bd = self.rung(i)
            hit = None
            for idx in bd:
                res = idx.query(ball, Ball(q, float(self.radii[i])), gen)
                ans.probes += res.probes
                if res.point is not None:
                    hit = res.point
                    break
            ans.bd_queries += 1
            if hit is None:
                return ans
            ans.point = hit
            ans.rungs += 1
        return ans


def build_caifp(
    points: PointSet | np.ndarray,
    eps: float,
    gamma: float,
    delta: float,
    constraint: Constraint,
    rng: RngStream,
    profile: str = "practical",
    overrides: BdOverrides | None = None,
    kappa: float = 4.0,
    ids: np.ndarray | None = None,
) -> CaifpIndex:
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    if ids is None:
        ids = np.arange(coords.shape[0])
    return CaifpIndex(coords, ids, eps, gamma, delta, constraint, rng, profile, overrides, kappa)


def query_caifp(index: CaifpIndex, ball: Ball, q, rng) -> CaifpAnswer:
    return index.query(ball, q, rng)
