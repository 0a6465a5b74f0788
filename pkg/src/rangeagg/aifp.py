"""General (eps, gamma)-AIFP index: multi-scale buckets, each carrying a constrained structure.

A query is reduced to at most three constrained queries (the ball itself, a
slightly enlarged ball, and a ball around q sized by its nearest neighbour)
plus the nearest neighbour itself; the farthest candidate inside B(1+gamma/2)
wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from rangeagg.bd import BdOverrides, CapacityError, derive_bd_params, overrides_from
from rangeagg.caifp import CaifpIndex, Constraint, peel_factor
from rangeagg.core import (
    Ball,
    GlobalConfig,
    PointSet,
    RngStream,
    align_up,
    aligned_exponent,
    ceil_log,
    dist,
    dists_to,
)
from rangeagg.lsh import make_sensitive_family
from rangeagg.cover import MergedBucket, MultiScale
from rangeagg.tree import AggregationTree, build_tree, lowest_admissible_node


@dataclass(frozen=True)
class AifpParams:
    eps: float
    gamma: float
    delta: float
    n: int
    d: int
    lam: float
    big_delta: float
    p_gap: float
    gamma_prime: int
    gamma_l: int
    gamma_r: int
    gamma_total: int
    caifp_eps: float
    caifp_gamma: float
    caifp_delta: float
    profile: str

    def r_mid(self, t: int) -> float:
        return (1.0 + self.lam) ** (t + self.gamma_l)

    def constraint(self, t: int) -> Constraint:
        base = 1.0 + self.lam
        return Constraint(base * self.r_mid(t), base**t, base ** (t + self.gamma_total + 1))


def derive_aifp_params(
    eps: float,
    gamma: float,
    delta: float,
    n: int,
    d: int,
    profile: str = "practical",
    lambda_override: float | None = None,
    gap_override: float | None = None,
    caifp_accuracy: float | None = None,
) -> AifpParams:
    """Parameter cascade of the multi-scale AIFP structure.

    theory: lam = min(eps, gamma)/512, P_gap = 2048 (4+2 gamma) n^3 d^3 / eps and
    constrained accuracy lam/6. practical: lam = min/16, P_gap = (4+2 gamma)/eps
    (the ratio between the farthest reachable distance and r_B) and constrained
    accuracy min/2; each can be overridden.
    """
    for name, v in (("eps", eps), ("gamma", gamma), ("delta", delta)):
        if not 0 < v < 1:
            raise ValueError(f"{name} must lie in (0, 1), got {v}")
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if profile not in ("theory", "practical"):
        raise ValueError(f"unknown profile {profile!r}")
    small = min(eps, gamma)
    theory = profile == "theory"
    lam = lambda_override if lambda_override is not None else small / (512.0 if theory else 16.0)
    if not 0 < lam < 1:
        raise ValueError(f"lambda must lie in (0, 1), got {lam}")
    if gap_override is not None:
        p_gap = float(gap_override)
    elif theory:
        p_gap = 2048.0 * (4.0 + 2.0 * gamma) * n**3 * d**3 / eps
    else:
        p_gap = (4.0 + 2.0 * gamma) / eps
    if not p_gap > 1:
        raise ValueError("P_gap must exceed 1")
    base = 1.0 + lam
    g_prime = ceil_log(p_gap, base)
    g_side = g_prime + ceil_log(8.0, base)
    if caifp_accuracy is not None:
        acc = float(caifp_accuracy)
    else:
        acc = lam / 6.0 if theory else small / 2.0
    return AifpParams(
        eps=eps, gamma=gamma, delta=delta, n=n, d=d, lam=lam, big_delta=4.0 * n * d, p_gap=p_gap,
        gamma_prime=g_prime, gamma_l=g_side, gamma_r=g_side, gamma_total=2 * g_side,
        caifp_eps=acc, caifp_gamma=acc, caifp_delta=delta / 4.0, profile=profile,
    )


def _t_key(t: int) -> int:
    """Non-negative stream key for a possibly negative scale index."""
    return 2 * t if t >= 0 else -2 * t - 1


@dataclass
class AnnStructure:
    """Nearest neighbour by exact linear scan; ties go to the lower id."""

    coords: np.ndarray
    mode: str = "exact-scan"

    def __post_init__(self):
        if self.mode != "exact-scan":
            raise ValueError(f"unsupported nearest-neighbour mode {self.mode!r}")

    def query(self, q) -> tuple[int, float]:
        dd = dists_to(self.coords, q)
        i = int(np.argmin(dd))
        return i, float(dd[i])


@dataclass
class AifpAnswer:
    point: int | None
    probes: int = 0
    subqueries: int = 0
    bd_queries: int = 0
    far: bool = False
    candidates: list = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.point is not None


class AifpIndex:
    def __init__(self, points: PointSet, params: AifpParams, rng: RngStream, overrides: BdOverrides, kappa: float,
                 ann_mode: str = "exact-scan", tree: AggregationTree | None = None):
        self.points = points
        self.coords = points.coords
        self.params = params
        self.rng = rng
        self.overrides = overrides
        self.kappa = float(kappa)
        self._check_capacity()
        self.tree = tree if tree is not None else build_tree(points)
        self.ann = AnnStructure(self.coords, ann_mode)
        self.multi = MultiScale(self.tree, params.lam, params.big_delta, params.gamma_total, self._build_bucket)

    @property
    def n(self) -> int:
        return self.points.n

    def _check_capacity(self) -> None:
        """Refuse up front when a bucket over all n points would exceed the BD capacity limit."""
        p = self.params
        xi = peel_factor(p.caifp_eps, p.caifp_gamma)
        fam = make_sensitive_family(1.0, 1.0 + xi, self.kappa)
        bd = derive_bd_params(xi, self.n, fam.p1, fam.p2, p.profile, self.overrides)
        if bd.c > bd.c_limit:
            raise CapacityError("c", bd.c if bd.log_c < 50 else f"e^{bd.log_c:.1f}", bd.c_limit)

    def _build_bucket(self, bucket: MergedBucket) -> CaifpIndex:
        p = self.params
        return CaifpIndex(
            self.coords[bucket.reps], bucket.reps, p.caifp_eps, p.caifp_gamma, p.caifp_delta,
            p.constraint(bucket.t), self.rng.child("caifp", _t_key(bucket.t)),
            p.profile, self.overrides, self.kappa,
        )

    def structure(self, t: int) -> CaifpIndex | None:
        return self.multi.structure(t)

    def ann_query(self, q) -> int:
        return self.ann.query(q)[0]

    def _constrained(self, t: int, center, r_mid: float, q, gen, ans: AifpAnswer) -> int | None:
        s = self.structure(t)
        ans.subqueries += 1
        if s is None:
            return None  # no representative survives at this scale
        res = s.query(Ball(center, (1.0 + self.params.lam) * r_mid), q, gen)
        ans.probes += res.probes
        ans.bd_queries += res.bd_queries
        return res.point

    def query_aligned(self, ball: Ball, q, rng) -> AifpAnswer:
        p = self.params
        t_b = aligned_exponent(ball.radius, p.lam)
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        q = np.asarray(q, dtype=np.float64)
        o_b, r_b = ball.center, ball.radius
        keep = Ball(o_b, r_b * (1.0 + p.gamma / 2.0))
        ans = AifpAnswer(None)

        if dist(q, o_b) >= (3.0 + p.gamma) / p.eps * r_b:
            p_o = self.ann_query(o_b)
            ans.far = True
            ans.candidates = [p_o]
            ans.point = p_o if keep.contains(self.coords[p_o]) else None
            return ans

        cands: list[int] = []
        p1 = self._constrained(t_b - p.gamma_l, o_b, r_b, q, gen, ans)
        if p1 is not None:
            cands.append(p1)
        p_n, r_n = self.ann.query(q)
        cands.append(p_n)
        v = lowest_admissible_node(self.tree, p_n, r_n, p.gamma * r_b / 64.0)
        if v is not None:
            r2 = align_up((1.0 + p.gamma / 16.0) * r_b, p.lam)
            p2 = self._constrained(aligned_exponent(r2, p.lam) - p.gamma_l, o_b, r2, q, gen, ans)
            if p2 is not None:
                cands.append(p2)
            r_minus = r_n + float(self.tree.s[v])
            if r_minus > 0:
                r3 = align_up(r_minus, p.lam)
                p3 = self._constrained(aligned_exponent(r3, p.lam) - p.gamma_l, q, r3, q, gen, ans)
                if p3 is not None:
                    cands.append(p3)
        assert len(cands) <= 4
        ans.candidates = cands
        best, best_d = None, -1.0
        for c in cands:
            if not keep.contains(self.coords[c]):
                continue
            dc = dist(q, self.coords[c])
            if dc > best_d or (dc == best_d and c < best):
                best, best_d = c, dc
        ans.point = best
        return ans

    def query(self, ball: Ball, q, rng) -> AifpAnswer:
        return self.query_aligned(Ball(ball.center, align_up(ball.radius, self.params.lam)), q, rng)


def build_aifp(points: PointSet | np.ndarray, config: GlobalConfig, rng: RngStream | None = None,
               tree: AggregationTree | None = None) -> AifpIndex:
    points = points if isinstance(points, PointSet) else PointSet(points)
    params = derive_aifp_params(
        config.eps, config.gamma, config.delta, points.n, points.d, config.profile,
        config.lambda_override, config.gap_override, config.caifp_accuracy,
    )
    overrides = overrides_from(config)
    rng = rng if rng is not None else RngStream(config.seed)
    return AifpIndex(points, params, rng, overrides, config.kappa, config.ann_mode, tree)


def ann_query(index: AifpIndex, q) -> int:
    return index.ann_query(q)


def query_aifp_aligned(index: AifpIndex, ball: Ball, q, rng) -> AifpAnswer:
    return index.query_aligned(ball, q, rng)


def query_aifp(index: AifpIndex, ball: Ball, q, rng) -> AifpAnswer:
    return index.query(ball, q, rng)
