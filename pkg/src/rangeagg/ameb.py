"""Approximate minimum enclosing ball of P within a query ball.

A coreset is grown from two seed points; each round asks the AIFP index for
a far point from the current center and stops once the answer is no farther
than the coreset itself or the coreset radius stops growing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from rangeagg.aifp import AifpIndex, build_aifp
from rangeagg.core import REL_TOL, Ball, GlobalConfig, PointSet, RngStream, dist
from rangeagg.oracle import brute_ifp, solve_meb
from rangeagg.tree import AggregationTree


def _ceil(x: float) -> int:
    # values within rounding of an integer snap to it instead of jumping by one
    r = round(x)
    if abs(x - r) <= REL_TOL * max(1.0, abs(x)):
        return max(1, int(r))
    return max(1, math.ceil(x))


@dataclass(frozen=True)
class AmebParams:
    eps: float
    gamma: float
    delta: float
    eps_a: float
    gamma_a: float
    eps0: float
    eps_prime: float
    w: int
    aifp_delta: float  # failure budget of one AIFP sub-query
    profile: str

    @property
    def aifp_success(self) -> float:
        return 1.0 - self.aifp_delta


def derive_ameb_params(
    eps: float,
    gamma: float,
    delta: float,
    profile: str = "practical",
    aifp_accuracy: float | None = None,
    eps0_override: float | None = None,
    w_override: int | None = None,
) -> AmebParams:
    """theory: eps0 = eps^2/1600, w = ceil(4/eps0^2), AIFP failure delta eps0^2/16.
    practical: eps0 = eps/16, w = ceil(16/eps), AIFP failure delta/(2(w+2)).

    The AIFP accuracy is min(eps, gamma)/18 unless ``aifp_accuracy`` is given.
    """
    for name, v in (("eps", eps), ("gamma", gamma), ("delta", delta)):
        if not 0 < v < 1:
            raise ValueError(f"{name} must lie in (0, 1), got {v}")
    if profile not in ("theory", "practical"):
        raise ValueError(f"unknown profile {profile!r}")
    acc = min(eps / 18.0, gamma / 18.0) if aifp_accuracy is None else float(aifp_accuracy)
    if not 0 < acc < 1:
        raise ValueError(f"AIFP accuracy must lie in (0, 1), got {acc}")
    theory = profile == "theory"
    if eps0_override is not None:
        eps0 = float(eps0_override)
    else:
        eps0 = eps * eps / 1600.0 if theory else eps / 16.0
    if w_override is not None:
        w = int(w_override)
    else:
        w = _ceil(4.0 / eps0**2) if theory else _ceil(16.0 / eps)
    eps_prime = min(1.0 / (1.0 - eps0) - 1.0, (1.0 - eps * eps / 100.0) ** -0.5 - 1.0, eps / 3.0)
    aifp_delta = delta * eps0**2 / 16.0 if theory else delta / (2.0 * (w + 2))
    return AmebParams(eps, gamma, delta, acc, acc, eps0, eps_prime, w, aifp_delta, profile)


def meb_approx(points, eps_prime: float) -> Ball:
    """Ball enclosing every point with radius at most (1 + eps_prime) times the optimum."""
    return solve_meb(points, eps_prime).ball


# (ball, q, generator) -> point id or None
AifpOracle = Callable[[Ball, np.ndarray, np.random.Generator], "int | None"]


@dataclass
class AmebAnswer:
    ball: Ball | None
    iterations: int = 0
    aifp_queries: int = 0
    probes: int = 0
    core: list = field(default_factory=list)
    exit: str = ""  # "empty", "no-seed", "not-farther", "stalled" or "budget"

    def __bool__(self) -> bool:
        return self.ball is not None


class AmebIndex:
    """AIFP index built at accuracy (eps_A, gamma_A) plus the coreset loop around it."""

    def __init__(self, aifp: AifpIndex, params: AmebParams):
        self.aifp = aifp
        self.params = params

    @property
    def points(self) -> PointSet:
        return self.aifp.points

    def randomized_oracle(self, counter: AmebAnswer) -> AifpOracle:
        def ask(ball, q, gen):
            res = self.aifp.query(ball, q, gen)
            counter.probes += res.probes
            return res.point
        return ask

    def brute_oracle(self) -> AifpOracle:
        coords = self.aifp.coords
        return lambda ball, q, gen: brute_ifp(coords, ball, q)

    def query(self, ball: Ball, rng, exact_aifp: bool = False) -> AmebAnswer:
        ans = AmebAnswer(None)
        oracle = self.brute_oracle() if exact_aifp else self.randomized_oracle(ans)
        return coreset_loop(self.aifp.coords, self.aifp.ann_query, oracle, ball, self.params, rng, ans)


def coreset_loop(coords: np.ndarray, nearest: Callable, aifp: AifpOracle, ball: Ball, params: AmebParams,
                 rng, ans: AmebAnswer | None = None) -> AmebAnswer:
    ans = ans if ans is not None else AmebAnswer(None)
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    p = params

    p_a = int(nearest(ball.center))
    if dist(coords[p_a], ball.center) > (1.0 + p.gamma_a) * ball.radius * (1.0 + REL_TOL):
        ans.exit = "empty"
        return ans
    p_b = aifp(ball, coords[p_a], gen)
    ans.aifp_queries += 1
    if p_b is None:
        ans.exit = "no-seed"
        return ans

    core = [p_a, int(p_b)]
    prev = Ball(0.5 * (coords[p_a] + coords[p_b]), 0.5 * dist(coords[p_a], coords[p_b]))
    for i in range(1, p.w + 1):
        ans.iterations = i
        c = prev.center
        p_i = aifp(ball, c, gen)
        ans.aifp_queries += 1
        far_core = max(dist(c, coords[j]) for j in core)
        if p_i is None or dist(c, coords[p_i]) <= far_core:
            ans.ball, ans.core, ans.exit = prev.expanded(1.0 / (1.0 - p.eps_a)), core, "not-farther"
            return ans
        core.append(int(p_i))
        cur = meb_approx(coords[core], p.eps_prime)
        assert all(cur.contains(coords[j]) for j in core), "coreset ball lost a point"
        assert cur.radius * (1.0 + p.eps_prime) * (1.0 + REL_TOL) >= prev.radius, "coreset radius shrank"
        if cur.radius <= (1.0 + p.eps0) * prev.radius:
            ans.ball, ans.core, ans.exit = cur.expanded(1.0 + p.eps / 3.0), core, "stalled"
            return ans
        prev = cur
    ans.ball, ans.core, ans.exit = prev.expanded(1.0 + p.eps / 3.0), core, "budget"
    return ans


def build_ameb(points: PointSet | np.ndarray, config: GlobalConfig, rng: RngStream | None = None,
               tree: AggregationTree | None = None) -> AmebIndex:
    """AIFP index at the AMEB sub-query accuracy, seeded from its own stream."""
    params = derive_ameb_params(config.eps, config.gamma, config.delta, config.profile, _ameb_accuracy(config),
                                eps0_override=engine_eps0(config))
    sub = replace(config, eps=params.eps_a, gamma=params.gamma_a, delta=params.aifp_delta,
                  caifp_accuracy=config.extra.get("ameb_caifp_accuracy"))
    if config.profile == "practical":
        sub = replace(sub, c_multiplier=config.ameb_c_multiplier)
    rng = rng if rng is not None else RngStream(config.seed).child("ameb")
    return AmebIndex(build_aifp(points, sub, rng, tree), params)


def engine_eps0(config: GlobalConfig) -> float | None:
    """Stall threshold used by the query engine.

    Practical default eps^2/72: a stall at threshold eps0 moves the center by
    at most about sqrt(2 eps0) r, which must stay below the eps/6 r share of
    the final (1 + eps/3) inflation.
    """
    if config.ameb_eps0 is not None:
        return config.ameb_eps0
    if config.profile == "practical":
        return config.eps * config.eps / 72.0
    return None


def _ameb_accuracy(config: GlobalConfig) -> float | None:
    if config.ameb_aifp_accuracy is not None:
        return config.ameb_aifp_accuracy
    if config.profile == "practical":
        return min(config.eps, config.gamma) / 3.0
    return None


def ameb_query(index: AmebIndex, ball: Ball, rng, exact_aifp: bool = False) -> AmebAnswer:
    return index.query(ball, rng, exact_aifp)
