"""Brute-force references and exact validity checks for AIFP and AMEB answers.

Balls are closed; every boundary comparison allows a relative slack of 1e-9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from rangeagg.core import REL_TOL, Ball, PointSet, dists_to


def _coords(points) -> np.ndarray:
    return points.coords if isinstance(points, PointSet) else np.atleast_2d(np.asarray(points, dtype=np.float64))


def in_ball(coords: np.ndarray, ball: Ball, scale: float = 1.0, tol: float = REL_TOL) -> np.ndarray:
    return dists_to(coords, ball.center) <= ball.radius * scale * (1.0 + tol)


def brute_ifp(points, ball: Ball, q) -> int | None:
    """Exact farthest point from q within the ball, lowest id on ties."""
    coords = _coords(points)
    inside = np.flatnonzero(in_ball(coords, ball))
    if inside.size == 0:
        return None
    dq = dists_to(coords[inside], q)
    return int(inside[np.argmax(dq)])  # argmax keeps the first, i.e. lowest, id


def brute_bd(points, b_in: Ball, b_out: Ball) -> int | None:
    """Lowest-id point inside the closed ball b_in and not strictly inside b_out."""
    coords = _coords(points)
    ok = in_ball(coords, b_in) & (dists_to(coords, b_out.center) >= b_out.radius * (1.0 - REL_TOL))
    hit = np.flatnonzero(ok)
    return int(hit[0]) if hit.size else None


@dataclass
class MebResult:
    center: np.ndarray
    radius: float  # max distance from the center, so the ball encloses every point
    lower: float  # certified lower bound on the optimal radius
    iterations: int
    weights: np.ndarray = field(repr=False)

    @property
    def ball(self) -> Ball:
        return Ball(self.center, self.radius)


def solve_meb(points, tol: float, away_steps: bool = True, max_iter: int = 1_000_000) -> MebResult:
    """Minimum enclosing ball by Frank-Wolfe on the dual over point weights u.

    phi(u) = sum u_i |p_i|^2 - |sum u_i p_i|^2 never exceeds the squared optimal
    radius, while the farthest distance from c = sum u_i p_i never falls below
    it. Iteration stops once the two differ by at most a factor (1 + tol).
    """
    pts = _coords(points)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("cannot enclose an empty point set")
    if not tol > 0:
        raise ValueError("tolerance must be positive")
    sq = np.einsum("ij,ij->i", pts, pts)
    # start from the point farthest from the first one, a standard warm start
    u = np.zeros(n)
    u[int(np.argmax(dists_to(pts, pts[0])))] = 1.0
    it = 0
    while True:
        c = u @ pts
        d2 = np.maximum(sq - 2.0 * (pts @ c) + c @ c, 0.0)
        phi = max(float(u @ d2), 0.0)
        j = int(np.argmax(d2))
        if d2[j] <= phi * (1.0 + tol) ** 2 or it >= max_iter:
            break
        it += 1
        fw_gap = d2[j] - phi
        k = -1
        if away_steps:
            support = np.flatnonzero(u > 0)
            k = int(support[np.argmin(d2[support])])
            away_gap = phi - d2[k]
        if k >= 0 and away_gap > fw_gap and u[k] < 1.0:
            step_max = u[k] / (1.0 - u[k])
            step = min(step_max, (phi - d2[k]) / (2.0 * d2[k])) if d2[k] > 0 else step_max
            u *= 1.0 + step
            u[k] -= step
            if step == step_max:
                u[k] = 0.0
        else:
            step = min(1.0, (1.0 - phi / d2[j]) / 2.0)
            u *= 1.0 - step
            u[j] += step
        u = np.maximum(u, 0.0)
        u /= u.sum()
    c = u @ pts
    radius = float(dists_to(pts, c).max())
    return MebResult(c, radius, math.sqrt(phi), it, u)


def ref_meb(points, tol: float = 1e-6) -> Ball:
    return solve_meb(points, tol).ball


@dataclass
class ValidityReport:
    verdict: bool
    reason: str = ""
    witness: dict = field(default_factory=dict)
    tolerance: float = REL_TOL

    def __bool__(self) -> bool:
        return self.verdict


def valid_aifp(answer: int | None, q, ball: Ball, points, eps: float, gamma: float) -> ValidityReport:
    """Decide whether ``answer`` is an (eps, gamma)-AIFP of q in P within ``ball``.

    The witness set can always be taken as P within B plus the answer, so the
    check reduces to: answer lies in B(1+gamma) and is at least (1-eps) times
    as far from q as every point of P within B.
    """
    coords = _coords(points)
    inside = np.flatnonzero(in_ball(coords, ball))
    far = float(dists_to(coords[inside], q).max()) if inside.size else 0.0
    wit = {"max_dist": far, "in_range": int(inside.size)}
    if answer is None:
        return ValidityReport(inside.size == 0, "" if inside.size == 0 else "NULL but the range is non-empty", wit)
    if not 0 <= answer < coords.shape[0]:
        return ValidityReport(False, f"answer {answer} is not a point id", wit)
    p = coords[answer]
    da = float(np.linalg.norm(p - ball.center))
    dq = float(np.linalg.norm(p - np.asarray(q, dtype=np.float64)))
    wit.update(answer_dist=dq, answer_center_dist=da)
    if da > (1.0 + gamma) * ball.radius * (1.0 + REL_TOL):
        return ValidityReport(False, "answer outside B(1+gamma)", wit)
    if dq < (1.0 - eps) * far * (1.0 - REL_TOL):
        return ValidityReport(False, "answer too close to q", wit)
    return ValidityReport(True, "", wit)


def valid_ameb(answer: Ball | None, ball: Ball, points, eps: float, gamma: float, tol: float = 1e-6) -> ValidityReport:
    """Decide whether ``answer`` is an (eps, gamma)-AMEB of P within ``ball``.

    The best witness set is every point of P within B(1+gamma) that the answer
    encloses, so the answer is valid iff it encloses P within B and its radius
    is at most (1+eps) times the MEB radius of that set.
    """
    coords = _coords(points)
    inside = in_ball(coords, ball)
    if answer is None:
        ok = not inside.any()
        return ValidityReport(ok, "" if ok else "NULL but the range is non-empty", {"in_range": int(inside.sum())}, tol)
    enclosed = in_ball(coords, answer)
    wit = {"in_range": int(inside.sum()), "radius": answer.radius}
    if np.any(inside & ~enclosed):
        return ValidityReport(False, "answer misses a point of the range", wit, tol)
    witness_set = coords[in_ball(coords, ball, 1.0 + gamma) & enclosed]
    rad = solve_meb(witness_set, tol).radius if witness_set.shape[0] else 0.0
    wit.update(ref_radius=rad, witness_size=int(witness_set.shape[0]))
    if answer.radius > (1.0 + eps) * rad * (1.0 + REL_TOL) + (tol if rad == 0.0 else 0.0):
        return ValidityReport(False, "radius exceeds (1+eps) times the witness MEB", wit, tol)
    return ValidityReport(True, "", wit, tol)
