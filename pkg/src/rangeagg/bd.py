"""xi-error ball-difference (BD) range queries built from labeled LSH buckets.

A BD query asks for a point of P inside B_in and outside B_out; the xi-error
version may answer with any point of B_in(1+xi) minus B_out(1/(1+xi)).

Each index holds ``c`` groups. Group ``k`` labels every point with a bit string
of ``2ab`` bits: ``b`` blocks, each made of ``a`` in-bits (sign maps of hashes
tuned to r_in) followed by ``a`` out-bits (tuned to r_out). A query computes the
label of its ball centers, draws a uniformly random label per group, and only
opens the bucket of that random label when it agrees with the query label in
enough positions of every block.

Nothing per group is stored. A group's hash functions are a pure function of
the index key and the group number, so they are regenerated whenever a query
opens the group, and an explicitly materialized table holds the same buckets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import mpmath
import numpy as np
from scipy.special import ndtri
from scipy.stats import binom

from rangeagg._kernels import label_bits, scan_buckets
from rangeagg.core import REL_TOL, Ball, PointSet, RngStream
from rangeagg.lsh import _GOLDEN, _mix64, make_sensitive_family, salt_coefficients


# beyond e^10000 the exact integer c is not materialized
_EXACT_LOG_C = 10_000.0


class CapacityError(RuntimeError):
    """A derived constant exceeds the configured build limit."""

    def __init__(self, constant: str, value, limit):
        self.constant = constant
        self.value = value
        self.limit = limit
        super().__init__(
            f"{constant}={value} exceeds the configured limit {limit}; "
            "use the practical profile or raise the limit"
        )


@dataclass(frozen=True)
class BdOverrides:
    a: int | None = None
    c_multiplier: float = 4.0
    b_offset: int = 0  # practical only: added to the formula value of b, floored at 1
    c_cap: int = 1_000_000
    theory_c_limit: int = 10_000_000


@dataclass(frozen=True)
class BdParams:
    xi: float
    n: int
    p1: float
    p2: float
    p1_prime: float
    p2_prime: float
    eta: float
    a: int
    b: int
    c: int | float  # math.inf when log_c is astronomically large
    log_c: float
    rho: float
    log_p1_dd: float  # ln P1'' (P1'' itself underflows for theory-sized a)
    log_p2_dd: float
    t1: float
    t2: float
    profile: Literal["theory", "practical"]
    c_limit: int

    @property
    def p1_dd(self) -> float:
        return math.exp(self.log_p1_dd)

    @property
    def p2_dd(self) -> float:
        return math.exp(self.log_p2_dd)

    @property
    def label_bits(self) -> int:
        return 2 * self.a * self.b

    @property
    def k1(self) -> int:
        """Minimum common in-bits per block (real threshold rounded up)."""
        return max(0, math.ceil(self.t1 - REL_TOL))

    @property
    def k2(self) -> int:
        return max(0, math.ceil(self.t2 - REL_TOL))


def overrides_from(config) -> BdOverrides:
    """BD overrides carried by a GlobalConfig."""
    return BdOverrides(a=config.a_override, c_multiplier=config.c_multiplier, b_offset=config.b_offset,
                       c_cap=config.c_cap, theory_c_limit=config.theory_c_limit)


def derive_bd_params(
    xi: float,
    n: int,
    p1: float,
    p2: float,
    profile: str = "practical",
    overrides: BdOverrides | None = None,
) -> BdParams:
    if not 0 < p2 < p1 < 1:
        raise ValueError(f"need 0 < P2 < P1 < 1, got P1={p1}, P2={p2}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not xi > 0:
        raise ValueError("xi must be positive")
    if profile not in ("theory", "practical"):
        raise ValueError(f"unknown profile {profile!r}")
    ov = overrides or BdOverrides()

    p1p = (1.0 + p1) / 2.0
    p2p = (1.0 + p2) / 2.0
    eta = (p1p - p2p) / 3.0
    if profile == "theory":
        a = math.ceil(2.0 * p1p * math.log(3.0) / eta**2)
    else:
        a = ov.a if ov.a is not None else 1
        if a < 1:
            raise ValueError("a must be >= 1")
    log_p1_dd = -2 * a * math.log(2.0) + math.log(4.0 / 9.0)
    log_p2_dd = -2 * a * math.log(2.0) - math.log(3.0)
    rho = log_p1_dd / log_p2_dd
    # b = ceil(log_{1/P2''} n); at least one block so labels are never empty
    b = max(1, math.ceil(math.log(n) / -log_p2_dd - REL_TOL)) if n > 1 else 1
    if profile == "practical":
        b = max(1, b + ov.b_offset)
    if profile == "theory":
        log_c = rho * math.log(n) - log_p1_dd
        c_limit = ov.theory_c_limit
    else:
        log_c = math.log(ov.c_multiplier) + rho * math.log(n) - log_p1_dd
        c_limit = ov.c_cap
    if log_c < 700:
        c = math.ceil(math.exp(log_c) - REL_TOL)
    elif log_c < _EXACT_LOG_C:
        c = int(mpmath.ceil(mpmath.exp(log_c)))
    else:
        c = math.inf  # too many digits to hold; only ever compared against the limit
    if profile == "practical":
        c = min(c, ov.c_cap)
    t1 = p1p * a - eta * a
    t2 = (1.0 - p2) * a / 2.0 - eta * a
    return BdParams(
        xi=xi, n=n, p1=p1, p2=p2, p1_prime=p1p, p2_prime=p2p, eta=eta,
        a=a, b=b, c=c, log_c=log_c, rho=rho, log_p1_dd=log_p1_dd, log_p2_dd=log_p2_dd,
        t1=t1, t2=t2, profile=profile, c_limit=c_limit,
    )


def boost_repetitions(delta_prime: float) -> int:
    """Independent repetitions needed for failure probability delta' when each succeeds w.p. 1/4."""
    if not 0 < delta_prime < 1:
        raise ValueError(f"delta' must lie in (0, 1), got {delta_prime}")
    return max(1, math.ceil(math.log(1.0 / delta_prime) / math.log(4.0 / 3.0) - REL_TOL))


@dataclass
class BdAnswer:
    point: int | None
    probes: int = 0
    repetitions: int = 0

    def __bool__(self) -> bool:
        return self.point is not None


def _counter_words(key: np.ndarray, ks: np.ndarray, m: int) -> np.ndarray:
    """(len(ks), m) pseudo-random uint64 words: a splitmix64 sequence seeded per group."""
    with np.errstate(over="ignore"):
        ks = np.asarray(ks, dtype=np.uint64)
        base = _mix64(_mix64(ks ^ key[0]) + key[1])
        steps = np.arange(1, m + 1, dtype=np.uint64) * _GOLDEN
        return _mix64(base[:, None] + steps[None, :])


def _unit(words: np.ndarray) -> np.ndarray:
    """Uniforms in the open interval (0, 1) from uint64 words."""
    return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


@dataclass
class _Functions:
    """Hash functions of a batch of groups, in label-bit order.

    Bit ``l`` of a label belongs to block ``l // 2a``; within a block the first
    ``a`` bits are in-bits and the next ``a`` are out-bits.
    """

    dirs: np.ndarray  # (G, L, d), already divided by the bit's width
    offs: np.ndarray  # (G, L) in [0, 1)
    mul: np.ndarray  # (G, L) uint64, odd
    add: np.ndarray  # (G, L) uint64


_FIRST_CHUNK = 8
_CHUNK = 32


class BdIndex:
    """One repetition of the BD structure for fixed radii (r_in, r_out).

    Nothing per group is stored: group ``k``'s hash functions are regenerated
    from the index key on demand, and the bucket a query opens is extracted by
    filtering points bit by bit against the wanted label.
    """

    def __init__(
        self,
        coords: np.ndarray,
        ids: np.ndarray,
        xi: float,
        r_in: float,
        r_out: float,
        params: BdParams,
        rng: RngStream,
        kappa: float = 4.0,
        coords_t: np.ndarray | None = None,
    ):
        if not (r_in > 0 and r_out > 0):
            raise ValueError("radii must be positive")
        self.coords = np.ascontiguousarray(coords, dtype=np.float64)
        self.coords_t = np.ascontiguousarray(self.coords.T) if coords_t is None else coords_t
        self.ids = np.asarray(ids, dtype=np.int64)
        self.xi = float(xi)
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        self.params = params
        self.rng = rng
        self.kappa = float(kappa)
        # H_in is (r_in, (1+xi) r_in)-sensitive, H_out ((1+xi)^-1 r_out, r_out)-sensitive
        self.w_in = self.kappa * self.r_in
        self.w_out = self.kappa * self.r_out / (1.0 + self.xi)
        self._key = np.random.SeedSequence(rng.seed, spawn_key=rng.path).generate_state(2, np.uint64)
        a, b = params.a, params.b
        self._side = np.tile(np.repeat([0, 1], a), b)  # 0 = in-bit, 1 = out-bit, per label position
        self._inv_w = np.where(self._side == 0, 1.0 / self.w_in, 1.0 / self.w_out)
        self._p_pass: float | None = None

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def c(self) -> int:
        return self.params.c

    @property
    def label_bits(self) -> int:
        return self.params.label_bits

    # -- hash functions and labels -------------------------------------------------

    def functions(self, ks) -> _Functions:
        ks = np.atleast_1d(np.asarray(ks, dtype=np.int64))
        if ks.size and (ks.min() < 0 or ks.max() >= self.c):
            raise IndexError("group index out of range")
        L, d = self.label_bits, self.d
        words = _counter_words(self._key, ks, L * (d + 3))
        g = ks.size
        normals = ndtri(_unit(words[:, : L * d])).reshape(g, L, d)
        offs = _unit(words[:, L * d : L * (d + 1)])
        mul, add = salt_coefficients(words[:, L * (d + 1) : L * (d + 2)])
        return _Functions(normals * self._inv_w[None, :, None], offs, mul, add)

    def point_labels(self, k: int, pts) -> np.ndarray:
        """Unpacked 2ab-bit labels S(p) of arbitrary points under group ``k``."""
        f = self.functions([k])
        pts = np.ascontiguousarray(np.atleast_2d(np.asarray(pts, dtype=np.float64)))
        return label_bits(pts, f.dirs, f.offs, f.mul, f.add)[0]

    def _query_labels(self, f: _Functions, o_in, o_out) -> np.ndarray:
        centers = np.ascontiguousarray(np.stack([np.asarray(o_in, dtype=np.float64), np.asarray(o_out, dtype=np.float64)]))
        bits = label_bits(centers, f.dirs, f.offs, f.mul, f.add)  # (G, 2, L)
        side = self._side[None, :]
        return np.where(side == 0, bits[:, 0, :], 1 - bits[:, 1, :]).astype(np.uint8)

    def query_label(self, k: int, o_in, o_out) -> np.ndarray:
        """Label S of a query: in-bits from o_in, complemented out-bits from o_out."""
        return self._query_labels(self.functions([k]), o_in, o_out)[0]

    def group(self, k: int) -> dict[bytes, list[int]]:
        """Buckets of group ``k``: packed label bytes -> member point ids (ascending)."""
        labels = np.packbits(self.point_labels(k, self.coords), axis=1)
        out: dict[bytes, list[int]] = {}
        for local, row in enumerate(labels):
            out.setdefault(row.tobytes(), []).append(int(self.ids[local]))
        return out

    def materialize(self) -> list[dict[bytes, list[int]]]:
        return [self.group(k) for k in range(self.c)]

    def buckets(self, f: _Functions, targets: np.ndarray) -> list[np.ndarray]:
        """Local ids (ascending) of the points whose label equals ``targets[g]`` in each group."""
        bits = label_bits(self.coords, f.dirs, f.offs, f.mul, f.add)
        return [np.flatnonzero(np.all(bits[g] == targets[g], axis=1)) for g in range(targets.shape[0])]

    # -- query ---------------------------------------------------------------------

    def _pass_probability(self) -> float:
        if self._p_pass is None:
            a, b = self.params.a, self.params.b
            q1 = float(binom.sf(self.params.k1 - 1, a, 0.5))
            q2 = float(binom.sf(self.params.k2 - 1, a, 0.5))
            self._p_pass = (q1 * q2) ** b
        return self._p_pass

    def _passing_groups(self, gen: np.random.Generator) -> np.ndarray:
        """Groups whose random label S' meets both COM thresholds in every block.

        COM(S_j, S'_j) is Binomial(a, 1/2) whatever S is, so the set of passing
        groups is a Bernoulli(p_pass) subset of 0..c-1; it is drawn by geometric
        skips instead of materializing c random labels.
        """
        c = self.c
        p = self._pass_probability()
        if p <= 0.0:
            return np.empty(0, dtype=np.int64)
        if p >= 1.0:
            return np.arange(c, dtype=np.int64)
        out = []
        pos = -1
        while True:
            batch = max(16, int(c * p * 1.2) + 16)
            idx = pos + np.cumsum(gen.geometric(p, size=batch))
            keep = idx[idx < c]
            out.append(keep)
            if keep.size < batch:
                break
            pos = int(idx[-1])
        return np.concatenate(out).astype(np.int64)

    def _random_labels_given_pass(self, s: np.ndarray, gen: np.random.Generator) -> np.ndarray:
        """Uniform labels S' conditioned on meeting the thresholds against each row of S."""
        a, b = self.params.a, self.params.b
        g = s.shape[0]
        lab = s.reshape(g, b, 2, a).copy()
        for half, k in ((0, self.params.k1), (1, self.params.k2)):
            if k >= a:
                continue  # full agreement forced
            support = np.arange(k, a + 1)
            pmf = binom.pmf(support, a, 0.5)
            com = gen.choice(support, size=(g, b), p=pmf / pmf.sum())
            keys = gen.random((g, b, a))
            # flip the (a - com) positions with the smallest random keys
            rank = np.argsort(np.argsort(keys, axis=2), axis=2)
            lab[:, :, half, :] ^= (rank < (a - com)[:, :, None]).astype(np.uint8)
        return lab.reshape(g, -1)

    def query(self, b_in: Ball, b_out: Ball, rng: RngStream | np.random.Generator) -> BdAnswer:
        if abs(b_in.radius - self.r_in) > 1e-9 * self.r_in or abs(b_out.radius - self.r_out) > 1e-9 * self.r_out:
            raise ValueError(
                f"query radii ({b_in.radius}, {b_out.radius}) do not match index radii ({self.r_in}, {self.r_out})"
            )
        gen = rng.generator() if isinstance(rng, RngStream) else rng
        passing = self._passing_groups(gen)
        cap = 3 * self.c
        hi = (1.0 + self.xi) * self.r_in * (1.0 + REL_TOL)
        lo = self.r_out / (1.0 + self.xi) * (1.0 - REL_TOL)
        o_in = np.ascontiguousarray(b_in.center)
        o_out = np.ascontiguousarray(b_out.center)
        probes = 0
        # groups are opened in ascending order; hash functions, query labels and
        # random labels are produced chunk by chunk so a hit stops all work
        start = 0
        while start < passing.size:
            stop = start + (_FIRST_CHUNK if start == 0 else _CHUNK)
            f = self.functions(passing[start:stop])
            start = stop
            s_prime = self._random_labels_given_pass(self._query_labels(f, o_in, o_out), gen)
            hit, used = scan_buckets(
                self.coords, self.coords_t, f.dirs, f.offs, f.mul, f.add, s_prime, o_in, o_out, hi, lo, cap - probes
            )
            probes += int(used)
            if hit >= 0:
                return BdAnswer(int(self.ids[hit]), probes, 1)
            if probes >= cap:
                break
        return BdAnswer(None, probes, 1)


def create_buckets(
    points: PointSet | np.ndarray,
    xi: float,
    r_in: float,
    r_out: float,
    params: BdParams,
    rng: RngStream,
    kappa: float = 4.0,
    ids: np.ndarray | None = None,
) -> BdIndex:
    """Build one BD index; refuses theory-profile parameters beyond the capacity limit."""
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[0] < 1:
        raise ValueError("need a non-empty 2-D point array")
    if params.c > params.c_limit:
        raise CapacityError("c", params.c if params.log_c < 50 else f"e^{params.log_c:.1f}", params.c_limit)
    if ids is None:
        ids = np.arange(coords.shape[0])
    return BdIndex(coords, ids, xi, r_in, r_out, params, rng, kappa)


def bd_query(index: BdIndex, b_in: Ball, b_out: Ball, rng) -> BdAnswer:
    return index.query(b_in, b_out, rng)


class BoostedBd:
    """R independent repetitions of a BD index over the same points and radii.

    Repetition ``r`` is created on first use from stream ``rng.child(r)``.
    """

    def __init__(self, coords, ids, xi, r_in, r_out, params: BdParams, repetitions: int, rng: RngStream, kappa=4.0,
                 coords_t=None):
        if params.c > params.c_limit:
            raise CapacityError("c", params.c if params.log_c < 50 else f"e^{params.log_c:.1f}", params.c_limit)
        self.coords = coords
        self.ids = np.asarray(ids, dtype=np.int64)
        self.xi = xi
        self.r_in = r_in
        self.r_out = r_out
        self.params = params
        self.repetitions = int(repetitions)
        self.rng = rng
        self.kappa = kappa
        self.coords_t = np.ascontiguousarray(np.asarray(coords, dtype=np.float64).T) if coords_t is None else coords_t
        self._reps: list[BdIndex | None] = [None] * self.repetitions

    def __len__(self) -> int:
        return self.repetitions

    def __getitem__(self, r: int) -> BdIndex:
        idx = self._reps[r]
        if idx is None:
            idx = BdIndex(self.coords, self.ids, self.xi, self.r_in, self.r_out, self.params, self.rng.child(r),
                          self.kappa, self.coords_t)
            self._reps[r] = idx
        return idx

    def __iter__(self):
        for r in range(self.repetitions):
            yield self[r]


def build_boosted(
    points: PointSet | np.ndarray,
    xi: float,
    r_in: float,
    r_out: float,
    delta_prime: float,
    rng: RngStream,
    profile: str = "practical",
    overrides: BdOverrides | None = None,
    kappa: float = 4.0,
    ids: np.ndarray | None = None,
) -> BoostedBd:
    coords = points.coords if isinstance(points, PointSet) else np.asarray(points, dtype=np.float64)
    fam = make_sensitive_family(1.0, 1.0 + xi, kappa)
    params = derive_bd_params(xi, coords.shape[0], fam.p1, fam.p2, profile, overrides)
    if ids is None:
        ids = np.arange(coords.shape[0])
    return BoostedBd(coords, ids, xi, r_in, r_out, params, boost_repetitions(delta_prime), rng, kappa)


def bd_query_boosted(indices: BoostedBd | Sequence[BdIndex], b_in: Ball, b_out: Ball, rng) -> BdAnswer:
    """Query repetitions in turn and return the first non-NULL answer."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    probes = 0
    used = 0
    for idx in indices:
        ans = idx.query(b_in, b_out, gen)
        probes += ans.probes
        used += 1
        if ans.point is not None:
            return BdAnswer(ans.point, probes, used)
    return BdAnswer(None, probes, used)
