import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rangeagg.core import RngStream
from rangeagg.lsh import (SignMap, StableHashFunction, collision_prob, eval_bit, eval_hash, make_sensitive_family,
                          sample_hash)


def test_eval_hash_examples():
    h = StableHashFunction(np.array([1.0, 0.0]), 0.5, 1.0)
    assert eval_hash(h, [2.3, 9.0]) == 2
    assert eval_hash(StableHashFunction(np.array([1.0, 0.0]), 0.0, 1.0), [0.0, 0.0]) == 0
    with pytest.raises(ValueError):
        eval_hash(h, [1.0, 2.0, 3.0])


@given(st.integers(-50, 50), st.floats(0.1, 10), st.integers(0, 2**31))
def test_translation_shifts_hash(k, w, seed):
    h = sample_hash(3, w, np.random.default_rng(seed))
    p = np.random.default_rng(seed + 1).standard_normal(3)
    a = h.direction
    shifted = p + k * w * a / (a @ a)
    assert abs(eval_hash(h, shifted) - (eval_hash(h, p) + k)) <= 1  # one cell of float slack at a boundary


def test_sample_hash_determinism_and_range():
    s = RngStream(11, ("h",))
    h1, h2 = sample_hash(2, 4.0, s), sample_hash(2, 4.0, s)
    assert np.array_equal(h1.direction, h2.direction) and h1.offset == h2.offset
    h3 = sample_hash(2, 4.0, s.child(1))
    assert not np.array_equal(h1.direction, h3.direction)
    for i in range(200):
        assert 0.0 <= sample_hash(1, 1.0, RngStream(i)).offset < 1.0


def test_collision_prob_limits():
    assert collision_prob(1e-6, 1.0) == pytest.approx(1.0, abs=1e-4)
    assert collision_prob(1e3, 1.0) < 0.01
    with pytest.raises(ValueError):
        collision_prob(0.0, 1.0)
    with pytest.raises(ValueError):
        collision_prob(1.0, -1.0)


@given(st.floats(0.01, 50), st.floats(0.01, 50))
def test_collision_prob_monotone(s1, s2):
    if s1 == s2:
        return
    lo, hi = sorted((s1, s2))
    if hi / lo < 1 + 1e-6:
        return
    assert collision_prob(lo, 1.0) > collision_prob(hi, 1.0)
    assert 0 < collision_prob(hi, 1.0) < 1


def monte_carlo_collision(s, w, draws, seed):
    # distance s along a random direction: projections differ by s * N(0,1)
    rng = np.random.default_rng(seed)
    gap = rng.standard_normal(draws) * s
    off = rng.uniform(0.0, w, draws)
    return float(np.mean(np.floor(off / w) == np.floor((off + gap) / w)))


def test_collision_prob_monte_carlo():
    v = collision_prob(1.0, 4.0)
    assert abs(monte_carlo_collision(1.0, 4.0, 10**6, 3) - v) < 0.005


def test_sensitive_family():
    fam = make_sensitive_family(1.0, 1.5, 4.0)
    assert fam.width == 4.0 and 1 > fam.p1 > fam.p2 > 0
    big = make_sensitive_family(10.0, 15.0, 4.0)
    assert big.p1 == pytest.approx(fam.p1) and big.p2 == pytest.approx(fam.p2)
    assert make_sensitive_family(1.0, 1e6).p2 < 1e-4
    with pytest.raises(ValueError):
        make_sensitive_family(1.0, 1.0)


def test_empirical_sensitivity():
    fam = make_sensitive_family(1.0, 2.0, 4.0)
    rng = np.random.default_rng(5)
    d, draws = 4, 10**5
    dirs = rng.standard_normal((draws, d))
    offs = rng.uniform(0, fam.width, draws)
    p = np.zeros(d)
    for r, target in ((fam.r_near, fam.p1), (fam.r_far, fam.p2)):
        q = np.zeros(d)
        q[0] = r
        hp = np.floor((dirs @ p + offs) / fam.width)
        hq = np.floor((dirs @ q + offs) / fam.width)
        assert abs(np.mean(hp == hq) - target) < 0.01


def test_eval_bit():
    h = StableHashFunction(np.array([1.0, 0.0]), 0.0, 1.0)
    f = SignMap(12345)
    assert eval_bit(h, f, [0.2, 0.0]) == eval_bit(h, f, [0.2, 0.0])
    assert eval_bit(h, f, [0.2, 5.0]) == eval_bit(h, f, [0.7, -3.0])  # same cell


def test_sign_map_unbiased_over_salts():
    rng = np.random.default_rng(0)
    salts = rng.integers(0, 2**63, 10**4)
    ones = sum(SignMap(int(s))(17) for s in salts)
    assert abs(ones / 10**4 - 0.5) < 0.02
