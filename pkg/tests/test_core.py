import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rangeagg.core import (Ball, GlobalConfig, PointSet, RngStream, align_up, aligned_exponent, ceil_log, dist,
                           expand_ball)


def test_dist_examples():
    assert dist([0, 0], [3, 4]) == 5.0
    p = np.array([0.3, -2.0])
    assert dist(p, p) == 0.0
    assert dist(np.ones(9), np.zeros(9)) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        dist([0, 0], [0, 0, 0])


@pytest.mark.parametrize("y,r", [(1.5, 3.0), (1.0, 2.0), (0.5, 1.0)])
def test_expand_ball(y, r):
    b = Ball(np.zeros(2), 2.0)
    assert expand_ball(b, y).radius == r
    assert np.array_equal(b.expanded(y).center, b.center)


@pytest.mark.parametrize("y", [0.0, -1.0])
def test_expand_rejects_nonpositive(y):
    with pytest.raises(ValueError):
        expand_ball(Ball(np.zeros(2), 2.0), y)


def test_ball_validation():
    with pytest.raises(ValueError):
        Ball(np.zeros(2), -1.0)
    with pytest.raises(ValueError):
        Ball(np.array([np.nan, 0.0]), 1.0)
    assert Ball(np.zeros(2), 1.0).contains([1.0, 0.0])


@pytest.mark.parametrize("x,expected", [(1.2, 1.5), (1.0, 1.0), (2.3, 3.375)])
def test_align_up_examples(x, expected):
    assert align_up(x, 0.5) == pytest.approx(expected)


def test_align_up_errors():
    with pytest.raises(ValueError):
        align_up(0.0, 0.5)
    with pytest.raises(ValueError):
        align_up(1.0, 1.5)


def test_ceil_log_exact_powers():
    for t in range(-40, 41):
        assert ceil_log(1.1**t, 1.1) == t


@given(st.floats(1e-6, 1e6), st.floats(1e-3, 0.9))
def test_align_up_ratio_and_idempotence(x, lam):
    y = align_up(x, lam)
    assert 1.0 - 1e-9 <= y / x < 1.0 + lam + 1e-9
    assert align_up(y, lam) == pytest.approx(y, rel=1e-12)
    t = aligned_exponent(y, lam)
    assert (1.0 + lam) ** t == pytest.approx(y, rel=1e-9)


def test_aligned_exponent_rejects_misaligned():
    with pytest.raises(ValueError):
        aligned_exponent(1.2, 0.5)


@given(st.floats(0.01, 100), st.floats(0.01, 100), st.floats(0.01, 100))
def test_nested_expansion(r, a, b):
    ball = Ball(np.zeros(3), r)
    assert expand_ball(expand_ball(ball, a), b).radius == pytest.approx(a * b * r, rel=1e-12)


def test_rng_stream_determinism():
    s = RngStream(7, ("a", 3))
    assert np.array_equal(s.generator().random(5), RngStream(7, ("a", 3)).generator().random(5))
    assert not np.array_equal(s.child(0).generator().random(5), s.child(1).generator().random(5))
    assert s.child(2) == RngStream(7, ("a", 3, 2))


def test_pointset_fingerprint():
    x = np.arange(12.0).reshape(4, 3)
    assert PointSet(x).fingerprint() == PointSet(x.copy()).fingerprint()
    y = x.copy()
    y[0, 0] += 1e-12
    assert PointSet(x).fingerprint() != PointSet(y).fingerprint()
    assert PointSet(x).subset([2, 0]).n == 2


def test_pointset_rejects_bad_input():
    with pytest.raises(ValueError):
        PointSet(np.array([[0.0, np.inf]]))
    with pytest.raises(ValueError):
        PointSet(np.zeros((0, 2)))


@pytest.mark.parametrize("field,value", [("eps", 0.0), ("gamma", 1.0), ("delta", -0.1), ("profile", "fast")])
def test_config_validation(field, value):
    with pytest.raises(ValueError):
        GlobalConfig(**{field: value})
