import numpy as np
import pytest

from rangeagg.caifp import Constraint, build_caifp, peel_factor, query_caifp
from rangeagg.core import Ball, RngStream
from rangeagg.oracle import brute_bd, brute_ifp, valid_aifp


def test_peel_factor_example():
    assert peel_factor(0.19, 0.1) == pytest.approx(0.1)
    assert peel_factor(0.19, 0.5) == pytest.approx(0.81**-0.5 - 1)


def test_ladder_length():
    idx = build_caifp(np.zeros((2, 2)), 0.19, 0.1, 0.2, Constraint(1.0, 1.0, 2.0), RngStream(0))
    assert idx.xi == pytest.approx(0.1) and idx.m == 8
    assert idx.radii[0] == 1.0 and idx.radii[-1] == pytest.approx(1.1**8)
    assert idx.delta_prime == pytest.approx(0.2 / 8)
    idx = build_caifp(np.zeros((2, 2)), 0.19, 0.1, 0.2, Constraint(1.0, 1.0, 1.1), RngStream(0))
    assert idx.m == 1


def test_constraint_errors():
    with pytest.raises(ValueError):
        Constraint(1.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        Constraint(0.0, 1.0, 2.0)
    idx = build_caifp(np.zeros((2, 2)), 0.19, 0.1, 0.2, Constraint(1.0, 1.0, 2.0), RngStream(0))
    with pytest.raises(ValueError):
        idx.query(Ball(np.zeros(2), 1.5), np.zeros(2), RngStream(0))


def test_empty_range_is_null():
    x = np.array([[50.0, 0.0], [0.0, 60.0]])
    idx = build_caifp(x, 0.19, 0.1, 0.2, Constraint(1.0, 0.5, 2.0), RngStream(1))
    for s in range(10):
        assert query_caifp(idx, Ball(np.zeros(2), 1.0), np.zeros(2), RngStream(s)).point is None


def test_single_candidate():
    x = np.array([[1.0, 0.0]])
    ball, q = Ball(np.zeros(2), 2.0), np.zeros(2)
    idx = build_caifp(x, 0.19, 0.1, 0.2, Constraint(2.0, 0.5, 2.0), RngStream(2))
    for s in range(30):
        ans = query_caifp(idx, ball, q, RngStream(3, (s,)))
        if ans.rungs > 0:
            assert ans.point == 0 and valid_aifp(ans.point, q, ball, x, 0.19, 0.1)


def test_two_shells():
    rng = np.random.default_rng(0)
    u = rng.standard_normal((40, 3))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    x = np.vstack([u[:20] * 0.6, u[20:] * 1.4])
    q = np.zeros(3)
    ball = Ball(q, 1.5)
    idx = build_caifp(x, 0.19, 0.1, 0.2, Constraint(1.5, 1.0, 2.0), RngStream(4))
    ok = 0
    for s in range(200):
        ans = query_caifp(idx, ball, q, RngStream(5, (s,)))
        if ans.point is not None:
            assert ball.expanded(1.1).contains(x[ans.point])
        ok += bool(valid_aifp(ans.point, q, ball, x, 0.19, 0.1))
    assert ok / 200 >= 1 - 0.2 - 0.05


def test_null_rung_bounds_the_farthest_point():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((60, 2))
    q = np.array([0.2, -0.1])
    ball = Ball(np.zeros(2), 1.5)
    idx = build_caifp(x, 0.19, 0.1, 0.2, Constraint(1.5, 0.5, 4.0), RngStream(6))
    far = np.linalg.norm(x[brute_ifp(x, ball, q)] - q)
    checked = 0
    for s in range(30):
        ans = query_caifp(idx, ball, q, RngStream(7, (s,)))
        stop = ans.bd_queries - 1  # rung that returned NULL, if any
        if ans.rungs == ans.bd_queries:
            continue
        r_i = idx.radii[stop]
        if brute_bd(x, ball, Ball(q, r_i)) is None:  # that NULL was a correct answer
            assert far <= (1 + idx.xi) * r_i
            checked += 1
    assert checked > 0
