import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import clusters
from rangeagg.ameb import AmebAnswer, coreset_loop, derive_ameb_params, engine_eps0, meb_approx
from rangeagg.core import Ball, GlobalConfig, dists_to
from rangeagg.oracle import brute_ifp, valid_ameb


def test_theory_params_example():
    p = derive_ameb_params(0.2, 0.2, 0.1, "theory")
    assert p.eps_a == p.gamma_a == pytest.approx(1 / 90)
    assert p.eps0 == pytest.approx(2.5e-5)
    assert p.eps_prime == pytest.approx(1 / (1 - 2.5e-5) - 1, rel=1e-9)
    assert p.eps_prime == pytest.approx(2.50006e-5, rel=1e-5)
    assert p.w == 6_400_000_000
    assert p.aifp_delta == pytest.approx(0.1 * 2.5e-5**2 / 16)


def test_practical_params_example():
    p = derive_ameb_params(0.2, 0.2, 0.1, "practical")
    assert p.eps0 == pytest.approx(0.0125) and p.w == 80
    assert p.aifp_delta == pytest.approx(0.1 / (2 * 82))


def test_eps_prime_clamped():
    p = derive_ameb_params(0.999, 0.5, 0.1, "practical")
    assert p.eps_prime <= 1 / 3


def test_engine_eps0():
    assert engine_eps0(GlobalConfig(eps=0.3)) == pytest.approx(0.09 / 72)
    assert engine_eps0(GlobalConfig(eps=0.3, ameb_eps0=0.01)) == 0.01
    assert engine_eps0(GlobalConfig(profile="theory")) is None


def test_params_errors():
    with pytest.raises(ValueError):
        derive_ameb_params(0.0, 0.2, 0.1)
    with pytest.raises(ValueError):
        derive_ameb_params(0.2, 0.2, 0.1, "fast")


def test_meb_approx_examples():
    b = meb_approx(np.array([[0.0, 0.0], [4.0, 0.0]]), 1e-3)
    assert np.allclose(b.center, [2.0, 0.0]) and b.radius == pytest.approx(2.0, rel=1e-6)
    tri = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, math.sqrt(3) / 2]])
    r = meb_approx(tri, 1e-3).radius
    assert 1 / math.sqrt(3) * (1 - 1e-9) <= r <= 1.001 / math.sqrt(3)
    for d in (3, 8):
        r = meb_approx(np.eye(d + 1) / math.sqrt(2), 1e-3).radius
        assert math.sqrt(d / (2 * (d + 1))) * (1 - 1e-9) <= r <= 1.001 * math.sqrt(d / (2 * (d + 1)))
    with pytest.raises(ValueError):
        meb_approx(np.zeros((0, 3)), 1e-3)


def exact_loop(x, ball, eps, gamma, eps0=None):
    params = derive_ameb_params(eps, gamma, 0.2, "practical", min(eps, gamma) / 3,
                                eps0_override=eps * eps / 72 if eps0 is None else eps0)

    def nearest(q):
        return int(np.argmin(dists_to(x, q)))

    return coreset_loop(x, nearest, lambda b, q, g: brute_ifp(x, b, q), ball, params, np.random.default_rng(0))


def test_empty_range():
    x = np.array([[10.0, 0.0]])
    ans = exact_loop(x, Ball(np.zeros(2), 1.0), 0.3, 0.3)
    assert ans.ball is None and ans.exit == "empty"


def test_isolated_pair():
    x = np.array([[0.0, 0.0], [2.0, 0.0], [50.0, 50.0]])
    ball = Ball(np.array([1.0, 0.0]), 1.5)
    ans = exact_loop(x, ball, 0.3, 0.3)
    assert ans.ball.radius <= 1.3 and valid_ameb(ans.ball, ball, x, 0.3, 0.3)


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.integers(2, 8), st.floats(0.1, 0.5))
def test_exact_pipeline_always_valid(seed, d, eps):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((150, d))
    ball = Ball(x[rng.integers(150)] * 0.5, float(rng.uniform(0.5, 3)))
    ans = exact_loop(x, ball, eps, eps)
    v = valid_ameb(ans.ball, ball, x, eps, eps)
    assert v, (ans.exit, v.reason, v.witness)
    assert len(ans.core) <= ans.iterations + 2


def test_loop_invariants_asserted():
    # an oracle that returns points outside the range still leaves a ball that encloses the coreset
    x = clusters(100, 3, 0)
    ball = Ball(x[0], 2.0)
    ans = exact_loop(x, ball, 0.3, 0.3)
    assert all(ans.ball.contains(x[j]) for j in ans.core)
    assert ans.exit in ("not-farther", "stalled", "budget")


def test_counter_fields():
    ans = AmebAnswer(None)
    assert not ans and ans.aifp_queries == 0
