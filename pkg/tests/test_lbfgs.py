import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from panoc_nmpc import LbfgsBuffer
from problems import random_spd

E1 = np.array([1.0, 0.0])


def simulate_secant_iteration(seed, max_iter=30, tol=1e-10):
    """u <- u + d on the residual map r(u) = A (u - u*); returns error history."""
    rng = np.random.default_rng(seed)
    A, _ = random_spd(rng, 5, cond=10.0)
    u_star = rng.standard_normal(5)
    u, buf = np.zeros(5), LbfgsBuffer(10)
    r = A @ (u - u_star)
    errs = [np.linalg.norm(u - u_star)]
    for _ in range(max_iter):
        u_new = u + buf.direction(r)
        r_new = A @ (u_new - u_star)
        buf.push(u_new - u, r_new - r)
        u, r = u_new, r_new
        errs.append(np.linalg.norm(u - u_star))
        if errs[-1] <= tol:
            break
    return np.array(errs)


class TestPush:
    def test_positive_curvature_accepted(self):
        buf = LbfgsBuffer()
        assert buf.push(E1, E1) and buf.count == 1

    def test_negative_curvature_rejected(self):
        buf = LbfgsBuffer()
        buf.push(E1, E1)
        before = buf.pairs
        assert not buf.push(E1, -E1)
        assert buf.pairs == before

    def test_ring_evicts_oldest(self):
        buf = LbfgsBuffer(10)
        for k in range(11):
            assert buf.push(np.array([1.0, k]), np.array([1.0, 0.0]))
        assert buf.count == 10
        assert buf.pairs[0][0][1] == 1.0

    def test_dimension_mismatch(self):
        buf = LbfgsBuffer()
        with pytest.raises(ValueError):
            buf.push(np.ones(2), np.ones(3))
        buf.push(np.ones(2), np.ones(2))
        with pytest.raises(ValueError):
            buf.push(np.ones(3), np.ones(3))


class TestDirection:
    def test_empty_is_negative_residual(self):
        np.testing.assert_array_equal(LbfgsBuffer().direction([1.0, 0.0]), [-1.0, 0.0])

    def test_single_unit_pair(self):
        buf = LbfgsBuffer()
        buf.push(E1, E1)
        assert np.max(np.abs(buf.direction(E1) + E1)) <= 1e-12

    def test_single_scaled_pair(self):
        buf = LbfgsBuffer()
        buf.push(2 * E1, E1)
        assert np.max(np.abs(buf.direction(E1) + 2 * E1)) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**31))
    def test_secant_property(self, seed):
        rng = np.random.default_rng(seed)
        s = rng.standard_normal(6)
        y = s + 0.5 * rng.standard_normal(6)
        buf = LbfgsBuffer()
        if buf.push(s, y):
            d = buf.direction(y)
            assert np.max(np.abs(d + s)) <= 1e-12 * max(1.0, np.max(np.abs(s))) * 10

    def test_newest_pair_secant_with_memory(self):
        rng = np.random.default_rng(2)
        A, _ = random_spd(rng, 6)
        buf = LbfgsBuffer(4)
        for _ in range(6):
            s = rng.standard_normal(6)
            buf.push(s, A @ s)
        s, y, _ = buf.pairs[-1]
        np.testing.assert_allclose(-buf.direction(y), s, rtol=1e-10, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_superlinear_on_quadratic(self, seed):
        errs = simulate_secant_iteration(seed)
        assert errs[-1] <= 1e-10 and len(errs) - 1 <= 30
        ratios = errs[1:] / errs[:-1]
        assert ratios[-3:].min() < 0.1


class TestReset:
    def test_reset_then_direction(self):
        buf = LbfgsBuffer()
        buf.push(2 * E1, E1)
        np.testing.assert_array_equal(buf.reset().direction(E1), -E1)

    def test_idempotent_and_keeps_capacity(self):
        buf = LbfgsBuffer()
        buf.push(E1, E1)
        buf.reset()
        buf.reset()
        assert buf.count == 0 and buf.memory == 10
