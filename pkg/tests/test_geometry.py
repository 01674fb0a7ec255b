import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from stealth_attacks import geometry as geo
from stealth_attacks.geometry import (
    BallSpec,
    clamp_to_unit_ball,
    derive_seed,
    inner,
    sample_uniform_ball,
    sample_uniform_sphere,
    substream,
)

# E||x||^2 = int_0^1 r^2 n r^(n-1) dr, evaluated by scipy.integrate.quad for n=5
E_R2_N5 = 0.7142857142857143

finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)


class TestInner:
    def test_examples(self):
        assert inner([1, 0], [0, 1]) == 0
        assert inner([0.8, 0], [0.8, 0]) == pytest.approx(0.64, rel=1e-15)
        assert inner([0.3, 0.4], [0.3, 0.4]) == pytest.approx(0.25, rel=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            inner([1, 2], [1, 2, 3])

    def test_zero_vector(self):
        assert inner(np.zeros(4), np.zeros(4)) == 0.0

    @given(st.lists(finite, min_size=1, max_size=6).flatmap(
        lambda a: st.tuples(st.just(a), st.lists(finite, min_size=len(a), max_size=len(a)))))
    def test_symmetric_and_nonnegative(self, ab):
        a, b = ab
        assert inner(a, b) == inner(b, a)
        assert inner(a, a) >= 0
        if not any(a):
            assert inner(a, a) == 0.0


class TestBallSampler:
    def test_support(self, rng):
        X = sample_uniform_ball(7, 1.0, rng=rng, size=5000)
        assert np.all(np.linalg.norm(X, axis=1) <= 1.0)
        c = np.full(3, 0.1)
        Y = sample_uniform_ball(3, 0.4, c, rng=rng, size=2000)
        assert np.all(np.linalg.norm(Y - c, axis=1) <= 0.4)

    def test_single_draw_shape(self, rng):
        assert sample_uniform_ball(4, rng=rng).shape == (4,)

    def test_bad_radius(self, rng):
        with pytest.raises(ValueError):
            sample_uniform_ball(3, 0.0, rng=rng)
        with pytest.raises(ValueError):
            sample_uniform_ball(3, -1.0, rng=rng)

    def test_mean_squared_norm(self, rng):
        N = 100_000
        r2 = np.sum(sample_uniform_ball(5, rng=rng, size=N) ** 2, axis=1)
        se = r2.std() / math.sqrt(N)
        assert abs(r2.mean() - E_R2_N5) <= 3 * se

    def test_one_dimensional_is_uniform(self, rng):
        x = sample_uniform_ball(1, rng=rng, size=20_000)[:, 0]
        assert stats.kstest(x, stats.uniform(loc=-1, scale=2).cdf).pvalue > 0.01

    @pytest.mark.parametrize("n", [2, 5, 10])
    def test_radial_cdf(self, n):
        rng = substream(11, n)
        N = 100_000
        r = np.linalg.norm(sample_uniform_ball(n, rng=rng, size=N), axis=1)
        p = 0.5**n
        frac = np.mean(r <= 0.5)
        assert abs(frac - p) <= 3 * math.sqrt(p * (1 - p) / N)

    def test_reproducible(self):
        a = sample_uniform_ball(6, rng=substream(5, 1, 2), size=100)
        b = sample_uniform_ball(6, rng=substream(5, 1, 2), size=100)
        assert a.tobytes() == b.tobytes()
        c = sample_uniform_ball(6, rng=substream(5, 1, 3), size=100)
        assert a.tobytes() != c.tobytes()


class TestSphereSampler:
    def test_on_sphere(self, rng):
        c = np.array([0.2, -0.1, 0.3])
        Y = sample_uniform_sphere(3, 0.5, c, rng=rng, size=5000)
        assert np.max(np.abs(np.linalg.norm(Y - c, axis=1) - 0.5)) <= 1e-12

    def test_uniform_angle(self, rng):
        Y = sample_uniform_sphere(2, rng=rng, size=36_000)
        theta = np.mod(np.arctan2(Y[:, 1], Y[:, 0]), 2 * np.pi)
        counts, _ = np.histogram(theta, bins=36, range=(0, 2 * np.pi))
        assert stats.chisquare(counts).pvalue > 0.01

    def test_coordinate_means(self, rng):
        N = 50_000
        Y = sample_uniform_sphere(4, rng=rng, size=N)
        se = 1 / math.sqrt(4 * N)  # each coordinate has variance 1/n
        assert np.all(np.abs(Y.mean(axis=0)) <= 4 * se)

    def test_bad_radius(self, rng):
        with pytest.raises(ValueError):
            sample_uniform_sphere(2, 0.0, rng=rng)


class TestBallMembership:
    def test_clamp_spillover(self):
        geo.clamp_counter.reset()
        x = np.array([1.0 + 5e-13, 0.0])
        y = clamp_to_unit_ball(x)
        assert np.linalg.norm(y) <= 1.0
        assert geo.clamp_counter.count == 1

    def test_clamp_rejects_far_points(self):
        with pytest.raises(ValueError):
            clamp_to_unit_ball([1.1, 0.0])

    def test_ballspec(self):
        b = BallSpec([0.2, 0.0], 0.5)
        assert b.inside_unit_ball() and b.contains([0.6, 0.0])
        assert not BallSpec([0.6, 0.0], 0.5).inside_unit_ball()
        with pytest.raises(ValueError):
            BallSpec([0.0], 0.0)


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=2**64 - 1), st.integers(min_value=0, max_value=1000))
def test_derive_seed_is_deterministic(seed, k):
    assert derive_seed(seed, k) == derive_seed(seed, k)
    assert 0 <= derive_seed(seed, k) < 2**64
