import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stealth_attacks.adversarial import (
    AdversarialQuery,
    SmacRegion,
    admits_adversarial,
    admits_adversarial_many,
    critical_dimension,
    critical_dimension_for,
    sample_bound_over_N,
    sample_smac,
    shell_bound,
    shell_bound_exponential,
    theorem1_bound,
    theorem1_bound_exponential,
)
from stealth_attacks.backbone import BallClassifier
from stealth_attacks.geometry import BallSpec, substream

# 1 - 0.9**50 and 1 - exp(-5), 40-digit mpmath
SHELL_N50 = 0.99484622479267988669
EXP_N50 = 0.99326205300091453290


def region(n=50, r=0.5, **kw):
    kw.setdefault("Delta", 0.2)
    return SmacRegion(BallSpec(np.zeros(n), r), **kw)


ratios = st.floats(min_value=1e-4, max_value=0.999)
dims = st.integers(min_value=1, max_value=400)
nus = st.floats(min_value=1e-3, max_value=1.0)
caps = st.floats(min_value=1e-2, max_value=1e3)
priors = st.floats(min_value=1e-3, max_value=1.0)


class TestBounds:
    def test_theorem1_example(self):
        assert theorem1_bound(region(), AdversarialQuery(0.05, 50)) == pytest.approx(SHELL_N50, rel=1e-14)

    def test_clamped(self):
        assert theorem1_bound(region(1, nu=0.1), AdversarialQuery(0.05, 1)) == 0.0

    def test_large_n_limit(self):
        r = region(3, P_A=0.4, nu=0.7, C=5.0)
        assert theorem1_bound(r, AdversarialQuery(0.05, 5000)) == pytest.approx(0.28, rel=1e-12)

    def test_exponential_example(self):
        assert theorem1_bound_exponential(region(), AdversarialQuery(0.05, 50)) == pytest.approx(EXP_N50, rel=1e-14)

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            theorem1_bound(region(), AdversarialQuery(0.5, 50))
        with pytest.raises(ValueError):
            AdversarialQuery(0.1, 0)

    @given(priors, nus, caps, ratios, dims)
    def test_sandwich(self, P, nu, C, ratio, n):
        assert shell_bound_exponential(P, nu, C, ratio, n) <= shell_bound(P, nu, C, ratio, n)

    @given(priors, nus, caps, ratios, dims)
    def test_monotone(self, P, nu, C, ratio, n):
        b = shell_bound(P, nu, C, ratio, n)
        assert 0.0 <= b <= 1.0
        assert shell_bound(P, nu, C, ratio, n + 1) >= b
        assert shell_bound(P, nu, C, min(ratio * 1.01, 0.9999), n) >= b
        assert shell_bound(P, min(nu * 1.1, 1.0), C, ratio, n) >= b
        assert shell_bound(P, nu, C * 1.1, ratio, n) <= b


class TestCriticalDimension:
    def test_unit_constants(self):
        assert critical_dimension(region(5, nu=1.0, C=1.0), AdversarialQuery(0.05, 5)) == 1

    def test_half_mass(self):
        # (ln 0.5)/(ln 0.9) = 6.5788...
        assert critical_dimension(region(5, nu=0.5, C=1.0), AdversarialQuery(0.05, 5)) == 7

    @given(nus, caps, ratios)
    def test_defining_property(self, nu, C, ratio):
        k = critical_dimension_for(nu, C, ratio)
        assert shell_bound(1.0, nu, C, ratio, k) > 0
        if k > 1:
            assert shell_bound(1.0, nu, C, ratio, k - 1) == 0


class TestSampleBound:
    def test_examples(self):
        assert sample_bound_over_N(0.5, 10) == 0.9990234375
        assert sample_bound_over_N(0.37, 1) == pytest.approx(0.37, abs=1e-16)
        assert sample_bound_over_N(0.0, 1000) == 0.0

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            sample_bound_over_N(1.2, 3)
        with pytest.raises(ValueError):
            sample_bound_over_N(0.2, 0)


class TestSmac:
    def test_region_invariants(self):
        with pytest.raises(ValueError):
            region(3, r=1.0)
        with pytest.raises(ValueError):
            SmacRegion(BallSpec([0.5, 0.0], 0.45), Delta=0.2)
        with pytest.raises(ValueError):
            region(3, nu=0.0)

    def test_support_and_prior(self):
        r = SmacRegion(BallSpec([0.2, 0.0, 0.1], 0.4), P_A=0.3, Delta=0.2)
        N = 100_000
        X, is_A = sample_smac(r, substream(3), N)
        d = np.linalg.norm(X - r.x_A, axis=1)
        assert np.all(d[is_A] <= r.r_A)
        assert np.all(d[~is_A] > r.r_A)
        assert np.all(np.linalg.norm(X, axis=1) <= 1.0)
        assert abs(is_A.mean() - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / N)

    def test_single_draw(self):
        x, label = sample_smac(region(4), substream(1))
        assert x.shape == (4,) and label in ("A", "B")


class TestAdmits:
    def setup_method(self):
        self.r = SmacRegion(BallSpec([0.1, 0.0, -0.1], 0.5), Delta=0.2)
        self.F = self.r.classifier()
        self.q = AdversarialQuery(0.05, 3)

    def test_center_is_not_in_shell(self):
        ok, y = admits_adversarial(self.F, self.r, self.r.x_A, "A", self.q)
        assert not ok and y is None

    def test_boundary_point(self):
        x = self.r.x_A + np.array([0.0, 0.5, 0.0])
        ok, y = admits_adversarial(self.F, self.r, x, "A", self.q)
        assert ok
        assert self.F.classify(y) != self.F.classify(x)
        assert np.linalg.norm(y - x) <= self.q.epsilon + self.r.Delta

    def test_mismatched_classifier(self):
        other = BallClassifier(BallSpec([0.0, 0.0, 0.0], 0.5))
        with pytest.raises(ValueError):
            admits_adversarial(other, self.r, self.r.x_A, "A", self.q)

    def test_shell_frequency_matches_closed_form(self):
        r = region(50, r=0.5)
        q = AdversarialQuery(0.05, 50)
        N = 100_000
        X, is_A = sample_smac(r, substream(9), N)
        mask, Y = admits_adversarial_many(r.classifier(), r, X[is_A], q)
        se = math.sqrt(SHELL_N50 * (1 - SHELL_N50) / N)
        assert abs(mask.mean() - SHELL_N50) <= 3 * se

    def test_witnesses(self):
        X, is_A = sample_smac(self.r, substream(4), 5000)
        mask, Y = admits_adversarial_many(self.F, self.r, X[is_A], self.q)
        Xs, Ys = X[is_A][mask], Y[mask]
        assert len(Xs) > 100
        assert np.all(np.linalg.norm(Ys - Xs, axis=1) <= self.q.epsilon + self.r.Delta)
        assert not np.any(self.F.classify_many(Ys))
        for x, y in zip(Xs[:50], Ys[:50]):
            ok, y1 = admits_adversarial(self.F, self.r, x, "A", self.q)
            assert ok and np.allclose(y1, y, atol=1e-15)
