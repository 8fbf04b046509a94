import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ramanem.errors import ConfigurationError, DomainError
from ramanem.grid import (
    ExtinctionProfile,
    ForwardModelConfig,
    LidarSignal,
    apply_forward,
    build_grid,
    molecular_density,
    synthesize_signal,
    transform_signal,
)
from ramanem.stopping import (
    StoppingRule,
    criterion_satisfied,
    cumulative_residuals,
    predict_signal,
)


def signal_with_residuals(r):
    g = build_grid(15, 15 * len(r), 15)
    pred = LidarSignal(g, np.ones(g.n), np.ones(g.n))
    meas = LidarSignal(g, 1.0 + np.asarray(r, dtype=float), np.ones(g.n))
    return meas, pred


class TestPredict:
    def test_zero_profile(self, fwd):
        g = build_grid(15, 150, 15)
        s = predict_signal(ExtinctionProfile(g, np.zeros(g.n)), fwd)
        np.testing.assert_allclose(s.P, fwd.C * molecular_density(fwd.molecular, g.z) / g.z**2, rtol=1e-15)

    def test_matches_noise_free_synthesis(self, rng, fwd):
        g = build_grid(15, 1500, 15)
        x = ExtinctionProfile(g, rng.uniform(0, 1e-4, g.n))
        np.testing.assert_array_equal(predict_signal(x, fwd).P, synthesize_signal(x, fwd).P)

    def test_composition_recovers_hx(self, rng, fwd):
        g = build_grid(15, 1500, 15)
        x = ExtinctionProfile(g, rng.uniform(0, 1e-4, g.n))
        y = transform_signal(predict_signal(x, fwd), fwd)
        np.testing.assert_allclose(y.y, apply_forward(g, x), rtol=1e-12, atol=1e-15)


class TestCumulativeResiduals:
    def test_zero(self):
        meas, pred = signal_with_residuals([0, 0, 0])
        np.testing.assert_array_equal(cumulative_residuals(meas, pred), 0.0)

    def test_constant(self):
        np.testing.assert_allclose(cumulative_residuals(*signal_with_residuals([1, 1, 1])), [1, 1, 1])

    def test_alternating(self):
        got = cumulative_residuals(*signal_with_residuals([2, -2, 2, -2]))
        np.testing.assert_allclose(got, [2, 0, 2 / 3, 0], atol=1e-15)

    def test_valid_points_only(self):
        meas, pred = signal_with_residuals([2, 100, -2, 2])
        valid = np.array([True, False, True, True])
        np.testing.assert_allclose(cumulative_residuals(meas, pred, valid), [2, 0, 2 / 3], atol=1e-15)

    def test_sigma_must_be_positive(self):
        meas, pred = signal_with_residuals([1, 1])
        meas.sigma[1] = 0
        with pytest.raises(DomainError):
            cumulative_residuals(meas, pred)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=60))
    def test_running_mean_oracle(self, r):
        got = cumulative_residuals(*signal_with_residuals(r))
        want = [sum(r[: i + 1]) / (i + 1) for i in range(len(r))]
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-9)


class TestCriterion:
    def test_zero_passes(self):
        assert criterion_satisfied(np.zeros(10), 3)

    def test_single_violation(self):
        assert not criterion_satisfied([3.5], 3)

    def test_threshold_table(self):
        assert not criterion_satisfied(np.ones(10), 3)
        # 3/sqrt(9) = 1 exactly, so the strict bound already fails at i = 9
        assert not criterion_satisfied(np.ones(9), 3)
        assert criterion_satisfied(np.ones(8), 3)

    def test_strict_inequality(self):
        assert not criterion_satisfied([3.0], 3)

    def test_two_sided(self):
        assert criterion_satisfied([-5.0], 3)
        assert not criterion_satisfied([-5.0], 3, two_sided=True)

    def test_k_must_be_positive(self):
        with pytest.raises(ConfigurationError):
            StoppingRule(0.0, ForwardModelConfig(C=1.0))

    def test_clt_calibration_small(self):
        r = np.random.default_rng(5).standard_normal((4000, 100))
        delta = np.cumsum(r, axis=1) / np.arange(1, 101)
        p = np.mean(delta[:, 99] >= 3 / np.sqrt(100))
        assert p <= 0.005


class TestRule:
    def test_truth_passes_on_noise_free(self, fwd):
        g = build_grid(15, 1500, 15)
        x = ExtinctionProfile(g, np.full(g.n, 1e-4))
        ok, delta = StoppingRule(3, fwd).check(synthesize_signal(x, fwd), x)
        assert ok and np.all(delta == 0)

    def test_zero_profile_fails_on_attenuated_data(self, fwd):
        g = build_grid(15, 1500, 15)
        x = ExtinctionProfile(g, np.full(g.n, 1e-3))
        sig = synthesize_signal(x, fwd)
        ok, _ = StoppingRule(3, fwd, two_sided=True).check(sig, np.zeros(g.n))
        assert not ok
