import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ramanem.baselines import (
    FilterChain,
    FilterStage,
    apply_filter_chain,
    bin_values,
    derivative_retrieval,
    gaussian_filter,
    parse_filter_chain,
    running_average,
    spike_reject,
)
from ramanem.errors import ConfigurationError, DimensionError
from ramanem.grid import AltitudeGrid, ForwardModelConfig, LidarSignal, build_grid, molecular_density


def spike_oracle(v, threshold):
    v = list(map(float, v))
    out = list(v)
    for i in range(1, len(v) - 1):
        a, b = v[i] - v[i - 1], v[i + 1] - v[i]
        if a * b < 0 and abs(a) > threshold and abs(b) > threshold:
            out[i] = (v[i - 1] + v[i + 1]) / 2
    return out


def average_oracle(v, width):
    left = width // 2
    right = width - 1 - left
    return [np.mean(v[max(i - left, 0) : min(i + right, len(v) - 1) + 1]) for i in range(len(v))]


def signal_from_tau(grid, tau, cfg):
    P = cfg.C * molecular_density(cfg.molecular, grid.z) * np.exp(-tau) / grid.z**2
    return LidarSignal(grid, P, np.full(grid.n, 1e-3 * P.max()))


CFG = ForwardModelConfig(C=1e-20)
ALL_CHAINS = ["spike:0.5", "bin:2", "gauss:1.5", "avg:5", "spike:0.5,bin:3,gauss:2,avg:4"]


class TestParse:
    def test_round_trip(self):
        chain = parse_filter_chain("spike:0.5,bin:2,gauss:1.5,avg:3")
        assert [s.kind for s in chain.stages] == ["spike", "bin", "gauss", "avg"]
        assert str(chain) == "spike:0.5,bin:2,gauss:1.5,avg:3"
        assert parse_filter_chain(str(chain)) == chain

    def test_empty(self):
        assert parse_filter_chain("").stages == ()

    @pytest.mark.parametrize("text", ["median:3", "avg", "avg:2.5", "gauss:0", "bin:x"])
    def test_rejects(self, text):
        with pytest.raises(ConfigurationError):
            parse_filter_chain(text)


class TestSpike:
    def test_single_spike(self):
        np.testing.assert_array_equal(spike_reject([1, 5, 1], 2), [1, 1, 1])

    def test_monotone_unchanged(self):
        for t in (0.1, 1, 10):
            np.testing.assert_array_equal(spike_reject([1, 2, 3], t), [1, 2, 3])

    def test_alternating_original_reads(self):
        got = spike_reject([0, 10, 0, 10, 0], 5)
        np.testing.assert_array_equal(got, [0, 0, 10, 0, 0])
        np.testing.assert_array_equal(got, spike_oracle([0, 10, 0, 10, 0], 5))

    def test_below_threshold_kept(self):
        np.testing.assert_array_equal(spike_reject([1, 2, 1], 2), [1, 2, 1])

    @settings(max_examples=60, deadline=None)
    @given(
        arrays(np.float64, st.integers(3, 50), elements=st.floats(-100, 100)),
        st.floats(0.01, 50),
    )
    def test_oracle(self, v, t):
        np.testing.assert_allclose(spike_reject(v, t), spike_oracle(v, t), rtol=1e-15)


class TestSmoothers:
    def test_bin_block_means(self):
        np.testing.assert_array_equal(bin_values([1, 2, 3, 4], 2), [1.5, 3.5])
        np.testing.assert_array_equal(bin_values([1, 2, 3, 4, 5], 2), [1.5, 3.5])

    def test_bin_too_wide(self):
        with pytest.raises(DimensionError):
            bin_values([1, 2], 3)

    def test_gaussian_impulse(self):
        v = np.zeros(21)
        v[10] = 1.0
        k = np.exp(-0.5 * np.arange(-3, 4) ** 2)
        want = np.zeros(21)
        want[7:14] = k / k.sum()
        np.testing.assert_allclose(gaussian_filter(v, 1.0), want, rtol=1e-14, atol=1e-17)

    def test_gaussian_half_width(self):
        v = np.zeros(41)
        v[20] = 1.0
        out = gaussian_filter(v, 1.5)
        half = math.ceil(3 * 1.5)
        assert np.all(out[20 - half : 21 + half] > 0)
        assert np.all(out[: 20 - half] == 0) and np.all(out[21 + half :] == 0)

    @settings(max_examples=40, deadline=None)
    @given(arrays(np.float64, st.integers(3, 40), elements=st.floats(-10, 10)), st.integers(1, 9))
    def test_running_average_oracle(self, v, width):
        np.testing.assert_allclose(running_average(v, width), average_oracle(v, width), rtol=1e-10, atol=1e-10)

    def test_running_average_preserves_interior_mass(self, rng):
        v = np.zeros(60)
        v[20:40] = rng.uniform(0, 1, 20)
        assert running_average(v, 5).sum() == pytest.approx(v.sum(), rel=1e-13)

    @pytest.mark.parametrize("c", [0.0, 1.0, -3.5, 1e-12])
    @pytest.mark.parametrize("kind,param", [("gauss", 0.7), ("gauss", 3.0), ("avg", 1), ("avg", 6)])
    def test_constants_exact(self, c, kind, param):
        v = np.full(25, c)
        f = gaussian_filter if kind == "gauss" else running_average
        np.testing.assert_allclose(f(v, param), c, rtol=1e-14, atol=1e-300)

    def test_sigma_propagation_running_average(self):
        out, s = running_average(np.ones(10), 4, np.full(10, 2.0))
        # interior window of 4 independent points: 2/sqrt(4); at i = 0 the
        # window [0, 1] holds 2 points
        assert s[5] == pytest.approx(1.0)
        assert s[0] == pytest.approx(2.0 / np.sqrt(2))


class TestChain:
    @pytest.mark.parametrize("text", ALL_CHAINS)
    def test_constant_signal(self, text):
        g = build_grid(15, 900, 15)
        sig = LidarSignal(g, np.full(g.n, 7.25), np.full(g.n, 0.1))
        out = apply_filter_chain(sig, parse_filter_chain(text))
        np.testing.assert_allclose(out.P, 7.25, rtol=1e-14)
        assert np.all(out.sigma > 0)

    def test_bin_grid(self):
        g = build_grid(15, 60, 15)
        sig = LidarSignal(g, np.array([1.0, 2.0, 3.0, 4.0]), np.ones(4))
        out = apply_filter_chain(sig, FilterChain((FilterStage("bin", 2),)))
        np.testing.assert_array_equal(out.P, [1.5, 3.5])
        assert out.grid.dz == 30.0 and out.grid.n == 2
        np.testing.assert_allclose(out.grid.z, [22.5, 52.5])
        np.testing.assert_allclose(out.sigma, 1 / np.sqrt(2))

    def test_bin_leaves_too_few(self):
        g = build_grid(15, 60, 15)
        sig = LidarSignal(g, np.ones(4), np.ones(4))
        with pytest.raises(DimensionError):
            apply_filter_chain(sig, parse_filter_chain("bin:3"))

    def test_empty_chain_identity(self, rng):
        g = build_grid(15, 300, 15)
        sig = LidarSignal(g, rng.uniform(1, 2, g.n), np.ones(g.n))
        out = apply_filter_chain(sig, FilterChain())
        np.testing.assert_array_equal(out.P, sig.P)


class TestDerivative:
    def test_linear_optical_depth(self):
        g = build_grid(15, 3000, 15)
        a = 1.3e-4
        alpha = derivative_retrieval(signal_from_tau(g, a * g.z, CFG), CFG).alpha
        np.testing.assert_allclose(alpha, a, rtol=1e-8)

    def test_quadratic_optical_depth(self):
        g = build_grid(15, 3000, 15)
        b, c = 1e-4, 2e-8
        alpha = derivative_retrieval(signal_from_tau(g, b * g.z + c * g.z**2, CFG), CFG).alpha
        np.testing.assert_allclose(alpha, b + 2 * c * g.z, rtol=1e-8)

    def test_masked_points_skipped(self):
        g = build_grid(15, 600, 15)
        a = 1e-4
        sig = signal_from_tau(g, a * g.z, CFG)
        sig.P[10] = 0.0
        alpha = derivative_retrieval(sig, CFG).alpha
        np.testing.assert_allclose(alpha, a, rtol=1e-8)

    def test_second_order_convergence(self):
        A, L = 0.3, 1500.0
        errors = []
        for n in (200, 400, 800):
            dz = 3000.0 / n
            g = AltitudeGrid(dz, dz, n)
            tau = A * (1 - np.exp(-g.z / L)) + 1e-5 * g.z
            alpha = derivative_retrieval(signal_from_tau(g, tau, CFG), CFG).alpha
            exact = A / L * np.exp(-g.z / L) + 1e-5
            errors.append(np.max(np.abs(alpha - exact)))
        ratios = np.array(errors[:-1]) / np.array(errors[1:])
        assert np.all((ratios >= 3.5) & (ratios <= 4.5)), ratios

    def test_filtered_chain_lands_on_coarse_grid(self):
        g = build_grid(15, 3000, 15)
        a = 1e-4
        prof = derivative_retrieval(signal_from_tau(g, a * g.z, CFG), CFG, parse_filter_chain("bin:4"))
        assert prof.grid.n == 50 and prof.grid.dz == 60
        # binning averages P ~ 1/z^2 before the log, which biases the lowest
        # bins; aloft the bias is small
        upper = prof.grid.z > 1500
        np.testing.assert_allclose(prof.alpha[upper], a, rtol=1e-2)
        assert abs(prof.alpha[0] - a) > abs(prof.alpha[-1] - a)
