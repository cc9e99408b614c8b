import dataclasses

import numpy as np
import pytest

from blindchan import (
    FrequencyGrid,
    Observation,
    ObservationFormatError,
    PathParameterSet,
    build_channel_matrix,
    build_exponential_matrix,
    canonicalize,
    default_array,
    khatri_rao_channel_matrix,
    make_signal,
    read_observation,
    read_truth_sidecar,
    synthesize,
    vec_channel,
    write_observation,
    write_truth_sidecar,
)
from conftest import random_params


def single_path(tau=0.0, wh=1.0 + 0j, wv=0.0 + 0j, az=0.0, el=0.0):
    return PathParameterSet([az], [el], [wh], [wv], [tau])


class AllOnesPattern:
    """Stub pattern source: every port responds with 1 to any direction."""

    port_count = 2

    def response(self, phi, theta):
        n = np.atleast_1d(phi).size
        ones = np.ones((self.port_count, n), dtype=complex)
        if n == 1:
            return ones[:, 0], ones[:, 0]
        return ones, ones


class TestExponentialMatrix:
    def test_zero_delay_all_ones(self):
        e = build_exponential_matrix(single_path(tau=0.0), FrequencyGrid(4))
        np.testing.assert_array_equal(e, np.ones((2, 4), complex))

    def test_half_delay_alternates(self):
        e = build_exponential_matrix(single_path(tau=0.5), FrequencyGrid(4))
        np.testing.assert_allclose(e, np.tile([1, -1, 1, -1], (2, 1)), atol=1e-12)

    def test_one_ninth_delay_full_turn_at_bin_nine(self):
        e = build_exponential_matrix(single_path(tau=1.0 / 9.0), FrequencyGrid(128))
        assert e[0, 9] == pytest.approx(1.0, abs=1e-12)
        assert e[1, 9] == pytest.approx(1.0, abs=1e-12)

    def test_rows_come_in_pairs(self):
        params = PathParameterSet([0.1, 0.2], [0.0, 0.1], [1, 1], [0, 1j], [0.0, 0.3])
        e = build_exponential_matrix(params, FrequencyGrid(8))
        assert e.shape == (4, 8)
        np.testing.assert_array_equal(e[0], e[1])
        np.testing.assert_array_equal(e[2], e[3])


class TestChannelMatrix:
    def test_single_path_zero_delay_repeats_steering_column(self, array, grid128):
        params = single_path(az=0.7, el=0.3)
        h = build_channel_matrix(params, array, grid128)
        from blindchan import build_steering_matrix

        b = build_steering_matrix(array, [(0.7, 0.3)])
        for k in range(0, 128, 17):
            np.testing.assert_allclose(h[:, k], b[:, 0], atol=1e-14)

    def test_linear_in_weights(self, array, grid128):
        params = single_path(az=0.7, el=0.3, wh=1.0, wv=0.5j, tau=0.2)
        scaled = dataclasses.replace(
            params, weight_h=params.weight_h * (2 - 1j), weight_v=params.weight_v * (2 - 1j)
        )
        h1 = build_channel_matrix(params, array, grid128)
        h2 = build_channel_matrix(scaled, array, grid128)
        np.testing.assert_allclose(h2, (2 - 1j) * h1, atol=1e-12)

    def test_superposition(self, array, grid128):
        rng = np.random.default_rng(1)
        two = random_params(rng, 2)
        one_a = PathParameterSet(two.azimuth[:1], two.elevation[:1], two.weight_h[:1],
                                 two.weight_v[:1], two.delay[:1])
        one_b = PathParameterSet(two.azimuth[1:], two.elevation[1:], two.weight_h[1:],
                                 two.weight_v[1:], [two.delay[1]])
        h = build_channel_matrix(two, array, grid128)
        ha = build_channel_matrix(one_a, array, grid128)
        hb = build_channel_matrix(one_b, array, grid128)
        np.testing.assert_allclose(h, ha + hb, atol=1e-12)


class TestVecChannel:
    def test_all_ones_tiny_instance(self):
        params = single_path(wh=1.0, wv=0.0, tau=0.0)
        grid = FrequencyGrid(2)
        h = vec_channel(params, AllOnesPattern(), grid)
        np.testing.assert_allclose(h, np.ones(4, complex), atol=1e-15)

    def test_khatri_rao_equals_vec_of_product(self, array):
        rng = np.random.default_rng(2)
        params = random_params(rng, 2)
        grid = FrequencyGrid(4)
        small = default_array()
        h = vec_channel(params, small, grid)
        m = khatri_rao_channel_matrix(params, small, grid)
        np.testing.assert_allclose(m @ params.weights_interleaved(), h, atol=1e-13)

    def test_zero_weights_zero_channel(self, array, grid128):
        params = single_path(wh=0.0, wv=0.0)
        assert np.all(vec_channel(params, array, grid128) == 0)


class TestMakeSignal:
    def test_flat(self):
        s = make_signal("flat", FrequencyGrid(4))
        np.testing.assert_array_equal(s.values, np.ones(4, complex))

    def test_single_sample_pulse_is_flat(self):
        s = make_signal("rect_pulse", FrequencyGrid(8), duty=1.0 / 8.0)
        np.testing.assert_allclose(s.values, np.ones(8, complex), atol=1e-12)

    def test_half_duty_boxcar_spectrum(self):
        # Independent oracle: closed-form boxcar DFT (geometric sum).
        k_bins = 8
        n_on = 4
        s = make_signal("rect_pulse", FrequencyGrid(k_bins), duty=0.5)
        assert s.values[0] == pytest.approx(4.0)
        k = np.arange(1, k_bins)
        expected = np.exp(-1j * np.pi * k * (n_on - 1) / k_bins) * (
            np.sin(np.pi * k * n_on / k_bins) / np.sin(np.pi * k / k_bins)
        )
        np.testing.assert_allclose(s.values[1:], expected, atol=1e-12)
        zeros = np.flatnonzero(np.abs(s.values) < 1e-12)
        np.testing.assert_array_equal(zeros, [2, 4, 6])

    def test_duty_out_of_range(self):
        with pytest.raises(ValueError, match="duty"):
            make_signal("rect_pulse", FrequencyGrid(8), duty=0.0)
        with pytest.raises(ValueError, match="duty"):
            make_signal("rect_pulse", FrequencyGrid(8), duty=1.5)

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="kind"):
            make_signal("chirp", FrequencyGrid(8))


class TestSynthesize:
    def test_infinite_snr_is_exact(self, truth, array, grid128):
        sig = make_signal("flat", grid128)
        obs = synthesize(truth, array, grid128, sig, float("inf"), seed=3)
        h = build_channel_matrix(truth, array, grid128)
        np.testing.assert_array_equal(obs.y, h * sig.values[None, :])
        assert obs.noise_variance == 0.0

    def test_seed_determinism(self, truth, array, grid128):
        sig = make_signal("flat", grid128)
        a = synthesize(truth, array, grid128, sig, 10.0, seed=42)
        b = synthesize(truth, array, grid128, sig, 10.0, seed=42)
        np.testing.assert_array_equal(a.y, b.y)
        c = synthesize(truth, array, grid128, sig, 10.0, seed=43)
        assert np.any(c.y != a.y)

    def test_zero_db_noise_ratio(self, truth, array, grid128):
        sig = make_signal("flat", grid128)
        x = build_channel_matrix(truth, array, grid128) * sig.values[None, :]
        x_power = np.sum(np.abs(x) ** 2)
        ratios = []
        for seed in range(100):
            obs = synthesize(truth, array, grid128, sig, 0.0, seed=seed)
            ratios.append(np.sum(np.abs(obs.y - x) ** 2) / x_power)
        assert 0.9 < np.mean(ratios) < 1.1

    def test_noise_power_expectation(self, truth, array, grid128):
        sig = make_signal("flat", grid128)
        total = 0.0
        n_seeds = 200
        sigma2 = None
        for seed in range(n_seeds):
            obs = synthesize(truth, array, grid128, sig, 6.0, seed=seed)
            x = build_channel_matrix(truth, array, grid128) * sig.values[None, :]
            total += np.sum(np.abs(obs.y - x) ** 2)
            sigma2 = obs.noise_variance
        expected = 6 * 128 * sigma2
        assert abs(total / n_seeds - expected) < 0.05 * expected


class TestGaugeInvariance:
    def test_common_delay_shift_with_signal_phase(self, truth, array, grid128):
        base = make_signal("flat", grid128)
        x0 = build_channel_matrix(truth, array, grid128) * base.values[None, :]
        shift = 0.2
        shifted = dataclasses.replace(truth, delay=truth.delay + shift)
        k = np.arange(grid128.k)
        from blindchan import TransmitterSignal

        sig = TransmitterSignal(base.values * np.exp(2j * np.pi * k * shift))
        x1 = build_channel_matrix(shifted, array, grid128) * sig.values[None, :]
        np.testing.assert_allclose(x1, x0, atol=1e-12)

    def test_weight_scale_against_signal_scale(self, truth, array, grid128):
        c = 0.7 - 1.3j
        base = make_signal("flat", grid128)
        x0 = build_channel_matrix(truth, array, grid128) * base.values[None, :]
        scaled = dataclasses.replace(truth, weight_h=truth.weight_h * c,
                                     weight_v=truth.weight_v * c)
        from blindchan import TransmitterSignal

        sig = TransmitterSignal(base.values / c)
        x1 = build_channel_matrix(scaled, array, grid128) * sig.values[None, :]
        np.testing.assert_allclose(x1, x0, atol=1e-12)


class TestCanonicalize:
    def test_sort_and_shift(self):
        params = PathParameterSet([0.1, 0.2], [0.0, 0.1], [1, 2], [3, 4], [0.3, 0.1])
        canon = canonicalize(params)
        np.testing.assert_allclose(canon.delay, [0.0, 0.2])
        assert canon.azimuth[0] == 0.2  # paths reordered together
        assert canon.weight_h[0] == 2

    def test_idempotent(self):
        params = PathParameterSet([0.1, 0.2], [0.0, 0.1], [1, 2], [3, 4], [0.0, 0.2])
        canon = canonicalize(params)
        again = canonicalize(canon)
        np.testing.assert_array_equal(canon.delay, again.delay)
        np.testing.assert_array_equal(canon.azimuth, again.azimuth)

    def test_tie_keeps_original_order(self):
        params = PathParameterSet([0.1, 0.2], [0.0, 0.1], [1, 2], [3, 4], [0.5, 0.5])
        canon = canonicalize(params)
        assert canon.azimuth[0] == 0.1 and canon.azimuth[1] == 0.2

    def test_first_delay_exactly_zero(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            params = random_params(rng, 3)
            shifted = dataclasses.replace(params, delay=params.delay + rng.uniform(0, 0.1))
            assert canonicalize(shifted).delay[0] == 0.0


class TestPathParameterSet:
    def test_rejects_mismatched_lengths(self):
        with pytest.raises(ValueError):
            PathParameterSet([0.1], [0.0, 0.1], [1], [0], [0.0])

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            PathParameterSet([np.inf], [0.0], [1], [0], [0.0])
        with pytest.raises(ValueError):
            PathParameterSet([0.0], [0.0], [np.nan + 0j], [0], [0.0])

    def test_weights_interleaved_order(self):
        params = PathParameterSet([0.1, 0.2], [0, 0], [1, 3], [2, 4], [0, 0.1])
        np.testing.assert_array_equal(params.weights_interleaved(), [1, 2, 3, 4])


class TestObservationFile:
    def test_round_trip(self, truth, array, grid128, tmp_path):
        sig = make_signal("flat", grid128)
        obs = synthesize(truth, array, grid128, sig, 12.0, seed=5)
        target = tmp_path / "obs.bpob"
        write_observation(target, obs)
        back = read_observation(target)
        np.testing.assert_array_equal(back.y, obs.y)
        assert back.noise_variance == obs.noise_variance
        assert back.grid.k == 128

    def test_file_size(self, truth, array, grid128, tmp_path):
        sig = make_signal("flat", grid128)
        obs = synthesize(truth, array, grid128, sig, float("inf"), seed=0)
        target = tmp_path / "obs.bpob"
        write_observation(target, obs)
        assert target.stat().st_size == 20 + 6 * 128 * 16

    def test_truncated_rejected(self, truth, array, grid128, tmp_path):
        sig = make_signal("flat", grid128)
        obs = synthesize(truth, array, grid128, sig, float("inf"), seed=0)
        target = tmp_path / "obs.bpob"
        write_observation(target, obs)
        data = target.read_bytes()
        target.write_bytes(data[: len(data) // 2])
        with pytest.raises(ObservationFormatError, match="bytes"):
            read_observation(target)

    def test_bad_magic_rejected(self, tmp_path):
        target = tmp_path / "obs.bpob"
        target.write_bytes(b"NOPE" + bytes(32))
        with pytest.raises(ObservationFormatError, match="magic"):
            read_observation(target)

    def test_truth_sidecar_round_trip(self, truth, tmp_path):
        target = tmp_path / "obs.bpob.truth.json"
        write_truth_sidecar(target, truth)
        back = read_truth_sidecar(target)
        np.testing.assert_allclose(back.azimuth, truth.azimuth, atol=1e-12)
        np.testing.assert_allclose(back.weight_v, truth.weight_v, atol=1e-12)
        np.testing.assert_allclose(back.delay, truth.delay, atol=1e-12)


def test_frequency_grid_identifiability():
    FrequencyGrid(8).check_identifiable(4)
    with pytest.raises(ValueError, match="K >= 2P"):
        FrequencyGrid(6).check_identifiable(4)
    with pytest.raises(ValueError):
        FrequencyGrid(1)


def test_observation_dimension_check(grid128):
    with pytest.raises(ValueError):
        Observation(np.zeros((6, 64), complex), grid128, 0.0)
