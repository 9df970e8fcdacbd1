"""Channel synthesis: array responses, pulses, delay taps, DFT, scatterers."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ristwin import (
    ChannelParams,
    RayCluster,
    RisPanel,
    ScattererField,
    array_response,
    clusters_for_link,
    delay_channel,
    freq_channel,
    link_channel,
    pulse,
)
from ristwin.channel import delay_taps_from_freq, read_channel_dump, write_channel_dump
from ristwin.geometry import SPEED_OF_LIGHT

from conftest import make_mini_scenario

angles = st.floats(0, 2 * np.pi - 1e-9, allow_nan=False)


def make_params(m=2, d=8, t_s=1e-8) -> ChannelParams:
    return ChannelParams(m_clusters=m, n_taps=d, sample_period=t_s)


class TestArrayResponse:
    def test_broadside_is_all_ones(self):
        panel = RisPanel(center=(0, 0, 0), n1=4, n2=4)
        np.testing.assert_allclose(array_response(1.234, 0.0, panel), np.ones(16))

    def test_single_element(self):
        panel = RisPanel(center=(0, 0, 0), n1=1, n2=1)
        np.testing.assert_allclose(array_response(0.7, 0.9, panel), [1.0])

    def test_endfire_two_element_hand_case(self):
        panel = RisPanel(center=(0, 0, 0), n1=2, n2=1, spacing=0.5)
        resp = array_response(0.0, np.pi / 2, panel)
        np.testing.assert_allclose(resp, [1.0, -1.0], atol=1e-12)

    @given(theta=angles, phi=angles, n1=st.integers(1, 6), n2=st.integers(1, 6))
    @settings(max_examples=40)
    def test_unit_modulus(self, theta, phi, n1, n2):
        panel = RisPanel(center=(0, 0, 0), n1=n1, n2=n2)
        resp = array_response(theta, phi, panel)
        np.testing.assert_allclose(np.abs(resp), 1.0, atol=1e-12)


class TestPulse:
    def test_peak_at_zero(self):
        assert pulse(0.0, 1e-8) == 1.0

    def test_zeros_at_integer_multiples(self):
        for k in (1, -1, 2, 5):
            assert pulse(k * 1e-8, 1e-8) == pytest.approx(0.0, abs=1e-12)

    def test_half_period_value(self):
        assert pulse(0.5e-8, 1e-8) == pytest.approx(2 / np.pi, rel=1e-12)

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError):
            pulse(0.0, 0.0)


class TestDelayChannel:
    def test_aligned_single_cluster(self):
        # g=1 at tau=0, broadside, L=N: tap 0 is all ones, later taps vanish
        panel = RisPanel(center=(0, 0, 0), n1=2, n2=2)
        params = ChannelParams(m_clusters=1, n_taps=4, sample_period=1e-8, path_loss=4.0)
        taps = delay_channel(
            [RayCluster(azimuth=0.0, elevation=0.0, gain=1.0, delay=0.0)], params, panel
        )
        np.testing.assert_allclose(taps[0], np.ones(4), atol=1e-12)
        np.testing.assert_allclose(taps[1:], 0.0, atol=1e-12)

    def test_zero_gain_gives_zero_matrix(self):
        panel = RisPanel(center=(0, 0, 0), n1=2, n2=2)
        clusters = [
            RayCluster(azimuth=0.3, elevation=0.4, gain=0.0, delay=1e-9),
            RayCluster(azimuth=1.3, elevation=0.2, gain=0.0, delay=3e-9),
        ]
        taps = delay_channel(clusters, make_params(), panel)
        np.testing.assert_array_equal(taps, np.zeros_like(taps))

    @given(data=st.data())
    @settings(max_examples=25)
    def test_superposition_over_clusters(self, data):
        panel = RisPanel(center=(0, 0, 0), n1=3, n2=2)
        params = make_params()

        def rand_cluster():
            return RayCluster(
                azimuth=data.draw(angles),
                elevation=data.draw(angles),
                gain=complex(
                    data.draw(st.floats(-2, 2, allow_nan=False)),
                    data.draw(st.floats(-2, 2, allow_nan=False)),
                ),
                delay=data.draw(st.floats(0, 5e-8, allow_nan=False)),
            )

        c1, c2 = rand_cluster(), rand_cluster()
        both = delay_channel([c1, c2], params, panel)
        separate = delay_channel([c1], params, panel) + delay_channel([c2], params, panel)
        np.testing.assert_allclose(both, separate, rtol=1e-10, atol=1e-12)

    def test_empty_clusters_rejected(self):
        panel = RisPanel(center=(0, 0, 0), n1=2, n2=2)
        with pytest.raises(ValueError):
            delay_channel([], make_params(), panel)


class TestFreqChannel:
    def test_single_tap_at_zero_is_flat(self, rng):
        taps = (rng.normal(size=(1, 6)) + 1j * rng.normal(size=(1, 6)))
        h = freq_channel(taps, k=8)
        for k in range(8):
            np.testing.assert_allclose(h[k], taps[0], rtol=1e-12)

    def test_single_tap_at_one_twists_linearly(self, rng):
        taps = np.zeros((2, 3), dtype=complex)
        taps[1] = rng.normal(size=3) + 1j * rng.normal(size=3)
        k_total = 8
        h = freq_channel(taps, k=k_total)
        for k in range(k_total):
            np.testing.assert_allclose(
                h[k], taps[1] * np.exp(-2j * np.pi * k / k_total), rtol=1e-12
            )

    @given(d=st.integers(1, 16), k_extra=st.integers(0, 16))
    @settings(max_examples=30)
    def test_idft_round_trip(self, d, k_extra):
        k = d + k_extra
        rng = np.random.default_rng(d * 31 + k_extra)
        taps = rng.normal(size=(d, 4)) + 1j * rng.normal(size=(d, 4))
        h = freq_channel(taps, k)
        back = delay_taps_from_freq(h, d)
        assert np.max(np.abs(back - taps)) < 1e-10
        if k_extra:
            # the zero padding must come back as zeros too
            full = np.fft.ifft(h, axis=0)
            assert np.max(np.abs(full[d:])) < 1e-10

    def test_rejects_more_taps_than_subcarriers(self):
        with pytest.raises(ValueError, match="exceeds"):
            freq_channel(np.zeros((9, 2), dtype=complex), k=8)


class TestClustersForLink:
    def setup_method(self):
        self.scenario = make_mini_scenario()
        self.panel = self.scenario.ris
        self.field = ScattererField.from_scenario(self.scenario, count=16)

    def test_direct_path_only(self):
        params = ChannelParams(m_clusters=1, n_taps=8, sample_period=1e-8)
        a = np.array([2.0, 3.0, 1.0])
        rays = clusters_for_link(
            a, self.panel.center_arr, self.field, params, self.panel, 0.0857
        )
        assert len(rays) == 1
        expected = np.linalg.norm(a - self.panel.center_arr) / SPEED_OF_LIGHT
        assert rays[0].delay == pytest.approx(expected, rel=1e-12)

    def test_deterministic_for_same_inputs(self):
        params = make_params(m=4)
        a = np.array([1.0, 2.0, 1.5])
        r1 = clusters_for_link(a, self.panel.center_arr, self.field, params, self.panel, 0.0857)
        r2 = clusters_for_link(a, self.panel.center_arr, self.field, params, self.panel, 0.0857)
        assert r1 == r2

    def test_delay_continuity_under_small_moves(self):
        params = make_params(m=4)
        a = np.array([1.0, 2.0, 1.5])
        eps = 1e-4
        r1 = clusters_for_link(a, self.panel.center_arr, self.field, params, self.panel, 0.0857)
        r2 = clusters_for_link(
            a + [eps, 0, 0], self.panel.center_arr, self.field, params, self.panel, 0.0857
        )
        for c1, c2 in zip(r1, r2):
            assert abs(c1.delay - c2.delay) <= 2 * eps / SPEED_OF_LIGHT

    def test_gain_magnitude_decays_with_distance(self):
        params = ChannelParams(m_clusters=1, n_taps=8, sample_period=1e-8)
        near = clusters_for_link(
            np.array([0.0, 1.0, 1.2]), self.panel.center_arr, self.field, params, self.panel, 0.0857
        )
        far = clusters_for_link(
            np.array([0.0, 4.0, 1.2]), self.panel.center_arr, self.field, params, self.panel, 0.0857
        )
        assert abs(near[0].gain) > abs(far[0].gain)

    def test_too_few_scatterers_rejected(self):
        params = ChannelParams(m_clusters=18, n_taps=8, sample_period=1e-8)
        with pytest.raises(ValueError, match="scatterer"):
            clusters_for_link(
                np.array([1.0, 1.0, 1.0]),
                self.panel.center_arr,
                self.field,
                params,
                self.panel,
                0.0857,
            )

    def test_angles_within_declared_ranges(self):
        params = make_params(m=5)
        rays = clusters_for_link(
            np.array([1.0, 2.0, 1.5]), self.panel.center_arr, self.field, params, self.panel, 0.0857
        )
        for c in rays:
            assert 0 <= c.azimuth < 2 * np.pi
            assert 0 <= c.elevation <= np.pi / 2
            assert c.delay >= 0


class TestScattererField:
    def test_seed_determinism(self):
        sc = make_mini_scenario(seed=3)
        f1 = ScattererField.from_scenario(sc, count=8)
        f2 = ScattererField.from_scenario(sc, count=8)
        np.testing.assert_array_equal(f1.positions, f2.positions)
        np.testing.assert_array_equal(f1.coefficients, f2.coefficients)

    def test_different_seed_different_field(self):
        f1 = ScattererField.from_scenario(make_mini_scenario(seed=3), count=8)
        f2 = ScattererField.from_scenario(make_mini_scenario(seed=4), count=8)
        assert not np.array_equal(f1.positions, f2.positions)

    def test_coefficient_magnitudes_in_band(self):
        f = ScattererField.from_scenario(make_mini_scenario(), count=64)
        mags = np.abs(f.coefficients)
        assert np.all((mags >= 0.2) & (mags <= 0.8))

    def test_positions_inside_padded_bbox(self):
        sc = make_mini_scenario()
        f = ScattererField.from_scenario(sc, count=64)
        assert np.all(f.positions[:, 2] >= 0.5 - 1e-12)  # z min is grid 1.0 minus pad
        assert np.all(f.positions[:, 0] <= 2.75 + 0.5 + 1e-12)


class TestSpatialConsistency:
    def test_channel_correlation_decays_with_pitch(self):
        # the learnability premise: nearby receivers see similar channels
        pitches = [0.05, 0.2, 0.8]
        corr_by_pitch = np.zeros(len(pitches))
        n_seeds = 100
        for seed in range(n_seeds):
            sc = make_mini_scenario(seed=seed)
            field = ScattererField.from_scenario(sc, count=16)
            params = ChannelParams.for_scenario(sc, m_clusters=4)
            base = np.array([0.4, 1.7, 1.0])
            h0 = link_channel(base, sc, field, params).ravel()
            for j, pitch in enumerate(pitches):
                h1 = link_channel(base + [pitch, 0, 0], sc, field, params).ravel()
                corr = np.abs(np.vdot(h0, h1)) / (
                    np.linalg.norm(h0) * np.linalg.norm(h1)
                )
                corr_by_pitch[j] += corr / n_seeds
        assert corr_by_pitch[0] > corr_by_pitch[1] > corr_by_pitch[2]


class TestChannelDump:
    def test_round_trip(self, tmp_path, rng):
        h = rng.normal(size=(8, 16)) + 1j * rng.normal(size=(8, 16))
        path = tmp_path / "link.bin"
        write_channel_dump(path, h, scenario_hash="ab" * 32, link="tx_ris")
        back, header = read_channel_dump(path)
        np.testing.assert_array_equal(back, h)
        assert header["scenario_hash"] == "ab" * 32
        assert header["link"] == "tx_ris"

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 64)
        with pytest.raises(ValueError, match="channel dump"):
            read_channel_dump(path)
