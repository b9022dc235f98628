"""Tests for channel models and scenario generation."""

import numpy as np
import pytest

from fdisac.channel import (
    OfdmNumerology,
    PathParams,
    TargetParams,
    array_response,
    bs_array_positions,
    dl_channel,
    draw_scenario,
    radar_gain_power,
    rx_radar_gain,
    si_channel,
    target_channel,
    tx_radar_gain,
    ul_channel,
)
from fdisac.config import SimConfig
from fdisac.errors import ContractViolationError

NUM = OfdmNumerology(n_subcarriers=64, n_symbols=14, subcarrier_spacing=120e3,
                     cp_duration=5.8667e-7, carrier_freq=28e9)


class TestArrayResponse:
    def test_broadside(self):
        assert np.allclose(array_response(4, 0.0), np.ones(4))

    def test_closed_form_entry(self):
        # sin(pi/6) = 1/2, so the second entry is exp(-j pi/2) = -j
        v = array_response(2, np.pi / 6)
        assert np.allclose(v, [1.0, -1.0j], atol=1e-12)

    def test_unit_modulus_norm(self):
        v = array_response(64, 0.7)
        assert np.isclose(np.linalg.norm(v) ** 2, 64.0)

    def test_conjugate_symmetry(self):
        v = array_response(16, 0.4)
        assert np.allclose(array_response(16, -0.4), v.conj())


class TestUeChannels:
    def test_single_path_outer_product(self):
        paths = [PathParams(gain=1.0, delay=0.0, aoa=0.3, aod=-0.5)]
        h = dl_channel(paths, 0, NUM, n_ue=16, n_bs_tx=64)
        want = np.outer(array_response(16, 0.3), array_response(64, -0.5).conj())
        assert np.allclose(h, want)
        assert np.isclose(np.linalg.norm(h) ** 2, 16 * 64)

    def test_phase_progression(self):
        tau = 80e-9
        paths = [PathParams(gain=0.5 + 0.2j, delay=tau, aoa=0.1, aod=0.2)]
        h0 = dl_channel(paths, 0, NUM, 8, 16)
        h5 = dl_channel(paths, 5, NUM, 8, 16)
        rot = np.exp(-2j * np.pi * 5 * tau * NUM.subcarrier_spacing)
        assert np.allclose(h5, h0 * rot)

    def test_five_path_rank(self):
        rng = np.random.default_rng(42)
        paths = [
            PathParams(
                gain=rng.standard_normal() + 1j * rng.standard_normal(),
                delay=rng.uniform(0, 200e-9),
                aoa=rng.uniform(-1.2, 1.2),
                aod=rng.uniform(-1.2, 1.2),
            )
            for _ in range(5)
        ]
        h = dl_channel(paths, 3, NUM, 16, 64)
        s = np.linalg.svd(h, compute_uv=False)
        assert s[4] > 1e-9 * s[0]
        # rank is exactly 5: the 6th singular value vanishes
        assert s[5] < 1e-9 * s[0] if len(s) > 5 else True

    def test_ul_mirrors_dl(self):
        paths = [PathParams(gain=1.0, delay=0.0, aoa=0.3, aod=-0.5)]
        g = ul_channel(paths, 0, NUM, n_bs_rx=64, n_ue=16)
        want = np.outer(array_response(64, 0.3), array_response(16, -0.5).conj())
        assert np.allclose(g, want)

    def test_empty_paths_raise(self):
        with pytest.raises(ContractViolationError):
            dl_channel([], 0, NUM, 4, 4)


class TestTargetChannel:
    @staticmethod
    def _target(gain, doppler, delay, angle):
        return TargetParams(gain=gain, doppler=doppler, round_trip_delay=delay,
                            angle=angle, range_m=0.0, velocity=0.0, rcs=10.0)

    def test_static_target_constant(self):
        t = [self._target(1.0, 0.0, 0.0, 0.4)]
        a00 = target_channel(t, 0, 0, NUM, 8, 8)
        a53 = target_channel(t, 5, 3, NUM, 8, 8)
        assert np.allclose(a00, a53)

    def test_doppler_phase_ramp(self):
        fd = 3000.0
        t = [self._target(1.0, fd, 0.0, 0.1)]
        a0 = target_channel(t, 0, 0, NUM, 8, 8)
        a1 = target_channel(t, 0, 1, NUM, 8, 8)
        rot = np.exp(2j * np.pi * NUM.symbol_duration * fd)
        assert np.allclose(a1, a0 * rot)

    def test_frobenius_norm_against_inner_product_formula(self):
        rng = np.random.default_rng(9)
        targets = [
            self._target(
                (rng.standard_normal() + 1j * rng.standard_normal()) * 1e-7,
                rng.uniform(2e3, 6e3), rng.uniform(1e-7, 4e-7), ang,
            )
            for ang in (-0.9, -0.2, 0.35, 0.8)
        ]
        n_rx, n_tx = 64, 64
        m, n = 7, 4
        a = target_channel(targets, m, n, NUM, n_rx, n_tx)
        # closed form: ||sum_k c_k a_k b_k^H||_F^2 via steering inner products
        coef = [
            t.gain * np.exp(2j * np.pi * (n * NUM.symbol_duration * t.doppler
                                          - m * t.round_trip_delay * NUM.subcarrier_spacing))
            for t in targets
        ]
        ar = [array_response(n_rx, t.angle) for t in targets]
        at = [array_response(n_tx, t.angle) for t in targets]
        want = 0.0
        cross = 0.0
        for k in range(4):
            for kk in range(4):
                term = (coef[k] * np.conj(coef[kk])
                        * np.vdot(ar[kk], ar[k]) * np.vdot(at[k], at[kk]))
                want += term.real
                if k != kk:
                    cross += abs(term)
        got = np.linalg.norm(a) ** 2
        assert np.isclose(got, want, rtol=1e-9)
        diag = sum(abs(c) ** 2 for c in coef) * n_rx * n_tx
        assert abs(got - diag) <= cross + 1e-12 * diag


class TestRadarRangeEquation:
    def test_reference_value(self):
        lam = 0.010714
        got = radar_gain_power(lam, 10.0, 50.0)
        want = lam**2 * 10.0 / ((4 * np.pi) ** 3 * 50.0**4)
        assert np.isclose(got, want, rtol=1e-12)
        assert np.isclose(got, 9.2554e-14, rtol=1e-4)
        assert np.isclose(10 * np.log10(got), -130.34, atol=0.01)

    def test_inverse_fourth_power(self):
        g1 = radar_gain_power(0.0107, 10.0, 25.0)
        g2 = radar_gain_power(0.0107, 10.0, 50.0)
        assert np.isclose(g1 / g2, 16.0)

    def test_zero_rcs(self):
        assert radar_gain_power(0.0107, 0.0, 30.0) == 0.0

    def test_nonpositive_range_raises(self):
        with pytest.raises(ContractViolationError):
            radar_gain_power(0.0107, 10.0, 0.0)


class TestSiChannel:
    def test_frobenius_normalization(self):
        tx, rx = bs_array_positions(64, 64, 0.0107)
        h = si_channel(tx, rx, 0.0107)
        assert np.isclose(np.linalg.norm(h) ** 2, 64 * 64, rtol=1e-9)

    def test_scalar_case(self):
        h = si_channel([[0.0, 0.0, 0.0]], [[0.3, 0.0, 0.0]], 0.0107)
        assert h.shape == (1, 1)
        assert np.isclose(abs(h[0, 0]), 1.0)

    def test_magnitude_follows_inverse_distance(self):
        tx, rx = bs_array_positions(64, 64, 0.0107, separation_wavelengths=6.0)
        h = si_channel(tx, rx, 0.0107)
        d = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=2)
        # |h_pq| * d_pq is the constant gamma for every entry
        prod = np.abs(h) * d
        assert np.allclose(prod, prod[0, 0], rtol=1e-9)

    def test_coincident_elements_raise(self):
        with pytest.raises(ContractViolationError):
            si_channel([[0.0, 0.0, 0.0]], [[0.0, 0.0, 0.0]], 0.0107)


class TestRadarGains:
    def test_matched_beam(self):
        n = 32
        col = array_response(n, 0.25) / np.sqrt(n)
        assert np.isclose(tx_radar_gain(col, 0.25), np.sqrt(n))
        assert np.isclose(rx_radar_gain(col, 0.25), np.sqrt(n))

    def test_orthogonal_column(self):
        n = 8
        a = array_response(n, 0.0)
        col = np.ones(n, dtype=complex)
        col[::2] = -1.0  # orthogonal to all-ones steering
        assert np.isclose(tx_radar_gain(col, 0.0), 0.0, atol=1e-12)

    def test_random_column_inner_product(self):
        rng = np.random.default_rng(3)
        col = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        want = abs(np.vdot(array_response(16, 0.6), col))
        assert np.isclose(tx_radar_gain(col, 0.6), want)


class TestDrawScenario:
    SMALL = dict(n_bs_tx=8, n_bs_rx=8, n_ue=4, n_ue_rf=2, n_subcarriers=4,
                 n_dl_users=2, n_ul_users=2, n_dl_streams=2, n_ul_streams=2,
                 n_bs_rf=4)

    def test_deterministic(self):
        cfg = SimConfig(**self.SMALL)
        s1 = draw_scenario(cfg, 123)
        s2 = draw_scenario(cfg, 123)
        assert np.array_equal(s1.dl_channels, s2.dl_channels)
        assert np.array_equal(s1.ul_channels, s2.ul_channels)
        assert np.array_equal(s1.si_channel, s2.si_channel)
        assert all(
            a.gain == b.gain and a.angle == b.angle and a.range_m == b.range_m
            for a, b in zip(s1.targets, s2.targets)
        )

    def test_parameter_ranges_over_many_draws(self):
        cfg = SimConfig(**self.SMALL)
        for seed in range(1000):
            t = draw_scenario(cfg, seed).targets
            for tp in t:
                assert -np.pi / 3 - 1e-12 <= tp.angle <= np.pi / 3 + 1e-12
                assert 20.0 <= tp.range_m <= 60.0
                assert 10.0 <= tp.velocity <= 30.0

    def test_dl_path_count_and_si_invariant(self):
        cfg = SimConfig(**self.SMALL)
        s = draw_scenario(cfg, 7)
        assert all(len(p) == 5 for p in s.dl_paths)
        assert all(len(p) == 5 for p in s.ul_paths)
        assert np.isclose(np.linalg.norm(s.si_channel) ** 2, 8 * 8, rtol=1e-9)

    def test_target_invariants(self):
        cfg = SimConfig(**self.SMALL)
        s = draw_scenario(cfg, 21)
        lam = s.numerology.wavelength
        for t in s.targets:
            want = radar_gain_power(lam, t.rcs, t.range_m)
            assert np.isclose(abs(t.gain) ** 2, want, rtol=1e-12)
            assert np.isclose(t.round_trip_delay, 2 * t.range_m / 3e8, rtol=1e-12)
            assert np.isclose(t.doppler, 2 * t.velocity / lam, rtol=1e-12)

    def test_matched_geometry_across_subcarrier_counts(self):
        cfg64 = SimConfig(**{**self.SMALL, "n_subcarriers": 4})
        cfg256 = SimConfig(**{**self.SMALL, "n_subcarriers": 16})
        s1 = draw_scenario(cfg64, 5)
        s2 = draw_scenario(cfg256, 5)
        assert s1.targets[0].angle == s2.targets[0].angle
        assert np.array_equal(s1.dl_channels[:, :4], s2.dl_channels[:, :4])
