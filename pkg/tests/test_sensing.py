"""Tests for angle refinement and OFDM radar processing."""

import numpy as np
import pytest

from fdisac.channel import OfdmNumerology, array_response
from fdisac.errors import NoPeakError
from fdisac.sensing import (
    beamspace_music,
    radar_image,
    radar_scalar,
    radar_scalar_grid,
    range_velocity_estimate,
    sample_covariance,
    ul_free_covariance,
    whiten,
)

NUM = OfdmNumerology(n_subcarriers=64, n_symbols=14, subcarrier_spacing=120e3,
                     cp_duration=5.8667e-7, carrier_freq=28e9)


def unit_modulus(rng, rows, cols):
    return np.exp(2j * np.pi * rng.random((rows, cols)))


class TestSampleCovariance:
    def test_zero_samples(self):
        assert np.allclose(sample_covariance(np.zeros((4, 3, 2), complex)), 0.0)

    def test_repeated_fixed_vector(self):
        y = np.array([1.0 + 1j, -2.0j, 0.5])
        samples = np.tile(y, (5, 7, 1))
        assert np.allclose(sample_covariance(samples), np.outer(y, y.conj()))

    def test_hermitian(self):
        rng = np.random.default_rng(0)
        samples = rng.standard_normal((16, 14, 4)) + 1j * rng.standard_normal((16, 14, 4))
        cov = sample_covariance(samples)
        assert np.linalg.norm(cov - cov.conj().T) < 1e-12 * np.linalg.norm(cov)


class TestUlFreeCovariance:
    def test_no_users(self):
        rng = np.random.default_rng(1)
        cov = np.eye(4) + 0j
        out = ul_free_covariance(cov, np.zeros((0, 2, 4, 2)), 1.0)
        assert np.allclose(out, cov)

    def test_large_sample_limit_leaves_combined_noise(self):
        rng = np.random.default_rng(2)
        n_rf, n_streams, n_sub, n_sym = 4, 2, 100, 120  # MN = 12000
        w = unit_modulus(rng, 16, n_rf)
        t = rng.standard_normal((1, n_sub, n_rf, n_streams)) + 1j * rng.standard_normal(
            (1, n_sub, n_rf, n_streams)
        )
        ul_power, noise = 1.0, 0.5
        qpsk = (rng.choice([1, -1], (n_sub, n_sym, n_streams))
                + 1j * rng.choice([1, -1], (n_sub, n_sym, n_streams))) / np.sqrt(2)
        s = np.sqrt(ul_power / n_streams) * qpsk
        noise_vec = np.sqrt(noise / 2) * (
            rng.standard_normal((n_sub, n_sym, 16)) + 1j * rng.standard_normal((n_sub, n_sym, 16))
        )
        samples = np.einsum("mrs,mns->mnr", t[0], s) + np.einsum(
            "ar,mna->mnr", w.conj(), noise_vec
        )
        cov = sample_covariance(samples)
        out = ul_free_covariance(cov, t, ul_power)
        want = noise * w.conj().T @ w
        assert np.linalg.norm(out - want) < 0.1 * np.linalg.norm(want)

    def test_hermitian(self):
        rng = np.random.default_rng(3)
        samples = rng.standard_normal((8, 4, 4)) + 1j * rng.standard_normal((8, 4, 4))
        t = rng.standard_normal((2, 8, 4, 2)) + 1j * rng.standard_normal((2, 8, 4, 2))
        out = ul_free_covariance(sample_covariance(samples), t, 0.3)
        assert np.linalg.norm(out - out.conj().T) < 1e-12 * np.linalg.norm(out)


class TestWhiten:
    def test_noise_covariance_whitens_to_identity(self):
        rng = np.random.default_rng(4)
        w = unit_modulus(rng, 16, 4)
        gram = w.conj().T @ w
        assert np.allclose(whiten(gram, w), np.eye(4), atol=1e-10)

    def test_orthogonal_columns_scale(self):
        k = np.arange(16)
        w = np.exp(-2j * np.pi * np.outer(k, np.arange(4)) / 16)  # cols norm sqrt(16)
        rng = np.random.default_rng(5)
        r = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        r = r + r.conj().T
        assert np.allclose(whiten(r, w), r / 16.0, atol=1e-12)

    def test_hermitian_output(self):
        rng = np.random.default_rng(6)
        w = unit_modulus(rng, 16, 4)
        r = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        r = r @ r.conj().T
        out = whiten(r, w)
        assert np.linalg.norm(out - out.conj().T) < 1e-12 * np.linalg.norm(out)


class TestBeamspaceMusic:
    def synthetic(self, theta0, seed=7, n_rx=64, n_rf=4, snr=1e3):
        rng = np.random.default_rng(seed)
        w = unit_modulus(rng, n_rx, n_rf)
        b = w.conj().T @ array_response(n_rx, theta0)
        gram = w.conj().T @ w
        cov = snr * np.outer(b, b.conj()) + gram
        return whiten(cov, w), w

    def test_peak_near_true_angle(self):
        theta0 = 0.31007  # off-grid
        wcov, w = self.synthetic(theta0)
        est = beamspace_music(wcov, w, theta0 + np.deg2rad(0.7))
        assert abs(est.refined_angle - theta0) <= np.deg2rad(0.02)

    def test_exact_grid_point_noise_free(self):
        theta0 = 0.25
        wcov, w = self.synthetic(theta0, seed=8)
        est = beamspace_music(wcov, w, theta0)  # grid centered on the truth
        assert abs(est.refined_angle - theta0) < 1e-12

    def test_never_leaves_window(self):
        theta0 = -0.4
        wcov, w = self.synthetic(theta0, seed=9)
        init = theta0 + np.deg2rad(2.0)
        est = beamspace_music(wcov, w, init)
        assert init - est.window - 1e-12 <= est.refined_angle <= init + est.window + 1e-12

    def test_degenerate_subspace_raises(self):
        rng = np.random.default_rng(10)
        w = unit_modulus(rng, 16, 4)
        with pytest.raises(NoPeakError):
            beamspace_music(np.eye(4, dtype=complex), w, 0.1)


class TestRadarScalar:
    def test_zero_symbols(self):
        rng = np.random.default_rng(11)
        w = unit_modulus(rng, 16, 4)
        f = rng.standard_normal((2, 3, 16, 2)) + 1j * rng.standard_normal((2, 3, 16, 2))
        d = np.zeros((2, 3, 5, 2), dtype=complex)
        wv = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert radar_scalar(0.2, 1, 2, wv, w, f, d) == 0.0

    def test_matched_scalar_chain(self):
        theta = 0.3
        n_rx = n_tx = 16
        a_rx = array_response(n_rx, theta)
        a_tx = array_response(n_tx, theta)
        w = a_rx[:, None].astype(complex)           # one RF chain, matched
        f = (a_tx / np.sqrt(n_tx))[None, None, :, None]  # one user, one stream
        d = np.full((1, 1, 1, 1), 0.5 - 0.25j)
        wv = np.array([1.0 + 0j])
        got = radar_scalar(theta, 0, 0, wv, w, f, d)
        want = n_rx * np.sqrt(n_tx) * d[0, 0, 0, 0]
        assert np.allclose(got, want)

    def test_grid_matches_pointwise(self):
        rng = np.random.default_rng(12)
        w = unit_modulus(rng, 16, 4)
        f = rng.standard_normal((2, 3, 16, 2)) + 1j * rng.standard_normal((2, 3, 16, 2))
        d = rng.standard_normal((2, 3, 5, 2)) + 1j * rng.standard_normal((2, 3, 5, 2))
        wv = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        grid = radar_scalar_grid(0.4, wv, w, f, d)
        for m in range(3):
            for n in range(5):
                want = radar_scalar(0.4, m, n, wv[m], w, f, d)
                assert np.isclose(grid[m, n], want)


class TestRadarImage:
    def test_perfect_cancellation(self):
        rng = np.random.default_rng(13)
        m_sub, n_sym = 16, 8
        beta = 3e-7 * np.exp(0.7j)
        doppler, delay = 4e3, 2.5e-7
        mm, nn = np.meshgrid(np.arange(m_sub), np.arange(n_sym), indexing="ij")
        ramp = np.exp(2j * np.pi * (nn * NUM.symbol_duration * doppler
                                    - mm * delay * NUM.subcarrier_spacing))
        c = rng.standard_normal((m_sub, n_sym)) + 1j * rng.standard_normal((m_sub, n_sym))
        y = beta * ramp * c  # noise-free MVDR output
        z, masked = radar_image(y, c)
        assert masked == 0
        assert np.allclose(z, beta * ramp, rtol=1e-9)

    def test_zero_target_leaves_scaled_noise(self):
        rng = np.random.default_rng(14)
        noise = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        c = np.full((4, 4), 2.0 + 0j)
        z, masked = radar_image(noise, c)
        assert masked == 0
        assert np.allclose(z, noise / 2.0)

    def test_masking_counts_near_zero_scalars(self):
        y = np.ones((2, 2), dtype=complex)
        c = np.array([[1.0, 1e-15], [1.0, 1.0]], dtype=complex)
        z, masked = radar_image(y, c)
        assert masked == 1
        assert z[0, 1] == 0.0


class TestRangeVelocityEstimate:
    def test_exact_bin_tone(self):
        m_sub, n_sym = 32, 16
        len0, len1 = 4 * m_sub, 4 * n_sym
        b0, b1 = 10, 6
        mm, nn = np.meshgrid(np.arange(m_sub), np.arange(n_sym), indexing="ij")
        z = np.exp(-2j * np.pi * mm * b0 / len0) * np.exp(2j * np.pi * nn * b1 / len1)
        _, _, peak, _ = range_velocity_estimate(z, NUM)
        assert peak == (b0, b1)

    def test_range_recovery_formula(self):
        # peak bin 10 of a length-1024 transform at 120 kHz spacing
        z = np.zeros((256, 4), dtype=complex)
        mm = np.arange(256)
        z[:, :] = np.exp(-2j * np.pi * mm * 10 / 1024)[:, None]
        range_m, _, peak, rd = range_velocity_estimate(z, NUM)
        assert peak[0] == 10
        assert np.isclose(rd.range_bin, 3e8 / (2 * 1024 * 120e3), rtol=1e-12)
        assert np.isclose(range_m, 12.207, atol=5e-4)

    def test_velocity_recovery_formula(self):
        z = np.zeros((4, 64), dtype=complex)
        nn = np.arange(64)
        z[:, :] = np.exp(2j * np.pi * nn * 5 / 256)[None, :]
        _, velocity, peak, rd = range_velocity_estimate(z, NUM)
        assert peak[1] == 5
        lam = NUM.wavelength
        assert np.isclose(rd.velocity_bin, lam / (256 * NUM.symbol_duration), rtol=1e-12)
        assert np.isclose(velocity, 23.46, atol=0.02)

    def test_wraparound_maps_to_negative_velocity(self):
        z = np.zeros((4, 64), dtype=complex)
        nn = np.arange(64)
        z[:, :] = np.exp(2j * np.pi * nn * 251 / 256)[None, :]  # -5 mod 256
        _, velocity, peak, rd = range_velocity_estimate(z, NUM)
        assert peak[1] == 251
        assert np.isclose(velocity, -5 * rd.velocity_bin, rtol=1e-9)

    def test_round_trip_from_physical_target(self):
        """Inject a target phase ramp with the channel's two-way Doppler
        convention and check the halved recovery lands on the truth."""
        m_sub, n_sym = 64, 56
        true_range, true_velocity = 37.0, 22.0
        lam = NUM.wavelength
        doppler = 2 * true_velocity / lam
        delay = 2 * true_range / 3e8
        mm, nn = np.meshgrid(np.arange(m_sub), np.arange(n_sym), indexing="ij")
        z = np.exp(2j * np.pi * (nn * NUM.symbol_duration * doppler
                                 - mm * delay * NUM.subcarrier_spacing))
        range_m, velocity_raw, _, rd = range_velocity_estimate(z, NUM)
        assert abs(range_m - true_range) <= rd.range_bin
        assert abs(velocity_raw / 2.0 - true_velocity) <= rd.velocity_bin


class TestPeakToSecondPeak:
    def test_ratio_on_synthetic_map(self):
        rng = np.random.default_rng(15)
        m_sub, n_sym = 32, 16
        mm, nn = np.meshgrid(np.arange(m_sub), np.arange(n_sym), indexing="ij")
        z = np.exp(2j * np.pi * (0.07 * nn - 0.11 * mm))
        z_noisy = z + 0.01 * (rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape))
        _, _, _, rd = range_velocity_estimate(z_noisy, NUM)
        ratio = rd.peak_to_second_peak_ratio()
        assert ratio > 10.0
        # more noise lowers the ratio
        z_noisier = z + 0.1 * (rng.standard_normal(z.shape) + 1j * rng.standard_normal(z.shape))
        _, _, _, rd2 = range_velocity_estimate(z_noisier, NUM)
        assert rd2.peak_to_second_peak_ratio() < ratio
