"""Delay-Doppler transform and multitaper estimator tests.

The symplectic transform has two independent oracles: a planted single tap
whose (delay, Doppler) bin is known in closed form, and the Kronecker
factorization of the vectorized transform matrix.
"""

import numpy as np
import pytest

from ddsounder.tfanalysis import (
    DelayDopplerGrid,
    LSFConfig,
    dpss_tapers,
    dsd,
    isfft,
    lsf_estimate,
    sfft,
    top_peaks_2d,
)


def _planted_tap(k_count, m_count, delay_bin, doppler_bin):
    """Channel of a single on-grid tap; argmax lands on the planted bin."""
    k = np.arange(k_count)[:, None]
    l = np.arange(m_count)[None, :]
    return np.exp(-2j * np.pi * k * delay_bin / k_count) * np.exp(
        2j * np.pi * l * doppler_bin / m_count
    )


def _rand_h(rng, k, m):
    return rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))


class TestSfft:
    @pytest.mark.parametrize("shape", [(3, 4), (21, 32), (21, 360)])
    def test_round_trip(self, shape):
        rng = np.random.default_rng(3)
        h = _rand_h(rng, *shape)
        back = isfft(sfft(h))
        assert np.max(np.abs(back - h)) < 1e-10

    @pytest.mark.parametrize("shape", [(3, 4), (21, 32)])
    def test_unitary(self, shape):
        rng = np.random.default_rng(4)
        h = _rand_h(rng, *shape)
        grid = sfft(h)
        assert np.linalg.norm(grid.values) == pytest.approx(np.linalg.norm(h))

    @pytest.mark.parametrize("shape", [(3, 4), (21, 32)])
    def test_kronecker_factorization(self, shape):
        """vec of the (unshifted) transform equals the Kronecker operator."""
        k, m = shape
        rng = np.random.default_rng(5)
        h = _rand_h(rng, k, m)
        grid = sfft(h)
        unshifted = np.fft.ifftshift(grid.values, axes=1)
        f_k = np.fft.fft(np.eye(k)) / np.sqrt(k)
        f_m = np.fft.fft(np.eye(m)) / np.sqrt(m)
        op = np.kron(f_m, f_k.conj().T)
        want = op @ h.flatten(order="F")
        assert np.max(np.abs(unshifted.flatten(order="F") - want)) < 1e-12

    def test_planted_tap_lands_on_its_bin(self):
        k, m = 21, 32
        h = _planted_tap(k, m, delay_bin=5, doppler_bin=3)
        grid = sfft(h)
        row, col = np.unravel_index(np.argmax(np.abs(grid.values)), grid.values.shape)
        assert (row, col) == (5, 3 + m // 2)

    def test_axes_scaling(self, narrowband):
        k, m = 21, 360
        grid = sfft(
            np.ones((k, m), complex),
            tone_spacing=narrowband.tone_spacing,
            snapshot_time=narrowband.snapshot_time,
        )
        assert grid.delay_axis[1] == pytest.approx(1 / (k * narrowband.tone_spacing))
        assert grid.delay_axis[0] == 0.0
        # Doppler axis is fftshift-centered
        assert grid.doppler_axis[m // 2] == 0.0
        step = 1 / (m * narrowband.snapshot_time)
        np.testing.assert_allclose(np.diff(grid.doppler_axis), step)
        assert grid.doppler_axis[0] == pytest.approx(-(m // 2) * step)

    def test_window_start_time_carried(self):
        grid = sfft(np.ones((3, 4), complex), window_start_time=1.25)
        assert grid.window_start_time == 1.25

    def test_non_2d_rejected(self):
        with pytest.raises(ValueError):
            sfft(np.ones(12, complex))


class TestDpss:
    def test_orthonormal(self):
        tapers = dpss_tapers(360, time_bandwidth=2.0, count=3)
        gram = tapers @ tapers.T
        np.testing.assert_allclose(gram, np.eye(3), atol=1e-8)

    def test_count_capped_by_bandwidth(self):
        with pytest.raises(ValueError):
            dpss_tapers(360, time_bandwidth=2.0, count=5)

    def test_shape(self):
        assert dpss_tapers(21, 2.0, 3).shape == (3, 21)


class TestLsf:
    def test_planted_tap_recovered(self):
        h = _planted_tap(21, 360, delay_bin=4, doppler_bin=10)
        grid = lsf_estimate(h, LSFConfig())
        row, col = np.unravel_index(np.argmax(grid.values), grid.values.shape)
        assert (row, col) == (4, 10 + 180)

    def test_output_real_nonnegative(self):
        rng = np.random.default_rng(6)
        grid = lsf_estimate(_rand_h(rng, 21, 360), LSFConfig())
        assert grid.values.dtype == np.float64
        assert np.all(grid.values >= 0)

    def test_taper_leakage_concentrated(self):
        """Multitaper smears a tap over a few bins but keeps >=87% of the
        mass within +-1 bin (frozen against the 3x3 taper pair set)."""
        h = _planted_tap(21, 360, delay_bin=10, doppler_bin=0)
        grid = lsf_estimate(h, LSFConfig())
        power = grid.values / grid.values.sum()
        row, col = 10, 180
        joint = power[row - 1 : row + 2, col - 1 : col + 2].sum()
        assert joint > 0.87
        delay_marginal = power.sum(axis=1)
        assert delay_marginal[row - 1 : row + 2].sum() > 0.93

    def test_window_length_must_match(self):
        with pytest.raises(ValueError):
            lsf_estimate(np.ones((21, 100), complex), LSFConfig(window_length=360))

    def test_tone_count_must_match(self):
        with pytest.raises(ValueError):
            lsf_estimate(np.ones((20, 360), complex), LSFConfig())


class TestDsdAndPeaks:
    def test_dsd_is_delay_marginal(self):
        rng = np.random.default_rng(7)
        grid = lsf_estimate(_rand_h(rng, 21, 360), LSFConfig())
        np.testing.assert_allclose(dsd(grid), grid.values.sum(axis=0))

    def test_top_peaks_strict_local_maxima(self):
        values = np.zeros((5, 7))
        values[1, 2] = 5.0
        values[3, 5] = 3.0
        values[0, 0] = 10.0  # edge: padded with -inf, still a local max
        grid = DelayDopplerGrid(values, np.arange(5.0), np.arange(7.0) - 3)
        peaks = top_peaks_2d(grid, 3)
        assert peaks.count == 3
        assert [(p.delay, p.doppler) for p in peaks.entries] == [
            (0.0, -3.0),
            (1.0, -1.0),
            (3.0, 2.0),
        ]
        assert [p.power for p in peaks.entries] == [10.0, 5.0, 3.0]

    def test_plateau_is_not_a_peak(self):
        values = np.zeros((4, 4))
        values[1, 1] = values[1, 2] = 2.0  # flat top: not strictly greater
        grid = DelayDopplerGrid(values, np.arange(4.0), np.arange(4.0))
        assert top_peaks_2d(grid, 4).count == 0

    def test_constant_surface_has_no_peaks(self):
        grid = DelayDopplerGrid(np.ones((4, 4)), np.arange(4.0), np.arange(4.0))
        assert top_peaks_2d(grid, 2).count == 0

    def test_count_caps_result(self):
        rng = np.random.default_rng(8)
        grid = DelayDopplerGrid(
            rng.standard_normal((20, 20)), np.arange(20.0), np.arange(20.0)
        )
        assert top_peaks_2d(grid, 4).count == 4

    def test_complex_values_rejected(self):
        grid = sfft(np.ones((3, 4), complex))
        with pytest.raises(ValueError):
            top_peaks_2d(grid, 1)


class TestGridType:
    def test_shape_validation(self):
        with pytest.raises(ValueError):
            DelayDopplerGrid(np.ones((3, 4)), np.arange(5.0), np.arange(4.0))
        with pytest.raises(ValueError):
            DelayDopplerGrid(np.ones(4), np.arange(4.0), np.arange(4.0))
