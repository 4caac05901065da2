"""Delay-Doppler analysis: symplectic DFT, multitaper LSF, peak picking.

A window of the tone-time channel grid is mapped into the delay-Doppler
plane by the symplectic finite Fourier transform (inverse DFT across tones,
forward DFT across snapshots, both unitary).  The local scattering function
is the average periodogram over a small set of 2-D Slepian taper pairs; the
Doppler spectral density is its delay marginal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal.windows import dpss as _scipy_dpss

__all__ = [
    "DelayDopplerGrid",
    "LSFConfig",
    "Peak",
    "PeakList",
    "sfft",
    "isfft",
    "dpss_tapers",
    "lsf_estimate",
    "dsd",
    "top_peaks_2d",
]


@dataclass
class DelayDopplerGrid:
    """Values over a delay (rows) by Doppler (columns) grid.

    The Doppler axis is circularly centered (negative Doppler first); the
    delay axis starts at zero.
    """

    values: np.ndarray
    delay_axis: np.ndarray
    doppler_axis: np.ndarray
    window_start_time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.delay_axis = np.asarray(self.delay_axis, dtype=np.float64)
        self.doppler_axis = np.asarray(self.doppler_axis, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D (delay x Doppler)")
        if self.values.shape != (self.delay_axis.size, self.doppler_axis.size):
            raise ValueError("axis lengths must match the value grid")


@dataclass
class LSFConfig:
    """Multitaper estimator settings: window size and taper families."""

    window_length: int = 360
    tone_count: int = 21
    tapers_time: int = 3
    tapers_freq: int = 3
    time_bandwidth: float = 2.0

    def __post_init__(self):
        if self.window_length < 2 or self.tone_count < 2:
            raise ValueError("window_length and tone_count must be at least 2")
        if self.tapers_time < 1 or self.tapers_freq < 1:
            raise ValueError("at least one taper per dimension is required")


@dataclass
class Peak:
    """One local maximum of a delay-Doppler surface."""

    delay: float
    doppler: float
    power: float


@dataclass
class PeakList:
    """Peaks in descending power order."""

    entries: list[Peak] = field(default_factory=list)

    @property
    def count(self) -> int:
        return len(self.entries)


def _unitary_dft(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def _axes(
    n_delay: int,
    n_doppler: int,
    tone_spacing: float,
    snapshot_time: float,
) -> tuple[np.ndarray, np.ndarray]:
    delay = np.arange(n_delay) / (n_delay * tone_spacing)
    doppler = (np.arange(n_doppler) - n_doppler // 2) / (n_doppler * snapshot_time)
    return delay, doppler


def sfft(
    h: np.ndarray,
    tone_spacing: float = 1.0,
    snapshot_time: float = 1.0,
    window_start_time: float = 0.0,
) -> DelayDopplerGrid:
    """Symplectic finite Fourier transform of a tone-time window.

    ``S[n, m] = (1/sqrt(K M)) sum_{k,l} H[k, l] e^{+j2pi nk/K} e^{-j2pi ml/M}``
    with the Doppler axis circularly centered afterwards.  With unit spacings
    the axes are in bins.

    Parameters
    ----------
    h : (K, M) complex
        Channel window: K tones (rows) by M snapshots (columns).
    tone_spacing, snapshot_time : float
        Physical grid steps; the delay resolution is ``1/(K tone_spacing)``
        and the Doppler resolution ``1/(M snapshot_time)``.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2:
        raise ValueError("sfft expects a 2-D tone-time window")
    n_tones, n_snapshots = h.shape
    delay_side = np.fft.ifft(h, axis=0) * np.sqrt(n_tones)
    s = np.fft.fft(delay_side, axis=1) / np.sqrt(n_snapshots)
    delay, doppler = _axes(n_tones, n_snapshots, tone_spacing, snapshot_time)
    return DelayDopplerGrid(
        values=np.fft.fftshift(s, axes=1),
        delay_axis=delay,
        doppler_axis=doppler,
        window_start_time=window_start_time,
    )


def isfft(grid: DelayDopplerGrid) -> np.ndarray:
    """Inverse of :func:`sfft`: back to the tone-time window."""
    s = np.fft.ifftshift(np.asarray(grid.values, dtype=np.complex128), axes=1)
    n_tones, n_snapshots = s.shape
    time_side = np.fft.ifft(s, axis=1) * np.sqrt(n_snapshots)
    return np.fft.fft(time_side, axis=0) / np.sqrt(n_tones)


def dpss_tapers(length: int, time_bandwidth: float, count: int) -> np.ndarray:
    """Leading discrete prolate spheroidal (Slepian) sequences.

    Eigenvectors of the tridiagonal Slepian matrix, unit norm, ordered by
    decreasing spectral concentration in ``|f| <= time_bandwidth/length``.

    Raises
    ------
    ValueError
        If more than ``2*time_bandwidth`` tapers are requested; beyond that
        the concentration degrades and sidelobe leakage dominates.
    """
    if length < 2:
        raise ValueError("taper length must be at least 2")
    if count < 1:
        raise ValueError("at least one taper is required")
    if count > 2 * time_bandwidth:
        raise ValueError(
            f"{count} tapers exceed the well-concentrated family of "
            f"2*NW = {2 * time_bandwidth:g}"
        )
    return _scipy_dpss(length, time_bandwidth, Kmax=count)


def lsf_estimate(
    h: np.ndarray,
    cfg: LSFConfig,
    tone_spacing: float = 1.0,
    snapshot_time: float = 1.0,
    window_start_time: float = 0.0,
) -> DelayDopplerGrid:
    """Multitaper local scattering function of one channel window.

    Averages ``|SFFT(H tapered by u_j (x) u_i)|^2`` over all pairs of
    frequency tapers ``u_j`` (length K) and time tapers ``u_i`` (length M).
    The result is real and non-negative, on the same grid as :func:`sfft`.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.shape != (cfg.tone_count, cfg.window_length):
        raise ValueError(
            f"window shape {h.shape} does not match configured "
            f"({cfg.tone_count}, {cfg.window_length})"
        )
    freq_tapers = dpss_tapers(cfg.tone_count, cfg.time_bandwidth, cfg.tapers_freq)
    time_tapers = dpss_tapers(cfg.window_length, cfg.time_bandwidth, cfg.tapers_time)
    accum = np.zeros(h.shape, dtype=np.float64)
    for u_freq in freq_tapers:
        for u_time in time_tapers:
            tapered = h * np.outer(u_freq, u_time)
            accum += np.abs(sfft(tapered).values) ** 2
    accum /= cfg.tapers_freq * cfg.tapers_time
    delay, doppler = _axes(
        cfg.tone_count, cfg.window_length, tone_spacing, snapshot_time
    )
    return DelayDopplerGrid(
        values=accum,
        delay_axis=delay,
        doppler_axis=doppler,
        window_start_time=window_start_time,
    )


def dsd(grid: DelayDopplerGrid) -> np.ndarray:
    """Doppler spectral density: the LSF marginal over delay."""
    return np.asarray(grid.values).sum(axis=0)


def _strict_local_maxima(values: np.ndarray) -> np.ndarray:
    """Boolean mask of strict 8-neighbourhood maxima (edges compare fewer)."""
    padded = np.full((values.shape[0] + 2, values.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = values
    center = padded[1:-1, 1:-1]
    mask = np.ones(values.shape, dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            neighbour = padded[
                1 + di : 1 + di + values.shape[0], 1 + dj : 1 + dj + values.shape[1]
            ]
            mask &= center > neighbour
    return mask


def top_peaks_2d(grid: DelayDopplerGrid, count: int) -> PeakList:
    """Largest strict local maxima of a real-valued delay-Doppler surface.

    Orders by descending value; exact ties break toward smaller delay, then
    smaller absolute Doppler.  Plateaus have no strict maximum, so a constant
    surface yields an empty list; fewer maxima than requested returns all.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    values = np.asarray(grid.values)
    if np.iscomplexobj(values):
        raise ValueError("peak picking expects a real-valued surface")
    mask = _strict_local_maxima(values)
    rows, cols = np.nonzero(mask)
    order = sorted(
        range(rows.size),
        key=lambda i: (
            -values[rows[i], cols[i]],
            grid.delay_axis[rows[i]],
            abs(grid.doppler_axis[cols[i]]),
        ),
    )
    entries = [
        Peak(
            delay=float(grid.delay_axis[rows[i]]),
            doppler=float(grid.doppler_axis[cols[i]]),
            power=float(values[rows[i], cols[i]]),
        )
        for i in order[:count]
    ]
    return PeakList(entries=entries)
