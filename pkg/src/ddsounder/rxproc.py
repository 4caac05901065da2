"""Receiver-side processing: sync, coherent averaging, demultiplexing.

The receiver sees the superposition of all TX combs.  One CFO estimate comes
from a standstill capture; during the drive, every snapshot is derotated by
its own LOS frequency offset (Doppler plus CFO) before averaging, and the
Doppler part of that correction is re-applied afterwards so that only the
CFO is permanently removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.optimize import minimize_scalar

from .channel import ScenarioConfig
from .params import ConfigError, SounderConfig
from .waveform import SampledSignal, TonePlan, tone_plan

__all__ = [
    "NoSignalError",
    "TransferFunctionGrid",
    "estimate_cfo",
    "coherent_average",
    "demultiplex",
    "align_los_delay",
    "noise_power_estimate",
    "snr_per_tx",
]


class NoSignalError(RuntimeError):
    """Raised when a correlator finds no reference signal in a capture."""


@dataclass
class TransferFunctionGrid:
    """Per-snapshot, per-tone channel estimates of one TX.

    ``values[q, k]`` is the complex channel coefficient of tone ``k`` during
    snapshot ``q``; rows are timestamped with the snapshot start times.
    """

    tx_index: int
    values: np.ndarray
    snapshot_times: np.ndarray
    tone_frequencies: np.ndarray
    snr_db: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        self.snapshot_times = np.asarray(self.snapshot_times, dtype=np.float64)
        self.tone_frequencies = np.asarray(self.tone_frequencies, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D (snapshots x tones)")
        if self.values.shape[0] != self.snapshot_times.size:
            raise ValueError("one timestamp per snapshot row required")
        if self.values.shape[1] != self.tone_frequencies.size:
            raise ValueError("one tone frequency per column required")


def _tone_bins(cfg: SounderConfig, frequencies: np.ndarray) -> np.ndarray:
    """DFT bin of each tone on the one-period grid (spacing tx_tone_offset)."""
    length = cfg.samples_per_period
    bins = frequencies / cfg.tx_tone_offset
    rounded = np.round(bins).astype(int)
    if np.max(np.abs(bins - rounded)) > 1e-6:
        raise ConfigError("tone frequencies are off the period DFT grid")
    return rounded % length


def _fold_periods(samples: np.ndarray, length: int) -> np.ndarray:
    """(P, L) view of the leading whole periods of a record."""
    whole = samples.size // length
    if whole < 1:
        raise ValueError("record shorter than one sequence period")
    return samples[: whole * length].reshape(whole, length)


def _fractional_roll(samples: np.ndarray, shift: float) -> np.ndarray:
    """Circularly delay a periodic record by a fractional sample count."""
    length = samples.size
    k = np.fft.fftfreq(length, d=1.0 / length)
    return np.fft.ifft(np.fft.fft(samples) * np.exp(-2j * np.pi * k * shift / length))


def estimate_cfo(
    rx: SampledSignal,
    reference: SampledSignal,
    detection_threshold: float = 0.1,
) -> float:
    """Carrier frequency offset of a static capture, via correlation.

    A period-lag autocorrelation gives a coarse, delay-independent estimate;
    the record is then derotated, the reference aligned in (fractional)
    delay, and the offset refined on the continuous correlation peak.

    Parameters
    ----------
    rx : SampledSignal
        Standstill capture containing at least two periods of the reference.
    reference : SampledSignal
        One transmitted sequence period.
    detection_threshold : float
        Minimum normalized correlation magnitude; below it the capture is
        treated as signal-free.

    Returns
    -------
    float
        Estimated CFO in Hz, unambiguous within half the period rate.

    Raises
    ------
    NoSignalError
        If the normalized correlation never exceeds the threshold.
    """
    if not math.isclose(rx.sample_rate, reference.sample_rate, rel_tol=1e-12):
        raise ValueError("rx and reference sample rates differ")
    length = reference.samples.size
    if rx.samples.size < 2 * length:
        raise ValueError("rx must span at least two reference periods")
    fs = rx.sample_rate
    period = length / fs

    folded = _fold_periods(rx.samples, length)
    # coarse: phase advance across one period, independent of channel delay
    lag = np.sum(folded[1:] * np.conj(folded[:-1]))
    coarse = math.atan2(lag.imag, lag.real) / (2.0 * math.pi * period)

    n = np.arange(folded.size)
    derotated = folded.reshape(-1) * np.exp(-2j * np.pi * coarse * n / fs)
    mean_period = derotated.reshape(-1, length).mean(axis=0)

    # align the reference to the (integer + fractional) channel delay
    spectrum = np.fft.fft(mean_period) * np.conj(np.fft.fft(reference.samples))
    xcorr = np.abs(np.fft.ifft(spectrum))
    peak = int(np.argmax(xcorr))
    left, mid, right = (
        xcorr[(peak - 1) % length],
        xcorr[peak],
        xcorr[(peak + 1) % length],
    )
    denom = left - 2 * mid + right
    offset = 0.5 * (left - right) / denom if denom != 0 else 0.0
    aligned = _fractional_roll(reference.samples, peak + offset)

    mixed = derotated * np.conj(np.tile(aligned, folded.shape[0]))
    total = mixed.size
    padded = np.fft.fft(mixed, 8 * total)
    freqs = np.fft.fftfreq(8 * total, d=1.0 / fs)
    halfwidth = 0.5 / period
    band = np.abs(freqs) <= halfwidth
    band_bins = np.flatnonzero(band)
    best = band_bins[int(np.argmax(np.abs(padded[band_bins])))]

    t = n / fs

    def neg_power(f: float) -> float:
        return -np.abs(np.sum(mixed * np.exp(-2j * np.pi * f * t))) ** 2

    grid_step = fs / (8 * total)
    bracket = (freqs[best] - grid_step, freqs[best] + grid_step)
    fine = minimize_scalar(neg_power, bounds=bracket, method="bounded",
                           options={"xatol": 1e-6}).x

    correlation = np.abs(np.sum(mixed * np.exp(-2j * np.pi * fine * t)))
    norm = np.linalg.norm(derotated) * np.linalg.norm(aligned) * math.sqrt(folded.shape[0])
    if norm == 0 or correlation / norm < detection_threshold:
        raise NoSignalError(
            f"normalized correlation {correlation / norm if norm else 0.0:.3g} "
            f"below threshold {detection_threshold}"
        )
    return float(coarse + fine)


def _snapshot_offset(block: np.ndarray, bins: np.ndarray, period: float) -> float:
    """LOS frequency offset of one snapshot from per-period tone progression.

    The per-period DFT coefficients of the dominant component advance by
    ``exp(j 2 pi f T)`` from one period to the next regardless of the channel
    delay, so the lag-one phase is an unbiased offset estimate.
    """
    spectra = np.fft.fft(block, axis=1)[:, bins]
    estimate = 0.0
    for _ in range(2):  # second pass removes the tiny residual of the first
        rotation = np.exp(-2j * np.pi * estimate * period * np.arange(block.shape[0]))
        v = spectra * rotation[:, None]
        lag = np.sum(v[1:] * np.conj(v[:-1]))
        if lag == 0:
            break
        estimate += math.atan2(lag.imag, lag.real) / (2.0 * math.pi * period)
    return estimate


def coherent_average(
    rx: SampledSignal, cfg: SounderConfig, cfo: float, tx_index: int
) -> np.ndarray:
    """Average the periods of every snapshot coherently for one TX.

    Each snapshot is derotated by its own estimated LOS frequency offset
    (Doppler plus CFO), its periods are averaged, and the Doppler part of
    the offset is restored as a phase at the snapshot timestamp, so the
    averaged snapshots keep the physical Doppler progression while the CFO
    is removed.

    Returns
    -------
    numpy.ndarray
        (Q, samples_per_period) averaged periods.
    """
    length = cfg.samples_per_period
    per_snapshot = cfg.samples_per_snapshot
    q_count = rx.samples.size // per_snapshot
    if q_count < 1:
        raise ValueError("record shorter than one snapshot")
    plan = tone_plan(cfg, tx_index)
    bins = _tone_bins(cfg, plan.tone_frequencies)
    fs = rx.sample_rate
    period = cfg.sequence_period
    n_avg = cfg.averaging_count

    out = np.empty((q_count, length), dtype=np.complex128)
    sample_phase = np.arange(per_snapshot)
    for q in range(q_count):
        start = q * per_snapshot
        block = rx.samples[start : start + per_snapshot].reshape(n_avg, length)
        if n_avg > 1:
            offset = _snapshot_offset(block, bins, period)
        else:
            offset = cfo
        t_abs = rx.t0 + (start + sample_phase) / fs
        derotated = (block.reshape(-1) * np.exp(-2j * np.pi * offset * t_abs)).reshape(
            n_avg, length
        )
        averaged = derotated.mean(axis=0)
        # restore the Doppler share of the correction at the snapshot epoch
        t_snapshot = rx.t0 + start / fs
        out[q] = averaged * np.exp(2j * np.pi * (offset - cfo) * t_snapshot)
    return out


def demultiplex(
    averaged: np.ndarray,
    cfg: SounderConfig,
    plan: TonePlan,
    t0: float = 0.0,
) -> TransferFunctionGrid:
    """Per-tone channel coefficients from averaged snapshot periods.

    Divides each tone's DFT coefficient by its transmit weight, so a
    distortion-free channel of gain ``g`` yields ``g`` everywhere.
    """
    averaged = np.asarray(averaged, dtype=np.complex128)
    if averaged.ndim != 2 or averaged.shape[1] != cfg.samples_per_period:
        raise ValueError(
            f"averaged snapshots must be (Q, {cfg.samples_per_period}), "
            f"got {averaged.shape}"
        )
    bins = _tone_bins(cfg, plan.tone_frequencies)
    spectra = np.fft.fft(averaged, axis=1) / cfg.samples_per_period
    values = spectra[:, bins] / plan.tone_weights[None, :]
    times = t0 + np.arange(averaged.shape[0]) * cfg.snapshot_time
    return TransferFunctionGrid(
        tx_index=plan.tx_index,
        values=values,
        snapshot_times=times,
        tone_frequencies=plan.tone_frequencies.copy(),
    )


def align_los_delay(
    grid: TransferFunctionGrid, scenario: ScenarioConfig
) -> TransferFunctionGrid:
    """Advance all delays by the trigger-time LOS delay (linear phase).

    The LOS distance at the trigger is known (light-barrier geometry), so
    the LOS component lands at delay zero without touching magnitudes.
    """
    distance = float(
        np.linalg.norm(scenario.tx_start_position - scenario.rx_position)
    )
    delay = distance / SPEED_OF_LIGHT
    ramp = np.exp(2j * np.pi * grid.tone_frequencies * delay)
    return TransferFunctionGrid(
        tx_index=grid.tx_index,
        values=grid.values * ramp[None, :],
        snapshot_times=grid.snapshot_times.copy(),
        tone_frequencies=grid.tone_frequencies.copy(),
        snr_db=None if grid.snr_db is None else grid.snr_db.copy(),
    )


def noise_power_estimate(averaged: np.ndarray, cfg: SounderConfig) -> float:
    """Mean power of the unoccupied comb bins of averaged periods.

    The first tone-offset slot past the configured TXs is guaranteed free,
    so its bins measure the post-averaging noise at tone scale.
    """
    averaged = np.asarray(averaged, dtype=np.complex128)
    if cfg.grid_ratio <= cfg.tx_count:
        raise ConfigError("no unoccupied tone-offset slot in this design")
    free_plan = TonePlan(
        tx_index=0,
        tone_frequencies=tone_plan(cfg, 0).tone_frequencies
        + cfg.tx_count * cfg.tx_tone_offset,
        tone_weights=np.ones(cfg.tone_count),
    )
    bins = _tone_bins(cfg, free_plan.tone_frequencies)
    spectra = np.fft.fft(averaged, axis=1) / cfg.samples_per_period
    return float(np.mean(np.abs(spectra[:, bins]) ** 2))


def snr_per_tx(grid: TransferFunctionGrid, noise_power: float) -> np.ndarray:
    """Per-snapshot SNR (dB): mean tone power over the noise-bin power."""
    if not noise_power > 0:
        raise ValueError("noise power estimate must be positive")
    signal = np.mean(np.abs(grid.values) ** 2, axis=1)
    return 10.0 * np.log10(signal / noise_power)
