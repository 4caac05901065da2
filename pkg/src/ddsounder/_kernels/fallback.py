"""Pure-numpy reference implementation of the multipath synthesis kernel.

Semantics are identical to the compiled extension; the extension exists only
for speed.  Fractional delays are evaluated with full-period Dirichlet
(periodic sinc) interpolation, which is exact for waveforms that are periodic
in the tabulated length.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 4096
_SD_EPS = 1e-14


def _dirichlet_matrix(u: np.ndarray, length: int) -> np.ndarray:
    """Interpolation weights of fractional indices ``u`` onto a periodic grid.

    For odd lengths the kernel is sin(pi v) / (L sin(pi v / L)); even lengths
    carry an extra cos(pi v / L) factor.  Both are L-periodic, so ``u`` may be
    any real value.
    """
    n = np.arange(length)
    um = np.mod(u, length)
    alternating = np.where(n % 2, -1.0, 1.0)
    su = np.sin(np.pi * um / length)
    cu = np.cos(np.pi * um / length)
    cos_n = np.cos(np.pi * n / length)
    sin_n = np.sin(np.pi * n / length)
    numerator = np.sin(np.pi * um)[:, None] * alternating[None, :]
    sd = su[:, None] * cos_n[None, :] - cu[:, None] * sin_n[None, :]
    on_sample = np.abs(sd) < _SD_EPS
    sd = np.where(on_sample, 1.0, sd)
    weights = numerator / (length * sd)
    if length % 2 == 0:
        cd = cu[:, None] * cos_n[None, :] + su[:, None] * sin_n[None, :]
        weights = weights * cd
    weights[on_sample] = 1.0
    return weights


def interpolate_periodic(samples: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Evaluate a periodic sampled waveform at fractional sample indices."""
    samples = np.asarray(samples, dtype=np.complex128)
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    return _dirichlet_matrix(u, samples.size) @ samples


def synthesize_paths(
    periods: np.ndarray,
    wf_index: np.ndarray,
    gains: np.ndarray,
    tau0: np.ndarray,
    dtau: np.ndarray,
    n_samples: int,
    t_start: float,
    sample_rate: float,
    carrier_frequency: float,
) -> np.ndarray:
    """Superimpose delayed, Doppler-rotated copies of periodic waveforms.

    Parameters
    ----------
    periods : (W, L) complex128
        One sequence period per waveform, all sharing the epoch t=0.
    wf_index : (P,) int
        Waveform carried by each path.
    gains, tau0, dtau : (P,)
        Complex path gain, path delay at ``t_start`` (s) and delay slope
        (s/s) of each path; the delay varies linearly over the block.
    n_samples : int
        Output length.
    t_start : float
        Absolute time of the first output sample, s.
    sample_rate, carrier_frequency : float
        Sample rate (S/s) and RF carrier (Hz); the carrier phase
        ``exp(-j 2 pi fc tau(t))`` carries the Doppler of each path.

    Returns
    -------
    (n_samples,) complex128
    """
    periods = np.asarray(periods, dtype=np.complex128)
    wf_index = np.asarray(wf_index, dtype=np.int64)
    gains = np.asarray(gains, dtype=np.complex128)
    tau0 = np.asarray(tau0, dtype=np.float64)
    dtau = np.asarray(dtau, dtype=np.float64)
    if periods.ndim != 2:
        raise ValueError("periods must be a 2-D array of per-waveform periods")
    length = periods.shape[1]
    out = np.zeros(n_samples, dtype=np.complex128)
    dt = 1.0 / sample_rate
    for start in range(0, n_samples, _CHUNK):
        stop = min(start + _CHUNK, n_samples)
        t_rel = np.arange(start, stop) * dt
        acc = np.zeros(stop - start, dtype=np.complex128)
        for p in range(gains.size):
            tau = tau0[p] + dtau[p] * t_rel
            u = (t_start + t_rel - tau) * sample_rate
            value = _dirichlet_matrix(np.mod(u, length), length) @ periods[wf_index[p]]
            acc += gains[p] * np.exp(-2j * np.pi * carrier_frequency * tau) * value
        out[start:stop] = acc
    return out
