# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled multipath synthesis kernel.

Same contract as ``ddsounder._kernels.fallback.synthesize_paths``; see there
for the documented semantics.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, fabs, sin

cnp.import_array()

cdef double PI = 3.141592653589793238462643383279502884
cdef double SD_EPS = 1e-14


def synthesize_paths(
    periods,
    wf_index,
    gains,
    tau0,
    dtau,
    Py_ssize_t n_samples,
    double t_start,
    double sample_rate,
    double carrier_frequency,
):
    cdef cnp.ndarray[cnp.complex128_t, ndim=2, mode="c"] per = \
        np.ascontiguousarray(periods, dtype=np.complex128)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] wfi = \
        np.ascontiguousarray(wf_index, dtype=np.int64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] g = \
        np.ascontiguousarray(gains, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] tz = \
        np.ascontiguousarray(tau0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dz = \
        np.ascontiguousarray(dtau, dtype=np.float64)
    cdef Py_ssize_t length = per.shape[1]
    cdef Py_ssize_t n_paths = g.shape[0]
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] out = \
        np.zeros(n_samples, dtype=np.complex128)

    # tap tables shared by every sample: cos/sin(pi n / L)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cos_n = \
        np.cos(PI * np.arange(length) / length)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sin_n = \
        np.sin(PI * np.arange(length) / length)

    cdef double dt = 1.0 / sample_rate
    cdef double complex acc, val, phase
    cdef double t_rel, tau, u, um, su, cu, snum, sd, w, arg
    cdef bint is_even = length % 2 == 0
    cdef Py_ssize_t s, p, n, wf

    for s in range(n_samples):
        t_rel = s * dt
        acc = 0
        for p in range(n_paths):
            tau = tz[p] + dz[p] * t_rel
            u = (t_start + t_rel - tau) * sample_rate
            um = u - length * <double><long long>(u / length)
            if um < 0:
                um += length
            su = sin(PI * um / length)
            cu = cos(PI * um / length)
            snum = sin(PI * um)
            wf = wfi[p]
            val = 0
            for n in range(length):
                sd = su * cos_n[n] - cu * sin_n[n]
                if fabs(sd) < SD_EPS:
                    w = 1.0
                else:
                    w = (snum if n % 2 == 0 else -snum) / (length * sd)
                    if is_even:
                        w *= cu * cos_n[n] + su * sin_n[n]
                val += w * per[wf, n]
            arg = -2.0 * PI * carrier_frequency * tau
            phase = cos(arg) + 1j * sin(arg)
            acc += g[p] * phase * val
        out[s] = acc
    return out
