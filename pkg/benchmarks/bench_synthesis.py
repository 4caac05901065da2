"""Timing comparison of the path-synthesis kernels (compiled vs. numpy).

Synthesizes a representative drive-by block workload — two 105-sample
periodic waveforms, eight moving paths — through both backends and reports
throughput.  Usage: ``python benchmarks/bench_synthesis.py [n_samples]``.
"""

import sys
import time

import numpy as np

from ddsounder._kernels import fallback

KERNELS = {"numpy": fallback.synthesize_paths}
try:
    from ddsounder._kernels import _synth

    KERNELS["compiled"] = _synth.synthesize_paths
except ImportError:
    pass


def make_workload(n_samples: int):
    rng = np.random.default_rng(42)
    length = 105
    periods = rng.standard_normal((2, length)) + 1j * rng.standard_normal((2, length))
    n_paths = 8
    wf_index = np.arange(n_paths, dtype=np.int64) % 2
    gains = (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths)) * 1e-5
    tau0 = rng.uniform(100e-9, 400e-9, n_paths)
    dtau = rng.uniform(-1.4e-8, 1.4e-8, n_paths)  # |v| <= 4.2 m/s worth of slope
    return dict(
        periods=periods,
        wf_index=wf_index,
        gains=gains,
        tau0=tau0,
        dtau=dtau,
        n_samples=n_samples,
        t_start=0.0,
        sample_rate=1.25e6,
        carrier_frequency=60.15e9,
    )


def main() -> int:
    n_samples = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    work = make_workload(n_samples)
    results = {}
    for name, kernel in KERNELS.items():
        kernel(**dict(work, n_samples=1024))  # warm up
        best = float("inf")
        for _ in range(3):
            t0 = time.perf_counter()
            out = kernel(**work)
            best = min(best, time.perf_counter() - t0)
        results[name] = (best, out)
        rate = n_samples / best
        print(f"{name:>9}: {best * 1e3:8.1f} ms   {rate / 1e6:6.2f} Msamples/s")
    if len(results) == 2:
        diff = np.max(np.abs(results["compiled"][1] - results["numpy"][1]))
        scale = np.max(np.abs(results["numpy"][1]))
        print(f"agreement: max |diff| = {diff:.3e} (signal peak {scale:.3e})")
        speedup = results["numpy"][0] / results["compiled"][0]
        print(f"speedup: {speedup:.1f}x")
    else:
        print("compiled extension not built; only the numpy fallback was timed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
