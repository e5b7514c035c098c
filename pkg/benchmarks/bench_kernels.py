"""Time the numba kernels against the pure-numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are imported directly, so the MELSMOOTH_BACKEND flag does not
matter here.  Numba timings exclude the first (compiling) call.
"""

import argparse
import math
import time

import numpy as np

from melsmooth.kernels import _numpy

try:
    from melsmooth.kernels import _numba
except ImportError:
    _numba = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases():
    rng = np.random.default_rng(0)
    mel = rng.uniform(-100, 40, (2000, 100))
    taps = np.array([1, 2, 3, 4, 5, 6, 5, 4, 3, 2, 1], dtype=np.float64) / 36.0
    yield "smooth_axis0 2000x100, 11 taps", lambda m: m.smooth_axis0(mel, taps), None

    frames = rng.standard_normal((200, 2048))
    # numba side is the direct-sum loop; the numba backend ships the FFT route instead
    yield "yin_difference 200 frames, 482 lags", \
        lambda m: (m.yin_difference if m is _numpy else m.yin_difference_direct)(frames, 481), \
        lambda a, b: np.max(np.abs(a - b)) / np.max(np.abs(a))

    n_pitch = 431
    log_emit = np.log(rng.random((400, n_pitch + 1)) + 1e-6)
    band = np.log(np.ones(93) / 93)
    init = np.full(n_pitch + 1, -math.log(n_pitch + 1))
    yield "viterbi_banded 400 frames, 432 states", \
        lambda m: m.viterbi_banded(log_emit, band, math.log(0.99), math.log(0.01), init), None


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    print(f"{'kernel':42s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}  agreement")
    for name, run, compare in cases():
        t_np = best_of(lambda: run(_numpy), args.repeat)
        if _numba is None:
            print(f"{name:42s} {t_np * 1e3:10.2f} {'n/a':>10s}")
            continue
        run(_numba)  # compile
        t_nb = best_of(lambda: run(_numba), args.repeat)
        a, b = run(_numpy), run(_numba)
        if compare is None:
            agree = "identical" if np.array_equal(a, b) else f"max diff {np.max(np.abs(a - b)):.3g}"
        else:
            agree = f"rel diff {compare(a, b):.2g}"
        print(f"{name:42s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:7.1f}x  {agree}")


if __name__ == "__main__":
    main()
