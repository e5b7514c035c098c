"""numba kernels.  Loop order mirrors ``_numpy`` so results agree."""

import numpy as np
from numba import njit

from . import _numpy

# The O(n log n) FFT route beats the O(n * lags) loop below by ~5x, so the
# numba backend uses it too; the loop stays for the benchmark.
yin_difference = _numpy.yin_difference


@njit(cache=True)
def smooth_axis0(x, weights):
    n, m = x.shape
    taps = weights.shape[0]
    half = (taps - 1) // 2
    out = np.zeros((n, m), dtype=np.float64)
    for k in range(taps):
        w = weights[k]
        for t in range(n):
            src = t + k - half
            if src < 0:
                src = 0
            elif src > n - 1:
                src = n - 1
            for f in range(m):
                out[t, f] += w * x[src, f]
    return out


@njit(cache=True)
def yin_difference_direct(frames, max_lag):
    n_frames, width = frames.shape
    span = width - max_lag
    out = np.zeros((n_frames, max_lag + 1), dtype=np.float64)
    for i in range(n_frames):
        for lag in range(1, max_lag + 1):
            acc = 0.0
            for j in range(span):
                d = frames[i, j] - frames[i, j + lag]
                acc += d * d
            out[i, lag] = acc
    return out


@njit(cache=True)
def viterbi_banded(log_emit, log_trans_band, log_stay, log_switch, log_init):
    n_frames, n_states = log_emit.shape
    n_pitch = n_states - 1
    half = (log_trans_band.shape[0] - 1) // 2
    log_enter = log_switch - np.log(n_pitch)

    backptr = np.zeros((n_frames, n_states), dtype=np.int64)
    delta = log_init + log_emit[0]
    new = np.empty(n_states)
    for t in range(1, n_frames):
        for j in range(n_pitch):
            lo = max(0, j - half)
            hi = min(n_pitch, j + half + 1)
            best = -np.inf
            arg = lo
            for i in range(lo, hi):
                v = (delta[i] + log_stay) + log_trans_band[j - i + half]
                if v > best:
                    best = v
                    arg = i
            v = delta[n_pitch] + log_enter
            if v > best:
                best = v
                arg = n_pitch
            new[j] = best + log_emit[t, j]
            backptr[t, j] = arg

        best = -np.inf
        arg = 0
        for i in range(n_pitch):
            v = delta[i] + log_switch
            if v > best:
                best = v
                arg = i
        v = delta[n_pitch] + log_stay
        if v > best:
            best = v
            arg = n_pitch
        new[n_pitch] = best + log_emit[t, n_pitch]
        backptr[t, n_pitch] = arg
        delta = new.copy()

    path = np.empty(n_frames, dtype=np.int64)
    best = -np.inf
    arg = 0
    for i in range(n_states):
        if delta[i] > best:
            best = delta[i]
            arg = i
    path[n_frames - 1] = arg
    for t in range(n_frames - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path
