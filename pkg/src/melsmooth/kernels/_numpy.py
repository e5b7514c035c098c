"""Pure-numpy kernels.  Must stay numerically interchangeable with ``_numba``."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def smooth_axis0(x, weights):
    n = x.shape[0]
    half = (weights.shape[0] - 1) // 2
    padded = np.pad(x, ((half, half), (0, 0)), mode="edge")
    out = np.zeros(x.shape, dtype=np.float64)
    # ascending tap order, matching the numba loop bit-for-bit
    for k in range(weights.shape[0]):
        out += weights[k] * padded[k:k + n]
    return out


def yin_difference(frames, max_lag):
    n_frames, width = frames.shape
    span = width - max_lag
    n_fft = 1
    while n_fft < width + span:
        n_fft *= 2
    head = np.fft.rfft(frames[:, :span], n_fft, axis=1)
    full = np.fft.rfft(frames, n_fft, axis=1)
    xcorr = np.fft.irfft(np.conj(head) * full, n_fft, axis=1)[:, :max_lag + 1]

    sq = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(frames ** 2, axis=1)], axis=1)
    energy_head = sq[:, span][:, None]
    lags = np.arange(max_lag + 1)
    energy_shift = sq[:, lags + span] - sq[:, lags]
    diff = energy_head + energy_shift - 2.0 * xcorr
    diff[:, 0] = 0.0
    return np.maximum(diff, 0.0)


def viterbi_banded(log_emit, log_trans_band, log_stay, log_switch, log_init):
    n_frames, n_states = log_emit.shape
    n_pitch = n_states - 1
    band = log_trans_band.shape[0]
    half = (band - 1) // 2
    rev_band = log_trans_band[::-1]
    log_enter = log_switch - np.log(n_pitch)

    backptr = np.zeros((n_frames, n_states), dtype=np.int64)
    delta = log_init + log_emit[0]
    pad = np.full(half, -np.inf)
    offsets = np.arange(band) - half
    cols = np.arange(n_pitch)
    for t in range(1, n_frames):
        windows = sliding_window_view(np.concatenate([pad, delta[:n_pitch], pad]), band)
        cand = (windows + log_stay) + rev_band
        k_best = np.argmax(cand, axis=1)
        best = cand[cols, k_best]
        arg = cols + offsets[k_best]
        from_unvoiced = delta[n_pitch] + log_enter
        take_u = from_unvoiced > best
        best = np.where(take_u, from_unvoiced, best)
        arg = np.where(take_u, n_pitch, arg)

        to_u = delta[:n_pitch] + log_switch
        i_u = int(np.argmax(to_u))
        best_u = to_u[i_u]
        stay_u = delta[n_pitch] + log_stay
        if stay_u > best_u:
            best_u = stay_u
            i_u = n_pitch

        new = np.empty(n_states)
        new[:n_pitch] = best + log_emit[t, :n_pitch]
        new[n_pitch] = best_u + log_emit[t, n_pitch]
        backptr[t, :n_pitch] = arg
        backptr[t, n_pitch] = i_u
        delta = new

    path = np.empty(n_frames, dtype=np.int64)
    path[-1] = int(np.argmax(delta))
    for t in range(n_frames - 1, 0, -1):
        path[t - 1] = backptr[t, path[t]]
    return path
