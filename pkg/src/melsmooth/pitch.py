"""Simplified pYIN F0 tracking aligned with the mel frame grid.

Per frame, YIN cumulative-mean-normalised difference (CMND) curves are
thresholded at several levels.  Each threshold that finds a dip contributes
its beta-prior weight to the pitch bin of the refined dip, and a banded
Viterbi pass over 10-cent pitch bins plus one unvoiced state picks the track.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dsp import SAMPLE_RATE, Waveform, frame_signal, n_frames_for

_EMIT_FLOOR = 1e-10


def _default_thresholds():
    return tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass(frozen=True)
class PitchConfig:
    f_min_hz: float = 50.0
    f_max_hz: float = 600.0
    yin_window: int = 2048
    hop_length: int = 256
    thresholds: tuple = field(default_factory=_default_thresholds)
    switch_prob: float = 0.01
    sample_rate: int = SAMPLE_RATE
    beta_a: float = 2.0
    beta_b: float = 18.0
    resolution_cents: float = 10.0
    max_transition_octaves_per_s: float = 35.92

    def __post_init__(self):
        if not 0 < self.f_min_hz < self.f_max_hz <= self.sample_rate / 2:
            raise ValueError(f"need 0 < f_min < f_max <= sr/2, got {self.f_min_hz}, {self.f_max_hz}")
        if self.yin_window <= 2 * self.sample_rate / self.f_max_hz:
            raise ValueError("yin_window must exceed 2 * sample_rate / f_max")
        if self.yin_window <= self.max_lag + 1:
            raise ValueError(f"yin_window {self.yin_window} too short for max lag {self.max_lag}")
        if not self.thresholds or not all(0 < s < 1 for s in self.thresholds):
            raise ValueError("thresholds must be a non-empty sequence in (0, 1)")
        if not 0 < self.switch_prob < 1:
            raise ValueError("switch_prob must be in (0, 1)")

    @property
    def min_lag(self) -> int:
        return int(math.floor(self.sample_rate / self.f_max_hz))

    @property
    def max_lag(self) -> int:
        return int(math.ceil(self.sample_rate / self.f_min_hz))

    @property
    def n_pitch_bins(self) -> int:
        return int(math.floor(1200.0 * math.log2(self.f_max_hz / self.f_min_hz) / self.resolution_cents)) + 1

    def bin_frequencies(self) -> np.ndarray:
        return self.f_min_hz * 2.0 ** (np.arange(self.n_pitch_bins) * self.resolution_cents / 1200.0)

    def threshold_prior(self) -> np.ndarray:
        s = np.asarray(self.thresholds, dtype=np.float64)
        w = s ** (self.beta_a - 1.0) * (1.0 - s) ** (self.beta_b - 1.0)
        return w / w.sum()


@dataclass
class PitchTrack:
    f0_hz: np.ndarray
    log_f0: np.ndarray
    voicing: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.f0_hz.shape[0]

    def aligned(self, n_frames: int, f_min_hz: float = 50.0) -> "PitchTrack":
        """Truncate, or pad with unvoiced frames holding the last log-F0."""
        n = self.n_frames
        if n == n_frames:
            return self
        if n > n_frames:
            return PitchTrack(self.f0_hz[:n_frames], self.log_f0[:n_frames], self.voicing[:n_frames])
        extra = n_frames - n
        fill = self.log_f0[-1] if n else math.log(f_min_hz)
        return PitchTrack(np.concatenate([self.f0_hz, np.zeros(extra)]),
                          np.concatenate([self.log_f0, np.full(extra, fill)]),
                          np.concatenate([self.voicing, np.zeros(extra)]))


def cmnd_frames(frames: np.ndarray, max_lag: int):
    """CMND curves ``(T, max_lag + 1)`` and per-frame degenerate flags."""
    diff = kernels.yin_difference(np.ascontiguousarray(frames, dtype=np.float64), max_lag)
    cum = np.cumsum(diff[:, 1:], axis=1)
    lags = np.arange(1, max_lag + 1)
    out = np.ones_like(diff)
    ok = cum > 0
    np.divide(diff[:, 1:] * lags, cum, out=out[:, 1:], where=ok)
    degenerate = ~ok[:, -1]
    return out, degenerate


def yin_cmnd(frame: np.ndarray, cfg: PitchConfig = PitchConfig()):
    """CMND of one ``yin_window``-long frame.

    Returns ``(curve, degenerate)`` where ``curve[0] == 1`` and ``curve`` covers
    lags ``0 .. max_lag + 1``.  ``degenerate`` is set for zero-energy frames.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if frame.shape != (cfg.yin_window,):
        raise ValueError(f"frame length {frame.shape} != yin_window {cfg.yin_window}")
    curve, degenerate = cmnd_frames(frame[None, :], cfg.max_lag + 1)
    return curve[0], bool(degenerate[0])


def threshold_candidates(cmnd: np.ndarray, cfg: PitchConfig, thresholds=None):
    """Dip lag per (frame, threshold); -1 where no value falls below the threshold.

    For each threshold the first lag in ``[min_lag, max_lag]`` whose CMND is
    below it is followed downhill to the local minimum.
    """
    s = np.asarray(cfg.thresholds if thresholds is None else thresholds, dtype=np.float64)
    lo, hi = cfg.min_lag, cfg.max_lag
    sub = cmnd[:, lo:hi + 1]
    width = sub.shape[1]
    running_min = np.minimum.accumulate(sub, axis=1)
    first_below = (running_min[:, :, None] >= s[None, None, :]).sum(axis=1)

    stop = np.ones_like(sub, dtype=bool)
    stop[:, :-1] = sub[:, 1:] >= sub[:, :-1]
    idx = np.where(stop, np.arange(width), width)
    next_stop = np.minimum.accumulate(idx[:, ::-1], axis=1)[:, ::-1]

    found = first_below < width
    safe = np.minimum(first_below, width - 1)
    lag = np.take_along_axis(next_stop, safe, axis=1) + lo
    return np.where(found, lag, -1)


def parabolic_lag(cmnd: np.ndarray, frame_idx: np.ndarray, lag: np.ndarray) -> np.ndarray:
    a = cmnd[frame_idx, lag - 1]
    b = cmnd[frame_idx, lag]
    c = cmnd[frame_idx, lag + 1]
    denom = a - 2.0 * b + c
    shift = np.zeros_like(b)
    np.divide(0.5 * (a - c), denom, out=shift, where=denom > 0)
    return lag + np.clip(shift, -1.0, 1.0)


def _transition_band(cfg: PitchConfig) -> np.ndarray:
    per_frame_oct = cfg.max_transition_octaves_per_s * cfg.hop_length / cfg.sample_rate
    half = max(1, int(round(per_frame_oct * 1200.0 / cfg.resolution_cents)))
    k = np.arange(-half, half + 1)
    w = (half + 1 - np.abs(k)).astype(np.float64)
    return w / w.sum()


def pyin_track(w: Waveform, cfg: PitchConfig = PitchConfig(), n_frames: int | None = None) -> PitchTrack:
    """Track F0 and voicing; frame ``t`` is centred on sample ``t * hop_length``.

    The output has ``len(w) // hop_length + 1`` frames (the mel grid) unless
    ``n_frames`` is given, in which case it is truncated or padded to it.
    """
    x = w.samples
    if x.shape[0] == 0:
        raise ValueError("empty waveform")
    if w.sample_rate_hz != cfg.sample_rate:
        raise ValueError(f"sample rate {w.sample_rate_hz} != pitch config rate {cfg.sample_rate}")
    frames = frame_signal(x, cfg.yin_window, cfg.hop_length, pad_mode="constant")
    n = frames.shape[0]
    assert n == n_frames_for(x.shape[0], cfg.hop_length)

    cmnd, degenerate = cmnd_frames(frames, cfg.max_lag + 1)
    cand = threshold_candidates(cmnd, cfg)
    cand[degenerate] = -1
    prior = cfg.threshold_prior()

    n_bins = cfg.n_pitch_bins
    emit = np.zeros((n, n_bins))
    best_freq = np.zeros((n, n_bins))
    best_mass = np.zeros((n, n_bins))
    t_idx, s_idx = np.nonzero(cand >= 0)
    if t_idx.size:
        lags = cand[t_idx, s_idx]
        freq = cfg.sample_rate / parabolic_lag(cmnd, t_idx, lags)
        freq = np.clip(freq, cfg.f_min_hz, cfg.f_max_hz)
        bins = np.clip(np.rint(1200.0 * np.log2(freq / cfg.f_min_hz) / cfg.resolution_cents),
                       0, n_bins - 1).astype(np.int64)
        np.add.at(emit, (t_idx, bins), prior[s_idx])
        # identical lags give identical freqs; keep the dip carrying the most prior mass
        per_lag = {}
        for t, b, f, p in zip(t_idx, bins, freq, prior[s_idx]):
            key = (t, b, f)
            per_lag[key] = per_lag.get(key, 0.0) + p
        for (t, b, f), p in sorted(per_lag.items()):
            if p > best_mass[t, b]:
                best_mass[t, b] = p
                best_freq[t, b] = f

    voiced_mass = np.clip(emit.sum(axis=1), 0.0, 1.0)
    obs = np.empty((n, n_bins + 1))
    obs[:, :n_bins] = emit
    obs[:, n_bins] = 1.0 - voiced_mass
    log_emit = np.log(np.maximum(obs, _EMIT_FLOOR))

    log_init = np.full(n_bins + 1, math.log(0.5 / n_bins))
    log_init[n_bins] = math.log(0.5)
    path = kernels.viterbi_banded(log_emit, np.log(_transition_band(cfg)),
                                  math.log1p(-cfg.switch_prob), math.log(cfg.switch_prob), log_init)

    voiced = (path < n_bins) & ~degenerate
    centres = cfg.bin_frequencies()
    f0 = np.zeros(n)
    vt = np.flatnonzero(voiced)
    vb = path[vt]
    f0[vt] = np.where(best_mass[vt, vb] > 0, best_freq[vt, vb], centres[vb])
    f0[vt] = np.clip(f0[vt], cfg.f_min_hz, cfg.f_max_hz)

    track = interpolate_f0(PitchTrack(f0, np.zeros(n), voiced.astype(np.float64)), cfg.f_min_hz)
    if n_frames is not None:
        track = track.aligned(n_frames, cfg.f_min_hz)
    return track


def interpolate_f0(track: PitchTrack, f_min_hz: float = 50.0) -> PitchTrack:
    """Fill ``log_f0`` across unvoiced frames by linear interpolation in log-Hz.

    Leading/trailing gaps hold the nearest voiced value; a track with no voiced
    frame gets ``log(f_min_hz)`` everywhere and a warning.  ``f0_hz`` and
    ``voicing`` are returned unchanged.
    """
    voiced = np.flatnonzero(track.voicing > 0.5)
    n = track.n_frames
    if voiced.size == 0:
        warnings.warn("no voiced frames; log-F0 set to log(f_min)", RuntimeWarning, stacklevel=2)
        log_f0 = np.full(n, math.log(f_min_hz))
    else:
        log_f0 = np.interp(np.arange(n), voiced, np.log(track.f0_hz[voiced]))
    return PitchTrack(track.f0_hz.copy(), log_f0, track.voicing.copy())
