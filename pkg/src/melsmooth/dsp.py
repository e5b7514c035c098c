"""Framing, Hann-windowed STFT, HTK mel filterbank and dB mel-spectrograms.

Conventions (the defaults reproduce a 24 kHz, 100-band, 0-12 kHz setup):

* periodic Hann window, center reflect-padding of ``fft_size // 2`` samples,
  so an ``n``-sample waveform yields ``n // hop_length + 1`` frames;
* HTK mel scale ``2595 * log10(1 + f / 700)`` with unnormalised triangles;
* magnitude (not power) mel bands compressed as
  ``20 * log10(max(band, db_floor_amp))``.  The dB-magnitude choice is a
  convention of this package, picked so that distances are in dB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SAMPLE_RATE = 24000


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    sample_rate_hz: int = SAMPLE_RATE

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"waveform must be mono 1-D, got shape {samples.shape}")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", samples)

    def __len__(self):
        return self.samples.shape[0]


@dataclass(frozen=True)
class StftConfig:
    win_length: int = 1024
    hop_length: int = 256
    fft_size: int = 1024

    def __post_init__(self):
        if min(self.win_length, self.hop_length, self.fft_size) <= 0:
            raise ValueError("STFT sizes must be positive")
        if self.win_length > self.fft_size:
            raise ValueError(f"win_length {self.win_length} > fft_size {self.fft_size}")
        if self.hop_length >= self.win_length:
            raise ValueError(f"hop_length {self.hop_length} must be < win_length {self.win_length}")


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 100
    f_min_hz: float = 0.0
    f_max_hz: float = 12000.0
    db_floor_amp: float = 1e-5

    def __post_init__(self):
        if self.n_mels < 1:
            raise ValueError("n_mels must be >= 1")
        if not 0 <= self.f_min_hz < self.f_max_hz:
            raise ValueError(f"need 0 <= f_min < f_max, got {self.f_min_hz}, {self.f_max_hz}")
        if self.db_floor_amp <= 0:
            raise ValueError("db_floor_amp must be positive")

    @property
    def floor_db(self) -> float:
        return 20.0 * np.log10(self.db_floor_amp)


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window ``0.5 * (1 - cos(2*pi*k/n))``."""
    if n < 1:
        raise ValueError(f"window length must be >= 1, got {n}")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def n_frames_for(n_samples: int, hop_length: int) -> int:
    return n_samples // hop_length + 1


def frame_signal(x: np.ndarray, frame_length: int, hop_length: int, pad_mode: str = "reflect") -> np.ndarray:
    """Centered frames, shape ``(len(x) // hop + 1, frame_length)``."""
    half = frame_length // 2
    padded = np.pad(x, (half, frame_length - half), mode=pad_mode)
    n = n_frames_for(x.shape[0], hop_length)
    frames = np.lib.stride_tricks.sliding_window_view(padded, frame_length)[::hop_length]
    return frames[:n]


def stft(w: Waveform, cfg: StftConfig = StftConfig()) -> np.ndarray:
    """Complex STFT, shape ``(T, fft_size // 2 + 1)``.

    Bin ``b`` is centred on ``b * sample_rate / fft_size`` Hz and frame ``t``
    on sample ``t * hop_length``.
    """
    x = w.samples
    if x.shape[0] < 2:
        raise ValueError(f"waveform too short for STFT: {x.shape[0]} samples (need >= 2)")
    window = np.zeros(cfg.fft_size)
    offset = (cfg.fft_size - cfg.win_length) // 2
    window[offset:offset + cfg.win_length] = hann_window(cfg.win_length)
    frames = frame_signal(x, cfg.fft_size, cfg.hop_length)
    return np.fft.rfft(frames * window, axis=1)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


class FilterbankError(ValueError):
    pass


def mel_filterbank(cfg: MelConfig = MelConfig(), fft_size: int = 1024,
                   sample_rate: int = SAMPLE_RATE) -> np.ndarray:
    """Triangular HTK filterbank, shape ``(n_mels, fft_size // 2 + 1)``.

    Filter ``k`` rises from edge ``k`` to centre ``k + 1`` and falls to zero
    at edge ``k + 2`` of ``n_mels + 2`` points equally spaced in mel.
    """
    if cfg.f_max_hz > sample_rate / 2:
        raise ValueError(f"f_max {cfg.f_max_hz} Hz exceeds Nyquist {sample_rate / 2} Hz")
    bin_hz = np.arange(fft_size // 2 + 1) * sample_rate / fft_size
    edges = mel_to_hz(np.linspace(hz_to_mel(cfg.f_min_hz), hz_to_mel(cfg.f_max_hz), cfg.n_mels + 2))
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (bin_hz - lower) / (centre - lower)
    falling = (upper - bin_hz) / (upper - centre)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(~weights.any(axis=1))
    if empty.size:
        raise FilterbankError(
            f"mel filter {int(empty[0])} has no nonzero weight: n_mels={cfg.n_mels} is too "
            f"large for fft_size={fft_size} at {sample_rate} Hz")
    return weights


def mel_spectrogram(w: Waveform, stft_cfg: StftConfig = StftConfig(),
                    mel_cfg: MelConfig = MelConfig(), fbank: np.ndarray | None = None) -> np.ndarray:
    """dB mel-spectrogram, shape ``(T, n_mels)``; every value ``>= mel_cfg.floor_db``."""
    if fbank is None:
        fbank = mel_filterbank(mel_cfg, stft_cfg.fft_size, w.sample_rate_hz)
    mag = np.abs(stft(w, stft_cfg))
    bands = mag @ fbank.T
    return 20.0 * np.log10(np.maximum(bands, mel_cfg.db_floor_amp))
