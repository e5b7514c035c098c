"""16-bit PCM mono WAV I/O (stdlib ``wave``); no resampling."""

from __future__ import annotations

import wave

import numpy as np

from .dsp import SAMPLE_RATE, Waveform


class WavFormatError(ValueError):
    pass


def read_wav(path, expected_rate: int = SAMPLE_RATE) -> Waveform:
    try:
        with wave.open(str(path), "rb") as fh:
            n_channels = fh.getnchannels()
            width = fh.getsampwidth()
            rate = fh.getframerate()
            raw = fh.readframes(fh.getnframes())
    except (wave.Error, EOFError) as exc:
        raise WavFormatError(f"unreadable WAV: {exc}") from exc
    if rate != expected_rate:
        raise WavFormatError(f"sample rate {rate} != {expected_rate}")
    if n_channels != 1:
        raise WavFormatError(f"expected mono, got {n_channels} channels")
    if width != 2:
        raise WavFormatError(f"expected 16-bit PCM, got {8 * width}-bit")
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if samples.size == 0:
        raise WavFormatError("WAV has no samples")
    return Waveform(samples, rate)


def write_wav(path, samples, sample_rate: int = SAMPLE_RATE) -> None:
    pcm = np.clip(np.round(np.asarray(samples) * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as fh:
        fh.setnchannels(1)
        fh.setsampwidth(2)
        fh.setframerate(sample_rate)
        fh.writeframes(pcm.tobytes())
