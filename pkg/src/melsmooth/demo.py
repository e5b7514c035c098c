"""Deterministic synthetic speech-like demo corpus.

Each utterance strings together vowel-like harmonic segments (gliding F0,
three formants), noise bursts standing in for fricatives, and short pauses.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .audio_io import write_wav
from .dsp import SAMPLE_RATE

_VOWELS = {
    "a": (800.0, 1200.0, 2600.0),
    "e": (450.0, 2000.0, 2700.0),
    "i": (300.0, 2300.0, 3000.0),
    "o": (500.0, 900.0, 2500.0),
    "u": (330.0, 850.0, 2300.0),
}


def _vowel(rng, n, f0_start, f0_end, formants, sr):
    f0 = np.geomspace(f0_start, f0_end, n) * (1.0 + 0.01 * np.sin(2 * np.pi * 5.0 * np.arange(n) / sr))
    phase = 2.0 * np.pi * np.cumsum(f0) / sr
    k_max = int(11000.0 // f0.min())
    k = np.arange(1, k_max + 1)[:, None]
    hf = k * f0[None, :]
    env = sum(1.0 / (1.0 + ((hf - fc) / (60.0 + 0.06 * fc)) ** 2) for fc in formants)
    env = env / k
    env[hf >= 11500.0] = 0.0
    y = np.sum(env * np.sin(k * phase[None, :]), axis=0)
    return y / (np.abs(y).max() + 1e-12) + 0.01 * rng.standard_normal(n)


def _fricative(rng, n):
    y = np.diff(rng.standard_normal(n + 1))
    return 0.4 * y / np.abs(y).max()


def _ramp(y, sr, ms=15.0):
    m = min(int(sr * ms / 1000.0), y.size // 2)
    if m > 0:
        w = 0.5 - 0.5 * np.cos(np.pi * np.arange(m) / m)
        y[:m] *= w
        y[-m:] *= w[::-1]
    return y


def synth_utterance(seed: int, sr: int = SAMPLE_RATE) -> np.ndarray:
    rng = np.random.default_rng(seed)
    base_f0 = rng.uniform(90.0, 260.0)
    parts = [1e-4 * rng.standard_normal(int(0.1 * sr))]
    for _ in range(int(rng.integers(3, 7))):
        if rng.random() < 0.35:
            parts.append(_ramp(_fricative(rng, int(rng.uniform(0.06, 0.15) * sr)), sr))
        vowel = _VOWELS["aeiou"[int(rng.integers(0, 5))]]
        n = int(rng.uniform(0.12, 0.3) * sr)
        f0a = base_f0 * rng.uniform(0.85, 1.2)
        f0b = f0a * rng.uniform(0.85, 1.15)
        parts.append(_ramp(_vowel(rng, n, f0a, f0b, vowel, sr) * rng.uniform(0.4, 0.9), sr))
        if rng.random() < 0.3:
            parts.append(1e-4 * rng.standard_normal(int(rng.uniform(0.05, 0.12) * sr)))
    parts.append(1e-4 * rng.standard_normal(int(0.1 * sr)))
    y = np.concatenate(parts)
    return 0.7 * y / np.abs(y).max()


def make_demo_corpus(out_dir, n_utterances: int = 20, seed: int = 0) -> str:
    """Write ``demo_XXX.wav`` files and ``manifest.jsonl``; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = os.path.join(out_dir, "manifest.jsonl")
    with open(manifest, "w") as fh:
        for i in range(n_utterances):
            uid = f"demo_{i:03d}"
            wav = os.path.join(out_dir, f"{uid}.wav")
            write_wav(wav, synth_utterance(seed * 100003 + i))
            fh.write(json.dumps({"id": uid, "wav_path": f"{uid}.wav"}) + "\n")
    return manifest
