"""Corpus-level steps shared by the CLI and the batch server."""

from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .audio_io import read_wav
from .augment import SmoothingPolicy, augment_step, make_kernel, smooth_feature
from .dsp import MelConfig, StftConfig, Waveform, mel_filterbank, mel_spectrogram
from .features import (AcousticFeature, NormStats, accumulate_stats, assemble, list_feature_files,
                       normalize, read_afv1, write_afv1)
from .pitch import PitchConfig, pyin_track


@dataclass(frozen=True)
class ExtractConfig:
    stft: StftConfig = StftConfig()
    mel: MelConfig = MelConfig()
    pitch: PitchConfig = PitchConfig()


def extract_feature(w: Waveform, utterance_id: str = "", cfg: ExtractConfig = ExtractConfig(),
                    fbank=None) -> AcousticFeature:
    mel = mel_spectrogram(w, cfg.stft, cfg.mel, fbank)
    track = pyin_track(w, cfg.pitch, n_frames=mel.shape[0])
    return assemble(mel, track, utterance_id)


class ManifestError(ValueError):
    pass


def read_manifest(path) -> list[dict]:
    """JSON-lines ``{"id", "wav_path"}``; relative paths resolve against the manifest's folder."""
    base = os.path.dirname(os.path.abspath(path))
    entries, seen = [], set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                uid, wav = str(obj["id"]), str(obj["wav_path"])
            except (ValueError, KeyError, TypeError) as exc:
                raise ManifestError(f"manifest line {lineno}: {exc}") from exc
            if uid in seen:
                raise ManifestError(f"manifest line {lineno}: duplicate id {uid!r}")
            if not uid or "/" in uid or os.sep in uid:
                raise ManifestError(f"manifest line {lineno}: invalid id {uid!r}")
            seen.add(uid)
            entries.append({"id": uid, "wav_path": os.path.join(base, wav)})
    if not entries:
        raise ManifestError("empty manifest")
    return entries


@dataclass
class ExtractOutcome:
    utterance_id: str
    n_frames: int | None
    error: str | None = None


def extract_corpus(entries, out_dir, cfg: ExtractConfig = ExtractConfig(), jobs: int = 1) -> list[ExtractOutcome]:
    """One AFV1 per manifest entry; failures are reported per entry, not raised."""
    os.makedirs(out_dir, exist_ok=True)
    fbank = mel_filterbank(cfg.mel, cfg.stft.fft_size, cfg.pitch.sample_rate)

    def run(entry):
        uid = entry["id"]
        try:
            w = read_wav(entry["wav_path"], cfg.pitch.sample_rate)
            feat = extract_feature(w, uid, cfg, fbank)
            write_afv1(feat, os.path.join(out_dir, f"{uid}.afv1"))
            return ExtractOutcome(uid, feat.n_frames)
        except (OSError, ValueError) as exc:
            return ExtractOutcome(uid, None, str(exc))

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(run, entries))


def load_corpus(feature_dir) -> list[AcousticFeature]:
    files = list_feature_files(feature_dir)
    if not files:
        raise ValueError(f"no .afv1 files in {feature_dir}")
    return [read_afv1(path, uid) for uid, path in files]


def corpus_stats(feature_dir, jobs: int = 1) -> NormStats:
    """Per-file partial stats merged in sorted-id order, so any ``jobs`` gives identical bits."""
    files = list_feature_files(feature_dir)
    if not files:
        raise ValueError(f"no .afv1 files in {feature_dir}")

    def part(item):
        uid, path = item
        feat = read_afv1(path, uid)
        return accumulate_stats(NormStats.empty(feat.n_dims), feat)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        parts = list(pool.map(part, files))
    total = NormStats.empty(parts[0].n_dims)
    for p in parts:
        total = total.merge(p)
    return total.finalize()


def normalize_corpus(feature_dir, stats: NormStats, out_dir, exempt_voicing: bool = False,
                     jobs: int = 1) -> list[str]:
    os.makedirs(out_dir, exist_ok=True)
    files = list_feature_files(feature_dir)

    def run(item):
        uid, path = item
        write_afv1(normalize(read_afv1(path, uid), stats, exempt_voicing), os.path.join(out_dir, f"{uid}.afv1"))
        return uid

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(run, files))


def augment_corpus(feature_dir, out_dir, policy: SmoothingPolicy, step: int, total_steps: int,
                   forced_sizes: tuple[int, int] | None = None, jobs: int = 1) -> list[tuple[str, int, int]]:
    """Smooth every file; returns ``(id, l_t, l_f)`` rows in sorted-id order.

    ``forced_sizes`` bypasses both the schedule and the random draw.
    """
    os.makedirs(out_dir, exist_ok=True)
    files = list_feature_files(feature_dir)
    forced = None if forced_sizes is None else make_kernel(*forced_sizes, policy.kernel_shape)

    def run(item):
        uid, path = item
        feat = read_afv1(path, uid)
        if forced is not None:
            out, l_t, l_f = smooth_feature(feat, forced, policy.domain, policy.db_floor), forced.l_t, forced.l_f
        else:
            out, l_t, l_f = augment_step(feat, policy, step, total_steps, uid)
        write_afv1(out, os.path.join(out_dir, f"{uid}.afv1"))
        return uid, l_t, l_f

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        return list(pool.map(run, files))
