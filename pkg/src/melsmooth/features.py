"""102-dim acoustic features, global normalisation and the AFV1 file format.

Column layout: ``[0, n_mels)`` mel dB, ``n_mels`` natural-log F0 in Hz,
``n_mels + 1`` voicing flag in {0, 1}.

AFV1 (all little-endian)::

    magic "AFV1" | u32 version=1 | u32 n_frames | u32 n_dims | u8 dtype=0 | 3 x u8 zero
    n_frames * n_dims float32, row-major

Values are stored as float32; reading returns a float32 array.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

N_MELS = 100
N_DIMS = N_MELS + 2
N_TAIL_DIMS = 2
LOG_F0_COL = N_MELS
VOICING_COL = N_MELS + 1
STD_FLOOR = 1e-8

AFV1_MAGIC = b"AFV1"
AFV1_VERSION = 1
AFV1_DTYPE_F32 = 0
_HEADER = struct.Struct("<4sIIIB3s")


@dataclass
class AcousticFeature:
    values: np.ndarray
    utterance_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] <= N_TAIL_DIMS:
            raise ValueError(f"feature matrix must be T x D with T >= 1, D > 2; got {values.shape}")
        if not np.issubdtype(values.dtype, np.floating):
            values = values.astype(np.float64)
        self.values = values

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]

    @property
    def n_dims(self) -> int:
        return self.values.shape[1]

    @property
    def mel(self) -> np.ndarray:
        return self.values[:, :-N_TAIL_DIMS]


def assemble(mel: np.ndarray, pitch, utterance_id: str = "") -> AcousticFeature:
    """Stack mel dB, interpolated log-F0 and the voicing flag column-wise."""
    mel = np.asarray(mel, dtype=np.float64)
    if mel.shape[0] != pitch.n_frames:
        raise ValueError(f"frame count mismatch: mel has {mel.shape[0]} frames, pitch has {pitch.n_frames}")
    values = np.empty((mel.shape[0], mel.shape[1] + N_TAIL_DIMS))
    values[:, :-N_TAIL_DIMS] = mel
    values[:, -2] = pitch.log_f0
    values[:, -1] = pitch.voicing
    return AcousticFeature(values, utterance_id)


class StatsNotFinalizedError(RuntimeError):
    pass


@dataclass
class NormStats:
    """Streaming per-dimension mean and population variance.

    ``m2`` is the sum of squared deviations from ``mean``.  Partial stats are
    combined with Chan et al.'s pairwise update, so accumulation order only
    affects rounding.
    """

    count: int
    mean: np.ndarray
    m2: np.ndarray
    finalized: bool = False
    std_floor: float = STD_FLOOR

    @classmethod
    def empty(cls, n_dims: int = N_DIMS) -> "NormStats":
        return cls(0, np.zeros(n_dims), np.zeros(n_dims))

    @property
    def n_dims(self) -> int:
        return self.mean.shape[0]

    @property
    def std(self) -> np.ndarray:
        if self.count == 0:
            return np.full(self.n_dims, self.std_floor)
        return np.maximum(np.sqrt(self.m2 / self.count), self.std_floor)

    def merge(self, other: "NormStats") -> "NormStats":
        if other.n_dims != self.n_dims:
            raise ValueError(f"dimension mismatch: {self.n_dims} vs {other.n_dims}")
        if other.count == 0:
            return NormStats(self.count, self.mean.copy(), self.m2.copy(), std_floor=self.std_floor)
        if self.count == 0:
            return NormStats(other.count, other.mean.copy(), other.m2.copy(), std_floor=self.std_floor)
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.count * other.count / n)
        return NormStats(n, mean, m2, std_floor=self.std_floor)

    def finalize(self) -> "NormStats":
        if self.count < 2:
            raise StatsNotFinalizedError(f"need at least 2 frames to finalize, have {self.count}")
        return NormStats(self.count, self.mean.copy(), self.m2.copy(), True, self.std_floor)

    def to_json(self) -> dict:
        return {"dims": self.n_dims, "count": self.count,
                "mean": [float(v) for v in self.mean], "std": [float(v) for v in self.std]}

    @classmethod
    def from_json(cls, obj: dict) -> "NormStats":
        mean = np.asarray(obj["mean"], dtype=np.float64)
        std = np.asarray(obj["std"], dtype=np.float64)
        if not (len(mean) == len(std) == obj["dims"]):
            raise ValueError("stats file: dims does not match mean/std lengths")
        count = int(obj["count"])
        return cls(count, mean, std ** 2 * count, finalized=count >= 2)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "NormStats":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def accumulate_stats(stats: NormStats, feat: AcousticFeature) -> NormStats:
    x = np.asarray(feat.values, dtype=np.float64)
    if x.shape[1] != stats.n_dims:
        raise ValueError(f"feature has {x.shape[1]} dims, stats have {stats.n_dims}")
    mean = x.mean(axis=0)
    m2 = ((x - mean) ** 2).sum(axis=0)
    return stats.merge(NormStats(x.shape[0], mean, m2, std_floor=stats.std_floor))


def _check_final(stats: NormStats, feat: AcousticFeature) -> None:
    if not stats.finalized:
        raise StatsNotFinalizedError("normalisation stats are not finalized")
    if feat.n_dims != stats.n_dims:
        raise ValueError(f"feature has {feat.n_dims} dims, stats have {stats.n_dims}")


def normalize(feat: AcousticFeature, stats: NormStats, exempt_voicing: bool = False) -> AcousticFeature:
    """``(x - mean) / max(std, floor)`` per dimension (float64 result)."""
    _check_final(stats, feat)
    x = np.asarray(feat.values, dtype=np.float64)
    out = (x - stats.mean) / stats.std
    if exempt_voicing:
        out[:, -1] = x[:, -1]
    return AcousticFeature(out, feat.utterance_id)


def denormalize(feat: AcousticFeature, stats: NormStats, exempt_voicing: bool = False) -> AcousticFeature:
    _check_final(stats, feat)
    x = np.asarray(feat.values, dtype=np.float64)
    out = x * stats.std + stats.mean
    if exempt_voicing:
        out[:, -1] = x[:, -1]
    return AcousticFeature(out, feat.utterance_id)


class Afv1FormatError(ValueError):
    pass


class BadMagicError(Afv1FormatError):
    pass


class UnsupportedVersionError(Afv1FormatError):
    pass


class TruncatedFileError(Afv1FormatError):
    pass


def encode_afv1(feat: AcousticFeature) -> bytes:
    values = np.asarray(feat.values)
    if values.ndim != 2 or values.shape[0] < 1:
        raise ValueError("AFV1 requires at least one frame")
    header = _HEADER.pack(AFV1_MAGIC, AFV1_VERSION, values.shape[0], values.shape[1],
                          AFV1_DTYPE_F32, b"\0\0\0")
    return header + np.ascontiguousarray(values, dtype="<f4").tobytes()


def decode_afv1(data: bytes, utterance_id: str = "") -> AcousticFeature:
    if len(data) < 4 or data[:4] != AFV1_MAGIC:
        raise BadMagicError("bad magic")
    if len(data) < _HEADER.size:
        raise TruncatedFileError(f"truncated header: {len(data)} < {_HEADER.size} bytes")
    magic, version, n_frames, n_dims, dtype, reserved = _HEADER.unpack_from(data)
    if version != AFV1_VERSION:
        raise UnsupportedVersionError(f"unsupported version {version}")
    if dtype != AFV1_DTYPE_F32:
        raise Afv1FormatError(f"unsupported dtype code {dtype}")
    if reserved != b"\0\0\0":
        raise Afv1FormatError("reserved header bytes are not zero")
    if n_frames < 1:
        raise Afv1FormatError("AFV1 file has zero frames")
    expected = _HEADER.size + 4 * n_frames * n_dims
    if len(data) < expected:
        raise TruncatedFileError(f"truncated payload: {len(data)} < {expected} bytes")
    if len(data) > expected:
        raise Afv1FormatError(f"{len(data) - expected} trailing bytes after payload")
    values = np.frombuffer(data, dtype="<f4", count=n_frames * n_dims, offset=_HEADER.size)
    return AcousticFeature(values.reshape(n_frames, n_dims).astype(np.float32), utterance_id)


def write_afv1(feat: AcousticFeature, path) -> None:
    data = encode_afv1(feat)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def read_afv1(path, utterance_id: str | None = None) -> AcousticFeature:
    with open(path, "rb") as fh:
        data = fh.read()
    if utterance_id is None:
        utterance_id = os.path.splitext(os.path.basename(path))[0]
    return decode_afv1(data, utterance_id)


def list_feature_files(feature_dir) -> list[tuple[str, str]]:
    """``(utterance_id, path)`` for every ``*.afv1`` in a directory, sorted by id."""
    out = []
    for name in os.listdir(feature_dir):
        if name.endswith(".afv1"):
            out.append((name[:-5], os.path.join(feature_dir, name)))
    return sorted(out)

