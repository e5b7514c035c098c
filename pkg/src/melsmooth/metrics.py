"""Mel-spectral distance (MSD) and normalised histograms of it.

MSD is the plain per-frame L2 norm of the dB difference between two
mel-spectrograms (no division by sqrt(n_mels)).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .augment import make_kernel, smooth_mel


@dataclass
class MsdResult:
    per_frame: np.ndarray
    utterance_mean: float

    @property
    def n_frames(self) -> int:
        return self.per_frame.shape[0]


def msd(ref: np.ndarray, other: np.ndarray) -> MsdResult:
    ref = np.asarray(ref, dtype=np.float64)
    other = np.asarray(other, dtype=np.float64)
    if ref.shape != other.shape:
        raise ValueError(f"shape mismatch: ref {ref.shape} vs other {other.shape}")
    if ref.ndim != 2 or ref.shape[0] == 0:
        raise ValueError(f"expected a non-empty T x n_mels grid, got {ref.shape}")
    per_frame = np.sqrt(np.sum((ref - other) ** 2, axis=1))
    return MsdResult(per_frame, float(per_frame.mean()))


@dataclass
class NormalizedHistogram:
    bin_edges: np.ndarray
    masses: np.ndarray
    n_total: int
    n_below: int
    n_above: int

    @property
    def n_in_range(self) -> int:
        return self.n_total - self.n_below - self.n_above

    @property
    def empty(self) -> bool:
        return self.n_in_range == 0

    @property
    def in_range_fraction(self) -> float:
        return self.n_in_range / self.n_total if self.n_total else 0.0

    @property
    def out_of_range_fraction(self) -> float:
        return (self.n_below + self.n_above) / self.n_total if self.n_total else 0.0

    def to_tsv(self) -> str:
        lines = ["# bin_lo\tbin_hi\tmass"]
        for lo, hi, m in zip(self.bin_edges[:-1], self.bin_edges[1:], self.masses):
            lines.append(f"{lo:.6g}\t{hi:.6g}\t{m:.9g}")
        return "\n".join(lines) + "\n"


def normalized_histogram(values, n_bins: int, value_range: tuple[float, float]) -> NormalizedHistogram:
    """Counts over ``n_bins`` uniform bins divided by the in-range count.

    The last bin is closed on the right.  Out-of-range values are tallied in
    ``n_below`` / ``n_above``; with nothing in range all masses are zero.
    """
    lo, hi = float(value_range[0]), float(value_range[1])
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    if not lo < hi:
        raise ValueError(f"need lo < hi, got ({lo}, {hi})")
    v = np.asarray(values, dtype=np.float64).ravel()
    counts, edges = np.histogram(v, bins=n_bins, range=(lo, hi))
    n_in = int(counts.sum())
    masses = counts / n_in if n_in else np.zeros(n_bins)
    return NormalizedHistogram(edges, masses, int(v.size), int(np.sum(v < lo)), int(np.sum(v > hi)))


@dataclass
class SweepRow:
    l_t: int
    l_f: int
    per_frame: np.ndarray
    utterance_means: np.ndarray
    histogram: NormalizedHistogram | None = None
    utterance_histogram: NormalizedHistogram | None = None

    @property
    def mean(self) -> float:
        return float(self.per_frame.mean())

    @property
    def std(self) -> float:
        return float(self.per_frame.std())

    @property
    def p50(self) -> float:
        return float(np.percentile(self.per_frame, 50))

    @property
    def p90(self) -> float:
        return float(np.percentile(self.per_frame, 90))


def _as_items(corpus):
    items = []
    for entry in corpus:
        if hasattr(entry, "mel"):
            items.append((entry.utterance_id, np.asarray(entry.mel, dtype=np.float64)))
        else:
            uid, mel = entry
            items.append((uid, np.asarray(mel, dtype=np.float64)))
    if not items:
        raise ValueError("empty corpus")
    return sorted(items, key=lambda kv: kv[0])


def msd_sweep(corpus, sizes, n_bins: int = 50, value_range: tuple[float, float] | None = None,
              min_energy_db: float | None = None, kernel_shape: str = "triangular",
              jobs: int = 1) -> list[SweepRow]:
    """Per-frame MSD between each mel and its smoothed copy, for every size pair.

    ``corpus`` holds ``AcousticFeature`` objects or ``(id, mel)`` pairs and is
    reduced in utterance-id order.  With ``min_energy_db`` set, frames whose
    loudest reference band is below it are skipped.  Histograms share one
    range, ``[0, max MSD]`` unless ``value_range`` is given.
    """
    items = _as_items(corpus)

    def one(mel, l_t, l_f):
        res = msd(mel, smooth_mel(mel, make_kernel(l_t, l_f, kernel_shape)))
        d = res.per_frame
        if min_energy_db is not None:
            d = d[mel.max(axis=1) >= min_energy_db]
        return d

    rows = []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for l_t, l_f in sizes:
            per_utt = list(pool.map(lambda kv: one(kv[1], l_t, l_f), items))
            kept = [d for d in per_utt if d.size]
            if not kept:
                raise ValueError("no frames left after the energy gate")
            rows.append(SweepRow(l_t, l_f, np.concatenate(kept), np.array([d.mean() for d in kept])))

    if value_range is None:
        hi = max(float(r.per_frame.max()) for r in rows)
        value_range = (0.0, hi if hi > 0 else 1.0)
    for r in rows:
        r.histogram = normalized_histogram(r.per_frame, n_bins, value_range)
        r.utterance_histogram = normalized_histogram(r.utterance_means, n_bins, value_range)
    return rows


def summary_tsv(rows: list[SweepRow]) -> str:
    lines = ["# l_t\tl_f\tmean\tstd\tp50\tp90"]
    for r in rows:
        lines.append(f"{r.l_t}\t{r.l_f}\t{r.mean:.6f}\t{r.std:.6f}\t{r.p50:.6f}\t{r.p90:.6f}")
    return "\n".join(lines) + "\n"
