"""Random triangular smoothing of mel-spectrograms for vocoder training.

A separable ``l_t x l_f`` triangular low-pass kernel (odd sizes, unit mass)
is drawn per training step and utterance and applied to the mel columns of an
acoustic feature.  Filter sizes follow

    P(l = 1) = p_g,   P(l = k) = p_s  for k in {3, 5, ..., 2N - 1},
    p_g + (N - 1) * p_s = 1,

independently for the time axis (``N_t`` candidates) and the frequency axis
(``N_f`` candidates).  Before ``augment_start_fraction * total_steps`` the
features pass through untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .features import N_TAIL_DIMS, AcousticFeature
from .rng import SplitMix64

KERNEL_SHAPES = ("triangular", "rectangular")
SMOOTHING_DOMAINS = ("db", "linear")


def _check_size(l: int) -> None:
    if isinstance(l, bool) or int(l) != l or l < 1 or l % 2 == 0:
        raise ValueError(f"filter sizes must be odd positive integers, got {l!r}")


def triangular_profile(l: int) -> np.ndarray:
    """``w[t] = (c - |t - c|) / c**2`` for ``t = 1..l`` with ``c = ceil(l / 2)``."""
    _check_size(l)
    c = (l + 1) // 2
    t = np.arange(1, l + 1)
    return (c - np.abs(t - c)) / float(c * c)


def rectangular_profile(l: int) -> np.ndarray:
    _check_size(l)
    return np.full(l, 1.0 / l)


_PROFILES = {"triangular": triangular_profile, "rectangular": rectangular_profile}


@dataclass(frozen=True)
class TriangularKernel:
    """Separable smoothing kernel; ``weights[t, f] = time[t] * freq[f]``."""

    time_profile: np.ndarray
    freq_profile: np.ndarray

    @property
    def l_t(self) -> int:
        return self.time_profile.shape[0]

    @property
    def l_f(self) -> int:
        return self.freq_profile.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return np.outer(self.time_profile, self.freq_profile)

    @property
    def is_identity(self) -> bool:
        return self.l_t == 1 and self.l_f == 1


def make_kernel(l_t: int, l_f: int, shape: str = "triangular") -> TriangularKernel:
    if shape not in _PROFILES:
        raise ValueError(f"unknown kernel shape {shape!r}; expected one of {KERNEL_SHAPES}")
    profile = _PROFILES[shape]
    return TriangularKernel(profile(l_t), profile(l_f))


@dataclass(frozen=True)
class FilterSizeDistribution:
    n_candidates: int
    p_g: float

    def __post_init__(self):
        if self.n_candidates < 1:
            raise ValueError("n_candidates must be >= 1")
        if not 0.0 <= self.p_g <= 1.0:
            raise ValueError(f"p_g must be in [0, 1], got {self.p_g}")
        if self.n_candidates == 1 and self.p_g != 1.0:
            raise ValueError("a single-candidate distribution needs p_g == 1")

    @classmethod
    def for_axis(cls, n_candidates: int, p_g: float) -> "FilterSizeDistribution":
        """Like the constructor, but a single candidate forces ``p_g = 1``."""
        return cls(n_candidates, 1.0 if n_candidates == 1 else p_g)

    @property
    def p_s(self) -> float:
        if self.n_candidates == 1:
            return 0.0
        return (1.0 - self.p_g) / (self.n_candidates - 1)

    @property
    def support(self) -> list[int]:
        return list(range(1, 2 * self.n_candidates, 2))

    def pmf(self) -> dict[int, float]:
        return {l: (self.p_g if l == 1 else self.p_s) for l in self.support}


def sample_size(dist: FilterSizeDistribution, rng: SplitMix64) -> int:
    """Draw one filter size; consumes exactly one 64-bit output of ``rng``."""
    u = rng.next_float()
    if dist.n_candidates == 1 or u < dist.p_g:
        return 1
    k = min(int((u - dist.p_g) / dist.p_s), dist.n_candidates - 2)
    return 3 + 2 * k


def smooth_mel(mel: np.ndarray, kernel: TriangularKernel) -> np.ndarray:
    """Smooth a ``(T, n_mels)`` grid with edge-replicate padding; same shape out.

    Runs as a time pass followed by a frequency pass.  The identity kernel
    returns an exact copy.
    """
    mel = np.asarray(mel)
    if mel.ndim != 2 or mel.size == 0:
        raise ValueError(f"mel must be a non-empty 2-D grid, got shape {mel.shape}")
    n_frames = mel.shape[0]
    if kernel.l_t > 2 * n_frames + 1:
        raise ValueError(f"time kernel size {kernel.l_t} exceeds 2*T+1 = {2 * n_frames + 1}")
    if kernel.is_identity:
        return mel.copy()
    out = np.ascontiguousarray(mel, dtype=np.float64)
    if kernel.l_t > 1:
        out = kernels.smooth_axis0(out, np.ascontiguousarray(kernel.time_profile))
    if kernel.l_f > 1:
        out = kernels.smooth_axis0(np.ascontiguousarray(out.T), np.ascontiguousarray(kernel.freq_profile)).T
    return np.ascontiguousarray(out)


@dataclass(frozen=True)
class SmoothingPolicy:
    """Defaults: six time candidates, three frequency candidates, ``p_g = 2/3``,
    smoothing over the last quarter of training (450k of 600k steps)."""

    n_t: int = 6
    n_f: int = 3
    p_g: float = 2.0 / 3.0
    augment_start_fraction: float = 0.75
    base_seed: int = 0
    per_step_only: bool = False
    domain: str = "db"
    kernel_shape: str = "triangular"
    db_floor: float = -100.0

    def __post_init__(self):
        if not 0.0 <= self.augment_start_fraction <= 1.0:
            raise ValueError("augment_start_fraction must be in [0, 1]")
        if self.domain not in SMOOTHING_DOMAINS:
            raise ValueError(f"domain must be one of {SMOOTHING_DOMAINS}")
        if self.kernel_shape not in KERNEL_SHAPES:
            raise ValueError(f"kernel_shape must be one of {KERNEL_SHAPES}")
        self.time_distribution
        self.freq_distribution

    @property
    def time_distribution(self) -> FilterSizeDistribution:
        return FilterSizeDistribution.for_axis(self.n_t, self.p_g)

    @property
    def freq_distribution(self) -> FilterSizeDistribution:
        return FilterSizeDistribution.for_axis(self.n_f, self.p_g)

    def in_augment_phase(self, step: int, total_steps: int) -> bool:
        return step >= self.augment_start_fraction * total_steps


def draw_sizes(policy: SmoothingPolicy, step: int, utterance_id: str) -> tuple[int, int]:
    """``(l_t, l_f)`` for one context; time size is drawn first from the stream."""
    rng = SplitMix64.for_context(policy.base_seed, step, None if policy.per_step_only else utterance_id)
    l_t = sample_size(policy.time_distribution, rng)
    l_f = sample_size(policy.freq_distribution, rng)
    return l_t, l_f


def smooth_feature(feat: AcousticFeature, kernel: TriangularKernel, domain: str = "db",
                   db_floor: float = -100.0) -> AcousticFeature:
    """Smooth only the mel columns; log-F0 and voicing pass through untouched.

    The result keeps the input dtype.  ``domain="linear"`` smooths amplitudes
    ``10 ** (dB / 20)`` and converts back, clamping at ``db_floor``.
    """
    values = feat.values
    n_mel = values.shape[1] - N_TAIL_DIMS
    if kernel.is_identity:
        return AcousticFeature(values.copy(), feat.utterance_id)
    mel = values[:, :n_mel].astype(np.float64)
    if domain == "linear":
        smoothed = smooth_mel(10.0 ** (mel / 20.0), kernel)
        smoothed = np.maximum(20.0 * np.log10(np.maximum(smoothed, 1e-300)), db_floor)
    else:
        smoothed = smooth_mel(mel, kernel)
    out = values.copy()
    out[:, :n_mel] = smoothed.astype(values.dtype)
    return AcousticFeature(out, feat.utterance_id)


def augment_step(feat: AcousticFeature, policy: SmoothingPolicy, step: int, total_steps: int,
                 utterance_id: str | None = None):
    """Training-time hook: returns ``(feature, l_t, l_f)``.

    The draw is a pure function of ``(policy.base_seed, step, utterance_id)``;
    ``utterance_id`` defaults to ``feat.utterance_id``.
    """
    if not 0 <= step < total_steps:
        raise ValueError(f"need 0 <= step < total_steps, got step={step}, total_steps={total_steps}")
    if utterance_id is None:
        utterance_id = feat.utterance_id
    if not policy.in_augment_phase(step, total_steps):
        return AcousticFeature(feat.values.copy(), feat.utterance_id), 1, 1
    l_t, l_f = draw_sizes(policy, step, utterance_id)
    kernel = make_kernel(l_t, l_f, policy.kernel_shape)
    return smooth_feature(feat, kernel, policy.domain, policy.db_floor), l_t, l_f
