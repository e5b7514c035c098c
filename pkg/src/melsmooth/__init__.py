"""Acoustic-feature extraction and random mel smoothing for vocoder training."""

from .augment import (FilterSizeDistribution, SmoothingPolicy, TriangularKernel, augment_step,
                      make_kernel, sample_size, smooth_mel, triangular_profile)
from .dsp import MelConfig, StftConfig, Waveform, hann_window, mel_filterbank, mel_spectrogram, stft
from .features import (AcousticFeature, NormStats, accumulate_stats, assemble, denormalize, normalize,
                       read_afv1, write_afv1)
from .metrics import msd, msd_sweep, normalized_histogram
from .pitch import PitchConfig, PitchTrack, interpolate_f0, pyin_track, yin_cmnd
from .rng import SplitMix64

__version__ = "0.1.0"
