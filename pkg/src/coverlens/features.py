"""Per-segment feature maps and their cover/original concatenation.

Four descriptors summarize one window of audio as a short vector: MFCC
(timbre), chroma (pitch-class energy), spectral contrast (peak/valley
spread per octave band) and temporal (zero-crossing rate plus temporal
centroid).  A pair's feature vector is ``[phi(cover); phi(original)]``.
The baseline skips all of this and uses ``|cover - original|`` sample by
sample.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from coverlens import _backend
from coverlens.dsp_core import (
    LOG_FLOOR,
    FrameConfig,
    MelFilterbank,
    apply_filterbank,
    build_mel_filterbank,
    dct_ii,
    log_energies,
    power_spectrogram,
)
from coverlens.errors import DimensionError
from coverlens.segmentation import SegmentConfig, SegmentPair


class FeatureKind(str, enum.Enum):
    MFCC = "mfcc"
    CHROMA = "chroma"
    SPECTRAL_CONTRAST = "spectral_contrast"
    TEMPORAL = "temporal"
    BASELINE_ABSDIFF = "baseline_absdiff"

    def side_dim(self, seg_cfg: SegmentConfig | None = None) -> int:
        if self is FeatureKind.BASELINE_ABSDIFF:
            return (seg_cfg or SegmentConfig()).segment_samples
        return _SIDE_DIMS[self]

    def pair_dim(self, seg_cfg: SegmentConfig | None = None) -> int:
        if self is FeatureKind.BASELINE_ABSDIFF:
            return self.side_dim(seg_cfg)
        return 2 * self.side_dim(seg_cfg)


_SIDE_DIMS = {
    FeatureKind.MFCC: 13,
    FeatureKind.CHROMA: 12,
    FeatureKind.SPECTRAL_CONTRAST: 7,
    FeatureKind.TEMPORAL: 2,
}

FEATURE_KINDS = (FeatureKind.MFCC, FeatureKind.CHROMA, FeatureKind.SPECTRAL_CONTRAST, FeatureKind.TEMPORAL)

N_MFCC = 13
# F=2048 bins are 10.8 Hz wide at 22.05 kHz, coarser than a semitone below ~180 Hz
CHROMA_FRAME = FrameConfig(frame_length=8192, hop_length=2048)
CHROMA_FMIN_HZ = 20.0
CONTRAST_EDGES_HZ = (0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0)
CONTRAST_ALPHA = 0.02
PITCH_CLASSES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")


@dataclass(frozen=True, eq=False)
class FeatureVector:
    kind: FeatureKind
    values: np.ndarray
    pair_id: str
    k: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or not np.all(np.isfinite(values)):
            raise ValueError("feature values must be a finite 1-D vector")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", FeatureKind(self.kind))


def mfcc_segment(segment, cfg: FrameConfig, bank: MelFilterbank, n_mfcc: int = N_MFCC) -> np.ndarray:
    """Frame-averaged MFCCs: DCT of log mel energies of each power spectrum."""
    power = power_spectrogram(segment, cfg)
    coeffs = dct_ii(log_energies(apply_filterbank(power, bank), LOG_FLOOR), n_mfcc)
    return coeffs.mean(axis=0)


def pitch_class_of(freq_hz):
    """Nearest equal-tempered pitch class (0 = C, 9 = A) of a frequency."""
    semis = np.round(12.0 * np.log2(np.asarray(freq_hz, dtype=np.float64) / 440.0)).astype(int)
    return (semis + 9) % 12


def _chroma_map(frame_length: int, sample_rate: int) -> np.ndarray:
    freqs = np.arange(frame_length // 2 + 1) * sample_rate / frame_length
    mapping = np.zeros((len(freqs), 12))
    usable = np.flatnonzero(freqs >= CHROMA_FMIN_HZ)
    mapping[usable, pitch_class_of(freqs[usable])] = 1.0
    return mapping


def chroma_segment(segment, cfg: FrameConfig = CHROMA_FRAME, sample_rate: int = 22050) -> np.ndarray:
    """Mean over frames of the max-normalized 12-bin pitch-class magnitude profile."""
    mag = np.sqrt(power_spectrogram(segment, cfg))
    profile = mag @ _chroma_map(cfg.frame_length, sample_rate)
    peak = profile.max(axis=1, keepdims=True)
    profile = np.divide(profile, peak, out=np.zeros_like(profile), where=peak > 0)
    return profile.mean(axis=0)


def contrast_band_bins(frame_length: int, sample_rate: int) -> list[np.ndarray]:
    """FFT bin indices of each contrast band; the top band runs to Nyquist inclusive."""
    freqs = np.arange(frame_length // 2 + 1) * sample_rate / frame_length
    edges = list(CONTRAST_EDGES_HZ) + [sample_rate / 2]
    bands = []
    for b in range(len(edges) - 1):
        lo, hi = edges[b], edges[b + 1]
        if b == len(edges) - 2:
            sel = (freqs >= lo) & (freqs <= hi)
        else:
            sel = (freqs >= lo) & (freqs < hi)
        bands.append(np.flatnonzero(sel))
    return bands


def contrast_from_magnitudes(mag, frame_length: int, sample_rate: int,
                             alpha: float = CONTRAST_ALPHA) -> np.ndarray:
    """Per-frame band contrast ln(peak) - ln(valley), shape (J, 7)."""
    mag = np.atleast_2d(np.asarray(mag, dtype=np.float64))
    out = np.zeros((mag.shape[0], len(CONTRAST_EDGES_HZ)))
    for b, bins in enumerate(contrast_band_bins(frame_length, sample_rate)):
        n = len(bins)
        if n == 0:
            continue
        q = max(1, math.ceil(alpha * n))
        ordered = np.sort(mag[:, bins], axis=1)
        valley = ordered[:, :q].mean(axis=1)
        peak = ordered[:, n - q:].mean(axis=1)
        out[:, b] = np.log(peak + LOG_FLOOR) - np.log(valley + LOG_FLOOR)
    return out


def spectral_contrast_segment(segment, cfg: FrameConfig, sample_rate: int = 22050,
                              alpha: float = CONTRAST_ALPHA) -> np.ndarray:
    mag = np.sqrt(power_spectrogram(segment, cfg))
    return contrast_from_magnitudes(mag, cfg.frame_length, sample_rate, alpha).mean(axis=0)


def zero_crossing_rate(segment) -> float:
    segment = np.asarray(segment, dtype=np.float64)
    if len(segment) < 2:
        return 0.0
    return _backend.zero_crossings(segment) / (len(segment) - 1)


def temporal_centroid(segment, sample_rate: int) -> float:
    """Amplitude-weighted mean time in seconds; 0 for silence."""
    env = np.abs(np.asarray(segment, dtype=np.float64))
    total = env.sum()
    if total == 0:
        return 0.0
    return float(np.dot(np.arange(len(env)), env) / (sample_rate * total))


def temporal_segment(segment, sample_rate: int = 22050) -> np.ndarray:
    segment = np.asarray(segment, dtype=np.float64)
    if len(segment) == 0:
        raise DimensionError("empty segment")
    return np.array([zero_crossing_rate(segment), temporal_centroid(segment, sample_rate)])


@dataclass(frozen=True, eq=False)
class FeatureExtractor:
    """Holds the analysis settings shared by every segment of a run."""

    seg_cfg: SegmentConfig = field(default_factory=SegmentConfig)
    frame_cfg: FrameConfig = field(default_factory=FrameConfig)
    chroma_cfg: FrameConfig = CHROMA_FRAME
    num_mel_filters: int = 40
    n_mfcc: int = N_MFCC

    def __post_init__(self):
        bank = build_mel_filterbank(self.num_mel_filters, self.frame_cfg.frame_length, self.seg_cfg.sample_rate)
        object.__setattr__(self, "bank", bank)

    def side(self, kind: FeatureKind, segment) -> np.ndarray:
        kind = FeatureKind(kind)
        sr = self.seg_cfg.sample_rate
        if kind is FeatureKind.MFCC:
            return mfcc_segment(segment, self.frame_cfg, self.bank, self.n_mfcc)
        if kind is FeatureKind.CHROMA:
            return chroma_segment(segment, self.chroma_cfg, sr)
        if kind is FeatureKind.SPECTRAL_CONTRAST:
            return spectral_contrast_segment(segment, self.frame_cfg, sr)
        if kind is FeatureKind.TEMPORAL:
            return temporal_segment(segment, sr)
        raise ValueError("the absolute-difference baseline is a pair feature, not a per-side one")

    def pair(self, pair: SegmentPair, kind: FeatureKind) -> FeatureVector:
        kind = FeatureKind(kind)
        if kind is FeatureKind.BASELINE_ABSDIFF:
            return baseline_absdiff(pair)
        values = np.concatenate([self.side(kind, pair.cover), self.side(kind, pair.original)])
        return FeatureVector(kind, values, pair.pair_id, pair.k)


def pair_feature(pair: SegmentPair, kind: FeatureKind, extractor: FeatureExtractor | None = None) -> FeatureVector:
    """``[phi(cover); phi(original)]`` for one of the four feature kinds."""
    kind = FeatureKind(kind)
    if kind is FeatureKind.BASELINE_ABSDIFF:
        raise ValueError("use baseline_absdiff for the baseline kind")
    return (extractor or FeatureExtractor()).pair(pair, kind)


def baseline_absdiff(pair: SegmentPair) -> FeatureVector:
    return FeatureVector(
        FeatureKind.BASELINE_ABSDIFF, np.abs(pair.cover - pair.original), pair.pair_id, pair.k
    )
