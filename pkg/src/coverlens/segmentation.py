"""Fixed-length windowing of paired cover/original recordings.

Each recording is cut into consecutive windows of ``L * SR`` samples, the
last one zero-padded at the tail.  Window ``k`` of the cover is paired with
window ``k`` of the original, which turns one recording pair into several
training rows.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from coverlens.audio_io import STANDARD_RATE, AudioClip
from coverlens.errors import SegmentationError


@dataclass(frozen=True)
class SegmentConfig:
    segment_seconds: float = 30.0
    sample_rate: int = STANDARD_RATE

    def __post_init__(self):
        if self.segment_seconds <= 0 or self.sample_rate <= 0:
            raise ValueError("segment_seconds and sample_rate must be positive")
        if self.segment_samples < 1:
            raise ValueError("segment must span at least one sample")

    @property
    def segment_samples(self) -> int:
        return int(round(self.segment_seconds * self.sample_rate))


@dataclass(frozen=True)
class SegmentPair:
    pair_id: str
    k: int
    cover: np.ndarray
    original: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("segment index k is 1-based")
        if len(self.cover) != len(self.original):
            raise ValueError("cover and original windows differ in length")


def segment_count(n_samples: int, cfg: SegmentConfig) -> int:
    return math.ceil(n_samples / cfg.segment_samples)


def segment_signal(clip: AudioClip, cfg: SegmentConfig) -> list[np.ndarray]:
    if clip.sample_rate_hz != cfg.sample_rate:
        raise SegmentationError(
            f"clip is at {clip.sample_rate_hz} Hz but segments expect {cfg.sample_rate} Hz; resample first"
        )
    x = clip.samples
    if len(x) == 0:
        raise SegmentationError("cannot segment an empty clip")
    size = cfg.segment_samples
    windows = []
    for start in range(0, len(x), size):
        w = x[start:start + size]
        if len(w) < size:
            w = np.concatenate([w, np.zeros(size - len(w))])
        else:
            w = w.copy()
        windows.append(w)
    return windows


def pair_segments(cover: AudioClip, original: AudioClip, cfg: SegmentConfig, pair_id) -> list[SegmentPair]:
    """Index-aligned window pairs, truncated to the shorter recording's count."""
    if len(cover) == 0 or len(original) == 0:
        raise SegmentationError(f"pair {pair_id}: empty recording")
    cw = segment_signal(cover, cfg)
    ow = segment_signal(original, cfg)
    return [SegmentPair(str(pair_id), k, c, o) for k, (c, o) in enumerate(zip(cw, ow), start=1)]
