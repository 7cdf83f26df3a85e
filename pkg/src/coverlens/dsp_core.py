"""Framing, power spectra, mel filterbanks, log compression and the DCT-II."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from coverlens import _backend
from coverlens.errors import DimensionError

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class FrameConfig:
    frame_length: int = 2048
    hop_length: int = 512
    window: str = "hann"

    def __post_init__(self):
        if not 0 < self.hop_length <= self.frame_length:
            raise ValueError("need 0 < hop_length <= frame_length")
        if self.window not in ("hann", "rectangular"):
            raise ValueError(f"unknown window {self.window!r}")

    def n_frames(self, n_samples: int) -> int:
        return (n_samples - self.frame_length) // self.hop_length + 1


@lru_cache(maxsize=16)
def window_values(kind: str, length: int) -> np.ndarray:
    if kind == "rectangular":
        w = np.ones(length)
    else:
        # periodic Hann (the DFT-even form)
        w = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(length) / length)
    w.setflags(write=False)
    return w


def frame_signal(x, cfg: FrameConfig) -> np.ndarray:
    """Windowed frames of ``x`` as a (J, F) array, J = (len - F) // H + 1."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < cfg.frame_length:
        raise DimensionError(f"signal of {len(x)} samples is shorter than one frame ({cfg.frame_length})")
    frames = np.lib.stride_tricks.sliding_window_view(x, cfg.frame_length)[::cfg.hop_length]
    return frames * window_values(cfg.window, cfg.frame_length)


def dft_magnitude_sq(frame) -> np.ndarray:
    """|DFT|^2 of one frame, bins 0..F/2."""
    frame = np.asarray(frame, dtype=np.float64)
    n = len(frame)
    if n < 2:
        raise DimensionError("need at least two samples")
    return _backend.power_spectrum_frames(frame, np.ones(n), n, n)[0]


def power_spectrogram(x, cfg: FrameConfig) -> np.ndarray:
    """Power spectra of every windowed frame, shape (J, F/2+1)."""
    x = np.asarray(x, dtype=np.float64)
    if len(x) < cfg.frame_length:
        raise DimensionError(f"signal of {len(x)} samples is shorter than one frame ({cfg.frame_length})")
    return _backend.power_spectrum_frames(
        x, window_values(cfg.window, cfg.frame_length), cfg.frame_length, cfg.hop_length
    )


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    weights: np.ndarray
    fmin_hz: float
    fmax_hz: float
    sample_rate: int

    @property
    def num_filters(self) -> int:
        return self.weights.shape[0]

    @property
    def n_bins(self) -> int:
        return self.weights.shape[1]


def build_mel_filterbank(num_filters: int = 40, frame_length: int = 2048, sample_rate: int = 22050,
                         fmin_hz: float = 0.0, fmax_hz: float | None = None) -> MelFilterbank:
    """Unit-peak triangular filters on ``num_filters + 2`` mel-spaced edge points."""
    if fmax_hz is None:
        fmax_hz = sample_rate / 2
    if num_filters < 1:
        raise ValueError("need at least one filter")
    if not 0 <= fmin_hz < fmax_hz <= sample_rate / 2:
        raise ValueError(f"invalid frequency range [{fmin_hz}, {fmax_hz}] for sample rate {sample_rate}")
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin_hz), hz_to_mel(fmax_hz), num_filters + 2))
    freqs = np.arange(frame_length // 2 + 1) * sample_rate / frame_length
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (mid - lo)
    falling = (hi - freqs) / (hi - mid)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    empty = np.flatnonzero(weights.max(axis=1) <= 0)
    if len(empty):
        raise ValueError(
            f"filters {empty.tolist()} cover no FFT bin; use fewer filters or a longer frame"
        )
    weights.setflags(write=False)
    return MelFilterbank(weights, float(fmin_hz), float(fmax_hz), int(sample_rate))


def apply_filterbank(power, bank: MelFilterbank) -> np.ndarray:
    """Mel energies; accepts one spectrum or a (J, bins) stack."""
    power = np.asarray(power, dtype=np.float64)
    if power.shape[-1] != bank.n_bins:
        raise DimensionError(f"spectrum has {power.shape[-1]} bins, filterbank expects {bank.n_bins}")
    return power @ bank.weights.T


def log_energies(energies, floor_eps: float = LOG_FLOOR) -> np.ndarray:
    return np.log(np.maximum(np.asarray(energies, dtype=np.float64), floor_eps))


@lru_cache(maxsize=16)
def dct_matrix(size: int) -> np.ndarray:
    """Orthonormal DCT-II matrix G with G @ v giving the coefficients."""
    k = np.arange(size)[:, None]
    m = np.arange(size)[None, :]
    g = np.cos(np.pi * k * (2 * m + 1) / (2 * size))
    g[0] *= np.sqrt(1.0 / size)
    g[1:] *= np.sqrt(2.0 / size)
    g.setflags(write=False)
    return g


def dct_ii(v, num_coeffs: int | None = None) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, keeping the first ``num_coeffs``."""
    v = np.asarray(v, dtype=np.float64)
    size = v.shape[-1]
    if size < 1:
        raise DimensionError("empty input")
    if num_coeffs is None:
        num_coeffs = size
    if not 0 < num_coeffs <= size:
        raise DimensionError(f"num_coeffs={num_coeffs} must be in 1..{size}")
    return v @ dct_matrix(size)[:num_coeffs].T
