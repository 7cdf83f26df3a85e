"""WAV reading/writing, mono downmix and sample-rate conversion."""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from coverlens import _backend
from coverlens.errors import MalformedWavError, UnsupportedCodecError, WavError, WavNotFoundError

STANDARD_RATE = 22050

_FORMAT_PCM = 0x0001
_FORMAT_FLOAT = 0x0003
_FORMAT_EXTENSIBLE = 0xFFFE

RESAMPLE_TAPS = 32
KAISER_BETA = 8.0


@dataclass(frozen=True)
class AudioClip:
    """A mono signal and its sample rate."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip holds exactly one channel")
        if int(self.sample_rate_hz) != self.sample_rate_hz or self.sample_rate_hz <= 0:
            raise ValueError(f"sample rate must be a positive integer, got {self.sample_rate_hz!r}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate_hz


def _chunks(data: bytes):
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack_from("<4sI", data, pos)
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size and cid != b"data":
            raise MalformedWavError(f"chunk {cid!r} truncated")
        yield cid, body
        pos += 8 + size + (size & 1)


def _decode(body: bytes, fmt_tag: int, bits: int, channels: int) -> np.ndarray:
    width = bits // 8
    frame = width * channels
    usable = len(body) - len(body) % frame
    body = body[:usable]
    if fmt_tag == _FORMAT_FLOAT:
        if bits not in (32, 64):
            raise UnsupportedCodecError(f"{bits}-bit float WAV is not supported")
        data = np.frombuffer(body, dtype="<f4" if bits == 32 else "<f8").astype(np.float64)
    elif bits == 8:
        # 8-bit PCM is unsigned with a 128 offset
        data = (np.frombuffer(body, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits == 16:
        data = np.frombuffer(body, dtype="<i2") / 32768.0
    elif bits == 24:
        raw = np.frombuffer(body, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        ints = raw[:, 0] | (raw[:, 1] << 8) | (raw[:, 2] << 16)
        ints = np.where(ints & 0x800000, ints - (1 << 24), ints)
        data = ints / float(1 << 23)
    elif bits == 32:
        data = np.frombuffer(body, dtype="<i4") / float(1 << 31)
    else:
        raise UnsupportedCodecError(f"{bits}-bit integer PCM is not supported")
    return data.reshape(-1, channels)


def read_wav(path) -> AudioClip:
    """Read a PCM or IEEE-float RIFF/WAVE file as a mono :class:`AudioClip`.

    Integer samples are divided by ``2**(bits-1)``; channels are averaged.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except FileNotFoundError:
        raise WavNotFoundError(f"no such file: {path}") from None
    except IsADirectoryError:
        raise WavNotFoundError(f"not a file: {path}") from None

    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedWavError(f"{path}: missing RIFF/WAVE header")

    fmt = None
    body = None
    for cid, chunk in _chunks(data):
        if cid == b"fmt ":
            if len(chunk) < 16:
                raise MalformedWavError(f"{path}: fmt chunk too short")
            fmt = struct.unpack_from("<HHIIHH", chunk, 0)
            if fmt[0] == _FORMAT_EXTENSIBLE:
                if len(chunk) < 26:
                    raise MalformedWavError(f"{path}: extensible fmt chunk too short")
                # first two bytes of the subformat GUID carry the real format tag
                sub = struct.unpack_from("<H", chunk, 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            body = chunk
            break
    if fmt is None:
        raise MalformedWavError(f"{path}: no fmt chunk")
    if body is None:
        raise MalformedWavError(f"{path}: no data chunk")

    fmt_tag, channels, rate, _, _, bits = fmt
    if fmt_tag not in (_FORMAT_PCM, _FORMAT_FLOAT):
        raise UnsupportedCodecError(f"{path}: format tag 0x{fmt_tag:04x} is not PCM")
    if channels < 1 or rate < 1 or bits % 8:
        raise MalformedWavError(f"{path}: invalid fmt fields (channels={channels}, rate={rate}, bits={bits})")

    frames = _decode(body, fmt_tag, bits, channels)
    mono = frames[:, 0] if channels == 1 else frames.mean(axis=1)
    if not np.all(np.isfinite(mono)):
        raise MalformedWavError(f"{path}: non-finite samples")
    return AudioClip(mono, rate)


def write_wav(clip: AudioClip, path, bit_depth: str = "16-int") -> None:
    """Write ``clip`` as a mono WAV file.

    ``bit_depth`` is ``"16-int"`` (clamped to [-1, 1] and rounded) or
    ``"32-float"`` (lossless for float32-representable samples).
    """
    if bit_depth == "16-int":
        ints = np.round(np.clip(clip.samples, -1.0, 1.0) * 32768.0)
        payload = np.clip(ints, -32768, 32767).astype("<i2").tobytes()
        fmt = struct.pack("<HHIIHH", _FORMAT_PCM, 1, clip.sample_rate_hz, clip.sample_rate_hz * 2, 2, 16)
    elif bit_depth == "32-float":
        payload = clip.samples.astype("<f4").tobytes()
        fmt = struct.pack("<HHIIHH", _FORMAT_FLOAT, 1, clip.sample_rate_hz, clip.sample_rate_hz * 4, 4, 32)
    else:
        raise ValueError(f"unsupported bit depth {bit_depth!r}; use '16-int' or '32-float'")

    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    try:
        Path(path).write_bytes(b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks)
    except OSError as exc:
        raise WavError(f"cannot write {path}: {exc}") from exc


def resampled_length(n: int, source_rate: int, target_rate: int) -> int:
    """round(n * target / source), with halves rounded up."""
    return (2 * n * target_rate + source_rate) // (2 * source_rate)


@lru_cache(maxsize=32)
def _polyphase_table(up: int, down: int, ntaps: int = RESAMPLE_TAPS, beta: float = KAISER_BETA) -> np.ndarray:
    half = ntaps // 2
    cutoff = min(1.0, up / down)
    phases = np.arange(up)[:, None] / up
    # distance from output instant to each input tap, in input samples
    dist = phases + (half - 1) - np.arange(ntaps)[None, :]
    u = np.clip(dist / half, -1.0, 1.0)
    win = np.i0(beta * np.sqrt(1.0 - u ** 2)) / np.i0(beta)
    h = cutoff * np.sinc(cutoff * dist) * win
    # unit DC gain for every phase
    h /= h.sum(axis=1, keepdims=True)
    h.setflags(write=False)
    return h


def resample(clip: AudioClip, target_rate_hz: int) -> AudioClip:
    """Convert ``clip`` to ``target_rate_hz`` by Kaiser-windowed sinc interpolation."""
    if int(target_rate_hz) != target_rate_hz or target_rate_hz <= 0:
        raise ValueError(f"target rate must be a positive integer, got {target_rate_hz!r}")
    target_rate_hz = int(target_rate_hz)
    if target_rate_hz == clip.sample_rate_hz:
        return clip
    g = math.gcd(clip.sample_rate_hz, target_rate_hz)
    up, down = target_rate_hz // g, clip.sample_rate_hz // g
    n_out = resampled_length(len(clip.samples), clip.sample_rate_hz, target_rate_hz)
    if n_out == 0:
        return AudioClip(np.zeros(0), target_rate_hz)
    out = _backend.resample_poly(clip.samples, _polyphase_table(up, down), up, down, n_out)
    return AudioClip(out, target_rate_hz)


def load_clip(path, target_rate_hz: int = STANDARD_RATE) -> AudioClip:
    return resample(read_wav(path), target_rate_hz)
