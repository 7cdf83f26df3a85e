import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coverlens.audio_io import AudioClip
from coverlens.errors import SegmentationError
from coverlens.segmentation import SegmentConfig, pair_segments, segment_count, segment_signal

SR = 100  # a low rate keeps the 30 s windows small; the arithmetic is rate-independent
CFG = SegmentConfig(30.0, SR)


def _clip(seconds, sr=SR):
    return AudioClip(np.arange(1, int(seconds * sr) + 1, dtype=float), sr)


def test_75s_three_windows():
    w = segment_signal(_clip(75), CFG)
    assert len(w) == 3
    assert all(len(x) == 3000 for x in w)
    assert np.all(w[2][:1500] != 0) and np.all(w[2][1500:] == 0)


def test_60s_exact():
    w = segment_signal(_clip(60), CFG)
    assert len(w) == 2
    assert np.all(w[1] != 0)


def test_10s_single_window():
    w = segment_signal(_clip(10), CFG)
    assert len(w) == 1
    assert np.all(w[0][:1000] != 0) and np.all(w[0][1000:] == 0)
    assert np.count_nonzero(w[0] == 0) == 2000


def test_pairs_truncate_to_shorter():
    pairs = pair_segments(_clip(95), _clip(200), CFG, "p")
    assert len(pairs) == 4
    assert [p.k for p in pairs] == [1, 2, 3, 4]


def test_identical_clips():
    pairs = pair_segments(_clip(45), _clip(45), CFG, "p")
    for p in pairs:
        np.testing.assert_array_equal(p.cover, p.original)


def test_30s_one_pair_no_padding():
    pairs = pair_segments(_clip(30), _clip(30), CFG, "p")
    assert len(pairs) == 1 and np.all(pairs[0].cover != 0)


def test_errors():
    with pytest.raises(SegmentationError):
        segment_signal(AudioClip(np.zeros(0), SR), CFG)
    with pytest.raises(SegmentationError):
        segment_signal(_clip(1, sr=200), CFG)
    with pytest.raises(SegmentationError):
        pair_segments(AudioClip(np.zeros(0), SR), _clip(1), CFG, "p")


def test_default_segment_samples():
    assert SegmentConfig().segment_samples == 661500


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 2000), size=st.integers(1, 300))
def test_windows_reconstruct_signal(n, size):
    cfg = SegmentConfig(size / 1000.0, 1000)
    x = np.arange(1, n + 1, dtype=float)
    w = segment_signal(AudioClip(x, 1000), cfg)
    assert len(w) == segment_count(n, cfg) == -(-n // size)
    flat = np.concatenate(w)
    np.testing.assert_array_equal(flat[:n], x)
    assert np.all(flat[n:] == 0) and len(flat) - n < size
