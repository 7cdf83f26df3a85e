"""Kernel backend selection.

The compiled extension is used when it imports cleanly, unless the
``COVERLENS_PURE_PYTHON`` environment variable is set to a non-empty value.
"""
import logging
import os

from coverlens import _kernels_py

log = logging.getLogger(__name__)

compiled = None
if not os.environ.get("COVERLENS_PURE_PYTHON"):
    try:
        from coverlens import _kernels as compiled
    except ImportError:
        log.debug("compiled kernels unavailable, using numpy fallback")

kernels = compiled if compiled is not None else _kernels_py
BACKEND = "cython" if compiled is not None else "python"


def _is_pow2(n):
    return n >= 2 and (n & (n - 1)) == 0


def power_spectrum_frames(x, window, frame_length, hop_length):
    # the compiled FFT only handles power-of-two lengths
    if compiled is not None and _is_pow2(frame_length):
        return compiled.power_spectrum_frames(x, window, frame_length, hop_length)
    return _kernels_py.power_spectrum_frames(x, window, frame_length, hop_length)


def resample_poly(x, table, up, down, n_out):
    return kernels.resample_poly(x, table, up, down, n_out)


def sgd_epoch(Z, y, order, theta, bias, lr, alpha, batch_size, active):
    return kernels.sgd_epoch(Z, y, order, theta, bias, lr, alpha, batch_size, active)


def zero_crossings(x):
    return kernels.zero_crossings(x)
