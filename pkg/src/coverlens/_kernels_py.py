"""Pure numpy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
``coverlens._backend`` picks one at import time.
"""
import numpy as np

# outputs produced per gather in resample_poly; bounds the (chunk, ntaps) index array
_RESAMPLE_CHUNK = 1 << 16


def power_spectrum_frames(x, window, frame_length, hop_length):
    """One-sided power spectra of the windowed frames of ``x``, shape (J, F//2+1)."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    frames = np.lib.stride_tricks.sliding_window_view(x, frame_length)[::hop_length]
    spec = np.fft.rfft(frames * window, axis=-1)
    return spec.real ** 2 + spec.imag ** 2


def resample_poly(x, table, up, down, n_out):
    x = np.ascontiguousarray(x, dtype=np.float64)
    ntaps = table.shape[1]
    half = ntaps // 2
    xp = np.concatenate([np.zeros(half - 1), x, np.zeros(half)])
    out = np.empty(n_out)
    taps = np.arange(ntaps)
    for start in range(0, n_out, _RESAMPLE_CHUNK):
        pos = np.arange(start, min(start + _RESAMPLE_CHUNK, n_out), dtype=np.int64) * down
        base, phase = np.divmod(pos, up)
        out[start:start + len(pos)] = np.einsum(
            "ij,ij->i", table[phase], xp[base[:, None] + taps]
        )
    return out


def sgd_epoch(Z, y, order, theta, bias, lr, alpha, batch_size, active):
    """Run one epoch of mini-batch SGD in place on ``theta``; return the new bias.

    The step follows the gradient of the batch MSE plus ``alpha * ||theta||^2``;
    the bias is not regularized.  Weights where ``active`` is false stay at 0.
    """
    n = len(order)
    inactive = ~active.astype(bool)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        zb = Z[idx]
        resid = y[idx] - (zb @ theta + bias)
        scale = -2.0 / len(idx)
        grad_w = scale * (zb.T @ resid) + 2.0 * alpha * theta
        grad_b = scale * resid.sum()
        theta -= lr * grad_w
        bias -= lr * grad_b
        theta[inactive] = 0.0
    return bias


def zero_crossings(x):
    """Number of adjacent sample pairs whose signs differ; zero counts as positive."""
    x = np.asarray(x)
    if len(x) < 2:
        return 0
    nonneg = x >= 0
    return int(np.count_nonzero(nonneg[1:] != nonneg[:-1]))
