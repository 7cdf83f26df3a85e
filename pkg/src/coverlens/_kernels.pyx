# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Signatures mirror ``coverlens._kernels_py``."""
import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, M_PI

cnp.import_array()


cdef void _fft_inplace(double* re, double* im, Py_ssize_t m,
                       const Py_ssize_t* rev, const double* twr, const double* twi) noexcept nogil:
    """Iterative radix-2 decimation-in-time FFT of length m (power of two)."""
    cdef Py_ssize_t i, j, start, size, half, step, a, b
    cdef double tr, ti, wr, wi
    for i in range(m):
        j = rev[i]
        if j > i:
            tr = re[i]; re[i] = re[j]; re[j] = tr
            ti = im[i]; im[i] = im[j]; im[j] = ti
    size = 2
    while size <= m:
        half = size >> 1
        step = m // size
        start = 0
        while start < m:
            for j in range(half):
                wr = twr[j * step]
                wi = twi[j * step]
                a = start + j
                b = a + half
                tr = wr * re[b] - wi * im[b]
                ti = wr * im[b] + wi * re[b]
                re[b] = re[a] - tr
                im[b] = im[a] - ti
                re[a] += tr
                im[a] += ti
            start += size
        size <<= 1


def power_spectrum_frames(x, window, Py_ssize_t frame_length, Py_ssize_t hop_length):
    """One-sided power spectra of the windowed frames of ``x``, shape (J, F//2+1).

    Uses a half-length complex FFT with the even/odd real-input split.
    ``frame_length`` must be a power of two.
    """
    cdef Py_ssize_t n = frame_length
    if n < 2 or (n & (n - 1)) != 0:
        raise ValueError("frame_length must be a power of two >= 2")
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] wv = np.ascontiguousarray(window, dtype=np.float64)
    cdef Py_ssize_t length = xv.shape[0]
    if length < n:
        raise ValueError("signal shorter than frame_length")
    cdef Py_ssize_t nframes = (length - n) // hop_length + 1
    cdef Py_ssize_t m = n // 2
    cdef Py_ssize_t nbins = m + 1
    out = np.empty((nframes, nbins), dtype=np.float64)
    cdef double[:, ::1] ov = out

    cdef double[::1] re = np.empty(m)
    cdef double[::1] im = np.empty(m)
    cdef Py_ssize_t[::1] rev = np.empty(m, dtype=np.intp)
    cdef double[::1] twr = np.empty(max(m // 2, 1))
    cdef double[::1] twi = np.empty(max(m // 2, 1))
    cdef double[::1] wkr = np.empty(nbins)
    cdef double[::1] wki = np.empty(nbins)

    cdef Py_ssize_t i, k, km, bits, r, v, f, off
    bits = 0
    while (1 << bits) < m:
        bits += 1
    for i in range(m):
        r = 0
        v = i
        for k in range(bits):
            r = (r << 1) | (v & 1)
            v >>= 1
        rev[i] = r
    for k in range(m // 2):
        twr[k] = cos(-2.0 * M_PI * k / m)
        twi[k] = sin(-2.0 * M_PI * k / m)
    for k in range(nbins):
        wkr[k] = cos(-2.0 * M_PI * k / n)
        wki[k] = sin(-2.0 * M_PI * k / n)

    cdef double zr, zi, cr, ci, er, ei, dr, di, orr, oi, xr, xi
    with nogil:
        for f in range(nframes):
            off = f * hop_length
            for i in range(m):
                re[i] = xv[off + 2 * i] * wv[2 * i]
                im[i] = xv[off + 2 * i + 1] * wv[2 * i + 1]
            _fft_inplace(&re[0], &im[0], m, &rev[0], &twr[0], &twi[0])
            for k in range(nbins):
                km = (m - k) % m
                zr = re[k % m]
                zi = im[k % m]
                cr = re[km]
                ci = -im[km]
                er = 0.5 * (zr + cr)
                ei = 0.5 * (zi + ci)
                dr = zr - cr
                di = zi - ci
                orr = 0.5 * di
                oi = -0.5 * dr
                xr = er + wkr[k] * orr - wki[k] * oi
                xi = ei + wkr[k] * oi + wki[k] * orr
                ov[f, k] = xr * xr + xi * xi
    return out


def resample_poly(x, table, long long up, long long down, Py_ssize_t n_out):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, ::1] tv = np.ascontiguousarray(table, dtype=np.float64)
    cdef Py_ssize_t length = xv.shape[0]
    cdef Py_ssize_t ntaps = tv.shape[1]
    cdef Py_ssize_t half = ntaps // 2
    out = np.empty(n_out, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t n, t, j, base, phase
    cdef long long pos
    cdef double acc
    with nogil:
        for n in range(n_out):
            pos = n * down
            base = pos // up
            phase = pos % up
            acc = 0.0
            for t in range(ntaps):
                j = base - half + 1 + t
                if 0 <= j < length:
                    acc += tv[phase, t] * xv[j]
            ov[n] = acc
    return out


def sgd_epoch(Z, y, order, theta, double bias, double lr, double alpha,
              Py_ssize_t batch_size, active):
    """Run one epoch of mini-batch SGD in place on ``theta``; return the new bias."""
    cdef const double[:, ::1] zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const Py_ssize_t[::1] ov = np.ascontiguousarray(order, dtype=np.intp)
    cdef double[::1] th = theta
    cdef const cnp.uint8_t[::1] act = np.ascontiguousarray(active, dtype=np.uint8)
    cdef Py_ssize_t n = ov.shape[0]
    cdef Py_ssize_t d = zv.shape[1]
    cdef double[::1] grad = np.empty(d)
    cdef double[::1] resid = np.empty(batch_size)
    cdef Py_ssize_t start, stop, b, i, j, row
    cdef double pred, rsum, scale
    with nogil:
        start = 0
        while start < n:
            stop = start + batch_size
            if stop > n:
                stop = n
            rsum = 0.0
            for b in range(stop - start):
                row = ov[start + b]
                pred = bias
                for j in range(d):
                    pred += zv[row, j] * th[j]
                resid[b] = yv[row] - pred
                rsum += resid[b]
            for j in range(d):
                grad[j] = 0.0
            for b in range(stop - start):
                row = ov[start + b]
                for j in range(d):
                    grad[j] += resid[b] * zv[row, j]
            scale = -2.0 / (stop - start)
            for j in range(d):
                if act[j]:
                    th[j] -= lr * (scale * grad[j] + 2.0 * alpha * th[j])
                else:
                    th[j] = 0.0
            bias -= lr * scale * rsum
            start = stop
    return bias


def zero_crossings(x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t i, count = 0
    cdef Py_ssize_t n = xv.shape[0]
    with nogil:
        for i in range(1, n):
            if (xv[i] >= 0) != (xv[i - 1] >= 0):
                count += 1
    return count
