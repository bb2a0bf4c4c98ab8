# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementations of the hot kernels.

Mirrors revex._kernels._numpy: same signatures, same float64 accumulation
order, so results agree with the fallback to float rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

BACKEND_NAME = "cython"


def correlate1d_3d(const cnp.float32_t[:, :, ::1] x3, const cnp.float64_t[::1] kernel):
    cdef Py_ssize_t pre = x3.shape[0]
    cdef Py_ssize_t n = x3.shape[1]
    cdef Py_ssize_t post = x3.shape[2]
    cdef Py_ssize_t taps = kernel.shape[0]
    cdef Py_ssize_t radius = (taps - 1) // 2
    out_arr = np.empty((pre, n, post), dtype=np.float32)
    cdef cnp.float32_t[:, :, ::1] out = out_arr
    idx_arr = np.clip(np.arange(-radius, n + radius), 0, n - 1).astype(np.intp)
    cdef const Py_ssize_t[::1] idx = idx_arr
    cdef Py_ssize_t a, i, b, j
    cdef double acc
    with nogil:
        for a in range(pre):
            for i in range(n):
                for b in range(post):
                    acc = 0.0
                    for j in range(taps):
                        acc += kernel[j] * x3[a, idx[i + j], b]
                    out[a, i, b] = <float> acc
    return out_arr


def slic_assign(const cnp.float32_t[:, :, :, ::1] feat, double scale_t,
                const cnp.float64_t[:, ::1] centers_pos,
                const cnp.float64_t[:, ::1] centers_feat,
                double ratio2, radius):
    cdef Py_ssize_t t = feat.shape[0]
    cdef Py_ssize_t h = feat.shape[1]
    cdef Py_ssize_t w = feat.shape[2]
    cdef Py_ssize_t f = feat.shape[3]
    cdef Py_ssize_t k = centers_pos.shape[0]
    cdef Py_ssize_t rt = radius[0]
    cdef Py_ssize_t ry = radius[1]
    cdef Py_ssize_t rx = radius[2]
    labels_arr = np.full((t, h, w), -1, dtype=np.int32)
    best_arr = np.full((t, h, w), np.inf, dtype=np.float64)
    cdef cnp.int32_t[:, :, ::1] labels = labels_arr
    cdef cnp.float64_t[:, :, ::1] best = best_arr
    cdef Py_ssize_t ki, ct, t0, t1, y0, y1, x0, x1, it, iy, ix, d
    cdef double czt, cy, cx, dz, dy, dx, dist, diff
    with nogil:
        for ki in range(k):
            czt = centers_pos[ki, 0]
            cy = centers_pos[ki, 1]
            cx = centers_pos[ki, 2]
            ct = <Py_ssize_t> ((czt / scale_t) + 0.5) if scale_t > 0 else 0
            t0 = ct - rt if ct - rt > 0 else 0
            t1 = ct + rt + 1 if ct + rt + 1 < t else t
            y0 = <Py_ssize_t> cy - ry if <Py_ssize_t> cy - ry > 0 else 0
            y1 = <Py_ssize_t> cy + ry + 1 if <Py_ssize_t> cy + ry + 1 < h else h
            x0 = <Py_ssize_t> cx - rx if <Py_ssize_t> cx - rx > 0 else 0
            x1 = <Py_ssize_t> cx + rx + 1 if <Py_ssize_t> cx + rx + 1 < w else w
            for it in range(t0, t1):
                dz = it * scale_t - czt
                for iy in range(y0, y1):
                    dy = iy - cy
                    for ix in range(x0, x1):
                        dx = ix - cx
                        dist = 0.0
                        for d in range(f):
                            diff = feat[it, iy, ix, d] - centers_feat[ki, d]
                            dist += diff * diff
                        dist += ratio2 * (dz * dz + dy * dy + dx * dx)
                        if dist < best[it, iy, ix]:
                            best[it, iy, ix] = dist
                            labels[it, iy, ix] = ki
    return labels_arr, best_arr
