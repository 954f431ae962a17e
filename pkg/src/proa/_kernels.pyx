# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled resampling kernels.  Semantics mirror kernels/numpy_backend.py
# exactly; see that module for the shared conventions.

from libc.math cimport floor

import numpy as np


def affine_warp(img, m):
    cdef double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef double m00 = m[0, 0], m01 = m[0, 1], m02 = m[0, 2]
    cdef double m10 = m[1, 0], m11 = m[1, 1], m12 = m[1, 2]
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], c = src.shape[2]
    out_arr = np.zeros((h, w, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t row, col, ch, r0, c0, r1, c1
    cdef double sc, sr, fc, fr, w00, w01, w10, w11, v, acc

    for row in range(h):
        for col in range(w):
            sc = m00 * col + m01 * row + m02
            sr = m10 * col + m11 * row + m12
            fc = floor(sc)
            fr = floor(sr)
            c0 = <Py_ssize_t>fc
            r0 = <Py_ssize_t>fr
            fc = sc - fc
            fr = sr - fr
            c1 = c0 + 1
            r1 = r0 + 1
            w00 = (1.0 - fr) * (1.0 - fc)
            w01 = (1.0 - fr) * fc
            w10 = fr * (1.0 - fc)
            w11 = fr * fc
            for ch in range(c):
                acc = 0.0
                if 0 <= r0 < h and 0 <= c0 < w:
                    acc += w00 * src[r0, c0, ch]
                if 0 <= r0 < h and 0 <= c1 < w:
                    acc += w01 * src[r0, c1, ch]
                if 0 <= r1 < h and 0 <= c0 < w:
                    acc += w10 * src[r1, c0, ch]
                if 0 <= r1 < h and 0 <= c1 < w:
                    acc += w11 * src[r1, c1, ch]
                if acc < 0.0:
                    acc = 0.0
                elif acc > 1.0:
                    acc = 1.0
                out[row, col, ch] = acc
    return out_arr


cdef inline Py_ssize_t _clamp_index(Py_ssize_t i, Py_ssize_t n) nogil:
    if i < 0:
        return 0
    if i >= n:
        return n - 1
    return i


def separable_blur(img, kernel):
    cdef double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef double[::1] k = np.ascontiguousarray(kernel, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1], c = src.shape[2]
    cdef Py_ssize_t taps = k.shape[0], radius = taps // 2
    tmp_arr = np.empty((h, w, c), dtype=np.float64)
    out_arr = np.empty((h, w, c), dtype=np.float64)
    cdef double[:, :, ::1] tmp = tmp_arr
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t row, col, ch, i
    cdef double acc

    # Horizontal pass with edge replication, then vertical.
    for row in range(h):
        for col in range(w):
            for ch in range(c):
                acc = 0.0
                for i in range(taps):
                    acc += k[i] * src[row, _clamp_index(col + i - radius, w), ch]
                tmp[row, col, ch] = acc
    for row in range(h):
        for col in range(w):
            for ch in range(c):
                acc = 0.0
                for i in range(taps):
                    acc += k[i] * tmp[_clamp_index(row + i - radius, h), col, ch]
                if acc < 0.0:
                    acc = 0.0
                elif acc > 1.0:
                    acc = 1.0
                out[row, col, ch] = acc
    return out_arr


def rgb_to_hsb(img):
    cdef double[:, :, ::1] src = np.ascontiguousarray(img, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    out_arr = np.empty((h, w, 3), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t row, col
    cdef double r, g, b, maxc, minc, spread, hue6, hue, sat

    for row in range(h):
        for col in range(w):
            r = src[row, col, 0]
            g = src[row, col, 1]
            b = src[row, col, 2]
            maxc = r
            if g > maxc:
                maxc = g
            if b > maxc:
                maxc = b
            minc = r
            if g < minc:
                minc = g
            if b < minc:
                minc = b
            spread = maxc - minc
            if spread > 0.0:
                if r == maxc:
                    hue6 = (g - b) / spread
                elif g == maxc:
                    hue6 = 2.0 + (b - r) / spread
                else:
                    hue6 = 4.0 + (r - g) / spread
                hue = (hue6 / 6.0) % 1.0
                if hue < 0.0:  # C fmod keeps the sign; match Python %
                    hue += 1.0
            else:
                hue = 0.0
            sat = spread / maxc if maxc > 0.0 else 0.0
            out[row, col, 0] = hue
            out[row, col, 1] = sat
            out[row, col, 2] = maxc
    return out_arr


def hsb_to_rgb(hsb):
    cdef double[:, :, ::1] src = np.ascontiguousarray(hsb, dtype=np.float64)
    cdef Py_ssize_t h = src.shape[0], w = src.shape[1]
    out_arr = np.empty((h, w, 3), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t row, col, sector
    cdef double hu, s, v, h6, f, p, q, t, r, g, b

    for row in range(h):
        for col in range(w):
            hu = src[row, col, 0]
            s = src[row, col, 1]
            v = src[row, col, 2]
            if s == 0.0:
                out[row, col, 0] = v
                out[row, col, 1] = v
                out[row, col, 2] = v
                continue
            h6 = hu * 6.0
            sector = (<Py_ssize_t>floor(h6)) % 6
            f = h6 - floor(h6)
            p = v * (1.0 - s)
            q = v * (1.0 - s * f)
            t = v * (1.0 - s * (1.0 - f))
            if sector == 0:
                r, g, b = v, t, p
            elif sector == 1:
                r, g, b = q, v, p
            elif sector == 2:
                r, g, b = p, v, t
            elif sector == 3:
                r, g, b = p, q, v
            elif sector == 4:
                r, g, b = t, p, v
            else:
                r, g, b = v, p, q
            out[row, col, 0] = r
            out[row, col, 1] = g
            out[row, col, 2] = b
    return out_arr
