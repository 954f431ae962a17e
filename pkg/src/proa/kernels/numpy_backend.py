"""Vectorised numpy implementations of the resampling kernels.

This is the fallback backend; the compiled extension (proa._kernels)
implements the same four functions with identical semantics.  All
functions take and return float64 arrays and never modify their inputs.

Conventions shared by both backends:

* ``affine_warp`` works in index space.  The 2x3 matrix maps an output
  pixel (col, row) to fractional source coordinates

      src_col = m[0,0]*col + m[0,1]*row + m[0,2]
      src_row = m[1,0]*col + m[1,1]*row + m[1,2]

  and the output is the bilinear blend of the four source neighbours,
  with neighbours outside the image contributing zero.

* ``separable_blur`` convolves rows then columns with the given 1-D
  kernel, replicating edge pixels at the borders.

* ``rgb_to_hsb`` / ``hsb_to_rgb`` use the hexcone model with hue stored
  as a fraction of a full turn in [0, 1), matching the branch structure
  of colorsys so ties resolve identically.
"""

from __future__ import annotations

import numpy as np


def affine_warp(img: np.ndarray, m: np.ndarray) -> np.ndarray:
    h, w, c = img.shape
    cols = np.arange(w, dtype=np.float64)
    rows = np.arange(h, dtype=np.float64)
    grid_c, grid_r = np.meshgrid(cols, rows)

    src_c = m[0, 0] * grid_c + m[0, 1] * grid_r + m[0, 2]
    src_r = m[1, 0] * grid_c + m[1, 1] * grid_r + m[1, 2]

    c0 = np.floor(src_c)
    r0 = np.floor(src_r)
    fc = src_c - c0
    fr = src_r - r0
    c0 = c0.astype(np.int64)
    r0 = r0.astype(np.int64)
    c1 = c0 + 1
    r1 = r0 + 1

    out = np.zeros_like(img)
    for ri, ci, wgt in (
        (r0, c0, (1.0 - fr) * (1.0 - fc)),
        (r0, c1, (1.0 - fr) * fc),
        (r1, c0, fr * (1.0 - fc)),
        (r1, c1, fr * fc),
    ):
        valid = (ri >= 0) & (ri < h) & (ci >= 0) & (ci < w)
        rs = np.clip(ri, 0, h - 1)
        cs = np.clip(ci, 0, w - 1)
        vals = img[rs, cs, :] * valid[..., None]
        out += wgt[..., None] * vals
    return np.clip(out, 0.0, 1.0)


def _blur_axis(img: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0), (0, 0), (0, 0)]
    pad[axis] = (radius, radius)
    padded = np.pad(img, pad, mode="edge")
    out = np.zeros_like(img)
    n = img.shape[axis]
    index: list[slice] = [slice(None)] * 3
    for i, kv in enumerate(kernel):
        index[axis] = slice(i, i + n)
        out += kv * padded[tuple(index)]
    return out


def separable_blur(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    out = _blur_axis(img, kernel, axis=1)
    out = _blur_axis(out, kernel, axis=0)
    return np.clip(out, 0.0, 1.0)


def rgb_to_hsb(img: np.ndarray) -> np.ndarray:
    r = img[..., 0]
    g = img[..., 1]
    b = img[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    spread = maxc - minc

    sat = np.zeros_like(maxc)
    np.divide(spread, maxc, out=sat, where=maxc > 0.0)

    safe = np.where(spread > 0.0, spread, 1.0)
    hue6 = np.select(
        [r == maxc, g == maxc],
        [(g - b) / safe, 2.0 + (b - r) / safe],
        default=4.0 + (r - g) / safe,
    )
    hue = np.where(spread > 0.0, (hue6 / 6.0) % 1.0, 0.0)
    return np.stack([hue, sat, maxc], axis=-1)


def hsb_to_rgb(hsb: np.ndarray) -> np.ndarray:
    h = hsb[..., 0]
    s = hsb[..., 1]
    v = hsb[..., 2]
    h6 = h * 6.0
    sector = np.floor(h6).astype(np.int64) % 6
    f = h6 - np.floor(h6)
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))

    conds = [sector == k for k in range(6)]
    r = np.select(conds, [v, q, p, p, t, v])
    g = np.select(conds, [t, v, v, q, p, p])
    b = np.select(conds, [p, p, t, v, v, q])
    out = np.stack([r, g, b], axis=-1)
    gray = s == 0.0
    if np.any(gray):
        out = np.where(gray[..., None], v[..., None], out)
    return out
