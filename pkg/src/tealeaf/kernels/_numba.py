"""Numba-jitted image kernels, the default hot path.

Same math as kernels._numpy: float64 coordinates/weights, float32 storage.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _reflect_index(idx, n):
    if n == 1:
        return 0
    period = 2 * n - 2
    m = abs(idx) % period
    if m >= n:
        m = period - m
    return m


@njit(cache=True)
def bilinear_resize(img, out_h, out_w):
    h, w, c = img.shape
    if h == out_h and w == out_w:
        return img.copy()
    out = np.empty((out_h, out_w, c), dtype=np.float32)
    sy = h / out_h
    sx = w / out_w
    for i in range(out_h):
        fy = (i + 0.5) * sy - 0.5
        y0 = int(np.floor(fy))
        ty = fy - y0
        y0c = min(max(y0, 0), h - 1)
        y1c = min(max(y0 + 1, 0), h - 1)
        for j in range(out_w):
            fx = (j + 0.5) * sx - 0.5
            x0 = int(np.floor(fx))
            tx = fx - x0
            x0c = min(max(x0, 0), w - 1)
            x1c = min(max(x0 + 1, 0), w - 1)
            for k in range(c):
                top = img[y0c, x0c, k] * (1.0 - tx) + img[y0c, x1c, k] * tx
                bot = img[y1c, x0c, k] * (1.0 - tx) + img[y1c, x1c, k] * tx
                out[i, j, k] = top * (1.0 - ty) + bot * ty
    return out


@njit(cache=True)
def affine_sample(img, m00, m01, m10, m11):
    h, w, c = img.shape
    out = np.empty((h, w, c), dtype=np.float32)
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    for i in range(h):
        dy = i - cy
        for j in range(w):
            dx = j - cx
            sy = cy + m00 * dy + m01 * dx
            sx = cx + m10 * dy + m11 * dx
            y0 = int(np.floor(sy))
            x0 = int(np.floor(sx))
            ty = sy - y0
            tx = sx - x0
            y0r = _reflect_index(y0, h)
            y1r = _reflect_index(y0 + 1, h)
            x0r = _reflect_index(x0, w)
            x1r = _reflect_index(x0 + 1, w)
            for k in range(c):
                top = img[y0r, x0r, k] * (1.0 - tx) + img[y0r, x1r, k] * tx
                bot = img[y1r, x0r, k] * (1.0 - tx) + img[y1r, x1r, k] * tx
                out[i, j, k] = top * (1.0 - ty) + bot * ty
    return out
