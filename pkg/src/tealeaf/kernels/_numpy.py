"""Pure-numpy reference implementations of the image kernels.

These are the fallback path when numba is disabled (TEALEAF_NUMBA=0) or not
installed. Coordinates and blend weights are computed in float64 and results
are stored as float32, mirroring the numba kernels so both backends agree.
"""
import numpy as np


def _reflect_index(idx, n):
    # reflect-101: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * n - 2
    m = np.abs(idx) % period
    return np.where(m >= n, period - m, m)


def bilinear_resize(img, out_h, out_w):
    """Resize an (H, W, C) float32 array with half-pixel-center bilinear
    interpolation and edge clamping."""
    h, w, _ = img.shape
    if h == out_h and w == out_w:
        return img.copy()
    fy = (np.arange(out_h, dtype=np.float64) + 0.5) * (h / out_h) - 0.5
    fx = (np.arange(out_w, dtype=np.float64) + 0.5) * (w / out_w) - 0.5
    y0 = np.floor(fy).astype(np.int64)
    x0 = np.floor(fx).astype(np.int64)
    ty = (fy - y0)[:, None, None]
    tx = (fx - x0)[None, :, None]
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    v00 = img[y0c[:, None], x0c[None, :]]
    v01 = img[y0c[:, None], x1c[None, :]]
    v10 = img[y1c[:, None], x0c[None, :]]
    v11 = img[y1c[:, None], x1c[None, :]]
    top = v00 * (1.0 - tx) + v01 * tx
    bot = v10 * (1.0 - tx) + v11 * tx
    return (top * (1.0 - ty) + bot * ty).astype(np.float32)


def affine_sample(img, m00, m01, m10, m11):
    """Inverse-map an (H, W, C) float32 array through a 2x2 affine transform
    about the image center, with reflect padding and bilinear sampling.

    For output pixel (y, x): src = M @ (y - cy, x - cx) + (cy, cx).
    """
    h, w, _ = img.shape
    cy = (h - 1) / 2.0
    cx = (w - 1) / 2.0
    dy = np.arange(h, dtype=np.float64)[:, None] - cy
    dx = np.arange(w, dtype=np.float64)[None, :] - cx
    sy = cy + m00 * dy + m01 * dx
    sx = cx + m10 * dy + m11 * dx
    y0 = np.floor(sy).astype(np.int64)
    x0 = np.floor(sx).astype(np.int64)
    ty = (sy - y0)[:, :, None]
    tx = (sx - x0)[:, :, None]
    y0r = _reflect_index(y0, h)
    y1r = _reflect_index(y0 + 1, h)
    x0r = _reflect_index(x0, w)
    x1r = _reflect_index(x0 + 1, w)
    v00 = img[y0r, x0r]
    v01 = img[y0r, x1r]
    v10 = img[y1r, x0r]
    v11 = img[y1r, x1r]
    top = v00 * (1.0 - tx) + v01 * tx
    bot = v10 * (1.0 - tx) + v11 * tx
    return (top * (1.0 - ty) + bot * ty).astype(np.float32)
