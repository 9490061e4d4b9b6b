"""Image kernels with a numba hot path and a pure-numpy fallback.

Backend selection, checked once at import:
  TEALEAF_NUMBA=0   force the pure-numpy path
  TEALEAF_NUMBA=1   require numba (ImportError if missing)
  unset             numba when importable, numpy otherwise

``BACKEND`` records the active choice. Both backends compute identical math;
``benchmarks/bench_kernels.py`` compares their throughput.
"""
import math
import os

import numpy as np

from . import _numpy

_flag = os.environ.get("TEALEAF_NUMBA", "").strip().lower()
if _flag in ("0", "false", "off"):
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:
        if _flag in ("1", "true", "on"):
            raise
        _impl = _numpy
        BACKEND = "numpy"


def bilinear_resize(img, out_h, out_w):
    """Bilinear-resize an (H, W, C) float32 array to (out_h, out_w, C)."""
    return _impl.bilinear_resize(np.ascontiguousarray(img, dtype=np.float32),
                                 out_h, out_w)


def resize2d(arr, out_h, out_w):
    """Bilinear-resize a single-channel (H, W) float32 map."""
    return bilinear_resize(arr[:, :, np.newaxis], out_h, out_w)[:, :, 0]


def rotate(img, degrees):
    """Rotate an (H, W, C) image about its center with reflect padding."""
    a = math.radians(degrees)
    c, s = math.cos(a), math.sin(a)
    return _impl.affine_sample(np.ascontiguousarray(img, dtype=np.float32),
                               c, -s, s, c)


def zoom(img, scale):
    """Zoom an (H, W, C) image about its center; scale > 1 magnifies, scale < 1
    shrinks with reflect padding filling the border."""
    inv = 1.0 / scale
    return _impl.affine_sample(np.ascontiguousarray(img, dtype=np.float32),
                               inv, 0.0, 0.0, inv)
