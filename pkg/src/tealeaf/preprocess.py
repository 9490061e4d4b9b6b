"""Image decoding, resizing to model input size, and stochastic augmentation.

Images flow through as (H, W, 3) float32 arrays in [0, 1]. Augmentation is
applied to training items only and is deterministic given the generator
passed in, so concurrent workers stay schedule-independent as long as each
derives its own generator from (seed, epoch, ordinal).
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import kernels
from .errors import UndecodableImage


@dataclass(frozen=True)
class PreprocessConfig:
    target_size: tuple[int, int] = (224, 224)  # (height, width)

    def __post_init__(self):
        if self.target_size[0] <= 0 or self.target_size[1] <= 0:
            raise ValueError(f"target_size must be positive, got {self.target_size}")


@dataclass(frozen=True)
class AugmentConfig:
    horizontal_flip: bool = True
    rotation_degrees: float = 15.0
    zoom_fraction: float = 0.10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.rotation_degrees <= 180.0:
            raise ValueError("rotation_degrees must be in [0, 180]")
        if not 0.0 <= self.zoom_fraction <= 0.5:
            raise ValueError("zoom_fraction must be in [0, 0.5]")


def decode_image(source: str | bytes) -> np.ndarray:
    """Decode a file path or raw bytes to an (H, W, 3) uint8 RGB array.
    Grayscale inputs are channel-replicated."""
    try:
        if isinstance(source, bytes):
            img = Image.open(io.BytesIO(source))
        else:
            img = Image.open(source)
        with img:
            rgb = img.convert("RGB")
        return np.asarray(rgb, dtype=np.uint8)
    except UndecodableImage:
        raise
    except Exception as exc:
        raise UndecodableImage(f"cannot decode image ({source if isinstance(source, str) else 'bytes'}): {exc}") from exc


def to_unit_tensor(arr: np.ndarray, cfg: PreprocessConfig) -> np.ndarray:
    """Scale a uint8 (or already-unit float) RGB array to [0, 1] float32 and
    bilinear-resize it to cfg.target_size."""
    if arr.dtype == np.uint8:
        img = arr.astype(np.float32) / np.float32(255.0)
    else:
        img = np.clip(arr, 0.0, 1.0).astype(np.float32)
    h, w = cfg.target_size
    return kernels.bilinear_resize(img, h, w)


def load_and_preprocess(path: str, cfg: PreprocessConfig = PreprocessConfig()) -> np.ndarray:
    """File path -> model-ready (target_h, target_w, 3) float32 in [0, 1]."""
    return to_unit_tensor(decode_image(path), cfg)


def item_rng(seed: int, epoch: int, ordinal: int) -> np.random.Generator:
    """Independent per-item generator so augmentation is worker-order free."""
    return np.random.default_rng(
        np.random.SeedSequence([seed % (2 ** 63), epoch, ordinal]))


def augment(img: np.ndarray, cfg: AugmentConfig,
            draw: np.random.Generator) -> np.ndarray:
    """Apply, in order: horizontal flip (p=0.5, if enabled), rotation uniform
    in +-rotation_degrees with reflect padding, zoom uniform in
    1 +- zoom_fraction re-cropped/padded to the original size.

    Shape is preserved, values are clamped to [0, 1], and transforms with a
    zero magnitude are skipped entirely so the identity config returns the
    input unchanged.
    """
    out = img
    if cfg.horizontal_flip and draw.random() < 0.5:
        out = out[:, ::-1, :]
    if cfg.rotation_degrees > 0.0:
        angle = draw.uniform(-cfg.rotation_degrees, cfg.rotation_degrees)
        out = kernels.rotate(out, angle)
    if cfg.zoom_fraction > 0.0:
        scale = draw.uniform(1.0 - cfg.zoom_fraction, 1.0 + cfg.zoom_fraction)
        out = kernels.zoom(out, scale)
    if out is img:
        return img
    return np.clip(np.ascontiguousarray(out), 0.0, 1.0)
