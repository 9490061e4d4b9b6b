"""Gradient-weighted class activation maps and occlusion sensitivity.

Both explainers return a Heatmap normalized to [0, 1] by its max (an
all-zero map stays all-zero) and leave the model and input image untouched.
Grad-CAM weights the last conv-stage feature maps by spatially pooled
gradients of the pre-softmax class score; occlusion slides a baseline patch
and records the post-softmax confidence drop.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from . import kernels
from .errors import (
    GradientUnavailable,
    LayerNotFound,
    PatchLargerThanImage,
    ShapeMismatch,
)
from .models import LeafClassifier, predict_probabilities, to_batch_tensor


@dataclass
class Heatmap:
    values: np.ndarray  # (H, W) in [0, 1]
    source: str  # "grad_cam" | "occlusion"
    target_class: int


@dataclass
class ActivationBundle:
    """Last conv-stage feature maps and the class-score gradients wrt them."""
    activations: np.ndarray  # (K, h, w)
    gradients: np.ndarray  # (K, h, w)
    target_class: int


@dataclass(frozen=True)
class OcclusionConfig:
    patch_size: int = 32
    stride: int = 16
    baseline_value: float = 0.5
    overlap: str = "mean"  # or "max"

    def __post_init__(self):
        if not 1 <= self.stride <= self.patch_size:
            raise ValueError("need 1 <= stride <= patch_size")
        if not 0.0 <= self.baseline_value <= 1.0:
            raise ValueError("baseline_value must be in [0, 1]")
        if self.overlap not in ("mean", "max"):
            raise ValueError("overlap must be 'mean' or 'max'")


def activation_bundle(model: LeafClassifier, img: np.ndarray,
                      target_class: int | None = None) -> ActivationBundle:
    """Forward the image, capture the named last-conv-stage output, and
    differentiate the target pre-softmax score against it."""
    layer_name = getattr(model, "last_conv_layer", None)
    if layer_name is None:
        raise LayerNotFound("model does not name its last conv stage")
    try:
        layer = model.get_submodule(layer_name)
    except AttributeError as exc:
        raise LayerNotFound(f"model has no submodule {layer_name!r}") from exc

    captured: list[torch.Tensor] = []
    handle = layer.register_forward_hook(
        lambda mod, inp, out: captured.append(out))
    was_training = model.training
    model.eval()
    try:
        with torch.enable_grad():
            # grad flows from the input so the activation gradient exists
            # even when every backbone weight is frozen
            logits = model(to_batch_tensor(img).requires_grad_(True))
            if not captured:
                raise LayerNotFound(
                    f"layer {model.last_conv_layer!r} produced no output")
            fmap = captured[-1]
            c = int(target_class) if target_class is not None \
                else int(logits[0].argmax())
            try:
                grads = torch.autograd.grad(logits[0, c], fmap)[0]
            except RuntimeError as exc:
                raise GradientUnavailable(
                    f"cannot differentiate class score: {exc}") from exc
    finally:
        handle.remove()
        model.train(was_training)
    return ActivationBundle(fmap[0].detach().numpy(),
                            grads[0].detach().numpy(), c)


def cam_from_bundle(bundle: ActivationBundle) -> np.ndarray:
    """ReLU of the activation maps weighted by spatially-averaged gradients;
    the raw (pre-normalization) class activation map."""
    if bundle.activations.shape != bundle.gradients.shape:
        raise ShapeMismatch("activation and gradient shapes differ")
    alpha = bundle.gradients.mean(axis=(1, 2))
    raw = (alpha[:, None, None] * bundle.activations).sum(axis=0)
    return np.maximum(raw, 0.0)


def _normalize(values: np.ndarray) -> np.ndarray:
    peak = values.max()
    return values / peak if peak > 0 else values


def grad_cam(model: LeafClassifier, img: np.ndarray,
             target_class: int | None = None) -> Heatmap:
    """Grad-CAM heatmap for the target class (default: argmax prediction),
    bilinear-upsampled to the image size and max-normalized."""
    bundle = activation_bundle(model, img, target_class)
    raw = cam_from_bundle(bundle).astype(np.float32)
    up = kernels.resize2d(raw, img.shape[0], img.shape[1])
    return Heatmap(_normalize(up), "grad_cam", bundle.target_class)


def occlusion_positions(side: int, patch: int, stride: int) -> list[int]:
    """Patch start offsets along one side: stride steps, with a final
    position snapped to the edge so every pixel is covered by a full patch."""
    pos = list(range(0, side - patch + 1, stride))
    if pos[-1] != side - patch:
        pos.append(side - patch)
    return pos


def occlusion_sensitivity(model: LeafClassifier, img: np.ndarray,
                          cfg: OcclusionConfig = OcclusionConfig(),
                          target_class: int | None = None,
                          batch_size: int = 32) -> Heatmap:
    """Slide a baseline patch over the image and accumulate the confidence
    drop (p0 - p) into every covered pixel, averaging overlaps (or taking the
    max, per cfg.overlap); negative means floor at 0 before normalization."""
    h, w = img.shape[:2]
    if cfg.patch_size > h or cfg.patch_size > w:
        raise PatchLargerThanImage(
            f"patch {cfg.patch_size} exceeds image {h}x{w}")
    p0_vec = predict_probabilities(model, [img])[0]
    c = int(target_class) if target_class is not None else int(np.argmax(p0_vec))
    p0 = float(p0_vec[c])

    positions = [(y, x) for y in occlusion_positions(h, cfg.patch_size, cfg.stride)
                 for x in occlusion_positions(w, cfg.patch_size, cfg.stride)]
    variants = np.empty((len(positions),) + img.shape, dtype=np.float32)
    for i, (y, x) in enumerate(positions):
        variants[i] = img
        variants[i, y:y + cfg.patch_size, x:x + cfg.patch_size, :] = cfg.baseline_value
    probs = predict_probabilities(model, variants, batch_size=batch_size)[:, c]

    if cfg.overlap == "max":
        acc = np.full((h, w), -np.inf, dtype=np.float64)
    else:
        acc = np.zeros((h, w), dtype=np.float64)
    counts = np.zeros((h, w), dtype=np.int64)
    for (y, x), p in zip(positions, probs.astype(np.float64)):
        drop = p0 - p
        region = (slice(y, y + cfg.patch_size), slice(x, x + cfg.patch_size))
        if cfg.overlap == "max":
            acc[region] = np.maximum(acc[region], drop)
        else:
            acc[region] += drop
        counts[region] += 1
    heat = acc if cfg.overlap == "max" else acc / counts
    heat = np.maximum(heat, 0.0)
    return Heatmap(_normalize(heat), "occlusion", c)


# -- rendering --

_RAMP_POSITIONS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_RAMP_COLORS = np.array([
    [0.0, 0.0, 0.5],  # low: dark blue
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [1.0, 1.0, 0.0],
    [1.0, 0.0, 0.0],  # high: red
])


def heat_colormap(values: np.ndarray) -> np.ndarray:
    """Map a [0, 1] heat array through the fixed blue-to-red ramp."""
    flat = np.clip(values, 0.0, 1.0).ravel()
    rgb = np.stack([np.interp(flat, _RAMP_POSITIONS, _RAMP_COLORS[:, ch])
                    for ch in range(3)], axis=1)
    return rgb.reshape(values.shape + (3,)).astype(np.float32)


def overlay(heatmap: Heatmap, img: np.ndarray, alpha: float = 0.4) -> np.ndarray:
    """Alpha-blend the color-mapped heatmap over the image:
    out = (1 - alpha) * img + alpha * colormap(heat)."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if img.ndim != 3 or img.shape[2] != 3:
        raise ShapeMismatch(f"expected (H, W, 3) image, got {img.shape}")
    heat = np.asarray(heatmap.values, dtype=np.float32)
    if heat.shape != img.shape[:2]:
        heat = kernels.resize2d(heat, img.shape[0], img.shape[1])
    img32 = np.asarray(img, dtype=np.float32)
    blended = (1.0 - np.float32(alpha)) * img32 \
        + np.float32(alpha) * heat_colormap(heat)
    return np.clip(blended, 0.0, 1.0)


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(img) * 255.0), 0, 255).astype(np.uint8)


def save_heatmap_png(heatmap: Heatmap, path) -> None:
    Image.fromarray(to_uint8(heatmap.values), mode="L").save(path)


def save_image_png(img: np.ndarray, path) -> None:
    Image.fromarray(to_uint8(img), mode="RGB").save(path)
