"""Shared fixtures and toy-model builders."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
import torch
import torch.nn as nn
from PIL import Image

from tealeaf.data import ClassRegistry
from tealeaf.models import LeafClassifier, build_model, save_checkpoint
from tealeaf.preprocess import PreprocessConfig

TEA_CLASSES = (
    "Brown Blight", "Gray Blight", "Green mirid bug", "Healthy leaf",
    "Helopeltis", "Red spider", "Tea algal leaf spot",
)


def write_class_dirs(root: Path, counts: dict[str, int],
                     size: tuple[int, int] = (24, 24), seed: int = 0) -> Path:
    """Create a class-per-subdirectory image tree of random PNGs. Each class
    gets a distinct mean color so tiny models can separate them."""
    rng = np.random.default_rng(seed)
    root.mkdir(parents=True, exist_ok=True)
    for ci, (name, n) in enumerate(sorted(counts.items())):
        class_dir = root / name
        class_dir.mkdir(exist_ok=True)
        base = np.zeros(3)
        base[ci % 3] = 200
        base[(ci // 3) % 3] += 40 * (ci % 5)
        for i in range(n):
            arr = np.clip(base + rng.integers(0, 40, size=(*size, 3)),
                          0, 255).astype(np.uint8)
            Image.fromarray(arr).save(class_dir / f"img_{i:03d}.png")
    return root


def tiny_backbone(channels: int = 16) -> nn.Module:
    return nn.Sequential(
        nn.Conv2d(3, 8, 3, stride=2, padding=1),
        nn.ReLU(),
        nn.Conv2d(8, channels, 3, stride=2, padding=1),
        nn.ReLU(),
    )


def tiny_model(num_classes: int = 2, channels: int = 16,
               seed: int = 0) -> LeafClassifier:
    """Small fully-convolutional classifier for fast desk-scale tests."""
    torch.manual_seed(seed)
    return LeafClassifier(tiny_backbone(channels), channels, num_classes,
                          architecture="tiny")


class LogisticPixel(nn.Module):
    """Two-parameter logistic model over the mean pixel value: logits are
    [0, w * mean(x) + b], so p(class 1) = sigmoid(w * mean(x) + b)."""

    def __init__(self, w: float, b: float):
        super().__init__()
        self.w = nn.Parameter(torch.tensor(float(w)))
        self.b = nn.Parameter(torch.tensor(float(b)))
        self.num_classes = 2

    def forward(self, x):
        z = self.w * x.mean(dim=(1, 2, 3)) + self.b
        return torch.stack([torch.zeros_like(z), z], dim=1)

    def predict_proba(self, x):
        return torch.softmax(self.forward(x), dim=1)


class ConstantLogits(nn.Module):
    """Ignores its input entirely; useful for zero-gradient cases."""

    def __init__(self, logits):
        super().__init__()
        self.register_buffer("logits", torch.as_tensor(logits,
                                                       dtype=torch.float32))
        self.num_classes = len(logits)

    def forward(self, x):
        return self.logits.expand(x.shape[0], -1) + 0.0 * x.sum()

    def predict_proba(self, x):
        return torch.softmax(self.forward(x), dim=1)


@pytest.fixture(scope="session")
def stub_checkpoint(tmp_path_factory) -> Path:
    """A 7-class mobilenet_v2 checkpoint with random weights, shared by
    service and CLI tests."""
    torch.manual_seed(7)
    model = build_model("mobilenet_v2", len(TEA_CLASSES), pretrained=False)
    model.preprocess = PreprocessConfig((64, 64))
    path = tmp_path_factory.mktemp("ckpt") / "stub.pt"
    save_checkpoint(model, ClassRegistry(TEA_CLASSES), path)
    return path


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
