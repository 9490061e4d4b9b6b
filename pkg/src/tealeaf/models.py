"""The three transfer-learning classifiers behind one uniform interface.

Every model is a LeafClassifier: a convolutional backbone producing the last
conv-stage feature map, then global average pooling and a single dense layer.
``forward`` returns logits (what the loss wants); ``predict_proba`` returns
softmax probabilities. The backbone feature map is what Grad-CAM hooks, and
it is always retrievable as the submodule named by ``last_conv_layer``.
"""
from __future__ import annotations

from collections import OrderedDict
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from . import __version__
from .data import ClassRegistry
from .errors import (
    CorruptCheckpoint,
    RegistryMismatch,
    UnknownArchitecture,
    WeightsUnavailable,
)
from .preprocess import PreprocessConfig

ARCHITECTURES = ("densenet201", "mobilenet_v2", "inception_v3")

# Native input side for all three: the pipeline resizes everything to 224
# (InceptionV3's conventional 299 included; the backbones are fully
# convolutional ahead of the pooled head, so this is safe).
DEFAULT_INPUT_SIZE = 224

_FEATURE_CHANNELS = {
    "densenet201": 1920,
    "mobilenet_v2": 1280,
    "inception_v3": 2048,
}

# large-corpus channel statistics, applied only when input normalization is
# switched on (plain [0,1] scaling is the default)
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class LeafClassifier(nn.Module):
    """Backbone (N,3,H,W)->(N,C,h,w), then GAP -> dense -> softmax.

    Inputs are [0,1] images everywhere in the pipeline; when
    ``normalize_inputs`` is set, the channel renormalization happens inside
    the forward pass so attacks and explainers keep working in image space.
    """

    def __init__(self, backbone: nn.Module, feature_channels: int,
                 num_classes: int, architecture: str = "custom",
                 input_size: int = DEFAULT_INPUT_SIZE,
                 preprocess: PreprocessConfig | None = None,
                 normalize_inputs: bool = False):
        super().__init__()
        if num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {num_classes}")
        self.backbone = backbone
        self.classifier = nn.Linear(feature_channels, num_classes)
        self.architecture = architecture
        self.num_classes = num_classes
        self.input_size = input_size
        self.last_conv_layer = "backbone"
        self.preprocess = preprocess or PreprocessConfig()
        self.normalize_inputs = normalize_inputs
        mean = IMAGENET_MEAN if normalize_inputs else (0.0, 0.0, 0.0)
        std = IMAGENET_STD if normalize_inputs else (1.0, 1.0, 1.0)
        self.register_buffer("input_mean",
                             torch.tensor(mean).view(1, 3, 1, 1))
        self.register_buffer("input_std",
                             torch.tensor(std).view(1, 3, 1, 1))

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.backbone((x - self.input_mean) / self.input_std)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        fmap = self.features(x)
        pooled = fmap.mean(dim=(2, 3))
        return self.classifier(pooled)

    def predict_proba(self, x: torch.Tensor) -> torch.Tensor:
        return F.softmax(self.forward(x), dim=1)

    def freeze_backbone(self) -> None:
        """Leave only the classification head trainable."""
        for param in self.backbone.parameters():
            param.requires_grad_(False)


def _load_backbone(arch: str, pretrained: bool) -> nn.Module:
    from torchvision import models as tvm

    try:
        if arch == "densenet201":
            weights = tvm.DenseNet201_Weights.IMAGENET1K_V1 if pretrained else None
            net = tvm.densenet201(weights=weights)
            # torchvision applies relu after `features`; keep that so the
            # hooked map is the post-activation final conv stage
            return nn.Sequential(OrderedDict([
                ("features", net.features),
                ("relu", nn.ReLU(inplace=False)),
            ]))
        if arch == "mobilenet_v2":
            weights = tvm.MobileNet_V2_Weights.IMAGENET1K_V1 if pretrained else None
            return tvm.mobilenet_v2(weights=weights).features
        if arch == "inception_v3":
            if pretrained:
                net = tvm.inception_v3(
                    weights=tvm.Inception_V3_Weights.IMAGENET1K_V1)
            else:
                net = tvm.inception_v3(weights=None, aux_logits=False,
                                       init_weights=True)
            drop = {"AuxLogits", "avgpool", "dropout", "fc"}
            return nn.Sequential(OrderedDict(
                (name, mod) for name, mod in net.named_children()
                if name not in drop))
    except Exception as exc:
        if pretrained:
            raise WeightsUnavailable(
                f"pretrained weights for {arch} not fetchable: {exc}") from exc
        raise
    raise UnknownArchitecture(arch)


def build_model(arch: str, num_classes: int, pretrained: bool = False,
                normalize_inputs: bool = False,
                freeze_backbone: bool = False) -> LeafClassifier:
    """Construct one of the three supported classifiers.

    pretrained=True initializes the backbone from large-scale pretraining
    (raises WeightsUnavailable when the weights cannot be fetched); the
    classification head is always fresh. freeze_backbone leaves only the
    head trainable; the default fine-tunes end to end.
    """
    if arch not in ARCHITECTURES:
        raise UnknownArchitecture(
            f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
    backbone = _load_backbone(arch, pretrained)
    model = LeafClassifier(backbone, _FEATURE_CHANNELS[arch], num_classes,
                           architecture=arch,
                           normalize_inputs=normalize_inputs)
    if freeze_backbone:
        model.freeze_backbone()
    return model


def to_batch_tensor(imgs: np.ndarray | list[np.ndarray]) -> torch.Tensor:
    """Stack (H, W, 3) float arrays into an (N, 3, H, W) float32 tensor."""
    batch = np.stack(imgs) if isinstance(imgs, list) else np.asarray(imgs)
    if batch.ndim == 3:
        batch = batch[np.newaxis]
    return torch.from_numpy(
        np.ascontiguousarray(batch.transpose(0, 3, 1, 2), dtype=np.float32))


def predict_probabilities(model: LeafClassifier,
                          imgs: np.ndarray | list[np.ndarray],
                          batch_size: int = 32) -> np.ndarray:
    """Batched inference: (N, H, W, 3) arrays -> (N, num_classes) softmax
    probabilities as float32. Leaves the model's train/eval mode untouched."""
    was_training = model.training
    model.eval()
    try:
        x = to_batch_tensor(imgs)
        outs = []
        with torch.no_grad():
            for i in range(0, x.shape[0], batch_size):
                outs.append(model.predict_proba(x[i:i + batch_size]))
        return torch.cat(outs).numpy()
    finally:
        model.train(was_training)


# -- checkpointing: one file carrying weights plus everything needed to
#    rebuild and serve the model --

def save_checkpoint(model: LeafClassifier, registry: ClassRegistry,
                    path: str | Path,
                    preprocess: PreprocessConfig | None = None) -> None:
    if model.architecture not in ARCHITECTURES:
        raise UnknownArchitecture(
            f"cannot checkpoint non-registry architecture {model.architecture!r}")
    if model.num_classes != registry.count:
        raise RegistryMismatch(
            f"model has {model.num_classes} classes but registry names "
            f"{registry.count}")
    pp = preprocess or model.preprocess
    payload = {
        "format": "tealeaf-checkpoint",
        "code_version": __version__,
        "architecture": model.architecture,
        "num_classes": model.num_classes,
        "class_names": list(registry.names),
        "preprocess": {"height": pp.target_size[0], "width": pp.target_size[1]},
        "normalize_inputs": model.normalize_inputs,
        "state_dict": model.state_dict(),
    }
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path) -> tuple[LeafClassifier, ClassRegistry]:
    """Restore a checkpoint saved by save_checkpoint.

    Weights round-trip bit-identically. The embedded preprocess config rides
    on the returned model as ``model.preprocess``.
    """
    try:
        payload = torch.load(str(path), map_location="cpu")
    except Exception as exc:
        raise CorruptCheckpoint(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != "tealeaf-checkpoint":
        raise CorruptCheckpoint(f"not a tealeaf checkpoint: {path}")
    try:
        arch = payload["architecture"]
        num_classes = int(payload["num_classes"])
        names = tuple(payload["class_names"])
        pp = payload["preprocess"]
        state = payload["state_dict"]
    except KeyError as exc:
        raise CorruptCheckpoint(f"checkpoint missing field {exc}") from exc
    if num_classes != len(names):
        raise RegistryMismatch(
            f"checkpoint claims {num_classes} classes but registry names "
            f"{len(names)}")
    registry = ClassRegistry(names)
    model = build_model(arch, num_classes, pretrained=False,
                        normalize_inputs=bool(payload.get("normalize_inputs",
                                                          False)))
    model.preprocess = PreprocessConfig((int(pp["height"]), int(pp["width"])))
    try:
        model.load_state_dict(state, strict=True)
    except Exception as exc:
        raise CorruptCheckpoint(f"weights do not fit {arch}: {exc}") from exc
    model.eval()
    return model, registry
