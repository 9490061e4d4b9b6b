"""Sign-gradient perturbations, adversarial training, and the epsilon sweep.

The perturbation is the single-step fast gradient sign method:
x' = clamp(x + eps * sign(dL/dx), 0, 1) with L the categorical cross-entropy
at the true class. Perturbations are generated against the current weights
with the model in eval mode, so batch statistics stay untouched.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import SplitSet
from .errors import GradientUnavailable, IoFailure
from .models import LeafClassifier, build_model, to_batch_tensor
from .preprocess import AugmentConfig, PreprocessConfig
from .training import TrainConfig, TrainingHistory, train

DEFAULT_SWEEP_EPSILONS = (0.0, 0.1, 0.12, 0.14, 0.16, 0.18, 0.2)


@dataclass(frozen=True)
class AdversarialConfig:
    epsilon: float = 0.1  # L-infinity budget in normalized pixel units
    adversarial_fraction: float = 0.5  # share of each batch replaced
    sweep_epsilons: tuple[float, ...] = DEFAULT_SWEEP_EPSILONS

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 <= self.adversarial_fraction <= 1.0:
            raise ValueError("adversarial_fraction must be in [0, 1]")
        if any(not 0.0 <= e <= 1.0 for e in self.sweep_epsilons):
            raise ValueError("sweep epsilons must be in [0, 1]")


def _fgsm_batch(model: LeafClassifier, x: torch.Tensor, y: torch.Tensor,
                epsilon: float) -> torch.Tensor:
    was_training = model.training
    model.eval()
    try:
        x_adv = x.detach().clone().requires_grad_(True)
        with torch.enable_grad():
            # summed loss: each sample's input gradient is independent
            loss = F.cross_entropy(model(x_adv), y, reduction="sum")
            grad = torch.autograd.grad(loss, x_adv)[0]
    except RuntimeError as exc:
        raise GradientUnavailable(f"input gradient not computable: {exc}") from exc
    finally:
        model.train(was_training)
    return torch.clamp(x.detach() + epsilon * torch.sign(grad), 0.0, 1.0)


def fgsm_perturb(model: LeafClassifier, img: np.ndarray, true_class: int,
                 epsilon: float) -> np.ndarray:
    """Perturb one (H, W, 3) image in [0, 1]. epsilon=0 returns the input
    values unchanged; where the loss gradient is zero, sign(0)=0 leaves the
    pixel alone at any epsilon."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must be in [0, 1]")
    if not 0 <= true_class < model.num_classes:
        raise ValueError(f"true_class {true_class} out of range")
    x = to_batch_tensor(img)
    y = torch.tensor([true_class])
    adv = _fgsm_batch(model, x, y, epsilon)
    return adv[0].numpy().transpose(1, 2, 0)


def adversarial_train(arch: str, splits: SplitSet, train_cfg: TrainConfig,
                      adv_cfg: AdversarialConfig,
                      pretrained: bool = False,
                      preprocess: PreprocessConfig | None = None,
                      augment_cfg: AugmentConfig | None = None,
                      normalize_inputs: bool = False,
                      freeze_backbone: bool = False,
                      ) -> tuple[LeafClassifier, TrainingHistory]:
    """Train a fresh model where each batch has ``adversarial_fraction`` of
    its items replaced by their FGSM counterparts (generated against the
    current weights). Validation stays clean. With epsilon=0 or fraction=0
    this degenerates to plain training, bit-identical under the same seed."""
    torch.manual_seed(train_cfg.seed)
    model = build_model(arch, splits.registry.count, pretrained=pretrained,
                        normalize_inputs=normalize_inputs,
                        freeze_backbone=freeze_backbone)

    batch_transform = None
    if adv_cfg.adversarial_fraction > 0.0:
        def batch_transform(m, x, y):
            k = int(round(adv_cfg.adversarial_fraction * x.shape[0]))
            if k == 0:
                return x, y
            x = x.clone()
            x[:k] = _fgsm_batch(m, x[:k], y[:k], adv_cfg.epsilon)
            return x, y

    model, history = train(model, splits, train_cfg, preprocess=preprocess,
                           augment_cfg=augment_cfg,
                           batch_transform=batch_transform)
    return model, history


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    val_loss: float
    val_accuracy: float
    optimal_epochs: int


@dataclass
class SweepReport:
    rows: list[SweepRow] = field(default_factory=list)


def epsilon_sweep(arch: str, splits: SplitSet, train_cfg: TrainConfig,
                  adv_cfg: AdversarialConfig,
                  pretrained: bool = False,
                  preprocess: PreprocessConfig | None = None,
                  augment_cfg: AugmentConfig | None = None,
                  normalize_inputs: bool = False,
                  freeze_backbone: bool = False) -> SweepReport:
    """Adversarially train once per sweep epsilon (fresh model each time,
    same seed) and record each run's best-epoch validation stats."""
    if not adv_cfg.sweep_epsilons:
        raise ValueError("sweep_epsilons must be non-empty")
    report = SweepReport()
    for eps in adv_cfg.sweep_epsilons:
        _, history = adversarial_train(
            arch, splits, train_cfg, replace(adv_cfg, epsilon=eps),
            pretrained=pretrained, preprocess=preprocess,
            augment_cfg=augment_cfg, normalize_inputs=normalize_inputs,
            freeze_backbone=freeze_backbone)
        best = history.records[history.best_epoch - 1]
        report.rows.append(SweepRow(eps, best.val_loss, best.val_accuracy,
                                    history.best_epoch))
    return report


_SWEEP_COLUMNS = ("epsilon", "val_loss", "val_accuracy", "optimal_epochs")


def save_sweep_report(report: SweepReport, path: str | Path) -> None:
    try:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(_SWEEP_COLUMNS)
            for r in report.rows:
                writer.writerow([repr(r.epsilon), repr(r.val_loss),
                                 repr(r.val_accuracy), r.optimal_epochs])
    except OSError as exc:
        raise IoFailure(f"cannot write sweep report to {path}: {exc}") from exc


def load_sweep_report(path: str | Path) -> SweepReport:
    try:
        with Path(path).open("r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != _SWEEP_COLUMNS:
                raise IoFailure(f"unexpected sweep header in {path}: {header}")
            rows = [SweepRow(float(r[0]), float(r[1]), float(r[2]), int(r[3]))
                    for r in reader if r]
    except OSError as exc:
        raise IoFailure(f"cannot read sweep report from {path}: {exc}") from exc
    return SweepReport(rows=rows)
