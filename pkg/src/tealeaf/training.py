"""Training with Adam + categorical cross-entropy, early stopping on
validation loss, and per-epoch history emission.

All three supported architectures train the same way; only learning rate and
patience differ (see ``default_train_config``). Augmentation touches training
items only; validation always runs clean.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .data import SplitSet, DatasetItem
from .errors import EmptySplit, IoFailure, NonFiniteLoss, RegistryMismatch
from .models import LeafClassifier, to_batch_tensor
from .preprocess import (
    AugmentConfig,
    PreprocessConfig,
    augment,
    item_rng,
    load_and_preprocess,
)


@dataclass(frozen=True)
class TrainConfig:
    """Loss is categorical cross-entropy and the optimizer Adam, for every
    architecture; both are fixed rather than configurable."""
    batch_size: int = 32
    learning_rate: float = 1e-4
    max_epochs: int = 50
    patience: int = 10
    min_delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 1 <= self.patience <= self.max_epochs:
            raise ValueError("need 1 <= patience <= max_epochs")


# per-architecture defaults: batch 32, 50 epochs, Adam; lr and patience vary
_ARCH_DEFAULTS = {
    "densenet201": {"learning_rate": 1e-4, "patience": 10},
    "mobilenet_v2": {"learning_rate": 1e-4, "patience": 5},
    "inception_v3": {"learning_rate": 1e-5, "patience": 10},
}


def default_train_config(arch: str, seed: int = 0) -> TrainConfig:
    if arch not in _ARCH_DEFAULTS:
        raise ValueError(f"no training defaults for architecture {arch!r}")
    return TrainConfig(seed=seed, **_ARCH_DEFAULTS[arch])


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0  # 1-indexed epoch with the minimum val_loss
    stopped_early: bool = False


@dataclass(frozen=True)
class EarlyStopState:
    patience: int
    min_delta: float = 0.0
    best_val_loss: float = math.inf
    epochs_since_improvement: int = 0


def early_stopping_update(state: EarlyStopState,
                          val_loss: float) -> tuple[EarlyStopState, bool]:
    """Strict improvement (val_loss < best - min_delta) resets the counter;
    otherwise it increments, and stop=True once it reaches patience."""
    if val_loss < state.best_val_loss - state.min_delta:
        return replace(state, best_val_loss=val_loss,
                       epochs_since_improvement=0), False
    bumped = replace(state,
                     epochs_since_improvement=state.epochs_since_improvement + 1)
    return bumped, bumped.epochs_since_improvement >= bumped.patience


class _ImageCache:
    """Path -> preprocessed base image, capped so repeated epochs skip
    decode+resize without exhausting memory on large datasets."""

    def __init__(self, target_size: tuple[int, int]):
        budget = int(os.environ.get("TEALEAF_CACHE_BYTES", str(1 << 30)))
        per_item = target_size[0] * target_size[1] * 3 * 4
        self.max_items = max(64, budget // per_item)
        self._store: dict[str, np.ndarray] = {}

    def get(self, path: str, cfg: PreprocessConfig) -> np.ndarray:
        hit = self._store.get(path)
        if hit is not None:
            return hit
        img = load_and_preprocess(path, cfg)
        if len(self._store) < self.max_items:
            self._store[path] = img
        return img


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence([seed % (2 ** 63), epoch]))


def _evaluate_items(model: LeafClassifier, items: list[DatasetItem],
                    preprocess: PreprocessConfig, batch_size: int,
                    cache: _ImageCache | None = None) -> tuple[float, float]:
    """Mean cross-entropy and accuracy over items, clean preprocessing only."""
    was_training = model.training
    model.eval()
    loss_sum = 0.0
    correct = 0
    try:
        with torch.no_grad():
            for start in range(0, len(items), batch_size):
                chunk = items[start:start + batch_size]
                imgs = [cache.get(it.path, preprocess) if cache else
                        load_and_preprocess(it.path, preprocess) for it in chunk]
                y = torch.tensor([it.class_index for it in chunk])
                logits = model(to_batch_tensor(imgs))
                loss_sum += F.cross_entropy(logits, y, reduction="sum").item()
                correct += int((logits.argmax(dim=1) == y).sum())
    finally:
        model.train(was_training)
    n = len(items)
    return loss_sum / n, correct / n


def train(model: LeafClassifier, splits: SplitSet, cfg: TrainConfig,
          preprocess: PreprocessConfig | None = None,
          augment_cfg: AugmentConfig | None = None,
          batch_transform=None) -> tuple[LeafClassifier, TrainingHistory]:
    """Run the full training procedure and return the best-epoch model.

    Each epoch: seeded shuffle of the train items, augmentation on train
    items only, one Adam step per batch, then a clean validation pass feeding
    early stopping. On stop (or exhaustion) the weights from the best epoch
    are restored.

    ``batch_transform(model, x, y) -> (x, y)`` is applied to every prepared
    batch before the loss; the adversarial trainer uses it to inject
    perturbed examples.
    """
    if not splits.train or not splits.val:
        raise EmptySplit("train and val splits must be non-empty")
    if model.num_classes != splits.registry.count:
        raise RegistryMismatch(
            f"model predicts {model.num_classes} classes but the registry "
            f"names {splits.registry.count}")
    preprocess = preprocess or model.preprocess
    augment_cfg = augment_cfg if augment_cfg is not None else AugmentConfig(seed=cfg.seed)

    torch.manual_seed(cfg.seed)
    trainable = [p for p in model.parameters() if p.requires_grad]
    optimizer = torch.optim.Adam(trainable, lr=cfg.learning_rate)
    cache = _ImageCache(preprocess.target_size)
    state = EarlyStopState(patience=cfg.patience, min_delta=cfg.min_delta)
    history = TrainingHistory()
    best_snapshot = None

    train_items = splits.train
    for epoch in range(1, cfg.max_epochs + 1):
        model.train()
        order = _epoch_rng(cfg.seed, epoch).permutation(len(train_items))
        loss_sum = 0.0
        correct = 0
        for batch_idx, start in enumerate(range(0, len(order), cfg.batch_size)):
            positions = order[start:start + cfg.batch_size]
            imgs = []
            for ordinal, pos in enumerate(positions, start=start):
                base = cache.get(train_items[pos].path, preprocess)
                imgs.append(augment(base, augment_cfg,
                                    item_rng(augment_cfg.seed, epoch, ordinal)))
            x = to_batch_tensor(imgs)
            y = torch.tensor([train_items[pos].class_index for pos in positions])
            if batch_transform is not None:
                x, y = batch_transform(model, x, y)
            logits = model(x)
            loss = F.cross_entropy(logits, y)
            if not torch.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch {batch_idx}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_sum += loss.item() * len(positions)
            correct += int((logits.argmax(dim=1) == y).sum())

        val_loss, val_acc = _evaluate_items(model, splits.val, preprocess,
                                            cfg.batch_size, cache)
        history.records.append(EpochRecord(
            epoch=epoch,
            train_loss=loss_sum / len(order),
            train_accuracy=correct / len(order),
            val_loss=val_loss,
            val_accuracy=val_acc,
        ))
        state, stop = early_stopping_update(state, val_loss)
        if state.epochs_since_improvement == 0:
            history.best_epoch = epoch
            best_snapshot = {k: v.detach().clone()
                             for k, v in model.state_dict().items()}
        if stop:
            history.stopped_early = True
            break

    if best_snapshot is not None:
        model.load_state_dict(best_snapshot)
    return model, history


# -- history file: CSV with the five fixed columns --

_HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def export_history(history: TrainingHistory, path: str | Path) -> None:
    try:
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(_HISTORY_COLUMNS)
            for r in history.records:
                writer.writerow([r.epoch, repr(r.train_loss),
                                 repr(r.train_accuracy), repr(r.val_loss),
                                 repr(r.val_accuracy)])
    except OSError as exc:
        raise IoFailure(f"cannot write history to {path}: {exc}") from exc


def load_history(path: str | Path) -> TrainingHistory:
    try:
        with Path(path).open("r", newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != _HISTORY_COLUMNS:
                raise IoFailure(f"unexpected history header in {path}: {header}")
            records = [EpochRecord(int(row[0]), float(row[1]), float(row[2]),
                                   float(row[3]), float(row[4]))
                       for row in reader if row]
    except OSError as exc:
        raise IoFailure(f"cannot read history from {path}: {exc}") from exc
    best = 0
    if records:
        best = records[int(np.argmin([r.val_loss for r in records]))].epoch
    return TrainingHistory(records=records, best_epoch=best)
