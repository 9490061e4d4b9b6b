"""Confusion matrices, per-class precision/recall/F1, and report emission.

Conventions: rows are true classes, columns predicted; precision/recall are
defined as 0 when their denominator is 0; argmax ties go to the lowest class
index. Human-readable reports round to 2 decimals, the machine-readable JSON
keeps full precision.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import ClassRegistry, DatasetItem
from .errors import EmptyMatrix, EmptySplit, IoFailure, LabelOutOfRange, LengthMismatch
from .models import LeafClassifier, predict_probabilities
from .preprocess import PreprocessConfig, load_and_preprocess


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # (K, K) int64, [true, predicted]
    registry: ClassRegistry


@dataclass
class ClassMetrics:
    precision: np.ndarray  # (K,)
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float


@dataclass
class ItemPrediction:
    path: str
    true_class: int
    predicted_class: int
    probabilities: np.ndarray


@dataclass
class EvaluationReport:
    confusion: ConfusionMatrix
    metrics: ClassMetrics
    predictions: list[ItemPrediction] = field(default_factory=list)


def confusion_matrix(true_labels, predicted_labels,
                     registry: ClassRegistry) -> ConfusionMatrix:
    true_arr = np.asarray(true_labels, dtype=np.int64)
    pred_arr = np.asarray(predicted_labels, dtype=np.int64)
    if true_arr.shape != pred_arr.shape:
        raise LengthMismatch(
            f"{true_arr.size} true labels vs {pred_arr.size} predictions")
    k = registry.count
    for name, arr in (("true", true_arr), ("predicted", pred_arr)):
        if arr.size and (arr.min() < 0 or arr.max() >= k):
            raise LabelOutOfRange(f"{name} labels outside [0, {k})")
    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (true_arr, pred_arr), 1)
    return ConfusionMatrix(counts, registry)


def class_metrics(cm: ConfusionMatrix) -> ClassMetrics:
    counts = cm.counts.astype(np.float64)
    total = counts.sum()
    if total == 0:
        raise EmptyMatrix("confusion matrix has no observations")
    diag = np.diag(counts)
    col = counts.sum(axis=0)
    row = counts.sum(axis=1)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr,
                   out=np.zeros_like(diag), where=pr > 0)
    return ClassMetrics(precision, recall, f1, float(diag.sum() / total))


def evaluate(model: LeafClassifier, items: list[DatasetItem],
             registry: ClassRegistry,
             preprocess: PreprocessConfig | None = None,
             batch_size: int = 32) -> EvaluationReport:
    """Clean (non-augmented) batch inference over items, then matrix and
    metrics. Ties in the probability argmax resolve to the lowest index."""
    if not items:
        raise EmptySplit("no items to evaluate")
    if model.num_classes != registry.count:
        raise LabelOutOfRange(
            f"model predicts {model.num_classes} classes, registry has "
            f"{registry.count}")
    preprocess = preprocess or model.preprocess
    predictions: list[ItemPrediction] = []
    for start in range(0, len(items), batch_size):
        chunk = items[start:start + batch_size]
        imgs = [load_and_preprocess(it.path, preprocess) for it in chunk]
        probs = predict_probabilities(model, imgs, batch_size=batch_size)
        for it, p in zip(chunk, probs):
            predictions.append(ItemPrediction(
                it.path, it.class_index, int(np.argmax(p)), p))
    cm = confusion_matrix([p.true_class for p in predictions],
                          [p.predicted_class for p in predictions], registry)
    return EvaluationReport(cm, class_metrics(cm), predictions)


# -- report files: machine-readable JSON plus a plain-text table --

def report_to_dict(report: EvaluationReport) -> dict:
    names = report.confusion.registry.names
    return {
        "accuracy": report.metrics.accuracy,
        "classes": [
            {"class": names[i],
             "precision": float(report.metrics.precision[i]),
             "recall": float(report.metrics.recall[i]),
             "f1": float(report.metrics.f1[i])}
            for i in range(len(names))
        ],
        "matrix": report.confusion.counts.tolist(),
    }


def render_report_text(report: EvaluationReport) -> str:
    names = report.confusion.registry.names
    width = max(len(n) for n in names)
    lines = [f"{'Class':<{width}}  Precision  Recall  F1-Score"]
    for i, name in enumerate(names):
        lines.append(
            f"{name:<{width}}  {report.metrics.precision[i]:>9.2f}  "
            f"{report.metrics.recall[i]:>6.2f}  {report.metrics.f1[i]:>8.2f}")
    lines.append(f"Overall accuracy: {report.metrics.accuracy:.2f}")
    return "\n".join(lines) + "\n"


def save_report(report: EvaluationReport, json_path: str | Path,
                text_path: str | Path | None = None) -> None:
    try:
        Path(json_path).write_text(
            json.dumps(report_to_dict(report), indent=2) + "\n",
            encoding="utf-8")
        if text_path is not None:
            Path(text_path).write_text(render_report_text(report),
                                       encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write report: {exc}") from exc


def load_report_dict(json_path: str | Path) -> dict:
    try:
        return json.loads(Path(json_path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot read report {json_path}: {exc}") from exc
