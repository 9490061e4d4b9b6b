"""Dataset discovery, stratified splitting, and class-balancing oversampling.

Expected on-disk layout: ``<root>/<class_name>/<image>.{jpg,jpeg,png}`` with
one subdirectory per class. Class indices always follow the lexicographic
order of the subdirectory names.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    EmptyClassDirectory,
    EmptyTrainClass,
    ManifestInvalid,
    MissingRoot,
    RatioSumInvalid,
    SplitInfeasible,
)

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".jpg", ".jpeg", ".png"}
DEFAULT_RATIOS = (0.70, 0.20, 0.10)


@dataclass(frozen=True)
class ClassRegistry:
    """Fixed, ordered list of class label names; indices elsewhere refer to
    this order."""
    names: tuple[str, ...]

    def __post_init__(self):
        if not self.names:
            raise ValueError("class registry must not be empty")
        if any(not n for n in self.names):
            raise ValueError("class names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise ValueError("class names must be unique")

    @property
    def count(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class DatasetItem:
    path: str
    class_index: int
    duplicated: bool = False


@dataclass
class DatasetIndex:
    registry: ClassRegistry
    items: list[DatasetItem]


@dataclass
class SplitSet:
    """Disjoint train/val/test item lists over one dataset index."""
    registry: ClassRegistry
    train: list[DatasetItem]
    val: list[DatasetItem]
    test: list[DatasetItem]
    ratios: tuple[float, float, float] = DEFAULT_RATIOS
    seed: int = 0


def _rng(*entropy: int) -> np.random.Generator:
    # SeedSequence wants non-negative entropy words
    return np.random.default_rng(
        np.random.SeedSequence([e % (2 ** 63) for e in entropy]))


def _is_decodable(path: Path) -> bool:
    try:
        with Image.open(path) as img:
            img.verify()
        return True
    except Exception:
        return False


def scan_dataset(root: str | Path) -> DatasetIndex:
    """Index every decodable image under one-subdirectory-per-class `root`.

    Undecodable files are skipped with a warning; a class directory that
    yields zero images raises EmptyClassDirectory.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingRoot(f"dataset root does not exist: {root}")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not class_dirs:
        raise EmptyClassDirectory(f"no class subdirectories under {root}")
    registry = ClassRegistry(tuple(d.name for d in class_dirs))
    items: list[DatasetItem] = []
    for class_index, class_dir in enumerate(class_dirs):
        count = 0
        for p in sorted(class_dir.iterdir()):
            if not p.is_file() or p.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            if not _is_decodable(p):
                logger.warning("skipping undecodable image: %s", p)
                continue
            items.append(DatasetItem(str(p), class_index))
            count += 1
        if count == 0:
            raise EmptyClassDirectory(
                f"class directory has no decodable images: {class_dir}")
    return DatasetIndex(registry, items)


def class_counts(items: list[DatasetItem], num_classes: int) -> list[int]:
    counts = [0] * num_classes
    for it in items:
        counts[it.class_index] += 1
    return counts


def stratified_split(index: DatasetIndex,
                     ratios: tuple[float, float, float] = DEFAULT_RATIOS,
                     seed: int = 0) -> SplitSet:
    """Split per class: deterministic shuffle keyed by (seed, class_index),
    then floor(n * train_ratio) items to train, floor(n * val_ratio) to val,
    the remainder to test."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise RatioSumInvalid(f"split ratios must sum to 1, got {ratios}")
    per_class: list[list[DatasetItem]] = [[] for _ in range(index.registry.count)]
    for it in index.items:
        per_class[it.class_index].append(it)
    for ci, bucket in enumerate(per_class):
        if len(bucket) < 3:
            raise SplitInfeasible(
                f"class {index.registry.names[ci]!r} has {len(bucket)} items; "
                "need at least 3 to populate every split")
    train: list[DatasetItem] = []
    val: list[DatasetItem] = []
    test: list[DatasetItem] = []
    for ci, bucket in enumerate(per_class):
        order = _rng(seed, ci).permutation(len(bucket))
        shuffled = [bucket[i] for i in order]
        n = len(shuffled)
        n_train = math.floor(n * ratios[0])
        n_val = math.floor(n * ratios[1])
        train.extend(shuffled[:n_train])
        val.extend(shuffled[n_train:n_train + n_val])
        test.extend(shuffled[n_train + n_val:])
    return SplitSet(index.registry, train, val, test, tuple(ratios), seed)


def oversample_training(split: SplitSet, seed: int = 0) -> SplitSet:
    """Balance the train split by duplicating minority-class entries
    (uniform with replacement) up to the majority-class count. Val and test
    are returned untouched."""
    counts = class_counts(split.train, split.registry.count)
    for ci, c in enumerate(counts):
        if c == 0:
            raise EmptyTrainClass(
                f"class {split.registry.names[ci]!r} has no training items")
    target = max(counts)
    per_class: list[list[DatasetItem]] = [[] for _ in range(split.registry.count)]
    for it in split.train:
        per_class[it.class_index].append(it)
    extra: list[DatasetItem] = []
    for ci, bucket in enumerate(per_class):
        need = target - len(bucket)
        if need == 0:
            continue
        picks = _rng(seed, ci).integers(0, len(bucket), size=need)
        extra.extend(replace(bucket[i], duplicated=True) for i in picks)
    return SplitSet(split.registry, list(split.train) + extra,
                    split.val, split.test, split.ratios, split.seed)


# -- manifest persistence: JSON-lines, one header record then one per item --

def save_manifest(split: SplitSet, path: str | Path) -> None:
    path = Path(path)
    header = {
        "kind": "tealeaf-split-manifest",
        "seed": split.seed,
        "ratios": list(split.ratios),
        "registry": list(split.registry.names),
    }
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for name, items in (("train", split.train), ("val", split.val),
                            ("test", split.test)):
            for it in items:
                fh.write(json.dumps({
                    "path": it.path,
                    "class_index": it.class_index,
                    "split": name,
                    "duplicated": it.duplicated,
                }) + "\n")


def load_manifest(path: str | Path) -> SplitSet:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            lines = [ln for ln in fh.read().splitlines() if ln.strip()]
        header = json.loads(lines[0])
        if header.get("kind") != "tealeaf-split-manifest":
            raise ManifestInvalid(f"not a split manifest: {path}")
        registry = ClassRegistry(tuple(header["registry"]))
        buckets: dict[str, list[DatasetItem]] = {"train": [], "val": [], "test": []}
        for ln in lines[1:]:
            rec = json.loads(ln)
            buckets[rec["split"]].append(DatasetItem(
                rec["path"], int(rec["class_index"]), bool(rec["duplicated"])))
        return SplitSet(registry, buckets["train"], buckets["val"],
                        buckets["test"], tuple(header["ratios"]),
                        int(header["seed"]))
    except ManifestInvalid:
        raise
    except (OSError, KeyError, ValueError, IndexError) as exc:
        raise ManifestInvalid(f"cannot read split manifest {path}: {exc}") from exc
