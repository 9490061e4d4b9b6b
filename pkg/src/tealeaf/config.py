"""Run configuration: one INI file drives every pipeline stage.

Sections mirror the modules ([run], [split], [train], [adversarial],
[preprocess], [augment], [serve]); unknown sections or keys are rejected,
and every invalid value names its offending key. The shipped presets under
configs/ hold the per-architecture hyperparameter columns verbatim.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .attack import DEFAULT_SWEEP_EPSILONS, AdversarialConfig
from .errors import ConfigInvalid
from .models import ARCHITECTURES
from .preprocess import AugmentConfig, PreprocessConfig
from .training import TrainConfig, default_train_config

_KNOWN_KEYS = {
    "run": {"dataset_root", "output_dir", "architecture", "seed"},
    "split": {"ratios"},
    "train": {"batch_size", "learning_rate", "max_epochs", "patience",
              "min_delta", "pretrained", "freeze_backbone"},
    "adversarial": {"epsilon", "adversarial_fraction", "sweep_epsilons"},
    "preprocess": {"height", "width", "backbone_normalize"},
    "augment": {"horizontal_flip", "rotation_degrees", "zoom_fraction"},
    "serve": {"host", "port", "max_payload_mib", "overlay_alpha"},
}


@dataclass
class RunConfig:
    dataset_root: str | None
    output_dir: str
    architecture: str
    seed: int
    ratios: tuple[float, float, float]
    pretrained: bool
    freeze_backbone: bool
    backbone_normalize: bool
    train: TrainConfig
    adversarial: AdversarialConfig
    preprocess: PreprocessConfig
    augment: AugmentConfig
    serve_host: str = "127.0.0.1"
    serve_port: int = 8000
    max_payload_mib: int = 10
    overlay_alpha: float = 0.4


def _get(parser, section, key, convert, default, check=None):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        value = convert(raw)
    except ValueError as exc:
        raise ConfigInvalid(f"{key}: {exc}") from exc
    if check is not None and not check(value):
        raise ConfigInvalid(f"{key}: invalid value {raw!r}")
    return value


def _bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(part) for part in raw.split(",") if part.strip())


def load_run_config(path: str | Path | None,
                    overrides: dict[str, str] | None = None) -> RunConfig:
    """Parse the INI run config; ``overrides`` (key -> raw string, [run]
    section keys) take precedence over file values. path=None builds the
    all-defaults config."""
    parser = configparser.ConfigParser()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigInvalid(f"config file not found: {path}")
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigInvalid(f"cannot parse {path}: {exc}") from exc

    for section in parser.sections():
        if section not in _KNOWN_KEYS:
            raise ConfigInvalid(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _KNOWN_KEYS[section]:
                raise ConfigInvalid(f"unknown key {key!r} in [{section}]")
    if overrides:
        if not parser.has_section("run"):
            parser.add_section("run")
        for key, raw in overrides.items():
            if raw is None:
                continue
            if key not in _KNOWN_KEYS["run"]:
                raise ConfigInvalid(f"unknown override {key!r}")
            parser.set("run", key, str(raw))

    architecture = _get(parser, "run", "architecture", str, "densenet201",
                        check=lambda a: a in ARCHITECTURES)
    seed = _get(parser, "run", "seed", int, 0)
    dataset_root = _get(parser, "run", "dataset_root", str, None)
    output_dir = _get(parser, "run", "output_dir", str, "runs")

    ratios = _get(parser, "split", "ratios", _floats, (0.70, 0.20, 0.10),
                  check=lambda r: len(r) == 3)

    base = default_train_config(architecture, seed=seed)
    try:
        train = TrainConfig(
            batch_size=_get(parser, "train", "batch_size", int,
                            base.batch_size, check=lambda v: v >= 1),
            learning_rate=_get(parser, "train", "learning_rate", float,
                               base.learning_rate, check=lambda v: v > 0),
            max_epochs=_get(parser, "train", "max_epochs", int,
                            base.max_epochs, check=lambda v: v >= 1),
            patience=_get(parser, "train", "patience", int, base.patience,
                          check=lambda v: v >= 1),
            min_delta=_get(parser, "train", "min_delta", float, 0.0,
                           check=lambda v: v >= 0),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigInvalid(f"patience: {exc}") from exc
    pretrained = _get(parser, "train", "pretrained", _bool, True)
    freeze_backbone = _get(parser, "train", "freeze_backbone", _bool, False)

    adversarial = AdversarialConfig(
        epsilon=_get(parser, "adversarial", "epsilon", float, 0.1,
                     check=lambda v: 0.0 <= v <= 1.0),
        adversarial_fraction=_get(parser, "adversarial",
                                  "adversarial_fraction", float, 0.5,
                                  check=lambda v: 0.0 <= v <= 1.0),
        sweep_epsilons=_get(parser, "adversarial", "sweep_epsilons", _floats,
                            DEFAULT_SWEEP_EPSILONS,
                            check=lambda es: len(es) > 0
                            and all(0.0 <= e <= 1.0 for e in es)),
    )

    preprocess = PreprocessConfig(target_size=(
        _get(parser, "preprocess", "height", int, 224, check=lambda v: v > 0),
        _get(parser, "preprocess", "width", int, 224, check=lambda v: v > 0),
    ))
    backbone_normalize = _get(parser, "preprocess", "backbone_normalize",
                              _bool, False)

    try:
        augment = AugmentConfig(
            horizontal_flip=_get(parser, "augment", "horizontal_flip",
                                 _bool, True),
            rotation_degrees=_get(parser, "augment", "rotation_degrees",
                                  float, 15.0,
                                  check=lambda v: 0.0 <= v <= 180.0),
            zoom_fraction=_get(parser, "augment", "zoom_fraction", float,
                               0.10, check=lambda v: 0.0 <= v <= 0.5),
            seed=seed,
        )
    except ValueError as exc:
        raise ConfigInvalid(str(exc)) from exc

    return RunConfig(
        dataset_root=dataset_root,
        output_dir=output_dir,
        architecture=architecture,
        seed=seed,
        ratios=ratios,
        pretrained=pretrained,
        freeze_backbone=freeze_backbone,
        backbone_normalize=backbone_normalize,
        train=train,
        adversarial=adversarial,
        preprocess=preprocess,
        augment=augment,
        serve_host=_get(parser, "serve", "host", str, "127.0.0.1"),
        serve_port=_get(parser, "serve", "port", int, 8000,
                        check=lambda v: 0 < v < 65536),
        max_payload_mib=_get(parser, "serve", "max_payload_mib", int, 10,
                             check=lambda v: v >= 1),
        overlay_alpha=_get(parser, "serve", "overlay_alpha", float, 0.4,
                           check=lambda v: 0.0 <= v <= 1.0),
    )
