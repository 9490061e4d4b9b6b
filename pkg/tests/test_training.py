"""Early stopping semantics, training-loop wiring, history export."""
import math

import numpy as np
import pytest
import torch

import tealeaf.training as training
from tealeaf.data import ClassRegistry, DatasetItem, SplitSet, scan_dataset, stratified_split
from tealeaf.errors import EmptySplit, IoFailure, NonFiniteLoss
from tealeaf.preprocess import AugmentConfig, PreprocessConfig
from tealeaf.training import (
    EarlyStopState,
    EpochRecord,
    TrainConfig,
    TrainingHistory,
    default_train_config,
    early_stopping_update,
    export_history,
    load_history,
    train,
)
from conftest import tiny_model, write_class_dirs

SMALL = PreprocessConfig((16, 16))
NO_AUG = AugmentConfig(horizontal_flip=False, rotation_degrees=0.0,
                       zoom_fraction=0.0)


def small_splits(tmp_path, classes=2, per_class=6):
    counts = {f"c{i}": per_class for i in range(classes)}
    root = write_class_dirs(tmp_path / "ds", counts, size=(16, 16))
    index = scan_dataset(root)
    per = per_class // 2
    train_items = [it for it in index.items
                   if int(it.path[-7:-4]) < per]
    val_items = [it for it in index.items if int(it.path[-7:-4]) >= per]
    return SplitSet(index.registry, train_items, val_items, [])


class TestEarlyStopping:
    def test_improvement_resets(self):
        state = EarlyStopState(patience=2, best_val_loss=0.5)
        new, stop = early_stopping_update(state, 0.4)
        assert (new.best_val_loss, new.epochs_since_improvement) == (0.4, 0)
        assert not stop

    def test_patience_exhausted(self):
        state = EarlyStopState(patience=2, best_val_loss=0.5,
                               epochs_since_improvement=1)
        new, stop = early_stopping_update(state, 0.6)
        assert (new.best_val_loss, new.epochs_since_improvement) == (0.5, 2)
        assert stop

    def test_equal_loss_is_not_improvement(self):
        state = EarlyStopState(patience=3, best_val_loss=0.5)
        new, stop = early_stopping_update(state, 0.5)
        assert new.epochs_since_improvement == 1
        assert not stop

    def test_min_delta_strictness(self):
        state = EarlyStopState(patience=2, min_delta=0.1, best_val_loss=0.5)
        new, _ = early_stopping_update(state, 0.4)  # not better by > 0.1
        assert new.epochs_since_improvement == 1
        new, _ = early_stopping_update(state, 0.39)
        assert new.epochs_since_improvement == 0


def test_table_defaults():
    for arch, lr, patience in (("densenet201", 1e-4, 10),
                               ("mobilenet_v2", 1e-4, 5),
                               ("inception_v3", 1e-5, 10)):
        cfg = default_train_config(arch)
        assert cfg.learning_rate == lr
        assert cfg.patience == patience
        assert cfg.batch_size == 32
        assert cfg.max_epochs == 50


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        TrainConfig(patience=60, max_epochs=50)


class TestTrainLoop:
    def test_forced_val_sequence_stops_and_restores_best(self, tmp_path,
                                                          monkeypatch):
        splits = small_splits(tmp_path)
        # first run consumes three values; the second run's two keep its
        # best at epoch 2 so both runs should end on identical weights
        forced = iter([1.0, 0.9, 0.95, 0.99, 0.5])
        monkeypatch.setattr(
            training, "_evaluate_items",
            lambda *args, **kwargs: (next(forced), 0.5))
        cfg = TrainConfig(batch_size=4, learning_rate=1e-3, max_epochs=10,
                          patience=1, seed=0)
        model, history = train(tiny_model(seed=1), splits, cfg,
                               preprocess=SMALL, augment_cfg=NO_AUG)
        assert [r.epoch for r in history.records] == [1, 2, 3]
        assert history.best_epoch == 2
        assert history.stopped_early

        # the restored weights equal a fresh 2-epoch run with the same seed
        cfg2 = TrainConfig(batch_size=4, learning_rate=1e-3, max_epochs=2,
                           patience=2, seed=0)
        model2, _ = train(tiny_model(seed=1), splits, cfg2,
                          preprocess=SMALL, augment_cfg=NO_AUG)
        for key, tensor in model.state_dict().items():
            torch.testing.assert_close(tensor, model2.state_dict()[key],
                                       rtol=0, atol=0)

    def test_histories_are_reproducible(self, tmp_path):
        splits = small_splits(tmp_path)
        cfg = TrainConfig(batch_size=4, learning_rate=1e-3, max_epochs=3,
                          patience=3, seed=7)
        _, first = train(tiny_model(seed=2), splits, cfg, preprocess=SMALL)
        _, second = train(tiny_model(seed=2), splits, cfg, preprocess=SMALL)
        assert first.records == second.records

    def test_each_item_seen_once_per_epoch(self, tmp_path):
        splits = small_splits(tmp_path)
        cfg = TrainConfig(batch_size=4, learning_rate=1e-3, max_epochs=2,
                          patience=2, seed=0)
        seen = []

        def spy(model, x, y):
            seen.append(y.numpy().copy())
            return x, y

        train(tiny_model(seed=0), splits, cfg, preprocess=SMALL,
              augment_cfg=NO_AUG, batch_transform=spy)
        labels = np.concatenate(seen)
        expected = np.array(sorted(it.class_index for it in splits.train) * 2)
        assert len(labels) == 2 * len(splits.train)
        np.testing.assert_array_equal(np.sort(labels[:len(splits.train)]),
                                      expected[:len(splits.train)])
        steps_per_epoch = math.ceil(len(splits.train) / cfg.batch_size)
        assert len(seen) == 2 * steps_per_epoch

    def test_augmentation_touches_train_items_only(self, tmp_path,
                                                   monkeypatch):
        splits = small_splits(tmp_path)
        calls = {"n": 0}
        real = training.augment

        def counting(img, cfg, draw):
            calls["n"] += 1
            return real(img, cfg, draw)

        monkeypatch.setattr(training, "augment", counting)
        cfg = TrainConfig(batch_size=4, learning_rate=1e-3, max_epochs=2,
                          patience=2, seed=0)
        train(tiny_model(seed=0), splits, cfg, preprocess=SMALL)
        assert calls["n"] == 2 * len(splits.train)

    def test_empty_split_rejected(self, tmp_path):
        splits = small_splits(tmp_path)
        empty = SplitSet(splits.registry, [], splits.val, [])
        with pytest.raises(EmptySplit):
            train(tiny_model(), empty, TrainConfig(patience=1, max_epochs=1))

    def test_non_finite_loss_diagnostic(self, tmp_path):
        splits = small_splits(tmp_path)
        model = tiny_model(seed=0)
        with torch.no_grad():
            model.classifier.weight.fill_(float("nan"))
        cfg = TrainConfig(batch_size=4, learning_rate=1e-3, max_epochs=1,
                          patience=1, seed=0)
        with pytest.raises(NonFiniteLoss, match="epoch 1"):
            train(model, splits, cfg, preprocess=SMALL)


class TestHistoryFile:
    def make_history(self, n):
        records = [EpochRecord(e, 1.0 / e, 0.5 + 0.1 * e, 2.0 / e,
                               0.4 + 0.1 * e) for e in range(1, n + 1)]
        return TrainingHistory(records=records, best_epoch=n)

    def test_row_count(self, tmp_path):
        path = tmp_path / "h.csv"
        export_history(self.make_history(3), path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 4
        assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc"

    def test_round_trip(self, tmp_path):
        history = self.make_history(5)
        path = tmp_path / "h.csv"
        export_history(history, path)
        assert load_history(path).records == history.records
        assert load_history(path).best_epoch == history.best_epoch

    def test_empty_history(self, tmp_path):
        path = tmp_path / "h.csv"
        export_history(TrainingHistory(), path)
        assert path.read_text().strip().splitlines() == [
            "epoch,train_loss,train_acc,val_loss,val_acc"]
        assert load_history(path).records == []

    def test_io_failure(self, tmp_path):
        with pytest.raises(IoFailure):
            export_history(TrainingHistory(), tmp_path / "missing" / "h.csv")
