"""Command-line entry point orchestrating every pipeline stage.

Subcommands: ingest | train | adv-train | sweep | evaluate | explain |
serve | plot. Each reads an optional INI run config (--config); individual
flags override file values. Exit codes: 0 success, 1 user error, 2 internal
error. Existing outputs are never clobbered without --overwrite.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import attack, data, metrics, training
from .config import RunConfig, load_run_config
from .errors import TeaLeafError
from .models import build_model, load_checkpoint, save_checkpoint
from .preprocess import load_and_preprocess


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="tealeaf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True,
                                metavar="subcommand")

    def common(p):
        p.add_argument("--config", help="INI run config file")
        p.add_argument("--seed", type=int, help="override [run] seed")
        p.add_argument("--output-dir", help="override [run] output_dir")
        p.add_argument("--overwrite", action="store_true",
                       help="replace existing output files")

    p = sub.add_parser("ingest", help="scan, split, oversample; write manifest")
    common(p)
    p.add_argument("--dataset-root", help="override [run] dataset_root")

    for name, descr in (("train", "train a classifier"),
                        ("adv-train", "train with adversarial batch mixing"),
                        ("sweep", "adversarial training over the epsilon list")):
        p = sub.add_parser(name, help=descr)
        common(p)
        p.add_argument("--dataset-root")
        p.add_argument("--architecture")
        p.add_argument("--manifest", help="reuse an existing split manifest")

    p = sub.add_parser("evaluate", help="confusion matrix and class metrics")
    common(p)
    p.add_argument("--dataset-root")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest")
    p.add_argument("--split", choices=("train", "val", "test"), default="test")

    p = sub.add_parser("explain", help="Grad-CAM and occlusion maps for one image")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--method", choices=("grad-cam", "occlusion", "both"),
                   default="both")
    p.add_argument("--patch-size", type=int,
                   help="occlusion patch (default: 32, clamped to the image)")
    p.add_argument("--stride", type=int,
                   help="occlusion stride (default: half the patch)")

    p = sub.add_parser("serve", help="run the HTTP inference service")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    p = sub.add_parser("plot", help="render history/sweep/report files")
    common(p)
    p.add_argument("--history", help="history CSV from train/adv-train")
    p.add_argument("--sweep", help="sweep report CSV")
    p.add_argument("--report", help="evaluation report JSON")
    return parser


def _run_config(args) -> RunConfig:
    overrides = {}
    for key in ("seed", "output_dir", "dataset_root", "architecture"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = str(value)
    return load_run_config(args.config, overrides)


def _fresh(path: Path, overwrite: bool) -> Path:
    if path.exists() and not overwrite:
        raise TeaLeafError(
            f"refusing to overwrite {path}; pass --overwrite to replace it")
    return path


def _splits(cfg: RunConfig, args) -> data.SplitSet:
    manifest = getattr(args, "manifest", None)
    if manifest:
        return data.load_manifest(manifest)
    if cfg.dataset_root is None:
        raise TeaLeafError("dataset_root is required (config [run] or "
                           "--dataset-root) when no --manifest is given")
    index = data.scan_dataset(cfg.dataset_root)
    split = data.stratified_split(index, cfg.ratios, cfg.seed)
    return data.oversample_training(split, cfg.seed)


def _cmd_ingest(args) -> None:
    cfg = _run_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = _fresh(out / "split_manifest.jsonl", args.overwrite)
    split = _splits(cfg, args)
    data.save_manifest(split, target)
    counts = data.class_counts(split.train, split.registry.count)
    print(f"wrote {target} ({len(split.train)} train / {len(split.val)} val "
          f"/ {len(split.test)} test; per-class train counts {counts})")


def _cmd_train(args, adversarial: bool = False) -> None:
    cfg = _run_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = "model_adv" if adversarial else "model"
    ckpt_path = _fresh(out / f"{stem}.pt", args.overwrite)
    hist_path = _fresh(out / f"{stem}_history.csv", args.overwrite)
    split = _splits(cfg, args)
    if adversarial:
        model, history = attack.adversarial_train(
            cfg.architecture, split, cfg.train, cfg.adversarial,
            pretrained=cfg.pretrained, preprocess=cfg.preprocess,
            augment_cfg=cfg.augment, normalize_inputs=cfg.backbone_normalize,
            freeze_backbone=cfg.freeze_backbone)
    else:
        import torch
        torch.manual_seed(cfg.train.seed)
        model = build_model(cfg.architecture, split.registry.count,
                            pretrained=cfg.pretrained,
                            normalize_inputs=cfg.backbone_normalize,
                            freeze_backbone=cfg.freeze_backbone)
        model, history = training.train(model, split, cfg.train,
                                        preprocess=cfg.preprocess,
                                        augment_cfg=cfg.augment)
    save_checkpoint(model, split.registry, ckpt_path,
                    preprocess=cfg.preprocess)
    training.export_history(history, hist_path)
    best = history.records[history.best_epoch - 1]
    print(f"wrote {ckpt_path} and {hist_path} (best epoch "
          f"{history.best_epoch}: val_loss {best.val_loss:.4f}, "
          f"val_acc {best.val_accuracy:.4f})")


def _cmd_sweep(args) -> None:
    cfg = _run_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    target = _fresh(out / "sweep_report.csv", args.overwrite)
    split = _splits(cfg, args)
    report = attack.epsilon_sweep(cfg.architecture, split, cfg.train,
                                  cfg.adversarial, pretrained=cfg.pretrained,
                                  preprocess=cfg.preprocess,
                                  augment_cfg=cfg.augment,
                                  normalize_inputs=cfg.backbone_normalize,
                                  freeze_backbone=cfg.freeze_backbone)
    attack.save_sweep_report(report, target)
    print(f"wrote {target} ({len(report.rows)} epsilon rows)")


def _cmd_evaluate(args) -> None:
    cfg = _run_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = _fresh(out / f"report_{args.split}.json", args.overwrite)
    text_path = _fresh(out / f"report_{args.split}.txt", args.overwrite)
    model, registry = load_checkpoint(args.checkpoint)
    split = _splits(cfg, args)
    items = getattr(split, args.split)
    report = metrics.evaluate(model, items, registry)
    metrics.save_report(report, json_path, text_path)
    print(metrics.render_report_text(report), end="")
    print(f"wrote {json_path} and {text_path}")


def _cmd_explain(args) -> None:
    from . import explain as ex

    cfg = _run_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model, registry = load_checkpoint(args.checkpoint)
    img = load_and_preprocess(args.image, model.preprocess)
    methods = ("grad_cam", "occlusion") if args.method == "both" \
        else (args.method.replace("-", "_"),)
    for method in methods:
        heat_path = _fresh(out / f"{method}.png", args.overwrite)
        over_path = _fresh(out / f"{method}_overlay.png", args.overwrite)
        if method == "grad_cam":
            heatmap = ex.grad_cam(model, img)
        else:
            patch = args.patch_size or min(32, img.shape[0], img.shape[1])
            stride = args.stride or max(1, patch // 2)
            heatmap = ex.occlusion_sensitivity(
                model, img, ex.OcclusionConfig(patch_size=patch,
                                               stride=stride))
        ex.save_heatmap_png(heatmap, heat_path)
        ex.save_image_png(ex.overlay(heatmap, img, alpha=cfg.overlay_alpha),
                          over_path)
        label = registry.names[heatmap.target_class]
        print(f"wrote {heat_path} and {over_path} (target class {label!r})")


def _cmd_serve(args) -> None:
    from .service import serve

    cfg = _run_config(args)
    serve(args.checkpoint,
          host=args.host or cfg.serve_host,
          port=args.port or cfg.serve_port,
          overlay_alpha=cfg.overlay_alpha,
          max_payload_bytes=cfg.max_payload_mib * 1024 * 1024)


def _cmd_plot(args) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    cfg = _run_config(args)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if not (args.history or args.sweep or args.report):
        raise TeaLeafError("plot needs at least one of --history/--sweep/--report")

    if args.history:
        history = training.load_history(args.history)
        target = _fresh(out / "history.png", args.overwrite)
        epochs = [r.epoch for r in history.records]
        fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=(10, 4))
        ax_loss.plot(epochs, [r.train_loss for r in history.records],
                     label="train")
        ax_loss.plot(epochs, [r.val_loss for r in history.records],
                     label="val")
        ax_loss.set_xlabel("epoch"), ax_loss.set_ylabel("loss")
        ax_loss.legend()
        ax_acc.plot(epochs, [r.train_accuracy for r in history.records],
                    label="train")
        ax_acc.plot(epochs, [r.val_accuracy for r in history.records],
                    label="val")
        ax_acc.set_xlabel("epoch"), ax_acc.set_ylabel("accuracy")
        ax_acc.legend()
        fig.tight_layout()
        fig.savefig(target, dpi=120)
        plt.close(fig)
        print(f"wrote {target}")

    if args.sweep:
        report = attack.load_sweep_report(args.sweep)
        target = _fresh(out / "sweep.png", args.overwrite)
        eps = [r.epsilon for r in report.rows]
        fig, (ax_acc, ax_loss) = plt.subplots(1, 2, figsize=(10, 4))
        ax_acc.plot(eps, [r.val_accuracy for r in report.rows], marker="o")
        ax_acc.set_xlabel("epsilon"), ax_acc.set_ylabel("val accuracy")
        ax_loss.plot(eps, [r.val_loss for r in report.rows], marker="o")
        ax_loss.set_xlabel("epsilon"), ax_loss.set_ylabel("val loss")
        fig.tight_layout()
        fig.savefig(target, dpi=120)
        plt.close(fig)
        print(f"wrote {target}")

    if args.report:
        rep = metrics.load_report_dict(args.report)
        target = _fresh(out / "confusion.png", args.overwrite)
        names = [row["class"] for row in rep["classes"]]
        fig, ax = plt.subplots(figsize=(6, 5))
        im = ax.imshow(rep["matrix"], cmap="Blues")
        ax.set_xticks(range(len(names)), names, rotation=45, ha="right")
        ax.set_yticks(range(len(names)), names)
        ax.set_xlabel("predicted"), ax.set_ylabel("true")
        fig.colorbar(im)
        fig.tight_layout()
        fig.savefig(target, dpi=120)
        plt.close(fig)
        print(f"wrote {target}")


_HANDLERS = {
    "ingest": _cmd_ingest,
    "train": _cmd_train,
    "adv-train": lambda args: _cmd_train(args, adversarial=True),
    "sweep": _cmd_sweep,
    "evaluate": _cmd_evaluate,
    "explain": _cmd_explain,
    "serve": _cmd_serve,
    "plot": _cmd_plot,
}


def dispatch(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        _HANDLERS[args.command](args)
        return 0
    except TeaLeafError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - keep diagnostics one-line
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
