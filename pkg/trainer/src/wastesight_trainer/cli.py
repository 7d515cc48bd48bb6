"""The train command: manifest in, ONNX model + metadata + train curve out."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import TrainRunConfig
from .data import DataError, load_manifest_dataset, stratified_split
from .model import assemble_classifier, build_backbone, state_fingerprint
from .onnx_export import ExportError, export_model
from .train import train_head


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wastesight-train",
        description="Train the 6-way classification head on a frozen "
                    "residual backbone and export it for the detection CLI.")
    parser.add_argument("--manifest", required=True,
                        help="dataset manifest.json (augmenter output)")
    parser.add_argument("--data-root", help="image root (default: manifest directory)")
    parser.add_argument("--weights", help="pretrained backbone state dict (.pt)")
    parser.add_argument("--out-model", default="model.onnx", help="ONNX output path")
    parser.add_argument("--out-meta", default="meta.json", help="metadata JSON path")
    parser.add_argument("--out-curve", default="traincurve.csv",
                        help="accuracy/loss curve CSV path")
    parser.add_argument("--seed", type=int, default=0, help="run seed")
    parser.add_argument("--lr", type=float, default=1e-4, help="learning rate")
    parser.add_argument("--epochs", type=int, default=30, help="training epochs")
    parser.add_argument("--batch-size", type=int, default=32, help="batch size")
    parser.add_argument("--split", default="0.7,0.15,0.15",
                        help="train,val,test fractions")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        fractions = tuple(float(v) for v in args.split.split(","))
        cfg = TrainRunConfig(
            learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
            split_fractions=fractions, seed=args.seed,
            out_model=args.out_model, out_meta=args.out_meta,
            out_curve=args.out_curve)

        dataset = load_manifest_dataset(args.manifest, args.data_root)
        splits = stratified_split(dataset, cfg.split_fractions, cfg.seed)
        print(f"dataset: {len(dataset)} images "
              f"(train {len(splits[0])}, val {len(splits[1])}, test {len(splits[2])})")

        backbone = build_backbone(args.weights, seed=cfg.seed)
        before = state_fingerprint(backbone)
        head, log, test_accuracy = train_head(backbone, splits, cfg)
        assert state_fingerprint(backbone) == before, "backbone changed during training"

        last = log.rows[-1]
        print(f"final: train {last.train_accuracy:.3f}, val {last.val_accuracy:.3f}, "
              f"test {test_accuracy:.3f}")

        Path(cfg.out_curve).write_text(log.to_csv())
        classifier = assemble_classifier(backbone, head)
        export_model(classifier, dataset.image_w, dataset.image_h,
                     cfg.out_model, cfg.out_meta)
        print(f"wrote {cfg.out_model}, {cfg.out_meta}, {cfg.out_curve}")
        return 0
    except (DataError, ExportError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def app() -> None:
    raise SystemExit(main())
