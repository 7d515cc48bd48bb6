"""Command-line interface: augment, detect, eval, and render subcommands.

Exit codes: 0 success, 2 data/config error, 3 model-load error, 4 unreadable
image, 5 JSON schema mismatch. Values from --config are overridden by flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import formats
from .augment import augment_dataset
from .classify import DEFAULT_PALETTE, MockClassifier, TileClassifier, load_exported_model
from .core import (
    ClassLabel,
    ClassOrderError,
    ConfigError,
    DecodeError,
    EmptyClassError,
    FractionError,
    MetadataError,
    ModelLoadError,
    PaletteError,
    PipelineConfig,
    SchemaError,
    UnknownLabel,
    label_from_text,
)
from .imaging import load_image, save_png
from .pipeline import detect, match_and_score, render_overlay

_PIPELINE_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)}
_EXTRA_CONFIG_KEYS = {"palette", "min_support", "model", "meta"}


@dataclasses.dataclass
class CliConfig:
    pipeline: PipelineConfig
    palette: dict[ClassLabel, tuple[int, int, int]]
    min_support: int = 2
    model: str | None = None
    meta: str | None = None


def load_cli_config(path: str | Path | None) -> CliConfig:
    """Read the JSON config file; unknown keys are rejected, missing keys
    take their documented defaults."""
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"{path}: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config", f"{path}: expected a JSON object")

    unknown = set(raw) - _PIPELINE_FIELDS - _EXTRA_CONFIG_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown config key")

    try:
        pipeline = PipelineConfig(**{k: v for k, v in raw.items() if k in _PIPELINE_FIELDS})
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc

    palette = dict(DEFAULT_PALETTE)
    for name, rgb in (raw.get("palette") or {}).items():
        label = label_from_text(name)
        if not (isinstance(rgb, (list, tuple)) and len(rgb) == 3):
            raise ConfigError("palette", f"{name}: expected [r, g, b]")
        palette[label] = tuple(int(v) for v in rgb)

    return CliConfig(
        pipeline=pipeline,
        palette=palette,
        min_support=int(raw.get("min_support", 2)),
        model=raw.get("model"),
        meta=raw.get("meta"),
    )


def _apply_overrides(cfg: PipelineConfig, args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for flag, field_name in [
        ("window_w", "window_w"), ("window_h", "window_h"),
        ("overlap", "overlap"), ("background_threshold", "background_threshold"),
        ("clusters_per_megapixel", "clusters_per_megapixel"),
        ("brightness", "brightness_factor"), ("contrast", "contrast_factor"),
        ("seed", "rng_seed"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _make_classifier(args: argparse.Namespace, cli_cfg: CliConfig) -> TileClassifier:
    if args.mock:
        return MockClassifier(cli_cfg.palette)
    model = args.model or cli_cfg.model
    meta = args.meta or cli_cfg.meta
    if not model or not meta:
        raise ConfigError("model", "need --mock, or --model and --meta (flag or config)")
    return load_exported_model(model, meta)


def _write_json(doc: dict, path: str | None) -> None:
    text = formats.dumps_canonical(doc)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_augment(args: argparse.Namespace) -> int:
    manifest = augment_dataset(
        args.source_dir, args.out_dir,
        target_per_class=args.target_per_class,
        out_w=args.out_w, out_h=args.out_h, seed=args.seed,
    )
    for label, count in sorted(manifest.class_counts().items()):
        print(f"{label.text}: {count}")
    if manifest.skipped:
        for path, reason in manifest.skipped:
            print(f"skipped {path}: {reason}", file=sys.stderr)
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    cli_cfg = load_cli_config(args.config)
    cfg = _apply_overrides(cli_cfg.pipeline, args)
    classifier = _make_classifier(args, cli_cfg)
    image = load_image(args.image)

    min_support = args.min_support if args.min_support is not None else cli_cfg.min_support
    objects, points = detect(image, classifier, cfg,
                             min_support=min_support, threads=args.threads)
    image_id = Path(args.image).stem
    _write_json(formats.detection_to_json(image_id, objects, points), args.out_json)
    if args.out_png:
        save_png(render_overlay(image, objects, points), args.out_png)
    print(f"{len(objects)} objects from {len(points)} points", file=sys.stderr)
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    truth = formats.load_truth(args.truth)
    if args.detections:
        _, objects, _points = formats.load_detections(args.detections)
    else:
        if not args.image:
            raise ConfigError("detections", "need --detections or --image")
        cli_cfg = load_cli_config(args.config)
        cfg = _apply_overrides(cli_cfg.pipeline, args)
        classifier = _make_classifier(args, cli_cfg)
        objects, _points = detect(load_image(args.image), classifier, cfg,
                                  min_support=cli_cfg.min_support)

    report = match_and_score(objects, truth)
    print(formats.format_report_table(report))
    if args.out:
        _write_json(formats.report_to_json(report), args.out)
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    image = load_image(args.image)
    _, objects, points = formats.load_detections(args.detections)
    save_png(render_overlay(image, objects, points), args.out)
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wastesight",
        description="Locate and classify recyclable waste in bird's-eye images.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_aug = sub.add_parser("augment", help="build a balanced dataset from class folders")
    p_aug.add_argument("source_dir", help="directory of class-named image folders")
    p_aug.add_argument("out_dir", help="output dataset root")
    p_aug.add_argument("--target-per-class", type=int, default=600,
                       help="images per class in the output (default 600)")
    p_aug.add_argument("--out-w", type=int, default=170, help="output width (default 170)")
    p_aug.add_argument("--out-h", type=int, default=128, help="output height (default 128)")
    p_aug.add_argument("--seed", type=int, default=0, help="augmentation seed (default 0)")
    p_aug.set_defaults(func=cmd_augment)

    def add_classifier_flags(sp):
        sp.add_argument("--mock", action="store_true",
                        help="use the color-palette mock classifier")
        sp.add_argument("--model", help="exported model file")
        sp.add_argument("--meta", help="model metadata JSON")
        sp.add_argument("--config", help="JSON config file")

    def add_pipeline_flags(sp):
        sp.add_argument("--window-w", dest="window_w", type=int, help="window width")
        sp.add_argument("--window-h", dest="window_h", type=int, help="window height")
        sp.add_argument("--overlap", type=float, help="window overlap fraction [0, 1)")
        sp.add_argument("--background-threshold", dest="background_threshold",
                        type=float, help="confidence below which a tile is background")
        sp.add_argument("--clusters-per-megapixel", dest="clusters_per_megapixel",
                        type=float, help="cluster-count density")
        sp.add_argument("--brightness", type=float, help="brightness factor")
        sp.add_argument("--contrast", type=float, help="contrast factor")
        sp.add_argument("--seed", type=int, help="clustering seed")

    p_det = sub.add_parser("detect", help="detect objects in a scene image")
    p_det.add_argument("image", help="scene image (PNG or JPEG)")
    add_classifier_flags(p_det)
    add_pipeline_flags(p_det)
    p_det.add_argument("--min-support", dest="min_support", type=int,
                       help="minimum points per emitted object (default 2)")
    p_det.add_argument("--threads", type=int, default=1,
                       help="tile-classification thread cap (default 1)")
    p_det.add_argument("--out-json", help="write detection JSON here (default stdout)")
    p_det.add_argument("--out-png", help="also write a color overlay PNG")
    p_det.set_defaults(func=cmd_detect)

    p_eval = sub.add_parser("eval", help="score detections against ground truth")
    p_eval.add_argument("--truth", required=True, help="ground-truth JSON")
    p_eval.add_argument("--detections", help="detection JSON from `detect`")
    p_eval.add_argument("--image", help="scene image to run detection on instead")
    add_classifier_flags(p_eval)
    add_pipeline_flags(p_eval)
    p_eval.add_argument("--out", help="write report JSON here")
    p_eval.set_defaults(func=cmd_eval)

    p_ren = sub.add_parser("render", help="draw a saved detection JSON over an image")
    p_ren.add_argument("image", help="scene image")
    p_ren.add_argument("detections", help="detection JSON")
    p_ren.add_argument("--out", required=True, help="overlay PNG path")
    p_ren.set_defaults(func=cmd_render)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SchemaError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 5
    except (ModelLoadError, MetadataError, ClassOrderError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except DecodeError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 4
    except (ConfigError, EmptyClassError, FractionError, PaletteError,
            UnknownLabel, ValueError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


def app() -> None:
    raise SystemExit(main())
