"""Balanced dataset construction: rescale, crop, and flip source images so
every class reaches the same target count."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    ClassLabel,
    DecodeError,
    EmptyClassError,
    FractionError,
    RasterImage,
    label_from_text,
)
from .imaging import load_image, resize_bilinear, save_png

#: Scaled short margin: the crop window is this fraction of the rescaled
#: image along the tighter axis, so random crops keep most of the object.
_SCALE_MARGIN = 1.125

_IMAGE_SUFFIXES = {".jpg", ".jpeg", ".png"}


class Origin(enum.Enum):
    ORIGINAL = "original"
    AUGMENTED = "augmented"


@dataclass(frozen=True)
class ManifestEntry:
    path: str  # relative to the dataset root
    label: ClassLabel
    origin: Origin
    seed_used: int

    def to_json(self) -> dict:
        return {
            "path": self.path,
            "label": self.label.text,
            "origin": self.origin.value,
            "seed_used": self.seed_used,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ManifestEntry":
        return cls(
            path=str(obj["path"]),
            label=label_from_text(obj["label"]),
            origin=Origin(obj["origin"]),
            seed_used=int(obj["seed_used"]),
        )


@dataclass(frozen=True)
class DatasetManifest:
    """What the augmenter produced: one entry per emitted file, plus any
    source files it had to skip."""

    entries: tuple[ManifestEntry, ...]
    target_per_class: int
    out_w: int
    out_h: int
    seed: int
    skipped: tuple[tuple[str, str], ...] = ()

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {label: 0 for label in ClassLabel}
        for entry in self.entries:
            counts[entry.label] += 1
        return counts

    def to_json(self) -> dict:
        return {
            "target_per_class": self.target_per_class,
            "out_w": self.out_w,
            "out_h": self.out_h,
            "seed": self.seed,
            "entries": [e.to_json() for e in self.entries],
            "skipped": [list(s) for s in self.skipped],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DatasetManifest":
        return cls(
            entries=tuple(ManifestEntry.from_json(e) for e in obj["entries"]),
            target_per_class=int(obj["target_per_class"]),
            out_w=int(obj["out_w"]),
            out_h=int(obj["out_h"]),
            seed=int(obj["seed"]),
            skipped=tuple((str(p), str(r)) for p, r in obj.get("skipped", [])),
        )


def _rescaled(image: RasterImage, out_w: int, out_h: int) -> np.ndarray:
    """Resize so the crop window is a 1/_SCALE_MARGIN sub-region of the
    tighter axis; returns float64 pixels."""
    scale = _SCALE_MARGIN * max(out_w / image.width, out_h / image.height)
    new_w = max(out_w, round(image.width * scale))
    new_h = max(out_h, round(image.height * scale))
    return resize_bilinear(image.pixels, new_w, new_h)


def _crop_to_raster(scaled: np.ndarray, ox: int, oy: int, out_w: int, out_h: int,
                    flip: bool) -> RasterImage:
    window = scaled[oy:oy + out_h, ox:ox + out_w]
    if flip:
        window = window[:, ::-1]
    return RasterImage(np.clip(np.rint(window), 0, 255).astype(np.uint8))


def _entry_rng(seed: int, label: ClassLabel, index: int) -> tuple[np.random.Generator, int]:
    stream = (int(label) << 32) | index
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key)), stream


def augment_dataset(source_dir: str | Path, out_dir: str | Path,
                    target_per_class: int = 600, out_w: int = 170,
                    out_h: int = 128, seed: int = 0) -> DatasetManifest:
    """Build a balanced dataset of ``target_per_class`` images per class.

    Every decodable original is rescaled and center-cropped to
    (out_w, out_h) and emitted as-is; classes below the target are topped up
    with randomly cropped / 50%-flipped variants, cycling round-robin over
    the originals in sorted-filename order. Each augmented entry draws from
    a counter-based generator keyed by (seed, class, index), so output is
    reproducible file-for-file. Classes holding more than the target keep
    only the first ``target_per_class`` files.

    Writes the mirrored class layout plus manifest.json under ``out_dir``
    and returns the manifest. Unreadable files are recorded in
    ``manifest.skipped`` and skipped.
    """
    source_root = Path(source_dir)
    out_root = Path(out_dir)
    entries: list[ManifestEntry] = []
    skipped: list[tuple[str, str]] = []

    for label in ClassLabel:
        class_dir = source_root / label.text
        files = sorted(
            p for p in class_dir.glob("*")
            if p.is_file() and p.suffix.lower() in _IMAGE_SUFFIXES
        ) if class_dir.is_dir() else []
        if not files:
            raise EmptyClassError(label.text)

        originals: list[tuple[str, RasterImage]] = []
        for path in files:
            try:
                originals.append((path.stem, load_image(path)))
            except DecodeError as exc:
                skipped.append((str(path.relative_to(source_root)), str(exc)))
        if not originals:
            raise EmptyClassError(f"{label.text} (no decodable images)")
        originals = originals[:target_per_class]

        class_out = out_root / label.text
        class_out.mkdir(parents=True, exist_ok=True)
        scaled_cache = [_rescaled(img, out_w, out_h) for _, img in originals]

        for stem, scaled in zip((s for s, _ in originals), scaled_cache):
            ox = (scaled.shape[1] - out_w) // 2
            oy = (scaled.shape[0] - out_h) // 2
            raster = _crop_to_raster(scaled, ox, oy, out_w, out_h, flip=False)
            rel = f"{label.text}/{stem}.png"
            save_png(raster, out_root / rel)
            entries.append(ManifestEntry(rel, label, Origin.ORIGINAL, 0))

        needed = target_per_class - len(originals)
        for index in range(needed):
            stem, _ = originals[index % len(originals)]
            scaled = scaled_cache[index % len(originals)]
            rng, stream = _entry_rng(seed, label, index)
            ox = int(rng.integers(0, scaled.shape[1] - out_w + 1))
            oy = int(rng.integers(0, scaled.shape[0] - out_h + 1))
            flip = bool(rng.random() < 0.5)
            raster = _crop_to_raster(scaled, ox, oy, out_w, out_h, flip)
            rel = f"{label.text}/{stem}_aug{index:04d}.png"
            save_png(raster, out_root / rel)
            entries.append(ManifestEntry(rel, label, Origin.AUGMENTED, stream))

    manifest = DatasetManifest(
        entries=tuple(entries),
        target_per_class=target_per_class,
        out_w=out_w,
        out_h=out_h,
        seed=seed,
        skipped=tuple(skipped),
    )
    (out_root / "manifest.json").write_text(
        json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n")
    return manifest


def load_manifest(path: str | Path) -> DatasetManifest:
    return DatasetManifest.from_json(json.loads(Path(path).read_text()))


def split_manifest(manifest: DatasetManifest, fractions: tuple[float, float, float],
                   seed: int) -> tuple[DatasetManifest, DatasetManifest, DatasetManifest]:
    """Stratified train/val/test partition of a manifest.

    Sizes per class are floor-allocated from the (train, val, test)
    fractions with the remainder going to train. The same seed always
    produces the same split.
    """
    if len(fractions) != 3:
        raise FractionError(f"expected 3 fractions, got {len(fractions)}")
    if any(f < 0 for f in fractions):
        raise FractionError(f"fractions must be non-negative: {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise FractionError(f"fractions sum to {sum(fractions)}, expected 1")

    rng = np.random.default_rng(seed)
    buckets: tuple[list[ManifestEntry], ...] = ([], [], [])
    for label in ClassLabel:
        class_entries = [e for e in manifest.entries if e.label == label]
        if not class_entries:
            continue
        order = rng.permutation(len(class_entries))
        n = len(class_entries)
        n_val = int(n * fractions[1])
        n_test = int(n * fractions[2])
        n_train = n - n_val - n_test
        for pos, idx in enumerate(order):
            bucket = 0 if pos < n_train else (1 if pos < n_train + n_val else 2)
            buckets[bucket].append(class_entries[idx])

    return tuple(
        replace(manifest, entries=tuple(bucket), skipped=())
        for bucket in buckets
    )
