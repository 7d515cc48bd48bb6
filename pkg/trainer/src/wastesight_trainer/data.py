"""Dataset access: the augmenter's manifest.json layout, stratified
splitting, and image-to-tensor loading."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

#: Fixed class order shared with the detection package: alphabetical,
#: codes 0..5. The exported metadata restates it explicitly.
CLASS_NAMES = ("cardboard", "glass", "metal", "paper", "plastic", "trash")

#: Input normalization of the pretrained backbone (recorded verbatim into
#: the exported metadata so consumers never hard-code it).
CHANNEL_MEANS = (0.485, 0.456, 0.406)
CHANNEL_STDS = (0.229, 0.224, 0.225)


class DataError(RuntimeError):
    """A manifest entry could not be read or decoded."""


@dataclass(frozen=True)
class Sample:
    path: Path
    class_code: int


@dataclass(frozen=True)
class ManifestDataset:
    samples: tuple[Sample, ...]
    image_w: int
    image_h: int

    def __len__(self) -> int:
        return len(self.samples)


def load_manifest_dataset(manifest_path: str | Path,
                          data_root: str | Path | None = None) -> ManifestDataset:
    """Read a dataset manifest (the augmenter's manifest.json format)."""
    manifest_path = Path(manifest_path)
    root = Path(data_root) if data_root is not None else manifest_path.parent
    try:
        doc = json.loads(manifest_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{manifest_path}: {exc}") from exc
    try:
        samples = tuple(
            Sample(path=root / entry["path"],
                   class_code=CLASS_NAMES.index(entry["label"]))
            for entry in doc["entries"]
        )
        image_w, image_h = int(doc["out_w"]), int(doc["out_h"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{manifest_path}: malformed manifest ({exc})") from exc
    if not samples:
        raise DataError(f"{manifest_path}: manifest has no entries")
    return ManifestDataset(samples=samples, image_w=image_w, image_h=image_h)


def stratified_split(dataset: ManifestDataset,
                     fractions: tuple[float, float, float],
                     seed: int) -> tuple[ManifestDataset, ManifestDataset, ManifestDataset]:
    """Per-class shuffle and floor-allocated partition, remainder to train."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) \
            or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"bad split fractions: {fractions}")
    rng = np.random.default_rng(seed)
    parts: tuple[list[Sample], ...] = ([], [], [])
    for code in range(len(CLASS_NAMES)):
        class_samples = [s for s in dataset.samples if s.class_code == code]
        if not class_samples:
            continue
        order = rng.permutation(len(class_samples))
        n = len(class_samples)
        n_val = int(n * fractions[1])
        n_test = int(n * fractions[2])
        n_train = n - n_val - n_test
        for pos, idx in enumerate(order):
            bucket = 0 if pos < n_train else (1 if pos < n_train + n_val else 2)
            parts[bucket].append(class_samples[idx])
    return tuple(
        ManifestDataset(samples=tuple(part), image_w=dataset.image_w,
                        image_h=dataset.image_h)
        for part in parts
    )


def load_batch(samples, image_w: int, image_h: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Decode and normalize samples into a (n, 3, h, w) float tensor plus
    the class-code target vector."""
    means = np.asarray(CHANNEL_MEANS, dtype=np.float32)
    stds = np.asarray(CHANNEL_STDS, dtype=np.float32)
    arrays = []
    targets = []
    for sample in samples:
        try:
            with Image.open(sample.path) as im:
                rgb = im.convert("RGB")
                if rgb.size != (image_w, image_h):
                    rgb = rgb.resize((image_w, image_h), Image.BILINEAR)
                arr = np.asarray(rgb, dtype=np.float32) / 255.0
        except (OSError, UnidentifiedImageError) as exc:
            raise DataError(f"{sample.path}: {exc}") from exc
        arrays.append(((arr - means) / stds).transpose(2, 0, 1))
        targets.append(sample.class_code)
    batch = torch.from_numpy(np.stack(arrays))
    return batch, torch.tensor(targets, dtype=torch.long)
