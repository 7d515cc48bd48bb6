"""Tile classification: preprocessing, the classifier contract, and its
mock and exported-model implementations."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol

import numpy as np

from . import onnxlite
from .core import (
    LABEL_NAMES,
    NUM_CLASSES,
    ClassLabel,
    ClassOrderError,
    MetadataError,
    PaletteError,
    RasterImage,
)
from .imaging import resize_bilinear

#: Reference color per class for the mock classifier. Matches the overlay
#: colors for the five recyclable classes; trash maps to a dark gray kept
#: far from white so blank background tiles fall below a 0.5 confidence
#: threshold.
DEFAULT_PALETTE: dict[ClassLabel, tuple[int, int, int]] = {
    ClassLabel.CARDBOARD: (255, 0, 0),
    ClassLabel.GLASS: (0, 0, 255),
    ClassLabel.METAL: (255, 128, 0),
    ClassLabel.PAPER: (0, 160, 0),
    ClassLabel.PLASTIC: (128, 0, 128),
    ClassLabel.TRASH: (40, 40, 40),
}

_SCORE_TOL = 1e-6


@dataclass(frozen=True)
class ClassScores:
    """A 6-way probability vector indexed by class code."""

    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) != NUM_CLASSES:
            raise ValueError(f"expected {NUM_CLASSES} probabilities, got {len(self.probs)}")
        if any(p < -_SCORE_TOL or p > 1 + _SCORE_TOL for p in self.probs):
            raise ValueError(f"probabilities out of [0, 1]: {self.probs}")
        if abs(sum(self.probs) - 1.0) > _SCORE_TOL:
            raise ValueError(f"probabilities sum to {sum(self.probs)}, expected 1")

    def top(self) -> tuple[ClassLabel, float]:
        """The argmax label and its probability; ties go to the lower code."""
        code = max(range(NUM_CLASSES), key=lambda i: (self.probs[i], -i))
        return ClassLabel(code), self.probs[code]


class TileClassifier(Protocol):
    """Anything that turns a tile into class probabilities.

    Implementations must be pure functions of the tile pixels and safe to
    call concurrently.
    """

    def classify(self, tile: RasterImage) -> ClassScores: ...


@dataclass(frozen=True)
class ModelMetadata:
    """Sidecar description of an exported model: input geometry,
    normalization constants, and the class order of its logits."""

    input_w: int
    input_h: int
    channel_means: tuple[float, float, float]
    channel_stds: tuple[float, float, float]
    class_order: tuple[str, ...]
    format_version: int = 1

    def __post_init__(self):
        if self.input_w < 1 or self.input_h < 1:
            raise MetadataError(f"non-positive input size {self.input_w}x{self.input_h}")
        if len(self.channel_means) != 3 or len(self.channel_stds) != 3:
            raise MetadataError("channel_means and channel_stds must each have 3 entries")
        if any(s <= 0 for s in self.channel_stds):
            raise MetadataError(f"channel_stds must be strictly positive: {self.channel_stds}")
        if sorted(self.class_order) != sorted(LABEL_NAMES):
            raise ClassOrderError(
                f"class_order must be a permutation of {list(LABEL_NAMES)}, "
                f"got {list(self.class_order)}"
            )

    @classmethod
    def from_json(cls, obj: Mapping) -> "ModelMetadata":
        required = {"format_version", "input_w", "input_h",
                    "channel_means", "channel_stds", "class_order"}
        missing = required - set(obj)
        if missing:
            raise MetadataError(f"missing metadata keys: {sorted(missing)}")
        try:
            return cls(
                input_w=int(obj["input_w"]),
                input_h=int(obj["input_h"]),
                channel_means=tuple(float(v) for v in obj["channel_means"]),
                channel_stds=tuple(float(v) for v in obj["channel_stds"]),
                class_order=tuple(str(v) for v in obj["class_order"]),
                format_version=int(obj["format_version"]),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (MetadataError, ClassOrderError)):
                raise
            raise MetadataError(f"malformed metadata: {exc}") from exc

    def to_json(self) -> dict:
        return {
            "format_version": self.format_version,
            "input_w": self.input_w,
            "input_h": self.input_h,
            "channel_means": list(self.channel_means),
            "channel_stds": list(self.channel_stds),
            "class_order": list(self.class_order),
        }


def adjust_tone(image: RasterImage, brightness_factor: float,
                contrast_factor: float) -> RasterImage:
    """Rescale contrast about mid-gray (128), then scale brightness.

    Per sample v: v' = clamp(round(round((v - 128) * contrast + 128) *
    brightness), 0, 255). Rounding is half-to-even. Factors (1, 1) are the
    identity; a zero factor collapses the image to a constant.
    """
    if brightness_factor < 0 or contrast_factor < 0:
        raise ValueError("tone factors must be non-negative")
    v = image.pixels.astype(np.float64)
    contrasted = np.rint((v - 128.0) * contrast_factor + 128.0)
    out = np.clip(np.rint(contrasted * brightness_factor), 0.0, 255.0)
    return RasterImage(out.astype(np.uint8))


def prepare_input(tile: RasterImage, meta: ModelMetadata) -> np.ndarray:
    """Resize + normalize a tile for model input.

    Bilinear resize to (input_w, input_h), samples scaled to [0, 1], then
    per-channel (v - mean) / std. Returns (input_h, input_w, 3) float32,
    channel order RGB.
    """
    stds = np.asarray(meta.channel_stds, dtype=np.float64)
    if np.any(stds == 0):
        raise MetadataError("channel_stds contain zero")
    resized = resize_bilinear(tile.pixels, meta.input_w, meta.input_h) / 255.0
    means = np.asarray(meta.channel_means, dtype=np.float64)
    return ((resized - means) / stds).astype(np.float32)


def _softmax(values: np.ndarray) -> np.ndarray:
    shifted = np.asarray(values, dtype=np.float64)
    shifted = shifted - shifted.max()
    e = np.exp(shifted)
    return e / e.sum()


def _validate_palette(palette: Mapping[ClassLabel, tuple[int, int, int]]) -> np.ndarray:
    missing = [label.text for label in ClassLabel if label not in palette]
    if missing:
        raise PaletteError(f"palette missing classes: {missing}")
    colors = np.asarray([palette[label] for label in ClassLabel], dtype=np.float64)
    for i in range(NUM_CLASSES):
        for j in range(i + 1, NUM_CLASSES):
            if np.array_equal(colors[i], colors[j]):
                raise PaletteError(
                    f"palette colors for {ClassLabel(i).text} and "
                    f"{ClassLabel(j).text} are identical"
                )
    return colors


def mock_classify(tile: RasterImage,
                  palette: Mapping[ClassLabel, tuple[int, int, int]] = DEFAULT_PALETTE
                  ) -> ClassScores:
    """Deterministic stand-in classifier keyed on mean tile color.

    Scores are a softmax over negative Euclidean distances (in 0-255 RGB
    space, divided by 64) from the tile's mean color to each palette color.
    """
    colors = _validate_palette(palette)
    mean_rgb = tile.pixels.reshape(-1, 3).mean(axis=0, dtype=np.float64)
    distances = np.sqrt(((colors - mean_rgb) ** 2).sum(axis=1))
    probs = _softmax(-distances / 64.0)
    return ClassScores(tuple(float(p) for p in probs))


@dataclass(frozen=True)
class MockClassifier:
    """TileClassifier backed by mock_classify with a fixed palette."""

    palette: Mapping[ClassLabel, tuple[int, int, int]] = field(
        default_factory=lambda: dict(DEFAULT_PALETTE))

    def __post_init__(self):
        _validate_palette(self.palette)
        object.__setattr__(self, "palette", dict(self.palette))

    def classify(self, tile: RasterImage) -> ClassScores:
        return mock_classify(tile, self.palette)


class ExportedModelClassifier:
    """Runs an exported network on prepared tiles.

    Scores are the softmax of the network's 6 logits, reindexed from the
    metadata's class order to canonical code order. Stateless after load;
    safe to call from multiple threads.
    """

    def __init__(self, model: onnxlite.OnnxModel, meta: ModelMetadata):
        self._model = model
        self.meta = meta
        # canonical code -> position of that class in the model's output
        self._perm = tuple(meta.class_order.index(name) for name in LABEL_NAMES)

    def classify(self, tile: RasterImage) -> ClassScores:
        prepared = prepare_input(tile, self.meta)
        batch = prepared.transpose(2, 0, 1)[None, ...]
        logits = np.asarray(onnxlite.run(self._model, batch), dtype=np.float64).reshape(-1)
        if logits.size != NUM_CLASSES:
            raise ClassOrderError(f"model produced {logits.size} logits, expected {NUM_CLASSES}")
        probs = _softmax(logits)
        return ClassScores(tuple(float(probs[i]) for i in self._perm))


def load_metadata(meta_path: str | Path) -> ModelMetadata:
    """Read and validate a metadata JSON file."""
    try:
        obj = json.loads(Path(meta_path).read_text())
    except OSError as exc:
        raise MetadataError(f"{meta_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MetadataError(f"{meta_path}: invalid JSON ({exc})") from exc
    if not isinstance(obj, dict):
        raise MetadataError(f"{meta_path}: expected a JSON object")
    return ModelMetadata.from_json(obj)


def load_exported_model(model_path: str | Path,
                        meta_path: str | Path) -> ExportedModelClassifier:
    """Load a trained model and its metadata into a TileClassifier."""
    meta = load_metadata(meta_path)
    model = onnxlite.load_model(model_path)
    return ExportedModelClassifier(model, meta)
