"""Shared domain types: class taxonomy, images, rectangles, pipeline config."""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields
from typing import Mapping

import numpy as np


# --------------------------------------------------------------------------
# Errors
# --------------------------------------------------------------------------

class UnknownLabel(ValueError):
    """A label name that is not one of the six waste classes."""


class ConfigError(ValueError):
    """A pipeline configuration field violates its bounds.

    ``field_name`` names the first violated field.
    """

    def __init__(self, field_name: str, detail: str = ""):
        self.field_name = field_name
        super().__init__(f"{field_name}: {detail}" if detail else field_name)


class DimensionMismatch(ValueError):
    """Image dimensions do not match what the operation was planned for."""


class MetadataError(ValueError):
    """Model metadata is missing, malformed, or violates its invariants."""


class PaletteError(ValueError):
    """Mock-classifier palette is incomplete or contains duplicate colors."""


class ModelLoadError(RuntimeError):
    """A model file could not be read or is not a supported network."""


class ClassOrderError(ValueError):
    """Exported class order is not a permutation of the six class names."""


class EmptyClassError(ValueError):
    """A class directory is missing or contains no images."""


class DecodeError(ValueError):
    """An image file could not be decoded."""


class FractionError(ValueError):
    """Split fractions are negative or do not sum to one."""


class DegenerateInput(ValueError):
    """Fewer distinct points than requested clusters."""


class SchemaError(ValueError):
    """A JSON document does not match the expected schema."""


# --------------------------------------------------------------------------
# Class taxonomy
# --------------------------------------------------------------------------

class ClassLabel(enum.IntEnum):
    """The six waste classes, coded alphabetically."""

    CARDBOARD = 0
    GLASS = 1
    METAL = 2
    PAPER = 3
    PLASTIC = 4
    TRASH = 5

    @property
    def text(self) -> str:
        """Lowercase name used in all serialized forms."""
        return self.name.lower()


LABEL_NAMES: tuple[str, ...] = tuple(label.text for label in ClassLabel)
NUM_CLASSES = len(ClassLabel)


def label_from_text(name: str) -> ClassLabel:
    """Resolve a class name (case-insensitive) to its label.

    Raises UnknownLabel for anything that is not one of the six names.
    """
    if isinstance(name, str):
        try:
            return ClassLabel[name.upper()]
        except KeyError:
            pass
    raise UnknownLabel(f"not a waste class: {name!r}")


# --------------------------------------------------------------------------
# Images and geometry
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RasterImage:
    """An RGB image: (height, width, 3) uint8 pixel grid, immutable."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (h, w, 3) pixels, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1x1")
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {arr.dtype}")
        arr = np.ascontiguousarray(arr).copy()
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def channels(self) -> int:
        return 3

    @classmethod
    def filled(cls, width: int, height: int, color: tuple[int, int, int]) -> "RasterImage":
        """A uniform image of the given color."""
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:] = np.asarray(color, dtype=np.uint8)
        return cls(arr)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return (self.pixels.shape == other.pixels.shape
                and np.array_equal(self.pixels, other.pixels))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: top-left offset plus extents, in pixels."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative offset in {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"non-positive extent in {self}")

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px < self.x + self.w and self.y <= py < self.y + self.h

    def to_json(self) -> dict:
        return {"x": self.x, "y": self.y, "w": self.w, "h": self.h}

    @classmethod
    def from_json(cls, obj: Mapping) -> "Rect":
        return cls(int(obj["x"]), int(obj["y"]), int(obj["w"]), int(obj["h"]))


@dataclass(frozen=True)
class TilePlacement:
    """A window cut from a source image plus where it came from.

    ``center`` is the region center in source-frame pixel coordinates
    (origin top-left, y down).
    """

    region: Rect
    center: tuple[float, float]
    tile: RasterImage | None = None

    @classmethod
    def for_region(cls, region: Rect, tile: RasterImage | None = None) -> "TilePlacement":
        center = (region.x + region.w / 2.0, region.y + region.h / 2.0)
        return cls(region=region, center=center, tile=tile)


@dataclass(frozen=True)
class LabeledPoint:
    """A classified tile center: position, class label, confidence."""

    position: tuple[float, float]
    label: ClassLabel
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")

    def to_json(self) -> dict:
        return {
            "pos": [float(self.position[0]), float(self.position[1])],
            "label": self.label.text,
            "confidence": float(self.confidence),
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "LabeledPoint":
        pos = obj["pos"]
        return cls(
            position=(float(pos[0]), float(pos[1])),
            label=label_from_text(obj["label"]),
            confidence=float(obj["confidence"]),
        )


# --------------------------------------------------------------------------
# Pipeline configuration
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    """Tunable knobs for the detection pipeline.

    ``overlap`` is the fraction of window extent shared by consecutive
    windows; ``clusters_per_megapixel`` sets the cluster-count density
    used to pick the number of mixture components for a scene.
    """

    window_w: int = 128
    window_h: int = 128
    overlap: float = 0.5
    background_threshold: float = 0.5
    clusters_per_megapixel: float = 30.0
    em_max_iters: int = 200
    em_tol: float = 1e-6
    rng_seed: int = 0
    brightness_factor: float = 1.0
    contrast_factor: float = 1.0


def validate_config(cfg: PipelineConfig, img_w: int, img_h: int) -> PipelineConfig:
    """Check every config invariant against the target image dimensions.

    Returns ``cfg`` unchanged on success; raises ConfigError naming the
    first violated field (in declaration order).
    """
    if not 1 <= cfg.window_w <= img_w:
        raise ConfigError("window_w", f"{cfg.window_w} not in [1, {img_w}]")
    if not 1 <= cfg.window_h <= img_h:
        raise ConfigError("window_h", f"{cfg.window_h} not in [1, {img_h}]")
    if not 0.0 <= cfg.overlap < 1.0:
        raise ConfigError("overlap", f"{cfg.overlap} not in [0, 1)")
    if not 0.0 <= cfg.background_threshold <= 1.0:
        raise ConfigError("background_threshold", f"{cfg.background_threshold} not in [0, 1]")
    if not cfg.clusters_per_megapixel > 0:
        raise ConfigError("clusters_per_megapixel", "must be positive")
    if not (isinstance(cfg.em_max_iters, int) and cfg.em_max_iters >= 1):
        raise ConfigError("em_max_iters", "must be a positive integer")
    if not cfg.em_tol > 0:
        raise ConfigError("em_tol", "must be positive")
    if not isinstance(cfg.rng_seed, int):
        raise ConfigError("rng_seed", "must be an integer")
    if not cfg.brightness_factor > 0:
        raise ConfigError("brightness_factor", "must be positive")
    if not cfg.contrast_factor > 0:
        raise ConfigError("contrast_factor", "must be positive")
    return cfg


def config_field_names() -> tuple[str, ...]:
    """Config field names in declaration (= validation) order."""
    return tuple(f.name for f in fields(PipelineConfig))
