"""End-to-end detection (tile, classify, filter, cluster) and the metrics
used to score it: per-class detection reports and confusion matrices."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .classify import ClassScores, TileClassifier, adjust_tone
from .core import (
    ClassLabel,
    LabeledPoint,
    NUM_CLASSES,
    PipelineConfig,
    RasterImage,
    Rect,
    validate_config,
)
from .imaging import draw_disk, draw_ellipse_outline
from .mixture import DetectedObject, choose_k, clusters_to_objects, em_fit
from .tiling import extract_tiles, plan_grid

#: Overlay stroke colors. Trash is deliberately absent: it is filtered from
#: every rendering.
CLASS_COLORS: dict[ClassLabel, tuple[int, int, int]] = {
    ClassLabel.CARDBOARD: (255, 0, 0),
    ClassLabel.GLASS: (0, 0, 255),
    ClassLabel.METAL: (255, 128, 0),
    ClassLabel.PAPER: (0, 160, 0),
    ClassLabel.PLASTIC: (128, 0, 128),
}

#: Labels that participate in detection scoring (everything but trash).
SCORED_LABELS: tuple[ClassLabel, ...] = tuple(
    label for label in ClassLabel if label is not ClassLabel.TRASH)


@dataclass(frozen=True)
class SceneGroundTruth:
    """Hand-labeled objects for one scene image."""

    image_id: str
    objects: tuple[tuple[ClassLabel, Rect], ...]


@dataclass(frozen=True)
class ReportRow:
    correctly_identified: int
    identified: int
    total: int


@dataclass(frozen=True)
class DetectionReport:
    """Per-class identification counts plus the aggregate detection rate."""

    per_label: tuple[tuple[ClassLabel, ReportRow], ...]
    detection_rate: float

    def row(self, label: ClassLabel) -> ReportRow:
        for row_label, row in self.per_label:
            if row_label == label:
                return row
        raise KeyError(label.text)


def build_report(rows: Mapping[ClassLabel, ReportRow]) -> DetectionReport:
    """Assemble a report from per-class rows.

    The detection rate is the sum of identified objects over the sum of
    ground-truth objects across classes (0 when there is no ground truth);
    false positives count toward the numerator, so the rate can exceed 1.
    """
    ordered = []
    for label in SCORED_LABELS:
        row = rows.get(label, ReportRow(0, 0, 0))
        if row.correctly_identified > row.identified:
            raise ValueError(f"{label.text}: correctly_identified exceeds identified")
        if min(row.correctly_identified, row.identified, row.total) < 0:
            raise ValueError(f"{label.text}: negative count")
        ordered.append((label, row))
    total = sum(row.total for _, row in ordered)
    identified = sum(row.identified for _, row in ordered)
    rate = identified / total if total > 0 else 0.0
    return DetectionReport(per_label=tuple(ordered), detection_rate=rate)


def detect(image: RasterImage, classifier: TileClassifier, cfg: PipelineConfig,
           min_support: int = 2, threads: int = 1,
           ) -> tuple[list[DetectedObject], list[LabeledPoint]]:
    """Run the full pipeline on one scene.

    Tone adjustment, sliding-window tiling, per-tile classification,
    background filtering at cfg.background_threshold, then mixture
    clustering of the surviving tile centers. Returns the detected objects
    and the raw labeled points for diagnostics; an empty scene yields two
    empty lists.
    """
    validate_config(cfg, image.width, image.height)
    toned = adjust_tone(image, cfg.brightness_factor, cfg.contrast_factor)
    grid = extract_tiles(
        toned, plan_grid(image.width, image.height,
                         cfg.window_w, cfg.window_h, cfg.overlap))

    def classify(placement) -> ClassScores:
        return classifier.classify(placement.tile)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            all_scores = list(pool.map(classify, grid.placements))
    else:
        all_scores = [classify(p) for p in grid.placements]

    points: list[LabeledPoint] = []
    for placement, scores in zip(grid.placements, all_scores):
        label, confidence = scores.top()
        if confidence < cfg.background_threshold:
            continue
        points.append(LabeledPoint(placement.center, label, confidence))
    if not points:
        return [], []

    k = choose_k(image.width, image.height, cfg.clusters_per_megapixel, len(points))
    positions = [p.position for p in points]
    fitted = em_fit(positions, k, max_iters=cfg.em_max_iters, tol=cfg.em_tol,
                    seed=cfg.rng_seed)
    return clusters_to_objects(fitted, points, min_support=min_support), points


def match_and_score(objects: Sequence[DetectedObject],
                    truth: SceneGroundTruth) -> DetectionReport:
    """Score detections against ground truth.

    A detection is correct when its center lies inside a not-yet-matched
    truth box of the same label; matching is greedy in descending support
    order and each truth box matches at most once. Trash is excluded from
    both sides.
    """
    truth_boxes = [(label, rect) for label, rect in truth.objects
                   if label is not ClassLabel.TRASH]
    detections = [obj for obj in objects if obj.label is not ClassLabel.TRASH]
    detections.sort(key=lambda obj: -obj.support)

    matched = [False] * len(truth_boxes)
    correct = {label: 0 for label in SCORED_LABELS}
    for obj in detections:
        for idx, (label, rect) in enumerate(truth_boxes):
            if matched[idx] or label != obj.label:
                continue
            if rect.contains(obj.center[0], obj.center[1]):
                matched[idx] = True
                correct[obj.label] += 1
                break

    rows = {}
    for label in SCORED_LABELS:
        rows[label] = ReportRow(
            correctly_identified=correct[label],
            identified=sum(1 for obj in detections if obj.label == label),
            total=sum(1 for t_label, _ in truth_boxes if t_label == label),
        )
    return build_report(rows)


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Row = true label, column = predicted label."""

    counts: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.shape != (NUM_CLASSES, NUM_CLASSES):
            raise ValueError(f"expected 6x6 counts, got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "counts", arr)

    @property
    def row_normalized(self) -> np.ndarray:
        sums = self.counts.sum(axis=1, keepdims=True)
        safe = np.where(sums > 0, sums, 1)
        return self.counts / safe

    def accuracy(self) -> float:
        total = int(self.counts.sum())
        return float(np.trace(self.counts) / total) if total else 0.0

    def diagonal_mean(self) -> float:
        """Mean of the per-class true-positive rates over non-empty rows."""
        rows = self.counts.sum(axis=1) > 0
        if not rows.any():
            return 0.0
        return float(self.row_normalized[np.diag_indices(NUM_CLASSES)][rows].mean())


def confusion_matrix(pairs: Iterable[tuple[ClassLabel, ClassLabel]]) -> ConfusionMatrix:
    """Count (true, predicted) pairs into a 6x6 matrix."""
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for true, predicted in pairs:
        counts[int(true), int(predicted)] += 1
    return ConfusionMatrix(counts)


def render_overlay(image: RasterImage, objects: Sequence[DetectedObject],
                   points: Sequence[LabeledPoint]) -> RasterImage:
    """Draw labeled points (3-px dots) and object ellipses (2-px outlines)
    in their class colors. Trash is omitted; geometry outside the image is
    clipped. The output has the input's dimensions."""
    canvas = image.pixels.copy()
    for point in points:
        color = CLASS_COLORS.get(point.label)
        if color is None:
            continue
        draw_disk(canvas, point.position[0], point.position[1], 1.5, color)
    for obj in objects:
        color = CLASS_COLORS.get(obj.label)
        if color is None:
            continue
        draw_ellipse_outline(canvas, obj.center[0], obj.center[1],
                             obj.ellipse.a, obj.ellipse.b, obj.ellipse.theta,
                             color, thickness=2)
    return RasterImage(canvas)
