"""JSON and CSV wire formats for detections, ground truth, and reports."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Sequence

from .core import (
    ClassLabel,
    LABEL_NAMES,
    LabeledPoint,
    Rect,
    SchemaError,
    UnknownLabel,
    label_from_text,
)
from .mixture import DetectedObject, SizeEllipse
from .pipeline import ConfusionMatrix, DetectionReport, SceneGroundTruth


def dumps_canonical(obj) -> str:
    """Stable JSON rendering: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_json(path: str | Path) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError(f"{path}: expected a JSON object")
    return obj


# --------------------------------------------------------------------------
# Detections
# --------------------------------------------------------------------------

def detection_to_json(image_id: str, objects: Sequence[DetectedObject],
                      points: Sequence[LabeledPoint]) -> dict:
    return {
        "image_id": image_id,
        "objects": [
            {
                "label": obj.label.text,
                "center": [float(obj.center[0]), float(obj.center[1])],
                "ellipse": {
                    "a": float(obj.ellipse.a),
                    "b": float(obj.ellipse.b),
                    "theta": float(obj.ellipse.theta),
                },
                "support": int(obj.support),
                "mean_confidence": float(obj.mean_confidence),
            }
            for obj in objects
        ],
        "points": [p.to_json() for p in points],
    }


def detection_from_json(obj: dict) -> tuple[str, list[DetectedObject], list[LabeledPoint]]:
    try:
        image_id = str(obj["image_id"])
        objects = [
            DetectedObject(
                label=label_from_text(entry["label"]),
                center=(float(entry["center"][0]), float(entry["center"][1])),
                ellipse=SizeEllipse(
                    a=float(entry["ellipse"]["a"]),
                    b=float(entry["ellipse"]["b"]),
                    theta=float(entry["ellipse"]["theta"]),
                ),
                support=int(entry["support"]),
                mean_confidence=float(entry["mean_confidence"]),
            )
            for entry in obj["objects"]
        ]
        points = [LabeledPoint.from_json(entry) for entry in obj["points"]]
    except (KeyError, IndexError, TypeError, ValueError, UnknownLabel) as exc:
        raise SchemaError(f"malformed detection document: {exc!r}") from exc
    return image_id, objects, points


def load_detections(path: str | Path) -> tuple[str, list[DetectedObject], list[LabeledPoint]]:
    return detection_from_json(_load_json(path))


# --------------------------------------------------------------------------
# Ground truth
# --------------------------------------------------------------------------

def truth_to_json(truth: SceneGroundTruth) -> dict:
    return {
        "image_id": truth.image_id,
        "objects": [
            {"label": label.text, "box": rect.to_json()}
            for label, rect in truth.objects
        ],
    }


def truth_from_json(obj: dict) -> SceneGroundTruth:
    try:
        return SceneGroundTruth(
            image_id=str(obj["image_id"]),
            objects=tuple(
                (label_from_text(entry["label"]), Rect.from_json(entry["box"]))
                for entry in obj["objects"]
            ),
        )
    except (KeyError, TypeError, ValueError, UnknownLabel) as exc:
        raise SchemaError(f"malformed ground-truth document: {exc!r}") from exc


def load_truth(path: str | Path) -> SceneGroundTruth:
    return truth_from_json(_load_json(path))


# --------------------------------------------------------------------------
# Reports and confusion matrices
# --------------------------------------------------------------------------

def report_to_json(report: DetectionReport) -> dict:
    return {
        "per_label": [
            {
                "label": label.text,
                "correctly_identified": row.correctly_identified,
                "identified": row.identified,
                "total": row.total,
            }
            for label, row in report.per_label
        ],
        "detection_rate": report.detection_rate,
    }


def format_report_table(report: DetectionReport) -> str:
    """Human-readable per-class table plus the aggregate rate."""
    lines = [f"{'Label':<12}{'Correctly Identified':>22}{'Identified':>12}{'Total':>8}"]
    for label, row in report.per_label:
        lines.append(f"{label.text:<12}{row.correctly_identified:>22}"
                     f"{row.identified:>12}{row.total:>8}")
    lines.append(f"Detection rate: {report.detection_rate * 100:.1f}%")
    return "\n".join(lines)


def confusion_to_json(matrix: ConfusionMatrix) -> dict:
    return {
        "labels": list(LABEL_NAMES),
        "counts": matrix.counts.tolist(),
        "row_normalized": matrix.row_normalized.tolist(),
    }


def confusion_to_csv(matrix: ConfusionMatrix) -> str:
    """Six header columns (class names), then six count rows in class order."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LABEL_NAMES)
    for row in matrix.counts.tolist():
        writer.writerow(row)
    return buf.getvalue()
