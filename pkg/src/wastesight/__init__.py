"""Recyclable-waste detection in bird's-eye images: sliding-window tile
classification followed by Gaussian-mixture clustering of the labeled tile
centers, plus dataset-augmentation and evaluation tooling."""

from .augment import DatasetManifest, ManifestEntry, Origin, augment_dataset, split_manifest
from .classify import (
    DEFAULT_PALETTE,
    ClassScores,
    ExportedModelClassifier,
    MockClassifier,
    ModelMetadata,
    TileClassifier,
    adjust_tone,
    load_exported_model,
    mock_classify,
    prepare_input,
)
from .core import (
    ClassLabel,
    LabeledPoint,
    PipelineConfig,
    RasterImage,
    Rect,
    TilePlacement,
    label_from_text,
    validate_config,
)
from .mixture import (
    DetectedObject,
    GaussianComponent,
    GaussianMixture,
    SizeEllipse,
    choose_k,
    clusters_to_objects,
    em_fit,
    kmeans_seed,
    responsibilities,
)
from .pipeline import (
    ConfusionMatrix,
    DetectionReport,
    ReportRow,
    SceneGroundTruth,
    build_report,
    confusion_matrix,
    detect,
    match_and_score,
    render_overlay,
)
from .tiling import TileGrid, extract_tiles, plan_grid

__version__ = "0.1.0"

__all__ = [
    "ClassLabel", "RasterImage", "Rect", "TilePlacement", "LabeledPoint",
    "PipelineConfig", "label_from_text", "validate_config",
    "TileGrid", "plan_grid", "extract_tiles",
    "ClassScores", "ModelMetadata", "TileClassifier", "MockClassifier",
    "ExportedModelClassifier", "DEFAULT_PALETTE",
    "adjust_tone", "prepare_input", "mock_classify", "load_exported_model",
    "DatasetManifest", "ManifestEntry", "Origin", "augment_dataset", "split_manifest",
    "GaussianComponent", "GaussianMixture", "SizeEllipse", "DetectedObject",
    "choose_k", "kmeans_seed", "em_fit", "responsibilities", "clusters_to_objects",
    "SceneGroundTruth", "ReportRow", "DetectionReport", "ConfusionMatrix",
    "detect", "match_and_score", "build_report", "confusion_matrix", "render_overlay",
]
