"""Transfer-learning trainer: frozen residual backbone + trainable 6-way
head, exported as ONNX + metadata for the detection package."""

from .config import TrainRunConfig
from .data import (
    CHANNEL_MEANS,
    CHANNEL_STDS,
    CLASS_NAMES,
    DataError,
    ManifestDataset,
    load_manifest_dataset,
    stratified_split,
)
from .model import assemble_classifier, build_backbone, build_head, state_fingerprint
from .onnx_export import ExportError, export_model, export_onnx_bytes
from .train import LogRow, TrainLog, extract_features, train_head

__version__ = "0.1.0"
