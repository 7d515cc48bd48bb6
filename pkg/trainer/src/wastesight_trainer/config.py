"""Training-run configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TrainRunConfig:
    """Hyperparameters and output paths for one head-training run."""

    learning_rate: float = 1e-4
    epochs: int = 30
    batch_size: int = 32
    split_fractions: tuple[float, float, float] = (0.7, 0.15, 0.15)
    seed: int = 0
    eval_points: int = 140
    out_model: str = "model.onnx"
    out_meta: str = "meta.json"
    out_curve: str = "traincurve.csv"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
