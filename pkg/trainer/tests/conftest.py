import json
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from wastesight_trainer import (
    TrainRunConfig,
    build_backbone,
    load_manifest_dataset,
    stratified_split,
    train_head,
)

CLASS_COLORS = {
    "cardboard": (200, 30, 30),
    "glass": (30, 30, 220),
    "metal": (220, 140, 30),
    "paper": (230, 230, 230),
    "plastic": (140, 30, 140),
    "trash": (60, 60, 60),
}

# hyperparameters for the 10-image/class smoke runs; the tiny random-init
# backbone needs a larger step than the full-scale default
SMOKE = dict(learning_rate=1e-2, epochs=1, batch_size=8, seed=0)


def write_dataset(root: Path, per_class: int = 10, width: int = 96,
                  height: int = 72, seed: int = 0) -> Path:
    """Synthetic class-colored dataset in the augmenter's output layout."""
    rng = np.random.default_rng(seed)
    entries = []
    for name, color in CLASS_COLORS.items():
        (root / name).mkdir(parents=True, exist_ok=True)
        for i in range(per_class):
            arr = np.empty((height, width, 3), dtype=np.uint8)
            arr[:] = color
            noise = rng.integers(-25, 26, size=arr.shape)
            arr = np.clip(arr.astype(np.int64) + noise, 0, 255).astype(np.uint8)
            rel = f"{name}/{name}{i:03d}.png"
            Image.fromarray(arr).save(root / rel)
            entries.append({"path": rel, "label": name, "origin": "original",
                            "seed_used": 0})
    manifest = {"target_per_class": per_class, "out_w": width, "out_h": height,
                "seed": seed, "entries": entries, "skipped": []}
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return path


@pytest.fixture(scope="session")
def dataset_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("dataset")
    write_dataset(root)
    return root


@pytest.fixture(scope="session")
def backbone():
    return build_backbone(None, seed=0)


@pytest.fixture(scope="session")
def smoke_run(dataset_dir, backbone):
    """One 1-epoch training run on the 10-image/class set, shared by tests."""
    dataset = load_manifest_dataset(dataset_dir / "manifest.json")
    splits = stratified_split(dataset, (0.7, 0.15, 0.15), seed=0)
    cfg = TrainRunConfig(**SMOKE)
    head, log, test_accuracy = train_head(backbone, splits, cfg)
    return dict(dataset=dataset, splits=splits, cfg=cfg, head=head, log=log,
                test_accuracy=test_accuracy)
