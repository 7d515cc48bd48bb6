"""Head training over cached backbone features, with a sampled accuracy/loss
curve."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import torch
from torch import nn

from .config import TrainRunConfig
from .data import ManifestDataset, load_batch
from .model import build_head


@dataclass(frozen=True)
class LogRow:
    iteration: int
    train_accuracy: float
    val_accuracy: float
    train_loss: float


@dataclass(frozen=True)
class TrainLog:
    rows: tuple[LogRow, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "train_accuracy", "val_accuracy", "train_loss"])
        for row in self.rows:
            writer.writerow([row.iteration, f"{row.train_accuracy:.6f}",
                             f"{row.val_accuracy:.6f}", f"{row.train_loss:.6f}"])
        return buf.getvalue()


def extract_features(backbone: nn.Module, dataset: ManifestDataset,
                     batch_size: int = 32) -> tuple[torch.Tensor, torch.Tensor]:
    """Run the frozen backbone once over a dataset; training then happens
    on the cached pooled features."""
    features = []
    targets = []
    with torch.no_grad():
        for start in range(0, len(dataset), batch_size):
            chunk = dataset.samples[start:start + batch_size]
            batch, target = load_batch(chunk, dataset.image_w, dataset.image_h)
            features.append(backbone(batch))
            targets.append(target)
    return torch.cat(features), torch.cat(targets)


def _accuracy(head: nn.Linear, features: torch.Tensor, targets: torch.Tensor) -> float:
    if len(targets) == 0:
        return 0.0
    with torch.no_grad():
        predicted = head(features).argmax(dim=1)
    return float((predicted == targets).float().mean())


def train_head(backbone: nn.Module, splits: tuple[ManifestDataset, ManifestDataset,
                                                  ManifestDataset],
               cfg: TrainRunConfig) -> tuple[nn.Linear, TrainLog, float]:
    """Train the 6-way linear head with plain SGD and cross-entropy.

    The backbone stays frozen in eval mode; only the head receives
    gradients. Pooled features share a large common component (ReLU nets
    rectify everything positive), so optimization runs on train-mean-
    centered features and the centering is folded into the returned
    head's bias: W(f - mu) + b == W f + (b - W mu). The exported artifact
    therefore still maps raw backbone features through one linear layer.

    Metrics are sampled at up to ``cfg.eval_points`` evenly spaced
    optimizer steps (the logged loss is the full-train-set loss at that
    step). Returns (trained head, log, test accuracy). Deterministic in
    cfg.seed up to backend nondeterminism.
    """
    train_set, val_set, test_set = splits
    raw_train_x, train_y = extract_features(backbone, train_set, cfg.batch_size)
    raw_val_x, val_y = extract_features(backbone, val_set, cfg.batch_size)
    raw_test_x, test_y = extract_features(backbone, test_set, cfg.batch_size)

    mu = raw_train_x.mean(dim=0)
    train_x, val_x = raw_train_x - mu, raw_val_x - mu

    head = build_head()
    optimizer = torch.optim.SGD(head.parameters(), lr=cfg.learning_rate)
    loss_fn = nn.CrossEntropyLoss()
    generator = torch.Generator().manual_seed(cfg.seed)

    n = len(train_y)
    batches_per_epoch = max(1, (n + cfg.batch_size - 1) // cfg.batch_size)
    total_steps = cfg.epochs * batches_per_epoch
    log_every = max(1, total_steps // cfg.eval_points)

    def snapshot(step: int) -> LogRow:
        with torch.no_grad():
            full_loss = float(loss_fn(head(train_x), train_y))
        return LogRow(
            iteration=step,
            train_accuracy=_accuracy(head, train_x, train_y),
            val_accuracy=_accuracy(head, val_x, val_y),
            train_loss=full_loss,
        )

    rows = [snapshot(0)]
    step = 0
    for _epoch in range(cfg.epochs):
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(head(train_x[idx]), train_y[idx])
            loss.backward()
            optimizer.step()
            step += 1
            if step % log_every == 0 or step == total_steps:
                rows.append(snapshot(step))

    with torch.no_grad():
        head.bias -= head.weight @ mu  # fold centering; head now takes raw features
    test_accuracy = _accuracy(head, raw_test_x, test_y)
    return head, TrainLog(tuple(rows)), test_accuracy
