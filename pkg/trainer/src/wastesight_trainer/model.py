"""Model assembly: a frozen residual backbone feeding a trainable 6-way
linear head."""

from __future__ import annotations

import hashlib
from pathlib import Path

import torch
from torch import nn
from torchvision.models import resnet50

from .data import CLASS_NAMES

FEATURE_DIM = 2048


def build_backbone(weights_path: str | Path | None = None, seed: int = 0) -> nn.Module:
    """A resnet-50 feature extractor: fc replaced with identity, eval mode,
    gradients off.

    Pretrained weights are loaded from ``weights_path`` (a torch state
    dict) when given; otherwise the backbone is seeded-randomly initialized,
    which keeps the pipeline runnable where pretrained weights cannot be
    fetched.
    """
    torch.manual_seed(seed)
    net = resnet50(weights=None)
    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        net.load_state_dict(state, strict=False)
    net.fc = nn.Identity()
    net.eval()
    for param in net.parameters():
        param.requires_grad_(False)
    return net


def build_head() -> nn.Linear:
    """Zero-initialized 6-way linear probe: logits start uniform, so the
    first gradient step already builds a prototype classifier instead of
    unlearning random confident outputs."""
    head = nn.Linear(FEATURE_DIM, len(CLASS_NAMES))
    with torch.no_grad():
        head.weight.zero_()
        head.bias.zero_()
    return head


def assemble_classifier(backbone: nn.Module, head: nn.Linear) -> nn.Module:
    """Recombine backbone and trained head into one exportable network."""
    full = resnet50(weights=None)
    state = {k: v for k, v in backbone.state_dict().items() if not k.startswith("fc.")}
    missing = full.load_state_dict(state, strict=False)
    assert not missing.unexpected_keys
    full.fc = nn.Linear(FEATURE_DIM, len(CLASS_NAMES))
    full.fc.load_state_dict(head.state_dict())
    full.eval()
    return full


def state_fingerprint(module: nn.Module) -> str:
    """SHA-256 over every parameter and buffer, in state-dict order.
    Bitwise: any training side effect on the backbone changes it."""
    digest = hashlib.sha256()
    for name, tensor in module.state_dict().items():
        digest.update(name.encode())
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()
