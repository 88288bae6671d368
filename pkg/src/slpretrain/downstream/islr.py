"""Isolated recognition: encoder, temporal mean, one affine layer."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..data import pose_tensor
from ..model import SignPoseEncoder
from ..objectives import masked_mean
from ..pose import PoseSequence, sample_frames

ISLR_FRAMES = 32
LABEL_SMOOTHING = 0.2


class ISLRModel(nn.Module):
    def __init__(self, encoder: SignPoseEncoder, num_classes: int):
        super().__init__()
        self.encoder = encoder
        self.num_classes = num_classes
        self.head = nn.Linear(encoder.out_dim, num_classes)

    def forward(self, x: torch.Tensor, pad: torch.Tensor | None = None) -> torch.Tensor:
        enc = self.encoder(x, pad)
        return self.head(masked_mean(enc.fused, pad))


def islr_loss(logits: torch.Tensor, labels: torch.Tensor, smoothing: float = LABEL_SMOOTHING):
    if logits.shape[-1] <= int(labels.max()):
        raise ValueError(f"label {int(labels.max())} outside {logits.shape[-1]} classes")
    return F.cross_entropy(logits, labels, label_smoothing=smoothing)


def prepare_islr(poses, n: int = ISLR_FRAMES, mode: str = "center", rng: np.random.Generator | None = None,
                 dtype=torch.float32) -> torch.Tensor:
    """Resample every pose to n frames and stack into [B, n, K, 3]."""
    x, _ = pose_tensor([sample_frames(p, n, mode, rng) for p in poses], dtype)
    return x


@torch.no_grad()
def islr_logits(pose: PoseSequence, model: ISLRModel, n: int = ISLR_FRAMES) -> torch.Tensor:
    dtype = next(model.parameters()).dtype
    model.eval()
    return model(prepare_islr([pose], n, dtype=dtype))[0]
