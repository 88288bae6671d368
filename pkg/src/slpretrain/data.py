"""Padding and collation of samples into tensors."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from .masking import MaskPlan, apply_corruption, plan_mask
from .pose import PoseSequence, SignTextSample
from .text import Vocab, text_token_ids


def pose_tensor(poses: Sequence[PoseSequence], dtype=torch.float32):
    """Stack (x, y, conf) into [B, T, K, 3] plus a [B, T] padding mask."""
    t_max = max(p.num_frames for p in poses)
    k = poses[0].num_joints
    out = np.zeros((len(poses), t_max, k, 3))
    pad = np.ones((len(poses), t_max), dtype=bool)
    for i, p in enumerate(poses):
        out[i, : p.num_frames] = p.stacked()
        pad[i, : p.num_frames] = False
    return torch.as_tensor(out, dtype=dtype), torch.as_tensor(pad)


def pad_ids(seqs: Sequence[Sequence[int]], pad_id: int):
    m = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), m), pad_id, dtype=torch.long)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = torch.as_tensor(list(s), dtype=torch.long)
    return ids, ids == pad_id


@dataclass
class PretrainBatch:
    inputs: torch.Tensor  # corrupted [B, T, K, 3]
    targets: torch.Tensor  # clean coords [B, T, K, 2]
    confidence: torch.Tensor  # [B, T, K]
    mask: torch.Tensor  # [B, T, K], 1 = masked
    pad: torch.Tensor  # [B, T]
    text_index: torch.Tensor  # rows of the batch that carry text
    text_ids: Optional[torch.Tensor]
    text_pad: Optional[torch.Tensor]
    ids: list[str]

    def to(self, dtype) -> "PretrainBatch":
        return PretrainBatch(self.inputs.to(dtype), self.targets.to(dtype), self.confidence.to(dtype),
                             self.mask, self.pad, self.text_index, self.text_ids, self.text_pad, self.ids)


def collate_pretrain(samples: Sequence[SignTextSample], vocab: Vocab, rng: np.random.Generator,
                     mask_ratio: float = 0.4, level_props=(0.25, 0.25, 0.5),
                     corruption_probs=(0.8, 0.1, 0.1), jitter_std: float = 0.05,
                     dtype=torch.float32) -> PretrainBatch:
    corrupted, plans = [], []
    for s in samples:
        t, k = s.pose.confidence.shape
        plan = plan_mask(t, k, mask_ratio, rng, level_props, corruption_probs) if mask_ratio > 0 \
            else MaskPlan.empty(t, k)
        plans.append(plan)
        corrupted.append(apply_corruption(s.pose, plan, rng, jitter_std) if mask_ratio > 0 else s.pose)
    inputs, pad = pose_tensor(corrupted, dtype)
    clean, _ = pose_tensor([s.pose for s in samples], dtype)
    mask = torch.zeros(clean.shape[:3], dtype=torch.uint8)
    for i, plan in enumerate(plans):
        mask[i, : plan.shape[0]] = torch.as_tensor(plan.mask)
    text_index = [i for i, s in enumerate(samples) if s.text is not None]
    text_ids = text_pad = None
    if text_index:
        text_ids, text_pad = pad_ids([text_token_ids(samples[i].text, samples[i].lang, vocab)
                                      for i in text_index], vocab.pad_id)
    return PretrainBatch(inputs, clean[..., :2], clean[..., 2], mask, pad,
                         torch.as_tensor(text_index, dtype=torch.long), text_ids, text_pad,
                         [s.id for s in samples])


def batches(n: int, batch_size: int, rng: Optional[np.random.Generator] = None):
    order = rng.permutation(n) if rng is not None else np.arange(n)
    for lo in range(0, n, batch_size):
        yield order[lo:lo + batch_size].tolist()
