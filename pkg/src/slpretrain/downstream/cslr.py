"""Continuous recognition: encoder, two strided temporal convolutions, a
bidirectional LSTM and a linear layer onto the gloss vocabulary plus blank."""

from __future__ import annotations

import logging
from typing import Sequence

import torch
import torch.nn.functional as F
from torch import nn

from ..model import SignPoseEncoder
from .ctc import BLANK, ctc_loss, min_ctc_length

log = logging.getLogger(__name__)


def conv_out_len(t, stride: int, kernel: int = 3, padding: int = 1):
    return (t + 2 * padding - kernel) // stride + 1


class CSLRModel(nn.Module):
    def __init__(self, encoder: SignPoseEncoder, num_glosses: int, hidden: int = 64,
                 strides: Sequence[int] = (2, 2), lstm_layers: int = 1):
        super().__init__()
        self.encoder = encoder
        self.vocab_size = num_glosses + 1  # blank at 0, gloss g -> g + 1
        self.strides = tuple(strides)
        convs, d = [], encoder.out_dim
        for s in self.strides:
            convs.append(nn.Conv1d(d, hidden, kernel_size=3, stride=s, padding=1))
            d = hidden
        self.tcn = nn.ModuleList(convs)
        self.lstm = nn.LSTM(hidden, hidden // 2, num_layers=lstm_layers, batch_first=True,
                            bidirectional=True)
        self.out = nn.Linear(2 * (hidden // 2), self.vocab_size)

    def output_lengths(self, lengths: torch.Tensor) -> torch.Tensor:
        for s in self.strides:
            lengths = conv_out_len(lengths, s)
        return lengths

    def forward(self, x: torch.Tensor, pad: torch.Tensor | None = None):
        """Return per-step log-probabilities [B, t', V+1] and output lengths [B]."""
        b, t = x.shape[:2]
        lengths = torch.full((b,), t) if pad is None else (~pad).sum(dim=1)
        h = self.encoder(x, pad).fused
        if pad is not None:
            h = h.masked_fill(pad[..., None], 0.0)
        h = h.transpose(1, 2)
        for conv in self.tcn:
            h = F.gelu(conv(h))
        h, _ = self.lstm(h.transpose(1, 2))
        return torch.log_softmax(self.out(h), dim=-1), self.output_lengths(lengths)


def to_ctc_labels(gloss_ids: Sequence[int]) -> list[int]:
    return [int(g) + 1 for g in gloss_ids]


def from_ctc_labels(ids: Sequence[int]) -> list[int]:
    return [int(i) - 1 for i in ids if i != BLANK]


def cslr_batch_loss(log_probs, out_lens, label_seqs, ids=None) -> torch.Tensor | None:
    """Mean CTC loss over feasible samples; infeasible ones are skipped with a warning."""
    losses = []
    for i, labels in enumerate(label_seqs):
        T = int(out_lens[i])
        if T < min_ctc_length(labels):
            log.warning("skipping %s: %d output steps for %d labels",
                        ids[i] if ids else i, T, len(labels))
            continue
        losses.append(ctc_loss(log_probs[i, :T], labels))
    if not losses:
        return None
    return torch.stack(losses).mean()
