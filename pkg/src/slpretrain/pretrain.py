"""Joint masked-pose-modeling + sign-text contrastive pre-training model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
from torch import nn

from .data import PretrainBatch
from .layout import DEFAULT_LAYOUT, KeypointLayout
from .model import ModelConfig, PoseDecoder, Projector, SignPoseEncoder
from .objectives import (
    Temperature,
    batch_similarity_matrix,
    coarse_similarity_matrix,
    masked_mean,
    temporal_avg_pool,
    pr_loss,
    stc_loss,
    total_loss,
)
from .text import FrozenTextEncoder, Vocab


@dataclass
class LossParts:
    total: torch.Tensor
    pr: torch.Tensor
    stc: torch.Tensor
    similarity: Optional[torch.Tensor] = None


class SignTextModel(nn.Module):
    """Encoder, decoder, projectors, temperature and the frozen text encoder."""

    def __init__(self, cfg: ModelConfig, vocab: Vocab, layout: KeypointLayout = DEFAULT_LAYOUT,
                 text_encoder: Optional[nn.Module] = None, tau_init: float = 0.07):
        super().__init__()
        self.cfg = cfg
        self.vocab = vocab
        self.encoder = SignPoseEncoder(cfg, layout)
        self.decoder = PoseDecoder(cfg.d1 + cfg.d2, cfg.decoder_hidden, layout.total_joints)
        self.text_encoder = text_encoder if text_encoder is not None else FrozenTextEncoder(
            len(vocab), cfg.d_t, cfg.text_layers, cfg.text_heads)
        self.sign_proj = Projector(cfg.d1 + cfg.d2, cfg.d_e)
        self.text_proj = Projector(self.text_encoder.width, cfg.d_e)
        self.temperature = Temperature(tau_init)

    def encode_text(self, ids, pad):
        return self.text_encoder(ids, pad)

    def sign_embeddings(self, x, pad):
        """Shared-space pose features: ([B, n, d_e], pad) or ([B, 1, d_e], None) when coarse."""
        enc = self.encoder(x, pad)
        return self._sign_from_encoding(enc, pad)

    def _sign_from_encoding(self, enc, pad):
        if self.cfg.similarity == "coarse":
            return self.sign_proj(enc.cls)[:, None], None
        pooled, pooled_pad = temporal_avg_pool(enc.fused, self.cfg.s, pad)
        return self.sign_proj(pooled), pooled_pad

    def text_embeddings(self, ids, pad):
        feats = self.encode_text(ids, pad)
        if self.cfg.similarity == "coarse":
            return self.text_proj(masked_mean(feats, pad))[:, None], None
        return self.text_proj(feats), pad

    def similarity(self, f_sign, sign_pad, f_text, text_pad):
        if self.cfg.similarity == "coarse":
            return coarse_similarity_matrix(f_sign[:, 0], f_text[:, 0])
        return batch_similarity_matrix(f_sign, f_text, sign_pad, text_pad)

    def forward(self, batch: PretrainBatch, lam: float = 1.0, use_pr: bool = True,
                pr_normalized: bool = True) -> LossParts:
        enc = self.encoder(batch.inputs, batch.pad)
        zero = enc.fused.sum() * 0.0
        l_pr = zero
        if use_pr:
            v_rec = self.decoder(enc.fused)
            valid = (~batch.pad)[..., None].to(batch.mask.dtype)
            l_pr = pr_loss(v_rec, batch.targets, batch.mask * valid, batch.confidence, pr_normalized)
        l_stc, sim = zero, None
        if lam > 0 and batch.text_ids is not None and len(batch.text_index) > 0:
            idx = batch.text_index
            sub_pad = batch.pad[idx]
            if self.cfg.similarity == "coarse":
                f_sign = self.sign_proj(enc.cls[idx])[:, None]
                s_pad = None
            else:
                pooled, s_pad = temporal_avg_pool(enc.fused[idx], self.cfg.s, sub_pad)
                f_sign = self.sign_proj(pooled)
            f_text, t_pad = self.text_embeddings(batch.text_ids, batch.text_pad)
            sim = self.similarity(f_sign, s_pad, f_text, t_pad)
            l_stc = stc_loss(sim, self.temperature())
        return LossParts(total_loss(l_pr, l_stc, lam), l_pr, l_stc, sim)
