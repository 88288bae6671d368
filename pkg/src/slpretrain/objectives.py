"""Pre-training objectives: confidence-weighted masked reconstruction, the
fine-grained sign-text similarity and the symmetric InfoNCE loss."""

from __future__ import annotations

import math
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

TAU_INIT = 0.07
TAU_MIN = 1e-4
DEFAULT_LAMBDA = 1.0
DEFAULT_WINDOW = 4


def pr_loss(v_rec: torch.Tensor, v: torch.Tensor, mask: torch.Tensor, conf: torch.Tensor,
            normalized: bool = True) -> torch.Tensor:
    """Sum over masked joints of conf * ||v_rec - v||^2, divided by max(1, #masked).

    v_rec, v: [..., K, 2]; mask, conf: [..., K]. With ``normalized=False`` the
    raw sum is returned.
    """
    sq = (v_rec - v).pow(2).sum(dim=-1)
    m = mask.to(sq.dtype)
    total = (m * conf.to(sq.dtype) * sq).sum()
    if not normalized:
        return total
    return total / m.sum().clamp(min=1.0)


def temporal_avg_pool(x: torch.Tensor, s: int, pad_mask: Optional[torch.Tensor] = None):
    """Non-overlapping mean pooling with window and stride ``s`` along dim 1.

    A trailing partial window is averaged over the frames it has. Returns the
    pooled tensor [B, ceil(T/s), D] and its padding mask (True = empty window).
    """
    if s < 1:
        raise ValueError("window size must be >= 1")
    b, t, d = x.shape
    valid = torch.ones(b, t, dtype=x.dtype, device=x.device) if pad_mask is None else (~pad_mask).to(x.dtype)
    n = math.ceil(t / s)
    extra = n * s - t
    xs = F.pad(x * valid[..., None], (0, 0, 0, extra)).view(b, n, s, d).sum(dim=2)
    counts = F.pad(valid, (0, extra)).view(b, n, s).sum(dim=2)
    pooled = xs / counts.clamp(min=1.0)[..., None]
    return pooled, counts == 0


def pool_and_project(fused: torch.Tensor, text_feats: torch.Tensor, sign_proj: nn.Module,
                     text_proj: nn.Module, s: int = DEFAULT_WINDOW,
                     sign_pad: Optional[torch.Tensor] = None):
    """Pool the fused pose features over windows of ``s`` frames, then project
    both modalities into the shared space. Returns (F_sign, pooled_pad, F_text)."""
    pooled, pooled_pad = temporal_avg_pool(fused, s, sign_pad)
    return sign_proj(pooled), pooled_pad, text_proj(text_feats)


def fine_grained_similarity(f_sign: torch.Tensor, f_text: torch.Tensor) -> torch.Tensor:
    """Similarity of one pooled pose sequence [n, d] and one text [m, d].

    Rows are L2-normalized, Z = S T^T, each row of Z is re-weighted by its own
    softmax, the re-weighted rows are summed and the n row sums averaged.
    A zero row has similarity 0 to everything.
    """
    zs = F.normalize(f_sign, dim=-1)
    zt = F.normalize(f_text, dim=-1)
    z = zs @ zt.transpose(-1, -2)
    z_hat = torch.softmax(z, dim=-1) * z
    return z_hat.sum(dim=-1).mean(dim=-1)


def batch_similarity_matrix(f_sign: torch.Tensor, f_text: torch.Tensor,
                            sign_pad: Optional[torch.Tensor] = None,
                            text_pad: Optional[torch.Tensor] = None) -> torch.Tensor:
    """M[i, j] = fine_grained_similarity(sign_i, text_j) over padded batches.

    f_sign: [Bs, n, d], f_text: [Bt, m, d]; pads mark padded rows / tokens.
    """
    zs = F.normalize(f_sign, dim=-1)
    zt = F.normalize(f_text, dim=-1)
    z = torch.einsum("ind,jmd->ijnm", zs, zt)
    if text_pad is not None:
        logits = z.masked_fill(text_pad[None, :, None, :], float("-inf"))
    else:
        logits = z
    z_hat = torch.softmax(logits, dim=-1) * z
    if text_pad is not None:
        z_hat = z_hat.masked_fill(text_pad[None, :, None, :], 0.0)
    rows = z_hat.sum(dim=-1)  # [Bs, Bt, n]
    if sign_pad is None:
        return rows.mean(dim=-1)
    keep = (~sign_pad).to(rows.dtype)[:, None, :]
    return (rows * keep).sum(dim=-1) / keep.sum(dim=-1).clamp(min=1.0)


def chunked_similarity_matrix(f_sign, f_text, sign_pad=None, text_pad=None, chunk: int = 64):
    """Same as batch_similarity_matrix, computed over blocks of sign rows."""
    out = []
    for lo in range(0, f_sign.shape[0], chunk):
        sp = None if sign_pad is None else sign_pad[lo:lo + chunk]
        out.append(batch_similarity_matrix(f_sign[lo:lo + chunk], f_text, sp, text_pad))
    return torch.cat(out, dim=0)


def coarse_similarity_matrix(g_sign: torch.Tensor, g_text: torch.Tensor) -> torch.Tensor:
    """Cosine similarity of global features [B, d] x [B, d] (ablation baseline)."""
    return F.normalize(g_sign, dim=-1) @ F.normalize(g_text, dim=-1).T


def masked_mean(x: torch.Tensor, pad: Optional[torch.Tensor]) -> torch.Tensor:
    if pad is None:
        return x.mean(dim=1)
    keep = (~pad).to(x.dtype)[..., None]
    return (x * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)


def stc_loss(m: torch.Tensor, tau) -> torch.Tensor:
    """(1/2B) sum_i -[log softmax_row(M/tau)_ii + log softmax_col(M/tau)_ii]."""
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"similarity matrix must be square, got {tuple(m.shape)}")
    logits = m / tau
    diag = torch.diagonal(logits)
    row = diag - torch.logsumexp(logits, dim=1)
    col = diag - torch.logsumexp(logits, dim=0)
    return -(row + col).sum() / (2 * m.shape[0])


def total_loss(l_pr, l_stc, lam: float = DEFAULT_LAMBDA):
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return l_pr + lam * l_stc


class Temperature(nn.Module):
    """Trainable temperature stored as log(tau), floored at TAU_MIN."""

    def __init__(self, init: float = TAU_INIT):
        super().__init__()
        self.log_tau = nn.Parameter(torch.tensor(math.log(init)))

    def forward(self) -> torch.Tensor:
        return self.log_tau.exp().clamp(min=TAU_MIN)
