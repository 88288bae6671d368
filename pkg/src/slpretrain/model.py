"""Sign pose encoder (graph embedding + manual / non-manual transformer
branches), the two-layer pose decoder and the projection heads."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .layout import DEFAULT_LAYOUT, KeypointLayout, LayoutError

MAX_POSE_FRAMES = 256


@dataclass(frozen=True)
class ModelConfig:
    d_g: int = 32
    d1: int = 64
    d2: int = 64
    N: int = 2
    heads: int = 4
    ff_mult: int = 4
    dropout: float = 0.1
    d_e: int = 32
    s: int = 4
    d_t: int = 32
    text_layers: int = 1
    text_heads: int = 4
    gcn_layers: int = 2
    embedding: str = "gcn"  # gcn | linear
    readout: str = "mean"  # mean | attention
    similarity: str = "fine"  # fine | coarse
    max_frames: int = MAX_POSE_FRAMES
    decoder_hidden: int = 128
    in_channels: int = 3  # x, y, confidence

    def __post_init__(self):
        for name in ("d_g", "d1", "d2", "d_e", "s", "d_t", "heads"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.N < 0:
            raise ValueError("N must be >= 0")
        if self.d1 % self.heads or self.d2 % self.heads:
            raise ValueError("d1 and d2 must be divisible by heads")
        if self.embedding not in ("gcn", "linear"):
            raise ValueError(f"unknown embedding {self.embedding!r}")
        if self.readout not in ("mean", "attention"):
            raise ValueError(f"unknown readout {self.readout!r}")
        if self.similarity not in ("fine", "coarse"):
            raise ValueError(f"unknown similarity {self.similarity!r}")

    @classmethod
    def desk(cls, **kw) -> "ModelConfig":
        return cls(**kw)

    @classmethod
    def paper(cls, **kw) -> "ModelConfig":
        base = dict(d_g=512, d1=1024, d2=1536, N=8, heads=8, d_e=512, s=4, d_t=1024,
                    text_layers=12, text_heads=16, decoder_hidden=1024)
        base.update(kw)
        return cls(**base)

    def replace(self, **kw) -> "ModelConfig":
        return dataclasses.replace(self, **kw)


@dataclass
class EncoderOutput:
    manual: torch.Tensor  # [B, t, d1]
    nonmanual: torch.Tensor  # [B, t, d2]
    fused: torch.Tensor  # [B, t, d1 + d2]
    pad_mask: Optional[torch.Tensor] = None  # [B, t], True = padding
    cls: Optional[torch.Tensor] = None  # [B, d1 + d2] when the encoder carries a [CLS] slot


class GraphConv(nn.Module):
    """H' = A_norm H W (+ b) on a fixed node graph; frames are independent."""

    def __init__(self, in_dim: int, out_dim: int, adjacency: np.ndarray, bias: bool = True):
        super().__init__()
        self.register_buffer("adj", torch.as_tensor(adjacency, dtype=torch.float32))
        self.lin = nn.Linear(in_dim, out_dim, bias=bias)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        # h: [..., V, C]
        return torch.matmul(self.adj.to(h.dtype), self.lin(h))


class InputNorm(nn.Module):
    """Fixed per-(joint, channel) standardization with statistics of clean
    training poses; padded frames pass through as zeros.

    The statistics are buffers, so they travel with checkpoints. Until
    ``set_stats`` is called the map is the identity.
    """

    def __init__(self, num_joints: int, channels: int):
        super().__init__()
        self.register_buffer("mean", torch.zeros(num_joints, channels))
        self.register_buffer("std", torch.ones(num_joints, channels))

    @torch.no_grad()
    def set_stats(self, mean, std, min_std: float = 1e-2) -> None:
        mean = torch.as_tensor(mean, dtype=self.mean.dtype)
        std = torch.as_tensor(std, dtype=self.std.dtype)
        if mean.shape != self.mean.shape or std.shape != self.std.shape:
            raise ValueError(f"statistics must have shape {tuple(self.mean.shape)}")
        self.mean.copy_(mean)
        self.std.copy_(std.clamp(min=min_std))

    def forward(self, x: torch.Tensor, pad_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        out = (x - self.mean.to(x.dtype)) / self.std.to(x.dtype)
        if pad_mask is not None:
            out = out.masked_fill(pad_mask[..., None, None], 0.0)
        return out


class NodeLinear(nn.Module):
    """Node-specific affine map [..., K, C] -> [..., K, D]; the per-node bias
    doubles as a learned joint embedding."""

    def __init__(self, num_nodes: int, in_dim: int, out_dim: int, bias: bool = True):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(num_nodes, in_dim, out_dim))
        nn.init.normal_(self.weight, std=in_dim ** -0.5)
        self.bias = nn.Parameter(torch.zeros(num_nodes, out_dim)) if bias else None

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = torch.einsum("...kc,kcd->...kd", x, self.weight)
        return out if self.bias is None else out + self.bias


class GCNEmbedding(nn.Module):
    """Per-frame spatial GCN over the keypoint graph, no temporal edges,
    read out separately over manual and non-manual nodes."""

    def __init__(self, cfg: ModelConfig, layout: KeypointLayout = DEFAULT_LAYOUT):
        super().__init__()
        k = layout.total_joints
        adj = layout.normalized_adjacency()
        if adj.shape != (k, k):
            raise LayoutError("adjacency does not match layout")
        self.num_joints = k
        self.input = NodeLinear(k, cfg.in_channels, cfg.d_g)
        self.layers = nn.ModuleList(GraphConv(cfg.d_g, cfg.d_g, adj) for _ in range(cfg.gcn_layers))
        self.norm = nn.LayerNorm(cfg.d_g)
        self.register_buffer("manual_idx", torch.as_tensor(layout.manual_set, dtype=torch.long))
        self.register_buffer("nonmanual_idx", torch.as_tensor(layout.nonmanual_set, dtype=torch.long))
        self.readout = cfg.readout
        if cfg.readout == "attention":
            self.score = nn.Linear(cfg.d_g, 1)

    def _pool(self, h: torch.Tensor, idx: torch.Tensor) -> torch.Tensor:
        part = h.index_select(-2, idx)
        if self.readout == "mean":
            return part.mean(dim=-2)
        w = torch.softmax(self.score(part), dim=-2)
        return (w * part).sum(dim=-2)

    def forward(self, x: torch.Tensor):
        if x.shape[-2] != self.num_joints:
            raise LayoutError(f"expected {self.num_joints} joints, got {x.shape[-2]}")
        h = self.input(x)
        for layer in self.layers:
            h = h + F.gelu(layer(h))
        h = self.norm(h)
        return self._pool(h, self.manual_idx), self._pool(h, self.nonmanual_idx)


class LinearEmbedding(nn.Module):
    """Ablation baseline: flatten each part's joints and project linearly."""

    def __init__(self, cfg: ModelConfig, layout: KeypointLayout = DEFAULT_LAYOUT):
        super().__init__()
        self.num_joints = layout.total_joints
        self.register_buffer("manual_idx", torch.as_tensor(layout.manual_set, dtype=torch.long))
        self.register_buffer("nonmanual_idx", torch.as_tensor(layout.nonmanual_set, dtype=torch.long))
        self.manual = nn.Linear(len(layout.manual_set) * cfg.in_channels, cfg.d_g)
        self.nonmanual = nn.Linear(len(layout.nonmanual_set) * cfg.in_channels, cfg.d_g)

    def forward(self, x: torch.Tensor):
        if x.shape[-2] != self.num_joints:
            raise LayoutError(f"expected {self.num_joints} joints, got {x.shape[-2]}")
        m = x.index_select(-2, self.manual_idx).flatten(-2)
        n = x.index_select(-2, self.nonmanual_idx).flatten(-2)
        return self.manual(m), self.nonmanual(n)


class Block(nn.Module):
    """Pre-norm transformer encoder block."""

    def __init__(self, d: int, heads: int, ff_mult: int, dropout: float):
        super().__init__()
        self.ln1 = nn.LayerNorm(d)
        self.attn = nn.MultiheadAttention(d, heads, dropout=dropout, batch_first=True)
        self.ln2 = nn.LayerNorm(d)
        self.ff = nn.Sequential(nn.Linear(d, ff_mult * d), nn.GELU(), nn.Dropout(dropout),
                                nn.Linear(ff_mult * d, d))
        self.drop = nn.Dropout(dropout)

    def forward(self, x, pad_mask=None):
        h = self.ln1(x)
        a, _ = self.attn(h, h, h, key_padding_mask=pad_mask, need_weights=False)
        x = x + self.drop(a)
        return x + self.drop(self.ff(self.ln2(x)))


class BranchEncoder(nn.Module):
    def __init__(self, d_in: int, d: int, cfg: ModelConfig, with_cls: bool = False):
        super().__init__()
        self.max_frames = cfg.max_frames
        self.proj = nn.Linear(d_in, d)
        self.pos = nn.Parameter(torch.zeros(cfg.max_frames + int(with_cls), d))
        nn.init.normal_(self.pos, std=0.02)
        self.cls = nn.Parameter(torch.zeros(1, 1, d)) if with_cls else None
        if with_cls:
            nn.init.normal_(self.cls, std=0.02)
        self.blocks = nn.ModuleList(Block(d, cfg.heads, cfg.ff_mult, cfg.dropout) for _ in range(cfg.N))
        self.norm = nn.LayerNorm(d) if cfg.N > 0 else nn.Identity()

    def forward(self, emb: torch.Tensor, pad_mask: Optional[torch.Tensor] = None):
        t = emb.shape[1]
        if t > self.max_frames:
            raise ValueError(f"sequence of {t} frames exceeds the {self.max_frames}-frame positional table")
        x = self.proj(emb)
        if self.cls is not None:
            x = torch.cat([self.cls.expand(x.shape[0], -1, -1).to(x.dtype), x], dim=1)
            if pad_mask is not None:
                pad_mask = F.pad(pad_mask, (1, 0), value=False)
        x = x + self.pos[: x.shape[1]]
        for blk in self.blocks:
            x = blk(x, pad_mask)
        return self.norm(x)


class SignPoseEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig, layout: KeypointLayout = DEFAULT_LAYOUT):
        super().__init__()
        self.cfg = cfg
        self.input_norm = InputNorm(layout.total_joints, cfg.in_channels)
        self.embed = GCNEmbedding(cfg, layout) if cfg.embedding == "gcn" else LinearEmbedding(cfg, layout)
        with_cls = cfg.similarity == "coarse"
        self.manual_branch = BranchEncoder(cfg.d_g, cfg.d1, cfg, with_cls)
        self.nonmanual_branch = BranchEncoder(cfg.d_g, cfg.d2, cfg, with_cls)
        self.with_cls = with_cls

    @property
    def out_dim(self) -> int:
        return self.cfg.d1 + self.cfg.d2

    def forward(self, x: torch.Tensor, pad_mask: Optional[torch.Tensor] = None) -> EncoderOutput:
        """x: [B, t, K, C] poses, pad_mask: [B, t] with True on padded frames."""
        m_emb, n_emb = self.embed(self.input_norm(x, pad_mask))
        fm = self.manual_branch(m_emb, pad_mask)
        fn = self.nonmanual_branch(n_emb, pad_mask)
        cls = None
        if self.with_cls:
            cls = torch.cat([fm[:, 0], fn[:, 0]], dim=-1)
            fm, fn = fm[:, 1:], fn[:, 1:]
        return EncoderOutput(fm, fn, torch.cat([fm, fn], dim=-1), pad_mask, cls)


class PoseDecoder(nn.Module):
    """Two affine layers with a GELU between, applied per frame.

    The output layer starts near a constant pose (small weights, bias at the
    frame centre or a supplied mean pose): coordinates vary by a few hundredths
    around it, and a default-scale start spends most of a short run undoing
    its own initial noise.
    """

    def __init__(self, d_in: int, hidden: int, num_joints: int, out_weight_scale: float = 0.1):
        super().__init__()
        self.num_joints = num_joints
        self.fc1 = nn.Linear(d_in, hidden)
        self.fc2 = nn.Linear(hidden, num_joints * 2)
        with torch.no_grad():
            self.fc2.weight.mul_(out_weight_scale)
            self.fc2.bias.fill_(0.5)

    @torch.no_grad()
    def set_mean_pose(self, mean_pose) -> None:
        """Reset the output bias to a [K, 2] mean pose."""
        mean = torch.as_tensor(mean_pose, dtype=self.fc2.bias.dtype).reshape(-1)
        if mean.numel() != self.fc2.bias.numel():
            raise ValueError(f"mean pose has {mean.numel()} values, expected {self.fc2.bias.numel()}")
        self.fc2.bias.copy_(mean)

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        out = self.fc2(F.gelu(self.fc1(fused)))
        return out.unflatten(-1, (self.num_joints, 2))


class Projector(nn.Module):
    def __init__(self, d_in: int, d_e: int):
        super().__init__()
        self.net = nn.Sequential(nn.Linear(d_in, d_e), nn.GELU(), nn.Linear(d_e, d_e))

    def forward(self, x):
        return self.net(x)
