"""Gloss-free translation: pose encoder, MLP projector and a 3-block
transformer text decoder with length-normalized beam search."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import torch
import torch.nn.functional as F
from torch import nn

from ..model import SignPoseEncoder
from ..text import UNK, Vocab

NUM_BEAMS = 4
DECODER_BLOCKS = 3


@dataclass
class Hypothesis:
    tokens: list[int]  # generated ids, without <bos>
    score: float  # summed log-probability / number of generated tokens
    finished: bool  # False when max_len cut it off


class SLTModel(nn.Module):
    def __init__(self, encoder: SignPoseEncoder, vocab: Vocab, d_model: int = 64, heads: int = 4,
                 blocks: int = DECODER_BLOCKS, dropout: float = 0.1, max_len: int = 128):
        super().__init__()
        self.encoder = encoder
        self.vocab = vocab
        self.projector = nn.Sequential(nn.Linear(encoder.out_dim, d_model), nn.GELU(),
                                       nn.Linear(d_model, d_model))
        self.embed = nn.Embedding(len(vocab), d_model)
        self.pos = nn.Parameter(torch.zeros(max_len, d_model))
        nn.init.normal_(self.pos, std=0.02)
        layer = nn.TransformerDecoderLayer(d_model, heads, 4 * d_model, dropout=dropout,
                                           batch_first=True, norm_first=True)
        self.decoder = nn.TransformerDecoder(layer, blocks)
        self.norm = nn.LayerNorm(d_model)
        self.out = nn.Linear(d_model, len(vocab))
        self.max_len = max_len
        # never generated: padding, <bos>, <unk> and language tags are not targets
        banned = [vocab.pad_id, vocab.bos_id, vocab.stoi[UNK]]
        banned += [i for i, w in enumerate(vocab.itos) if w.startswith("<lang:")]
        self.register_buffer("banned", torch.tensor(sorted(set(banned)), dtype=torch.long), persistent=False)

    def memory(self, x, pad=None):
        return self.projector(self.encoder(x, pad).fused)

    def decode_logits(self, tgt, memory, mem_pad=None, tgt_pad=None):
        L = tgt.shape[1]
        causal = torch.triu(torch.ones(L, L, dtype=torch.bool, device=tgt.device), 1)
        h = self.embed(tgt) + self.pos[:L]
        h = self.decoder(h, memory, tgt_mask=causal, tgt_key_padding_mask=tgt_pad,
                         memory_key_padding_mask=mem_pad)
        return self.out(self.norm(h))

    def forward(self, x, pad, tgt_in, tgt_pad=None):
        return self.decode_logits(tgt_in, self.memory(x, pad), pad, tgt_pad)


def slt_loss(logits, tgt_out, pad_id: int, smoothing: float = 0.0):
    return F.cross_entropy(logits.flatten(0, 1), tgt_out.flatten(), ignore_index=pad_id,
                           label_smoothing=smoothing)


def _step_logprobs(model: SLTModel, prefixes: list[list[int]], memory, mem_pad):
    tgt = torch.as_tensor(prefixes, dtype=torch.long)
    mem = memory.expand(len(prefixes), -1, -1)
    mp = None if mem_pad is None else mem_pad.expand(len(prefixes), -1)
    logits = model.decode_logits(tgt, mem, mp)[:, -1].double()
    logits[:, model.banned] = float("-inf")
    return torch.log_softmax(logits, dim=-1)


@torch.no_grad()
def greedy_search(model: SLTModel, memory, mem_pad=None, max_len: int = 30) -> Hypothesis:
    bos, eos = model.vocab.bos_id, model.vocab.eos_id
    seq, total = [bos], 0.0
    for _ in range(max_len):
        lp = _step_logprobs(model, [seq], memory, mem_pad)[0]
        tok = int(lp.argmax())
        total += float(lp[tok])
        seq.append(tok)
        if tok == eos:
            return Hypothesis(seq[1:], total / (len(seq) - 1), True)
    return Hypothesis(seq[1:], total / (len(seq) - 1), False)


@torch.no_grad()
def beam_search(model: SLTModel, memory, mem_pad=None, beam: int = NUM_BEAMS,
                max_len: int = 30) -> Hypothesis:
    """One beam-search pass. Each step keeps the `beam` best expansions; those
    ending in <eos> leave the beam. Stops when `beam` hypotheses finished or the
    beam empties. Ranking of finished hypotheses is length-normalized."""
    if beam < 1:
        raise ValueError("beam must be >= 1")
    bos, eos = model.vocab.bos_id, model.vocab.eos_id
    alive: list[tuple[list[int], float]] = [([bos], 0.0)]
    finished: list[Hypothesis] = []
    for _ in range(max_len):
        lp = _step_logprobs(model, [s for s, _ in alive], memory, mem_pad)
        cands = []
        for i, (seq, score) in enumerate(alive):
            top = torch.topk(lp[i], min(beam, lp.shape[1]))
            for v, tok in zip(top.values.tolist(), top.indices.tolist()):
                if v == float("-inf"):
                    continue
                cands.append((score + v, i, tok))
        cands.sort(key=lambda c: (-c[0], c[1], c[2]))
        alive_next = []
        for score, i, tok in cands[:beam]:
            seq = alive[i][0] + [tok]
            if tok == eos:
                finished.append(Hypothesis(seq[1:], score / (len(seq) - 1), True))
            else:
                alive_next.append((seq, score))
        alive = alive_next
        if len(finished) >= beam or not alive:
            break
    if not finished:
        finished = [Hypothesis(s[1:], sc / (len(s) - 1), False) for s, sc in alive]
    return max(finished, key=lambda h: (h.finished, h.score))


@torch.no_grad()
def slt_generate(model: SLTModel, x, pad=None, beam: int = NUM_BEAMS, max_len: int = 30,
                 nested: bool = True) -> Hypothesis:
    """Translate one pose batch item [1, t, K, 3].

    With ``nested`` the result is the best hypothesis over widths 1..beam, so a
    wider beam never returns a lower-scoring sequence than a narrower one.
    """
    model.eval()
    memory = model.memory(x, pad)
    widths = range(1, beam + 1) if nested else [beam]
    hyps = [beam_search(model, memory, pad, w, max_len) for w in widths]
    best = hyps[0]
    for h in hyps[1:]:
        if (h.finished, h.score) > (best.finished, best.score):
            best = h
    return best


def strip_special(tokens: list[int], vocab: Vocab) -> list[str]:
    out = []
    for t in tokens:
        if t == vocab.eos_id:
            break
        out.append(vocab.itos[t])
    return out
