"""Tokenizer, corpus vocabulary and the frozen text encoder."""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from typing import Iterable, Protocol, Sequence

import torch
from torch import nn

from .pose import Lang

log = logging.getLogger(__name__)

MAX_TEXT_TOKENS = 128
PAD, UNK, BOS, EOS = "<pad>", "<unk>", "<bos>", "<eos>"
_WORD = re.compile(r"\w+", re.UNICODE)


def lang_token(lang: str | Lang) -> str:
    return f"<lang:{Lang(lang).value}>"


def tokenize(text: str) -> list[str]:
    """Lowercased word tokens; whitespace and punctuation are separators."""
    return _WORD.findall(text.lower())


class Vocab:
    def __init__(self, words: Iterable[str] = ()):
        specials = [PAD, UNK, BOS, EOS] + [lang_token(l) for l in Lang]
        self.itos: list[str] = list(specials)
        for w in words:
            if w not in self.itos:
                self.itos.append(w)
        self.stoi = {w: i for i, w in enumerate(self.itos)}

    @classmethod
    def build(cls, texts: Iterable[str | None], min_count: int = 1) -> "Vocab":
        counts = Counter(tok for t in texts if t for tok in tokenize(t))
        return cls(sorted(w for w, c in counts.items() if c >= min_count))

    def __len__(self):
        return len(self.itos)

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self.stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self.stoi[EOS]

    def lookup(self, tok: str) -> int:
        return self.stoi.get(tok, self.stoi[UNK])

    def encode_words(self, text: str) -> list[int]:
        return [self.lookup(t) for t in tokenize(text)]

    def decode(self, ids: Sequence[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def to_json(self) -> str:
        return json.dumps(self.itos)

    @classmethod
    def from_json(cls, payload: str) -> "Vocab":
        v = cls()
        v.itos = json.loads(payload)
        v.stoi = {w: i for i, w in enumerate(v.itos)}
        return v


def text_token_ids(text: str, lang: str | Lang, vocab: Vocab,
                   max_tokens: int = MAX_TEXT_TOKENS) -> list[int]:
    """Word ids followed by <eos> and the language token, truncated to max_tokens."""
    if not text or not text.strip():
        raise ValueError("text must be non-empty")
    words = vocab.encode_words(text)
    if len(words) + 2 > max_tokens:
        log.warning("text truncated from %d to %d tokens", len(words) + 2, max_tokens)
        words = words[: max_tokens - 2]
    return words + [vocab.eos_id, vocab.lookup(lang_token(lang))]


class TextEncoderProtocol(Protocol):
    """Anything mapping padded token ids [B, m] to features [B, m, d_t]."""

    width: int

    def __call__(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor: ...


class FrozenTextEncoder(nn.Module):
    """Small transformer text encoder whose parameters never receive gradients.

    It is initialised from a fixed seed so two processes build identical
    weights; a pre-trained encoder can replace it through TextEncoderProtocol.
    """

    def __init__(self, vocab_size: int, width: int = 32, layers: int = 1, heads: int = 4,
                 max_len: int = MAX_TEXT_TOKENS, seed: int = 1234):
        super().__init__()
        self.width = width
        gen_state = torch.random.get_rng_state()
        torch.manual_seed(seed)
        self.embed = nn.Embedding(vocab_size, width)
        self.pos = nn.Embedding(max_len, width)
        nn.init.normal_(self.pos.weight, std=0.02)
        layer = nn.TransformerEncoderLayer(width, heads, 2 * width, dropout=0.0,
                                           batch_first=True, norm_first=True)
        self.encoder = nn.TransformerEncoder(layer, layers, enable_nested_tensor=False)
        torch.random.set_rng_state(gen_state)
        for p in self.parameters():
            p.requires_grad_(False)
        self.eval()

    def train(self, mode: bool = True):
        # always in eval mode: frozen and deterministic
        return super().train(False)

    def forward(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        pos = torch.arange(ids.shape[1], device=ids.device)
        x = self.embed(ids) + self.pos(pos)[None]
        with torch.no_grad():
            return self.encoder(x, src_key_padding_mask=pad_mask)
