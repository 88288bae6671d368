"""CTC loss (log-space forward algorithm) and decoders. Blank is index 0."""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Sequence

import numpy as np
import torch

BLANK = 0
NEG_INF = float("-inf")
# Stand-in for log(0) inside the forward recursion: logsumexp over all -inf
# inputs has a NaN gradient, a large finite value has an exact zero one.
LOG_ZERO = -1e30


def min_ctc_length(labels: Sequence[int]) -> int:
    """Frames needed to emit `labels`: one per label plus a blank between repeats."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def ctc_loss(log_probs: torch.Tensor, labels: Sequence[int], blank: int = BLANK) -> torch.Tensor:
    """Negative log marginal of `labels` under per-frame log-probabilities [T, V+1].

    Returns +inf when T is too short for the labels.
    """
    labels = [int(l) for l in labels]
    if any(l == blank for l in labels):
        raise ValueError("labels must not contain the blank index")
    T = log_probs.shape[0]
    if T < min_ctc_length(labels):
        return log_probs.new_tensor(math.inf)
    ext = [blank]
    for l in labels:
        ext += [l, blank]
    S = len(ext)
    ext_t = torch.as_tensor(ext, dtype=torch.long, device=log_probs.device)
    # transitions from s-2 are allowed onto a non-blank that differs from ext[s-2]
    skip = torch.zeros(S, dtype=torch.bool, device=log_probs.device)
    for s in range(2, S):
        skip[s] = ext[s] != blank and ext[s] != ext[s - 2]
    neg = log_probs.new_full((S,), LOG_ZERO)

    emit = log_probs[:, ext_t]  # [T, S]
    alpha = neg.clone()
    alpha[0] = emit[0, 0]
    if S > 1:
        alpha[1] = emit[0, 1]
    for t in range(1, T):
        prev1 = torch.cat([neg[:1], alpha[:-1]])
        prev2 = torch.cat([neg[:2], alpha[:-2]])
        prev2 = torch.where(skip, prev2, neg)
        alpha = torch.logsumexp(torch.stack([alpha, prev1, prev2]), dim=0) + emit[t]
    tail = alpha[-2:] if S > 1 else alpha[-1:]
    return -torch.logsumexp(tail, dim=0)


def greedy_decode(log_probs, blank: int = BLANK) -> list[int]:
    """Best path: per-frame argmax, merge repeats, drop blanks."""
    best = np.asarray(torch.as_tensor(log_probs).argmax(dim=-1))
    out, prev = [], None
    for k in best.tolist():
        if k != prev and k != blank:
            out.append(k)
        prev = k
    return out


def _lse(a: float, b: float) -> float:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    m = max(a, b)
    return m + math.log(math.exp(a - m) + math.exp(b - m))


def ctc_beam_decode(log_probs, beam: int = 4, blank: int = BLANK) -> list[int]:
    """Prefix beam search over collapsed label sequences.

    Each prefix tracks the log-probability of ending in blank and in its last
    label; beams are ranked by their sum. ``beam=1`` is best-path decoding.
    """
    if beam < 1:
        raise ValueError("beam must be >= 1")
    if beam == 1:
        return greedy_decode(log_probs, blank)
    lp = np.asarray(torch.as_tensor(log_probs, dtype=torch.float64))
    T, V = lp.shape
    beams: dict[tuple, tuple[float, float]] = {(): (0.0, NEG_INF)}
    for t in range(T):
        nxt: dict[tuple, list[float]] = defaultdict(lambda: [NEG_INF, NEG_INF])
        for prefix, (pb, pnb) in beams.items():
            total = _lse(pb, pnb)
            for c in range(V):
                p = lp[t, c]
                if c == blank:
                    e = nxt[prefix]
                    e[0] = _lse(e[0], total + p)
                    continue
                ext = prefix + (c,)
                if prefix and prefix[-1] == c:
                    e = nxt[prefix]
                    e[1] = _lse(e[1], pnb + p)
                    e = nxt[ext]
                    e[1] = _lse(e[1], pb + p)
                else:
                    e = nxt[ext]
                    e[1] = _lse(e[1], total + p)
        ranked = sorted(nxt.items(), key=lambda kv: (-_lse(*kv[1]), kv[0]))
        beams = {k: tuple(v) for k, v in ranked[:beam]}
    best = min(beams.items(), key=lambda kv: (-_lse(*kv[1]), kv[0]))
    return list(best[0])
