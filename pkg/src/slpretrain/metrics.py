"""Evaluation metrics: WER with an S/D/I breakdown, BLEU-n, ROUGE-L,
top-k accuracy and retrieval recall / median rank."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Hashable, Sequence

import numpy as np

BLEU_EPS = 1e-9
ROUGE_BETA = 1.2


@dataclass(frozen=True)
class WerBreakdown:
    wer: float  # percentage
    substitutions: int
    deletions: int
    insertions: int
    ref_len: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_table(ref: Sequence[Hashable], hyp: Sequence[Hashable]) -> np.ndarray:
    n, m = len(ref), len(hyp)
    d = np.zeros((n + 1, m + 1), dtype=np.int64)
    d[:, 0] = np.arange(n + 1)
    d[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i, j] = min(d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]),
                          d[i - 1, j] + 1, d[i, j - 1] + 1)
    return d


def wer(reference: Sequence[Hashable], hypothesis: Sequence[Hashable]) -> WerBreakdown:
    """Levenshtein alignment; the backtrace prefers match/substitution, then
    deletion, then insertion."""
    ref, hyp = list(reference), list(hypothesis)
    if not ref:
        raise ValueError("reference must be non-empty")
    d = edit_table(ref, hyp)
    i, j = len(ref), len(hyp)
    s = de = ins = 0
    while i > 0 or j > 0:
        if i > 0 and j > 0 and d[i, j] == d[i - 1, j - 1] + (ref[i - 1] != hyp[j - 1]):
            s += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and d[i, j] == d[i - 1, j] + 1:
            de += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return WerBreakdown(100.0 * (s + de + ins) / len(ref), int(s), de, ins, len(ref))


def corpus_wer(references, hypotheses) -> WerBreakdown:
    parts = [wer(r, h) for r, h in zip(references, hypotheses, strict=True)]
    n = sum(p.ref_len for p in parts)
    s, d, i = (sum(getattr(p, k) for p in parts) for k in ("substitutions", "deletions", "insertions"))
    return WerBreakdown(100.0 * (s + d + i) / n, s, d, i, n)


def _ngrams(tokens: Sequence[Hashable], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(references: Sequence[Sequence[Hashable]], hypothesis: Sequence[Hashable], n: int):
    """Clipped matches and totals per order 1..n, hypothesis length and the
    closest reference length (shorter wins ties)."""
    matches, totals = [0] * n, [0] * n
    for k in range(1, n + 1):
        h = _ngrams(hypothesis, k)
        max_ref: Counter = Counter()
        for r in references:
            for g, c in _ngrams(r, k).items():
                max_ref[g] = max(max_ref[g], c)
        matches[k - 1] = sum(min(c, max_ref[g]) for g, c in h.items())
        totals[k - 1] = max(len(hypothesis) - k + 1, 0)
    hl = len(hypothesis)
    rl = min((abs(len(r) - hl), len(r)) for r in references)[1]
    return matches, totals, hl, rl


def _bleu_from_stats(matches, totals, hyp_len, ref_len, eps=BLEU_EPS) -> float:
    if hyp_len == 0:
        return 0.0
    log_p = 0.0
    for m, t in zip(matches, totals):
        p = m / t if m > 0 else eps / max(t, 1)
        log_p += math.log(p)
    log_p /= len(matches)
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_p)


def bleu(references: Sequence[Sequence[Hashable]], hypothesis: Sequence[Hashable], n: int = 4) -> float:
    """Sentence BLEU-n in [0, 1]: clipped n-gram precisions, geometric mean,
    brevity penalty; zero match counts are replaced by BLEU_EPS."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return _bleu_from_stats(*bleu_stats(references, hypothesis, n))


def corpus_bleu(list_of_references, hypotheses, n: int = 4) -> float:
    """Corpus BLEU-n: n-gram statistics and lengths are summed before combining."""
    if n < 1:
        raise ValueError("n must be >= 1")
    M, T = [0] * n, [0] * n
    hl = rl = 0
    for refs, hyp in zip(list_of_references, hypotheses, strict=True):
        m, t, h, r = bleu_stats(refs, hyp, n)
        M = [a + b for a, b in zip(M, m)]
        T = [a + b for a, b in zip(T, t)]
        hl += h
        rl += r
    return _bleu_from_stats(M, T, hl, rl)


def lcs_length(a: Sequence[Hashable], b: Sequence[Hashable]) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(reference: Sequence[Hashable], hypothesis: Sequence[Hashable], beta: float = ROUGE_BETA) -> float:
    """LCS-based F-measure ((1 + b^2) P R) / (R + b^2 P)."""
    if not reference or not hypothesis:
        return 0.0
    lcs = lcs_length(reference, hypothesis)
    if lcs == 0:
        return 0.0
    p, r = lcs / len(hypothesis), lcs / len(reference)
    return (1 + beta ** 2) * p * r / (r + beta ** 2 * p)


def corpus_rouge_l(references, hypotheses, beta: float = ROUGE_BETA) -> float:
    """Mean sentence-level ROUGE-L."""
    scores = [rouge_l(r, h, beta) for r, h in zip(references, hypotheses, strict=True)]
    return float(np.mean(scores)) if scores else 0.0


def accuracy(predictions, labels, k: int = 1, mode: str = "per_instance") -> float:
    """Top-k accuracy in percent.

    ``predictions`` is either [N, C] scores or [N] predicted labels (k must be 1).
    ``per_class`` averages the per-class accuracies without weighting.
    """
    preds = np.asarray(predictions)
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty input")
    if preds.ndim == 1:
        if k != 1:
            raise ValueError("top-k needs score matrices")
        hit = preds == labels
    else:
        topk = np.argsort(-preds, axis=1, kind="stable")[:, :k]
        hit = (topk == labels[:, None]).any(axis=1)
    # exact rational arithmetic, so both modes agree bit-for-bit on balanced data
    if mode == "per_instance":
        return float(100 * Fraction(int(hit.sum()), hit.size))
    if mode == "per_class":
        classes = np.unique(labels)
        per = [Fraction(int(hit[labels == c].sum()), int((labels == c).sum())) for c in classes]
        return float(100 * sum(per) / len(per))
    raise ValueError(f"unknown mode {mode!r}")


def retrieval_metrics(ranks, ks=(1, 5, 10)) -> dict[str, float]:
    """R@K in percent and MedR (lower median for even counts)."""
    r = np.asarray(ranks)
    if r.size == 0:
        raise ValueError("empty rank list")
    if r.min() < 1:
        raise ValueError("ranks are 1-based")
    out = {f"R@{k}": 100.0 * float((r <= k).mean()) for k in ks}
    out["MedR"] = float(np.sort(r)[(r.size - 1) // 2])
    return out
