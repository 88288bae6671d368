"""Independent reference implementations used as test oracles.

Each one is written from the definition with no code shared with the
package, favouring plain loops over speed.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


def edit_distance_exhaustive(ref, hyp) -> int:
    """Minimum cost over every edit script (all alignment paths, no memo)."""
    ref, hyp = tuple(ref), tuple(hyp)

    def search(i, j):
        if i == len(ref) and j == len(hyp):
            return 0
        best = math.inf
        if i < len(ref) and j < len(hyp):
            best = min(best, (ref[i] != hyp[j]) + search(i + 1, j + 1))
        if i < len(ref):
            best = min(best, 1 + search(i + 1, j))
        if j < len(hyp):
            best = min(best, 1 + search(i, j + 1))
        return best

    return search(0, 0)


def ctc_enumerate(log_probs: np.ndarray, labels, blank: int = 0) -> float:
    """-log sum over all (V+1)^T paths that collapse to `labels`."""
    T, V = log_probs.shape
    paths = np.array(list(itertools.product(range(V), repeat=T)), dtype=np.int64)
    prev = np.concatenate([np.full((len(paths), 1), -1), paths[:, :-1]], axis=1)
    keep = (paths != blank) & (paths != prev)
    counts = keep.sum(axis=1)
    L = len(labels)
    rows = np.flatnonzero(counts == L)
    if L == 0:
        match = rows
    else:
        sub = paths[rows][keep[rows]].reshape(-1, L)
        match = rows[(sub == np.asarray(labels)[None]).all(axis=1)]
    if match.size == 0:
        return math.inf
    scores = log_probs[np.arange(T)[None, :], paths[match]].sum(axis=1)
    m = scores.max()
    return -(m + math.log(np.exp(scores - m).sum()))


def ctc_exhaustive_decode(log_probs: np.ndarray, blank: int = 0) -> list[int]:
    """Collapsed sequence with the highest total probability over all paths."""
    T, V = log_probs.shape
    totals: dict[tuple, float] = {}
    for path in itertools.product(range(V), repeat=T):
        out, prev = [], None
        for k in path:
            if k != prev and k != blank:
                out.append(k)
            prev = k
        p = math.exp(sum(log_probs[t, k] for t, k in enumerate(path)))
        totals[tuple(out)] = totals.get(tuple(out), 0.0) + p
    return list(max(totals.items(), key=lambda kv: kv[1])[0])


def fine_similarity_literal(S, T) -> float:
    """Straight-line transcription: normalize rows, Z = S T^T, row softmax,
    elementwise product with Z, sum each row, average the row sums."""
    S = [list(map(float, r)) for r in S]
    T = [list(map(float, r)) for r in T]

    def unit(v):
        n = math.sqrt(sum(x * x for x in v))
        return [x / n for x in v]

    S = [unit(r) for r in S]
    T = [unit(r) for r in T]
    n, m = len(S), len(T)
    Z = [[sum(a * b for a, b in zip(S[r], T[c])) for c in range(m)] for r in range(n)]
    row_sums = []
    for r in range(n):
        mx = max(Z[r])
        e = [math.exp(z - mx) for z in Z[r]]
        tot = sum(e)
        A = [x / tot for x in e]
        row_sums.append(sum(A[c] * Z[r][c] for c in range(m)))
    return sum(row_sums) / n


def lcs_memo(a, b) -> int:
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))

    return go(0, 0)


def rouge_l_oracle(ref, hyp, beta=1.2) -> float:
    if not ref or not hyp:
        return 0.0
    l = lcs_memo(ref, hyp)
    if l == 0:
        return 0.0
    r, p = l / len(ref), l / len(hyp)
    return ((1 + beta * beta) * r * p) / (r + beta * beta * p)


def _clipped(refs, hyp, n):
    grams = [tuple(hyp[i:i + n]) for i in range(len(hyp) - n + 1)]
    matched = 0
    for g in set(grams):
        in_hyp = grams.count(g)
        in_ref = max(sum(1 for i in range(len(r) - n + 1) if tuple(r[i:i + n]) == g) for r in refs)
        matched += min(in_hyp, in_ref)
    return matched, len(grams)


def _closest_ref_len(refs, hyp_len):
    best = None
    for r in refs:
        key = (abs(len(r) - hyp_len), len(r))
        if best is None or key < best:
            best = key
    return best[1]


def _combine(matches, totals, hyp_len, ref_len, eps):
    if hyp_len == 0:
        return 0.0
    logs = []
    for m, t in zip(matches, totals):
        logs.append(math.log(m / t) if m > 0 else math.log(eps / max(t, 1)))
    geo = math.exp(sum(logs) / len(logs))
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return bp * geo


def bleu_oracle(refs, hyp, n=4, eps=1e-9) -> float:
    stats = [_clipped(refs, hyp, k) for k in range(1, n + 1)]
    return _combine([s[0] for s in stats], [s[1] for s in stats], len(hyp), _closest_ref_len(refs, len(hyp)), eps)


def corpus_bleu_oracle(list_of_refs, hyps, n=4, eps=1e-9) -> float:
    M, Tt = [0] * n, [0] * n
    hl = rl = 0
    for refs, hyp in zip(list_of_refs, hyps):
        for k in range(1, n + 1):
            m, t = _clipped(refs, hyp, k)
            M[k - 1] += m
            Tt[k - 1] += t
        hl += len(hyp)
        rl += _closest_ref_len(refs, len(hyp))
    return _combine(M, Tt, hl, rl, eps)


def stc_loss_loops(M, tau) -> float:
    B = len(M)
    total = 0.0
    for i in range(B):
        row = sum(math.exp(M[i][j] / tau) for j in range(B))
        col = sum(math.exp(M[j][i] / tau) for j in range(B))
        d = math.exp(M[i][i] / tau)
        total += -math.log(d / row) - math.log(d / col)
    return total / (2 * B)
