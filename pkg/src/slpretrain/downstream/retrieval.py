"""Sign-text retrieval: ranking in both directions from a similarity matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..objectives import chunked_similarity_matrix


@dataclass
class RetrievalRanks:
    t2v: np.ndarray  # rank (1-based) of the paired pose sequence for each text query
    v2t: np.ndarray  # rank of the paired text for each pose query


def ranks_from_scores(scores: np.ndarray) -> np.ndarray:
    """scores[q, c]: candidate c for query q; the ground truth of query q is c = q.

    Candidates sort by descending score, ties broken by lower candidate index.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    gt = scores[np.arange(n), np.arange(n)][:, None]
    idx = np.arange(scores.shape[1])[None, :]
    better = (scores > gt) | ((scores == gt) & (idx < np.arange(n)[:, None]))
    return better.sum(axis=1) + 1


def slrt_rank(sim) -> RetrievalRanks:
    """sim[i, j] = similarity(pose_i, text_j)."""
    sim = np.asarray(sim.detach().cpu() if isinstance(sim, torch.Tensor) else sim, dtype=np.float64)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1]:
        raise ValueError("similarity matrix must be square")
    return RetrievalRanks(t2v=ranks_from_scores(sim.T), v2t=ranks_from_scores(sim))


@torch.no_grad()
def corpus_similarity(model, x, pad, text_ids, text_pad, chunk: int = 64) -> torch.Tensor:
    """Full evaluation-set similarity matrix for a SignTextModel."""
    model.eval()
    f_sign, s_pad = model.sign_embeddings(x, pad)
    f_text, t_pad = model.text_embeddings(text_ids, text_pad)
    if model.cfg.similarity == "coarse":
        return model.similarity(f_sign, s_pad, f_text, t_pad)
    return chunked_similarity_matrix(f_sign, f_text, s_pad, t_pad, chunk)
