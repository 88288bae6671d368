"""Task evaluation: metrics rows plus per-sample prediction rows."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import metrics as M
from .pose import SignTextSample
from .reporting import metric
from .synthetic import gloss_name
from .text import tokenize
from .downstream.retrieval import slrt_rank
from .training import predict_cslr, predict_islr, predict_slt, similarity_matrix

BLEU_ORDERS = (1, 2, 4)
RECALL_KS = (1, 5, 10)


def evaluate_islr(model, samples: Sequence[SignTextSample], split: str, n_frames: int = 32):
    scores = predict_islr(model, samples, n_frames)
    labels = np.array([s.gloss_labels[0] for s in samples])
    n = len(samples)
    ks = [k for k in (1, 5) if k <= scores.shape[1]]
    rows = []
    for k in ks:
        rows.append(metric("accuracy_per_instance", M.accuracy(scores, labels, k, "per_instance"), split, n, k))
        rows.append(metric("accuracy_per_class", M.accuracy(scores, labels, k, "per_class"), split, n, k))
    order = np.argsort(-scores, axis=1, kind="stable")[:, :max(ks)]
    preds = [{"id": s.id, "reference": int(y), "hypothesis": int(o[0]), "ranked": [int(c) for c in o]}
             for s, y, o in zip(samples, labels, order)]
    return rows, preds


def evaluate_cslr(model, samples: Sequence[SignTextSample], split: str, beam: int = 4):
    hyps = predict_cslr(model, samples, beam)
    refs = [list(s.gloss_labels) for s in samples]
    wb = M.corpus_wer(refs, hyps)
    n = len(samples)
    rows = [metric("wer", wb.wer, split, n), metric("substitutions", wb.substitutions, split, n),
            metric("deletions", wb.deletions, split, n), metric("insertions", wb.insertions, split, n)]
    preds = [{"id": s.id, "reference": " ".join(gloss_name(g) for g in r),
              "hypothesis": " ".join(gloss_name(g) for g in h)} for s, r, h in zip(samples, refs, hyps)]
    return rows, preds


def evaluate_slt(model, samples: Sequence[SignTextSample], split: str, beam: int = 4, max_len: int = 30):
    hyps = predict_slt(model, samples, beam, max_len)
    refs = [tokenize(s.text) for s in samples]
    n = len(samples)
    rows = [metric("bleu", M.corpus_bleu([[r] for r in refs], hyps, k), split, n, k) for k in BLEU_ORDERS]
    rows.append(metric("rouge_l", M.corpus_rouge_l(refs, hyps), split, n))
    preds = [{"id": s.id, "reference": " ".join(r), "hypothesis": " ".join(h)}
             for s, r, h in zip(samples, refs, hyps)]
    return rows, preds


def evaluate_slrt(model, samples: Sequence[SignTextSample], split: str):
    sim = similarity_matrix(model, samples).numpy()
    ranks = slrt_rank(sim)
    top = sim.argmax(axis=1)  # best text for each pose query, lowest index on ties
    n = len(samples)
    rows = []
    for direction in ("t2v", "v2t"):
        r = getattr(ranks, direction)
        res = M.retrieval_metrics(r, RECALL_KS)
        rows += [metric(f"{direction}_recall", res[f"R@{k}"], split, n, k) for k in RECALL_KS]
        rows.append(metric(f"{direction}_medr", res["MedR"], split, n))
    preds = [{"id": s.id, "reference": s.id, "hypothesis": samples[int(j)].id,
              "t2v_rank": int(a), "v2t_rank": int(b)}
             for s, j, a, b in zip(samples, top, ranks.t2v, ranks.v2t)]
    return rows, preds


def metrics_from_predictions(task: str, preds: Sequence[dict], split: str) -> list[dict]:
    """Recompute the headline metrics of a report from its prediction dump."""
    n = len(preds)
    if task == "islr":
        ref = np.array([p["reference"] for p in preds])
        ranked = [p["ranked"] for p in preds]
        rows = []
        for k in [k for k in (1, 5) if k <= min(len(r) for r in ranked)]:
            # a top-k hit counts as predicting the reference label
            pred = np.array([y if y in r[:k] else -1 for y, r in zip(ref, ranked)])
            for mode in ("per_instance", "per_class"):
                rows.append(metric(f"accuracy_{mode}", M.accuracy(pred, ref, 1, mode), split, n, k))
        return rows
    if task == "cslr":
        wb = M.corpus_wer([p["reference"].split() for p in preds], [p["hypothesis"].split() for p in preds])
        return [metric("wer", wb.wer, split, n)]
    if task == "slt":
        refs = [p["reference"].split() for p in preds]
        hyps = [p["hypothesis"].split() for p in preds]
        rows = [metric("bleu", M.corpus_bleu([[r] for r in refs], hyps, k), split, n, k) for k in BLEU_ORDERS]
        rows.append(metric("rouge_l", M.corpus_rouge_l(refs, hyps), split, n))
        return rows
    if task == "slrt":
        rows = []
        for direction in ("t2v", "v2t"):
            res = M.retrieval_metrics([p[f"{direction}_rank"] for p in preds], RECALL_KS)
            rows += [metric(f"{direction}_recall", res[f"R@{k}"], split, n, k) for k in RECALL_KS]
            rows.append(metric(f"{direction}_medr", res["MedR"], split, n))
        return rows
    raise ValueError(f"unknown task {task!r}")
