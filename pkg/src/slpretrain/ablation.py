"""Desk-scale ablation runs on the synthetic corpus.

Each variant pre-trains on the same corpus under a modified config, then is
scored on (1) few-shot isolated recognition after fine-tuning and (2) zero-shot
text-to-pose retrieval over held-out sentences. Every variant uses the same
seeds, data and budget; results are reported per seed and as seed means.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .config import RunConfig
from .metrics import accuracy, retrieval_metrics
from .synthetic import SynthesisConfig, generate_samples, unique_sentence_samples
from .training import evaluate_retrieval, finetune_islr, predict_islr, pretrain

log = logging.getLogger(__name__)

VARIANTS: dict[str, dict] = {
    "full": {},
    "pr_only": {"loss.lambda": 0.0},
    "stc_only": {"loss.use_pr": False, "mask.ratio": 0.0},
    "linear_embedding": {"model.embedding": "linear"},
    "mask_0.8": {"mask.ratio": 0.8},
    "coarse": {"sim.mode": "coarse"},
}
# Variants whose recognition score is not used by any comparison.
RETRIEVAL_ONLY = {"coarse"}


@dataclass(frozen=True)
class TrendProtocol:
    vocab_size: int = 10
    n_pretrain: int = 500
    seeds: tuple[int, ...] = (0, 1, 2)
    jitter_std: float = 0.02
    signer_shift_std: float = 0.03
    occlusion_prob: float = 0.1
    pretrain_epochs: int = 25
    batch_size: int = 32
    base_lr: float = 2e-3
    islr_per_class: int = 3
    islr_test: int = 300
    islr_epochs: int = 40
    islr_batch: int = 10
    islr_lr: float = 1e-3
    retrieval_pairs: int = 100

    def synthesis(self, seed: int) -> SynthesisConfig:
        return SynthesisConfig(vocab_size=self.vocab_size, seed=seed, jitter_std=self.jitter_std,
                               signer_shift_std=self.signer_shift_std, occlusion_prob=self.occlusion_prob)

    def run_config(self, seed: int, overrides: dict) -> RunConfig:
        rc = RunConfig({
            "seed": seed, "train.batch_size": self.batch_size, "train.epochs": self.pretrain_epochs,
            "optim.base_lr": self.base_lr, "task.name": "islr", "task.epochs": self.islr_epochs,
            "task.batch_size": self.islr_batch, "task.base_lr": self.islr_lr,
        })
        rc.update(overrides)
        return rc


@dataclass
class VariantResult:
    variant: str
    seed: int
    islr_top1: Optional[float]
    t2v_r1: float
    v2t_r1: float
    final_pr: float
    final_stc: float
    seconds: float
    history: list = field(default_factory=list, repr=False)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("history")
        return d


def run_variant(name: str, seed: int, protocol: TrendProtocol = TrendProtocol()) -> VariantResult:
    t0 = time.time()
    syn = protocol.synthesis(seed)
    rc = protocol.run_config(seed, VARIANTS[name])
    corpus = generate_samples(syn, protocol.n_pretrain)
    model, hist = pretrain(corpus, rc)

    pairs = unique_sentence_samples(syn.replace(seed=3000 + seed, id_prefix="r"), protocol.retrieval_pairs)
    ranks = evaluate_retrieval(model, pairs)
    t2v = retrieval_metrics(ranks.t2v)["R@1"]
    v2t = retrieval_metrics(ranks.v2t)["R@1"]

    top1 = None
    if name not in RETRIEVAL_ONLY:
        train = generate_samples(syn.replace(seed=1000 + seed, id_prefix="l"),
                                 protocol.islr_per_class * protocol.vocab_size, "single")
        test = generate_samples(syn.replace(seed=2000 + seed, id_prefix="t"), protocol.islr_test, "single")
        clf, _ = finetune_islr(model.encoder, train, protocol.vocab_size, rc)
        top1 = accuracy(predict_islr(clf, test), [s.gloss_labels[0] for s in test])
    last = hist.rows[-1]
    res = VariantResult(name, seed, top1, t2v, v2t, last["pr"], last["stc"], time.time() - t0, hist.rows)
    log.info("variant %s seed %d: islr=%s t2v R@1=%.1f (%.0fs)", name, seed, top1, t2v, res.seconds)
    return res


def run_trends(protocol: TrendProtocol = TrendProtocol(), variants: Sequence[str] = tuple(VARIANTS),
               on_result: Optional[Callable[[VariantResult], None]] = None) -> list[VariantResult]:
    out = []
    for seed in protocol.seeds:
        for name in variants:
            res = run_variant(name, seed, protocol)
            out.append(res)
            if on_result:
                on_result(res)
    return out


def seed_means(results: Sequence[VariantResult], key: str) -> dict[str, float]:
    by: dict[str, list[float]] = {}
    for r in results:
        val = getattr(r, key)
        if val is not None:
            by.setdefault(r.variant, []).append(val)
    return {k: float(np.mean(v)) for k, v in by.items()}


def trend_checks(results: Sequence[VariantResult]) -> dict[str, tuple[bool, str]]:
    """The four ablation directions evaluated on seed means."""
    isl = seed_means(results, "islr_top1")
    ret = seed_means(results, "t2v_r1")
    checks = {}
    if {"full", "pr_only", "stc_only"} <= isl.keys():
        ok = isl["full"] > isl["pr_only"] and isl["full"] > isl["stc_only"]
        checks["joint_objective"] = (ok, f"ISLR top-1 full {isl['full']:.2f} vs pr_only {isl['pr_only']:.2f}, "
                                         f"stc_only {isl['stc_only']:.2f}")
    if {"full", "coarse"} <= ret.keys():
        checks["fine_similarity"] = (ret["full"] > ret["coarse"],
                                     f"T2V R@1 fine {ret['full']:.2f} vs coarse {ret['coarse']:.2f}")
    if {"full", "linear_embedding"} <= isl.keys():
        checks["gcn_embedding"] = (isl["full"] > isl["linear_embedding"],
                                   f"ISLR top-1 gcn {isl['full']:.2f} vs linear {isl['linear_embedding']:.2f}")
    if {"full", "mask_0.8"} <= isl.keys():
        checks["mask_ratio"] = (isl["full"] >= isl["mask_0.8"],
                                f"ISLR top-1 ratio 0.4 {isl['full']:.2f} vs 0.8 {isl['mask_0.8']:.2f}")
    return checks
