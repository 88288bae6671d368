"""Acceptance suite: oracle equivalence, gradient checks, invariants, desk
ablation trends and overfitting sanity checks.

Every test records one PASS/FAIL line through the `acceptance` fixture; the
lines are repeated in the terminal summary at the end of the run.
"""

import math
import time

import numpy as np
import pytest
import torch

from slpretrain import metrics as M
from slpretrain.ablation import TrendProtocol, run_trends, trend_checks
from slpretrain.config import RunConfig
from slpretrain.data import collate_pretrain
from slpretrain.downstream.ctc import ctc_loss
from slpretrain.evaluation import evaluate_slt
from slpretrain.masking import apply_corruption, plan_mask
from slpretrain.model import ModelConfig, SignPoseEncoder
from slpretrain.objectives import fine_grained_similarity, stc_loss
from slpretrain.pose import PoseSequence
from slpretrain.pretrain import SignTextModel
from slpretrain.synthetic import SynthesisConfig, generate_samples, unique_sentence_samples
from slpretrain.training import (
    build_vocab,
    evaluate_retrieval,
    finetune_islr,
    finetune_slrt,
    finetune_slt,
    fit_input_norm,
    fresh_encoder,
    predict_islr,
    set_seed,
)

from gradcheck_utils import desk_problem, fd_check, loss_fn
from oracles import (
    bleu_oracle,
    corpus_bleu_oracle,
    ctc_enumerate,
    edit_distance_exhaustive,
    fine_similarity_literal,
    rouge_l_oracle,
)

ORACLE_BUDGET = 120.0
_oracle_seconds: dict[str, float] = {}


def _tokens(rng, lo=0, hi=6, alphabet=4):
    return [int(x) for x in rng.integers(0, alphabet, size=rng.integers(lo, hi + 1))]


# ---------------------------------------------------------------- oracles

def test_oracle_wer(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(0)
    bad = 0
    for _ in range(1000):
        ref, hyp = _tokens(rng, 1, 6), _tokens(rng, 0, 6)
        d = edit_distance_exhaustive(ref, hyp)
        w = M.wer(ref, hyp)
        bad += w.distance != d or w.wer != 100.0 * d / len(ref)
    _oracle_seconds["wer"] = time.time() - t0
    assert acceptance("oracle WER vs exhaustive edit scripts", bad == 0,
                      f"{1000 - bad}/1000 exact ({_oracle_seconds['wer']:.1f}s)")


def test_oracle_ctc(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(1)
    worst, mismatched, cases = 0.0, 0, 0
    for T in range(1, 9):
        for V in range(2, 5):
            for _ in range(8):
                labels = [int(x) for x in rng.integers(1, V, size=rng.integers(0, 4))]
                lp = torch.log_softmax(torch.tensor(rng.normal(0, 2, (T, V))), dim=-1)
                got = float(ctc_loss(lp, labels))
                want = ctc_enumerate(lp.numpy(), labels)
                cases += 1
                if math.isinf(want) or math.isinf(got):
                    mismatched += not (math.isinf(want) and math.isinf(got))
                else:
                    worst = max(worst, abs(got - want))
    _oracle_seconds["ctc"] = time.time() - t0
    ok = mismatched == 0 and worst < 1e-6
    assert acceptance("oracle CTC vs path enumeration (t'<=8, V<=4, |l|<=3)", ok,
                      f"{cases} cases, max abs err {worst:.2e} < 1e-6, "
                      f"{mismatched} feasibility mismatches ({_oracle_seconds['ctc']:.1f}s)")


def test_oracle_similarity(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(500):
        n, m, d = rng.integers(1, 9), rng.integers(1, 9), rng.integers(1, 17)
        s, t = rng.normal(size=(n, d)), rng.normal(size=(m, d))
        got = float(fine_grained_similarity(torch.tensor(s), torch.tensor(t)))
        worst = max(worst, abs(got - fine_similarity_literal(s, t)))
    _oracle_seconds["similarity"] = time.time() - t0
    assert acceptance("oracle fine-grained similarity vs straight-line transcription", worst < 1e-9,
                      f"500 cases, max abs err {worst:.2e} < 1e-9 ({_oracle_seconds['similarity']:.1f}s)")


def test_oracle_bleu_rouge(acceptance):
    t0 = time.time()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(500):
        refs = [_tokens(rng, 0, 8) for _ in range(rng.integers(1, 4))]
        hyp = _tokens(rng, 0, 8)
        for n in (1, 2, 4):
            worst = max(worst, abs(M.bleu(refs, hyp, n) - bleu_oracle(refs, hyp, n)))
        worst = max(worst, abs(M.rouge_l(refs[0], hyp) - rouge_l_oracle(refs[0], hyp)))
    for _ in range(100):
        k = rng.integers(1, 6)
        refs = [[_tokens(rng, 0, 8) for _ in range(rng.integers(1, 3))] for _ in range(k)]
        hyps = [_tokens(rng, 0, 8) for _ in range(k)]
        for n in (1, 2, 4):
            worst = max(worst, abs(M.corpus_bleu(refs, hyps, n) - corpus_bleu_oracle(refs, hyps, n)))
    _oracle_seconds["bleu_rouge"] = time.time() - t0
    assert acceptance("oracle BLEU / ROUGE-L vs DP oracles", worst < 1e-9,
                      f"max abs err {worst:.2e} < 1e-9 ({_oracle_seconds['bleu_rouge']:.1f}s)")


def test_oracle_runtime(acceptance):
    if len(_oracle_seconds) < 4:
        pytest.skip("needs the four oracle tests in the same run")
    total = sum(_oracle_seconds.values())
    assert acceptance("oracle suite runtime", total < ORACLE_BUDGET, f"{total:.1f}s < {ORACLE_BUDGET:.0f}s")


# ---------------------------------------------------------------- gradients

@pytest.fixture(scope="module")
def desk():
    return desk_problem(0)


@pytest.mark.parametrize("which", ["pr", "stc", "total"])
def test_gradient_finite_differences(acceptance, desk, which):
    model, batch = desk
    t0 = time.time()
    worst, where, checked = fd_check(model, loss_fn(model, batch, which))
    secs = time.time() - t0
    ok = worst < 1e-4 and secs < 60
    assert acceptance(f"FD gradient check L_{which} (float64, 2-sample desk batch)", ok,
                      f"max rel err {worst:.2e} < 1e-4 over {checked} coords, {secs:.1f}s < 60s"), where


# ---------------------------------------------------------------- invariants

def test_invariant_masking_leaves_unmasked_entries(acceptance):
    rng = np.random.default_rng(4)
    violations = 0
    for _ in range(200):
        t = int(rng.integers(1, 80))
        p = PoseSequence(rng.random((t, 79, 2)), rng.random((t, 79)), normalized=True)
        plan = plan_mask(t, 79, float(rng.uniform(0, 0.9)), rng)
        out = apply_corruption(p, plan, rng)
        keep = plan.mask == 0
        violations += not np.array_equal(out.coords[keep], p.coords[keep])
        violations += not np.array_equal(out.confidence, p.confidence)
    assert acceptance("masking never alters unmasked entries", violations == 0,
                      f"{violations} violations in 200 random sequences")


def test_invariant_mask_fraction(acceptance):
    rng = np.random.default_rng(5)
    fracs = [plan_mask(t, 79, 0.4, rng).fraction for t in (64, 100, 256) for _ in range(20)]
    dev = max(abs(f - 0.4) for f in fracs)
    assert acceptance("masked fraction 0.40 +/- 0.02 at t*K >= 5000", dev <= 0.02,
                      f"60 plans, max |fraction - 0.40| = {dev:.4f}")


def test_invariant_stc(acceptance):
    rng = np.random.default_rng(6)
    worst_perm, min_loss = 0.0, math.inf
    for _ in range(200):
        b = int(rng.integers(1, 12))
        m = torch.tensor(rng.uniform(-1, 1, (b, b)))
        tau = float(rng.uniform(0.02, 1.0))
        base = float(stc_loss(m, tau))
        perm = torch.as_tensor(rng.permutation(b))
        worst_perm = max(worst_perm, abs(float(stc_loss(m[perm][:, perm], tau)) - base))
        min_loss = min(min_loss, base)
    ok = min_loss >= 0 and worst_perm < 1e-12
    assert acceptance("L_STC >= 0 and batch-permutation invariant", ok,
                      f"min loss {min_loss + 0.0:.3g}, max permutation change {worst_perm:.1e}")


def test_invariant_similarity_row_scale(acceptance):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(200):
        s, t = torch.tensor(rng.normal(size=(5, 8))), torch.tensor(rng.normal(size=(6, 8)))
        base = float(fine_grained_similarity(s, t))
        alpha = float(np.exp(rng.uniform(-5, 5)))
        s2, t2 = s.clone(), t.clone()
        s2[int(rng.integers(5))] *= alpha
        t2[int(rng.integers(6))] *= alpha
        worst = max(worst, abs(float(fine_grained_similarity(s2, t)) - base),
                    abs(float(fine_grained_similarity(s, t2)) - base))
    assert acceptance("m_ij invariant to positive row rescaling", worst < 1e-12,
                      f"max change {worst:.1e} over 200 cases")


def test_invariant_frozen_text_encoder(acceptance):
    samples = generate_samples(SynthesisConfig(seed=1), 8)
    vocab = build_vocab(samples)
    torch.manual_seed(0)
    model = SignTextModel(RunConfig().model_config(), vocab)
    batch = collate_pretrain(samples, vocab, np.random.default_rng(0), 0.4)
    before = {k: v.clone() for k, v in model.text_encoder.state_dict().items()}
    opt = torch.optim.AdamW([p for p in model.parameters() if p.requires_grad], lr=1e-2)
    model(batch).total.backward()
    opt.step()
    after = model.text_encoder.state_dict()
    ok = all(torch.equal(before[k], after[k]) for k in before)
    assert acceptance("frozen text encoder bit-unchanged after a step", ok,
                      f"{len(before)} tensors compared with torch.equal")


def test_invariant_fused_concat(acceptance):
    torch.manual_seed(0)
    enc = SignPoseEncoder(ModelConfig()).eval()
    x = torch.rand(3, 11, 79, 3, generator=torch.Generator().manual_seed(0))
    out = enc(x)
    ok = torch.equal(out.fused, torch.cat([out.manual, out.nonmanual], dim=-1))
    assert acceptance("fused = concat(manual, nonmanual)", ok, f"exact equality on {tuple(out.fused.shape)}")


# ---------------------------------------------------------------- desk trends

TREND_BUDGET = 30 * 60.0


@pytest.fixture(scope="module")
def trends():
    t0 = time.time()
    results = run_trends(TrendProtocol())
    return results, trend_checks(results), time.time() - t0


def test_trend_runtime(acceptance, trends):
    _, _, secs = trends
    assert acceptance("desk trend suite runtime", secs < TREND_BUDGET, f"{secs / 60:.1f} min < 30 min")


def test_trend_joint_objective(acceptance, trends):
    ok, detail = trends[1]["joint_objective"]
    assert acceptance("trend (a) PR+STC beats PR-only and STC-only on ISLR", ok, detail)


@pytest.mark.xfail(strict=True, reason="coarse global-feature retrieval wins at desk scale; "
                                       "see the README section on known deviations")
def test_trend_fine_similarity(acceptance, trends):
    ok, detail = trends[1]["fine_similarity"]
    assert acceptance("trend (b) fine-grained beats coarse similarity on retrieval R@1", ok, detail)


def test_trend_gcn_embedding(acceptance, trends):
    ok, detail = trends[1]["gcn_embedding"]
    assert acceptance("trend (c) GCN embedding beats linear on ISLR", ok, detail)


def test_trend_mask_ratio(acceptance, trends):
    ok, detail = trends[1]["mask_ratio"]
    assert acceptance("trend (d) mask ratio 0.4 >= 0.8 on ISLR", ok, detail)


# ---------------------------------------------------------------- overfitting

OVERFIT_SYN = SynthesisConfig(vocab_size=10, seed=0, jitter_std=0.01)


def test_overfit_islr(acceptance):
    train = generate_samples(OVERFIT_SYN, 50, "single")
    rc = RunConfig({"task.name": "islr", "task.epochs": 60, "task.batch_size": 10, "task.finetune_rate": 1.0})
    set_seed(0)
    model, _ = finetune_islr(fresh_encoder(rc, train), train, 10, rc)
    acc = M.accuracy(predict_islr(model, train), [s.gloss_labels[0] for s in train])
    assert acceptance("overfit 50-sample ISLR to 100% train top-1 within 60 epochs", acc == 100.0,
                      f"train top-1 {acc:.1f}%")


def test_overfit_retrieval(acceptance):
    train = unique_sentence_samples(OVERFIT_SYN, 30)
    rc = RunConfig({"task.name": "slrt", "task.epochs": 100, "task.batch_size": 30, "task.base_lr": 1e-3,
                    "task.finetune_rate": 1.0})
    set_seed(0)
    base = SignTextModel(rc.model_config(), build_vocab(train))
    fit_input_norm(base.encoder, train)
    model, _ = finetune_slrt(base, train, rc)
    ranks = evaluate_retrieval(model, train)
    t2v, v2t = M.retrieval_metrics(ranks.t2v)["R@1"], M.retrieval_metrics(ranks.v2t)["R@1"]
    assert acceptance("overfit 30-pair retrieval to train R@1 >= 90%", min(t2v, v2t) >= 90.0,
                      f"T2V R@1 {t2v:.1f}, V2T R@1 {v2t:.1f}")


def test_overfit_translation(acceptance):
    train = generate_samples(OVERFIT_SYN, 30)
    rc = RunConfig({"task.name": "slt", "task.epochs": 60, "task.batch_size": 10, "task.base_lr": 1e-3,
                    "task.finetune_rate": 1.0})
    set_seed(0)
    model, _ = finetune_slt(fresh_encoder(rc, train), train, build_vocab(train), rc)
    rows, _ = evaluate_slt(model, train, "train")
    b4 = next(r["value"] for r in rows if r["metric"] == "bleu" and r.get("k") == 4)
    assert acceptance("overfit 30-sample SLT to train BLEU-4 > 0.9", b4 > 0.9, f"train BLEU-4 {b4:.4f}")
