import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slpretrain import metrics as M
from oracles import (
    bleu_oracle,
    corpus_bleu_oracle,
    edit_distance_exhaustive,
    lcs_memo,
    rouge_l_oracle,
)

seqs = st.lists(st.integers(0, 4), min_size=0, max_size=6)


def test_wer_identical():
    w = M.wer("a b c".split(), "a b c".split())
    assert (w.wer, w.substitutions, w.deletions, w.insertions) == (0.0, 0, 0, 0)


def test_wer_one_deletion():
    w = M.wer(["a", "b", "c"], ["a", "c"])
    assert w.deletions == 1 and w.substitutions == 0 and w.insertions == 0
    assert w.wer == pytest.approx(100 / 3)


def test_wer_empty_reference():
    with pytest.raises(ValueError):
        M.wer([], ["a"])


@settings(max_examples=200, deadline=None)
@given(seqs.filter(bool), seqs)
def test_wer_matches_exhaustive(ref, hyp):
    assert M.wer(ref, hyp).distance == edit_distance_exhaustive(ref, hyp)


@settings(max_examples=100, deadline=None)
@given(seqs.filter(bool), seqs.filter(bool), seqs.filter(bool))
def test_edit_distance_metric_axioms(a, b, c):
    d = lambda x, y: M.wer(x, y).distance  # noqa: E731
    assert d(a, b) == d(b, a)
    assert d(a, c) <= d(a, b) + d(b, c)


def test_corpus_wer_pools_counts():
    w = M.corpus_wer([[1, 2], [3, 4, 5, 6]], [[1], [3, 4, 5, 6]])
    assert w.wer == pytest.approx(100 / 6)


def test_bleu_identity():
    x = "the cat sat on the mat".split()
    assert M.bleu([x], x, 4) == pytest.approx(1.0)


def test_bleu1_brevity():
    b = M.bleu([["a", "b", "c", "d"]], ["a", "b", "c"], 1)
    assert b == pytest.approx(math.exp(1 - 4 / 3), abs=1e-12)
    assert b == pytest.approx(0.7165, abs=1e-4)


def test_bleu_empty_hypothesis():
    assert M.bleu([["a"]], [], 4) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(seqs, min_size=1, max_size=3), seqs, st.sampled_from([1, 2, 4]))
def test_bleu_oracle(refs, hyp, n):
    b = M.bleu(refs, hyp, n)
    assert 0.0 <= b <= 1.0
    assert b == pytest.approx(bleu_oracle(refs, hyp, n), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.lists(seqs, min_size=1, max_size=2), seqs), min_size=1, max_size=5),
       st.sampled_from([1, 2, 4]))
def test_corpus_bleu_oracle(pairs, n):
    refs = [p[0] for p in pairs]
    hyps = [p[1] for p in pairs]
    assert M.corpus_bleu(refs, hyps, n) == pytest.approx(corpus_bleu_oracle(refs, hyps, n), abs=1e-9)


def test_rouge_cases():
    assert M.rouge_l(list("abc"), list("abc")) == pytest.approx(1.0)
    assert M.rouge_l(list("abc"), list("xyz")) == 0.0
    assert M.rouge_l([], []) == 0.0


@settings(max_examples=200, deadline=None)
@given(seqs, seqs)
def test_rouge_oracle(a, b):
    assert M.lcs_length(a, b) == lcs_memo(a, b)
    assert M.rouge_l(a, b) == pytest.approx(rouge_l_oracle(a, b), abs=1e-9)


def test_accuracy_perfect():
    s = np.eye(3)
    assert M.accuracy(s, [0, 1, 2]) == 100.0
    assert M.accuracy(s, [0, 1, 2], mode="per_class") == 100.0


def test_accuracy_skewed():
    preds = [0, 0, 1, 0]
    labels = [0, 0, 0, 1]
    assert M.accuracy(preds, labels) == pytest.approx(50.0)
    assert M.accuracy(preds, labels, mode="per_class") == pytest.approx(100 / 3)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 10**6))
def test_accuracy_balanced_modes_equal(c, per, seed):
    r = np.random.default_rng(seed)
    labels = np.repeat(np.arange(c), per)
    scores = r.random((len(labels), c))
    for k in range(1, c + 1):
        assert M.accuracy(scores, labels, k) == M.accuracy(scores, labels, k, "per_class")


def test_accuracy_topk():
    scores = np.array([[0.1, 0.5, 0.4], [0.6, 0.3, 0.1]])
    assert M.accuracy(scores, [2, 1], k=1) == 0.0
    assert M.accuracy(scores, [2, 1], k=2) == 100.0


def test_accuracy_empty():
    with pytest.raises(ValueError):
        M.accuracy([], [])


def test_retrieval_hand_case():
    r = M.retrieval_metrics([1, 2, 6, 11])
    assert r == {"R@1": 25.0, "R@5": 50.0, "R@10": 75.0, "MedR": 2.0}


def test_retrieval_all_first():
    r = M.retrieval_metrics([1, 1, 1])
    assert r["R@1"] == 100.0 and r["MedR"] == 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 30), min_size=1, max_size=20))
def test_recall_monotone(ranks):
    r = M.retrieval_metrics(ranks, ks=range(1, 31))
    vals = [r[f"R@{k}"] for k in range(1, 31)]
    assert vals == sorted(vals)


def test_retrieval_errors():
    with pytest.raises(ValueError):
        M.retrieval_metrics([])
    with pytest.raises(ValueError):
        M.retrieval_metrics([0, 1])
