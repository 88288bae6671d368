import numpy as np
import pytest

from slpretrain.corpus import read_manifest
from slpretrain.synthetic import (
    SEPARABLE_JITTER_STD,
    SynthesisConfig,
    build_corpus,
    generate_samples,
    prototype,
    synthesize_sample,
    unique_sentence_samples,
)


def test_zero_jitter_single_gloss_is_prototype():
    cfg = SynthesisConfig(jitter_std=0.0)
    s = synthesize_sample(cfg, [3])
    np.testing.assert_array_equal(s.pose.coords, prototype(3, cfg).trajectory)
    assert s.text == "this word is g3"
    assert (s.pose.confidence == 1.0).all()


def test_durations_add_up():
    cfg = SynthesisConfig()
    s = synthesize_sample(cfg, [2, 5, 2])
    d = [prototype(g, cfg).duration for g in (2, 5, 2)]
    assert s.pose.num_frames == sum(d)
    assert s.text == "g2 g5 g2"


def test_all_glosses_present():
    samples = generate_samples(SynthesisConfig(vocab_size=10), 200)
    assert {g for s in samples for g in s.gloss_labels} == set(range(10))


def test_generation_deterministic():
    cfg = SynthesisConfig(seed=7, jitter_std=0.02, occlusion_prob=0.1, signer_shift_std=0.02)
    a, b = generate_samples(cfg, 20), generate_samples(cfg, 20)
    for x, y in zip(a, b):
        assert x.pose.coords.tobytes() == y.pose.coords.tobytes()
        assert x.pose.confidence.tobytes() == y.pose.confidence.tobytes()
        assert x.text == y.text


def test_seed_changes_content():
    a = generate_samples(SynthesisConfig(seed=0), 5)
    b = generate_samples(SynthesisConfig(seed=1), 5)
    assert any(x.pose.coords.shape != y.pose.coords.shape or not np.array_equal(x.pose.coords, y.pose.coords)
               for x, y in zip(a, b))


def test_build_corpus_identical_manifests(tmp_path):
    cfg = SynthesisConfig()
    m1 = build_corpus(cfg, 12, tmp_path / "a")
    m2 = build_corpus(cfg, 12, tmp_path / "b")
    assert m1.records == m2.records
    for rec in m1.records:
        assert (tmp_path / "a" / rec["pose_file"]).read_bytes() == (tmp_path / "b" / rec["pose_file"]).read_bytes()


def test_build_corpus_single_record(tmp_path):
    build_corpus(SynthesisConfig(), 1, tmp_path)
    assert len(read_manifest(tmp_path)) == 1


def test_confidence_tracks_jitter():
    s = synthesize_sample(SynthesisConfig(jitter_std=0.05), [1, 2], np.random.default_rng(0))
    assert s.pose.confidence.min() < 1.0
    assert s.pose.confidence.min() >= 0.5


def test_invalid_vocab_size():
    with pytest.raises(ValueError):
        SynthesisConfig(vocab_size=1)


def test_pose_only_fraction():
    samples = generate_samples(SynthesisConfig(pose_only_fraction=0.5), 40)
    assert 0 < sum(s.text is None for s in samples) < 40


def test_unique_sentences_distinct():
    samples = unique_sentence_samples(SynthesisConfig(), 50)
    assert len({s.gloss_labels for s in samples}) == 50


def test_nearest_prototype_separable():
    cfg = SynthesisConfig(vocab_size=10, jitter_std=SEPARABLE_JITTER_STD * 0.99, seed=3)
    samples = generate_samples(cfg, 200, "single")
    protos = [prototype(g, cfg).trajectory for g in range(10)]

    def dist(x, p):
        if x.shape != p.shape:
            return np.inf
        return float(((x - p) ** 2).sum())

    for s in samples:
        pred = int(np.argmin([dist(s.pose.coords, p) for p in protos]))
        assert pred == s.gloss_labels[0]
