"""Procedural sign-text corpus.

Every gloss owns a smooth prototype motion (arms, finger flexion, mouth
opening, head nod) built from low-order sinusoids seeded by the gloss id.
A sample is a concatenation of prototypes plus per-joint Gaussian jitter;
confidence drops where the jitter is large so confidence weighting matters.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import CorpusManifest, save_corpus
from .layout import DEFAULT_LAYOUT, KeypointLayout
from .pose import Lang, PoseSequence, SignTextSample

COORD_LO, COORD_HI = 0.05, 0.95
# Nearest-prototype classification of single-gloss samples is exact below this jitter.
SEPARABLE_JITTER_STD = 0.03


@dataclass(frozen=True)
class SynthesisConfig:
    vocab_size: int = 10
    min_glosses: int = 2
    max_glosses: int = 4
    jitter_std: float = 0.01
    seed: int = 0
    template: str = "this word is {}"
    prototype_seed: int = 0
    min_duration: int = 8
    max_duration: int = 12
    single_fraction: float = 0.5
    pose_only_fraction: float = 0.0
    confidence_scale: float = 5.0
    # Nuisance factors; all off by default.
    signer_shift_std: float = 0.0
    occlusion_prob: float = 0.0
    lang: str = "SYN"
    id_prefix: str = "s"

    def __post_init__(self):
        if self.vocab_size < 2:
            raise ValueError(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be >= 0")
        if not 1 <= self.min_glosses <= self.max_glosses:
            raise ValueError("need 1 <= min_glosses <= max_glosses")
        if not 1 <= self.min_duration <= self.max_duration:
            raise ValueError("need 1 <= min_duration <= max_duration")
        if "{}" not in self.template:
            raise ValueError("template needs a '{}' placeholder")

    def replace(self, **kw) -> "SynthesisConfig":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True, eq=False)
class GlossPrototype:
    gloss_id: int
    name: str
    duration: int
    trajectory: np.ndarray  # [duration, K, 2]


def gloss_name(gloss_id: int) -> str:
    return f"g{gloss_id}"


def _rest_pose(layout: KeypointLayout) -> np.ndarray:
    rest = np.zeros((layout.total_joints, 2))
    body = np.array([
        [0.50, 0.25], [0.53, 0.22], [0.47, 0.22], [0.56, 0.24], [0.44, 0.24],
        [0.65, 0.45], [0.35, 0.45], [0.72, 0.65], [0.28, 0.65], [0.62, 0.60], [0.38, 0.60],
    ])
    rest[layout.part("body")] = body
    theta = np.pi * np.arange(17) / 16
    jaw = np.stack([0.5 - 0.07 * np.cos(theta), 0.25 + 0.09 * np.sin(theta)], axis=1)
    face = layout.part("facial")
    rest[face[:17]] = jaw
    rest[face[17]] = [0.50, 0.27]
    return rest


def _hand(flex: np.ndarray, spread: np.ndarray) -> np.ndarray:
    """Hand-box coordinates for one hand; flex, spread are [T, 5]."""
    T = flex.shape[0]
    out = np.zeros((T, 21, 2))
    out[:, 0] = [0.5, 0.92]
    base = np.deg2rad(np.array([-70.0, -30.0, 0.0, 25.0, 50.0]))
    radii = np.array([0.2, 0.38, 0.54, 0.7])
    for f in range(5):
        ang = base[f] + spread[:, f]
        for j in range(4):
            r = radii[j] * (1.0 - 0.55 * flex[:, f] * (j + 1) / 4)
            bend = ang + 0.6 * flex[:, f] * j / 3
            out[:, 1 + 4 * f + j, 0] = 0.5 + r * np.sin(bend)
            out[:, 1 + 4 * f + j, 1] = 0.92 - r * np.cos(bend)
    return out


@lru_cache(maxsize=4096)
def _prototype_cached(gloss_id: int, prototype_seed: int, min_d: int, max_d: int) -> GlossPrototype:
    layout = DEFAULT_LAYOUT
    rng = np.random.default_rng(np.random.SeedSequence([prototype_seed, 7919, gloss_id]))
    d = int(rng.integers(min_d, max_d + 1))
    tau = np.linspace(0.0, 1.0, d)[:, None]
    traj = np.repeat(_rest_pose(layout)[None], d, axis=0)

    def wave(amp: float, shape) -> np.ndarray:
        a = rng.uniform(-amp, amp, size=(2,) + shape)
        ph = rng.uniform(0, 2 * np.pi, size=(2,) + shape)
        return sum(a[k] * np.sin(2 * np.pi * (k + 1) * tau[..., None] + ph[k]) for k in range(2))

    body = layout.part("body")
    arm = wave(0.12, (2, 2))  # [d, side, xy]
    traj[:, body[9]] += arm[:, 0]
    traj[:, body[10]] += arm[:, 1]
    traj[:, body[7]] += 0.5 * arm[:, 0]
    traj[:, body[8]] += 0.5 * arm[:, 1]
    nod = wave(0.012, (1, 2))[:, 0]
    head = np.concatenate([body[:5], layout.part("facial")])
    traj[:, head] += nod[:, None]

    mouth = layout.part("mouth")
    open_amp = rng.uniform(0.004, 0.02)
    open_ph = rng.uniform(0, 2 * np.pi)
    open_f = rng.integers(1, 3)
    ry = 0.006 + open_amp * (1 + np.sin(2 * np.pi * open_f * tau[:, 0] + open_ph))
    rx = rng.uniform(0.018, 0.032)
    ang = 2 * np.pi * np.arange(8) / 8
    center = np.array([0.5, 0.30]) + nod
    traj[:, mouth, 0] = center[:, None, 0] + rx * np.cos(ang)[None]
    traj[:, mouth, 1] = center[:, None, 1] + ry[:, None] * np.sin(ang)[None]

    for hand in layout.hand_sets:
        b = rng.uniform(0.0, 1.0, size=5)
        a = rng.uniform(0.0, 0.4, size=5)
        ph = rng.uniform(0, 2 * np.pi, size=5)
        flex = np.clip(b + a * np.sin(2 * np.pi * tau + ph), 0.0, 1.0)
        spread = np.deg2rad(rng.uniform(-10, 10, size=5)) * np.ones((d, 1))
        traj[:, hand] = _hand(flex, spread)

    traj = np.clip(traj, COORD_LO, COORD_HI)
    traj.setflags(write=False)
    return GlossPrototype(gloss_id, gloss_name(gloss_id), d, traj)


def prototype(gloss_id: int, cfg: SynthesisConfig) -> GlossPrototype:
    if not 0 <= gloss_id < cfg.vocab_size:
        raise ValueError(f"unknown gloss id {gloss_id} (vocab_size={cfg.vocab_size})")
    return _prototype_cached(int(gloss_id), cfg.prototype_seed, cfg.min_duration, cfg.max_duration)


def sample_rng(cfg: SynthesisConfig, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, index]))


def synthesize_sample(cfg: SynthesisConfig, gloss_ids: Sequence[int],
                      rng: Optional[np.random.Generator] = None,
                      sample_id: str = "sample", with_text: bool = True,
                      layout: KeypointLayout = DEFAULT_LAYOUT) -> SignTextSample:
    gloss_ids = [int(g) for g in gloss_ids]
    if not gloss_ids:
        raise ValueError("need at least one gloss")
    protos = [prototype(g, cfg) for g in gloss_ids]
    rng = rng if rng is not None else sample_rng(cfg, 0)
    clean = np.concatenate([p.trajectory for p in protos], axis=0)
    jitter = rng.normal(0.0, cfg.jitter_std, size=clean.shape) if cfg.jitter_std > 0 else np.zeros_like(clean)
    coords = clean + jitter
    conf = 1.0 - np.clip(cfg.confidence_scale * np.linalg.norm(jitter, axis=-1), 0.0, 0.5)

    if cfg.signer_shift_std > 0:
        frame_space = np.concatenate([layout.part("body"), layout.nonmanual_set])
        coords[:, frame_space] += rng.normal(0.0, cfg.signer_shift_std, size=2)
    coords = np.clip(coords, 0.0, 1.0)
    if cfg.occlusion_prob > 0:
        for hand in layout.hand_sets:
            hidden = rng.random(coords.shape[0]) < cfg.occlusion_prob
            coords[np.ix_(hidden, hand)] = 0.0
            conf[np.ix_(hidden, hand)] = 0.0

    text = None
    if with_text:
        names = [gloss_name(g) for g in gloss_ids]
        text = cfg.template.format(names[0]) if len(names) == 1 else " ".join(names)
    return SignTextSample(
        id=sample_id,
        pose=PoseSequence(coords, conf, normalized=True),
        text=text,
        lang=Lang(cfg.lang),
        gloss_labels=tuple(gloss_ids),
    )


def draw_glosses(cfg: SynthesisConfig, rng: np.random.Generator, single: bool) -> list[int]:
    if single:
        return [int(rng.integers(cfg.vocab_size))]
    n = int(rng.integers(cfg.min_glosses, cfg.max_glosses + 1))
    return [int(g) for g in rng.integers(cfg.vocab_size, size=n)]


def generate_samples(cfg: SynthesisConfig, n_samples: int, kind: str = "mixed") -> list[SignTextSample]:
    """`kind` is "mixed" (per cfg.single_fraction), "single" or "multi".

    When n_samples >= vocab_size, sample i < vocab_size starts with gloss i so
    every gloss appears at least once.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    out = []
    for i in range(n_samples):
        rng = sample_rng(cfg, i)
        if kind == "single":
            single = True
        elif kind == "multi":
            single = False
        else:
            single = rng.random() < cfg.single_fraction
        glosses = draw_glosses(cfg, rng, single)
        if n_samples >= cfg.vocab_size and i < cfg.vocab_size:
            glosses[0] = i
        with_text = not (rng.random() < cfg.pose_only_fraction)
        out.append(synthesize_sample(cfg, glosses, rng, f"{cfg.id_prefix}{i:05d}", with_text))
    return out


def unique_sentence_samples(cfg: SynthesisConfig, n_samples: int) -> list[SignTextSample]:
    """Multi-gloss samples with pairwise distinct gloss sequences."""
    seen: set[tuple[int, ...]] = set()
    out = []
    i = 0
    while len(out) < n_samples:
        rng = sample_rng(cfg, i)
        glosses = draw_glosses(cfg, rng, single=False)
        i += 1
        if tuple(glosses) in seen:
            if i > 100 * n_samples:
                raise ValueError("cannot draw enough distinct sentences for this config")
            continue
        seen.add(tuple(glosses))
        out.append(synthesize_sample(cfg, glosses, rng, f"{cfg.id_prefix}{len(out):05d}"))
    return out


def build_corpus(cfg: SynthesisConfig, n_samples: int, root: str | Path,
                 kind: str = "mixed") -> CorpusManifest:
    return save_corpus(generate_samples(cfg, n_samples, kind), root)
