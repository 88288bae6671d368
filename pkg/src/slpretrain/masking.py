"""Hierarchical random masking over (frame, joint) cells and BERT-style input
corruption for masked pose modeling.

The masking budget ``round(ratio * t * K)`` is spent on three levels: clips
(contiguous frame spans, all joints), single whole frames, and individual
joints. Every masked unit is then zeroed, jittered or left as is.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .pose import PoseSequence

# level codes
NONE, JOINT, FRAME, CLIP = 0, 1, 2, 3
# corruption codes
ZERO, JITTER, KEEP = 1, 2, 3

DEFAULT_LEVEL_PROPS = (0.25, 0.25, 0.50)  # clip, frame, joint
DEFAULT_CORRUPTION_PROBS = (0.8, 0.1, 0.1)  # zero, jitter, keep
DEFAULT_JITTER_STD = 0.05
DEFAULT_RATIO = 0.4


@dataclass(frozen=True, eq=False)
class MaskPlan:
    mask: np.ndarray  # [t, K] uint8, 1 = masked
    level: np.ndarray  # [t, K] level code of the unit that covers the cell
    corruption: np.ndarray  # [t, K] corruption code, 0 where unmasked

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @property
    def fraction(self) -> float:
        return float(self.mask.mean())

    @classmethod
    def empty(cls, t: int, k: int) -> "MaskPlan":
        z = np.zeros((t, k), dtype=np.uint8)
        return cls(z, z.copy(), z.copy())


def _draw_corruption(rng, probs, size):
    return rng.choice([ZERO, JITTER, KEEP], size=size, p=np.asarray(probs) / np.sum(probs))


def plan_mask(t: int, k: int, ratio: float = DEFAULT_RATIO, rng: np.random.Generator | None = None,
              level_props=DEFAULT_LEVEL_PROPS, corruption_probs=DEFAULT_CORRUPTION_PROBS,
              max_clip_len: int = 6) -> MaskPlan:
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"mask ratio must lie in [0, 1), got {ratio}")
    rng = rng if rng is not None else np.random.default_rng()
    plan = MaskPlan.empty(t, k)
    mask, level, corr = plan.mask, plan.level, plan.corruption
    target = int(round(ratio * t * k))
    if target == 0:
        return plan
    p_clip, p_frame, _ = np.asarray(level_props, dtype=float) / np.sum(level_props)

    # clip level: contiguous spans of untouched frames
    clip_frames = int(round(p_clip * ratio * t))
    free = np.ones(t, dtype=bool)
    while clip_frames > 0:
        lo = min(2, max_clip_len)
        length = int(min(clip_frames, rng.integers(lo, max_clip_len + 1)))
        starts = [s for s in range(t - length + 1) if free[s:s + length].all()]
        if not starts:
            if length == 1:
                break
            max_clip_len = length - 1
            continue
        s = starts[int(rng.integers(len(starts)))]
        mask[s:s + length] = 1
        level[s:s + length] = CLIP
        corr[s:s + length] = _draw_corruption(rng, corruption_probs, 1)[0]
        free[s:s + length] = False
        clip_frames -= length

    # frame level
    n_frames = min(int(round(p_frame * ratio * t)), int(free.sum()))
    if n_frames > 0:
        frames = rng.choice(np.flatnonzero(free), size=n_frames, replace=False)
        mask[frames] = 1
        level[frames] = FRAME
        corr[frames] = _draw_corruption(rng, corruption_probs, n_frames)[:, None]
        free[frames] = False

    # joint level tops the budget up to the target
    remaining = target - int(mask.sum())
    if remaining > 0:
        cells = np.flatnonzero(mask.ravel() == 0)
        picked = rng.choice(cells, size=min(remaining, cells.size), replace=False)
        mask.ravel()[picked] = 1
        level.ravel()[picked] = JOINT
        corr.ravel()[picked] = _draw_corruption(rng, corruption_probs, picked.size)
    return plan


def apply_corruption(p: PoseSequence, plan: MaskPlan, rng: np.random.Generator | None = None,
                     jitter_std: float = DEFAULT_JITTER_STD) -> PoseSequence:
    if plan.shape != p.confidence.shape:
        raise ValueError(f"mask shape {plan.shape} does not match pose {p.confidence.shape}")
    rng = rng if rng is not None else np.random.default_rng()
    coords = p.coords.copy()
    zero = plan.corruption == ZERO
    jit = plan.corruption == JITTER
    coords[zero] = 0.0
    if jit.any():
        coords[jit] += rng.normal(0.0, jitter_std, size=(int(jit.sum()), 2))
        if p.normalized:
            coords[jit] = np.clip(coords[jit], 0.0, 1.0)
    return PoseSequence(coords, p.confidence, p.normalized, p.meta)
