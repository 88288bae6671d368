"""Pose sequences, paired sign-text samples and the per-sample preprocessing
steps: keypoint selection, hand-crop normalization and frame sampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional, Sequence

import numpy as np

from .layout import DEFAULT_LAYOUT, WHOLEBODY_JOINTS, KeypointLayout, LayoutError

HAND_BOX_MARGIN = 0.10


class Lang(str, Enum):
    ASL = "ASL"
    BSL = "BSL"
    CSL = "CSL"
    GSL = "GSL"
    SYN = "SYN"


def _frozen(a: np.ndarray, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PoseSequence:
    """Per-frame 2D keypoints with confidences; arrays are read-only."""

    coords: np.ndarray  # [t, K, 2]
    confidence: np.ndarray  # [t, K]
    normalized: bool = False
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        coords = _frozen(self.coords, np.float64)
        conf = _frozen(self.confidence, np.float64)
        if coords.ndim != 3 or coords.shape[-1] != 2:
            raise LayoutError(f"coords must be [t, K, 2], got {coords.shape}")
        if conf.shape != coords.shape[:2]:
            raise LayoutError(f"confidence shape {conf.shape} != {coords.shape[:2]}")
        if coords.shape[0] < 1:
            raise LayoutError("pose sequence needs at least one frame")
        if conf.size and (conf.min() < 0.0 or conf.max() > 1.0):
            raise ValueError("confidence entries must lie in [0, 1]")
        if self.normalized and coords.size and (coords.min() < 0.0 or coords.max() > 1.0):
            raise ValueError("normalized coords must lie in [0, 1]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "confidence", conf)
        object.__setattr__(self, "meta", MappingProxyType(dict(self.meta)))

    @property
    def num_frames(self) -> int:
        return self.coords.shape[0]

    @property
    def num_joints(self) -> int:
        return self.coords.shape[1]

    def stacked(self) -> np.ndarray:
        """[t, K, 3] array of (x, y, confidence)."""
        return np.concatenate([self.coords, self.confidence[..., None]], axis=-1)

    def take_frames(self, idx: Sequence[int]) -> "PoseSequence":
        idx = np.asarray(idx, dtype=np.int64)
        return PoseSequence(self.coords[idx], self.confidence[idx], self.normalized, self.meta)


@dataclass(frozen=True, eq=False)
class SignTextSample:
    id: str
    pose: PoseSequence
    text: Optional[str] = None
    lang: Lang = Lang.SYN
    gloss_labels: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.text is not None and not self.text.strip():
            raise ValueError(f"sample {self.id}: text must be non-empty when present")
        object.__setattr__(self, "lang", Lang(self.lang))
        if self.gloss_labels is not None:
            object.__setattr__(self, "gloss_labels", tuple(int(g) for g in self.gloss_labels))

    @property
    def paired(self) -> bool:
        return self.text is not None


def select_keypoints(raw: np.ndarray, layout: KeypointLayout = DEFAULT_LAYOUT) -> PoseSequence:
    """Keep the layout's joints from a [t, 133, 3] whole-body (x, y, conf) array."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 3 or raw.shape[1] != WHOLEBODY_JOINTS or raw.shape[2] != 3:
        raise LayoutError(f"expected [t, {WHOLEBODY_JOINTS}, 3], got {raw.shape}")
    kept = raw[:, list(layout.source_indices)]
    return PoseSequence(kept[..., :2], kept[..., 2])


def pad_to_wholebody(p: PoseSequence, layout: KeypointLayout = DEFAULT_LAYOUT,
                     fill: float = np.nan) -> np.ndarray:
    """Inverse of select_keypoints: scatter back into [t, 133, 3], `fill` elsewhere."""
    out = np.full((p.num_frames, WHOLEBODY_JOINTS, 3), fill)
    out[:, list(layout.source_indices)] = p.stacked()
    return out


def _hand_box(xy: np.ndarray, conf: np.ndarray, margin: float):
    visible = conf > 0
    if not visible.any():
        return None
    pts = xy[visible]
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    size = hi - lo
    if np.any(size <= 0):
        return None
    return lo - margin * size, hi + margin * size


def normalize_pose(p: PoseSequence, frame_size: tuple[float, float],
                   layout: KeypointLayout = DEFAULT_LAYOUT,
                   margin: float = HAND_BOX_MARGIN) -> PoseSequence:
    """Map image-space coords to [0, 1].

    Each hand is normalized by its own per-frame bounding box (built from joints
    with confidence > 0 and grown by `margin` of its size on every side); every
    other joint is divided by the frame size. A hand whose box is degenerate in
    a frame falls back to frame-size normalization there; those (frame, hand)
    cells are listed in ``meta["degenerate_hands"]`` as a [t, 2] bool array.
    Confidence passes through unchanged.
    """
    if p.normalized:
        raise ValueError("pose is already normalized")
    w, h = frame_size
    if w <= 0 or h <= 0:
        raise ValueError(f"frame size must be positive, got {frame_size}")
    scale = np.array([w, h], dtype=np.float64)
    out = p.coords / scale
    degenerate = np.zeros((p.num_frames, 2), dtype=bool)
    for side, joints in enumerate(layout.hand_sets):
        for f in range(p.num_frames):
            box = _hand_box(p.coords[f, joints], p.confidence[f, joints], margin)
            if box is None:
                degenerate[f, side] = True
                continue
            lo, hi = box
            out[f, joints] = (p.coords[f, joints] - lo) / (hi - lo)
    out = np.clip(out, 0.0, 1.0)
    meta = dict(p.meta)
    meta["degenerate_hands"] = degenerate
    return PoseSequence(out, p.confidence, normalized=True, meta=meta)


def frame_indices(t: int, n: int, mode: str = "center",
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Split [0, t) into n equal bins and take each bin's midpoint (center) or a
    uniform draw inside it (random). For t < n indices repeat."""
    if n < 1:
        raise ValueError("n must be >= 1")
    width = t / n
    if mode == "center":
        offsets = np.full(n, 0.5)
    elif mode == "random":
        rng = rng if rng is not None else np.random.default_rng()
        offsets = rng.random(n)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    idx = np.floor((np.arange(n) + offsets) * width).astype(np.int64)
    return np.clip(idx, 0, t - 1)


def sample_frames(p: PoseSequence, n: int, mode: str = "center",
                  rng: Optional[np.random.Generator] = None) -> PoseSequence:
    return p.take_frames(frame_indices(p.num_frames, n, mode, rng))
