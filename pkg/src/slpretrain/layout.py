"""Keypoint layout: the 79 upper-body/face/hand joints kept from the 133-joint
COCO-WholeBody skeleton, their part split and the spatial graph over them."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

WHOLEBODY_JOINTS = 133

# 1-based whole-body indices, as conventionally written: {1~11, 24~40, 54, 84~91, 92~133}.
_ONE_BASED_SPANS = [(1, 11), (24, 40), (54, 54), (84, 91), (92, 133)]

HAND_JOINTS = 21
_HAND_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 4),
    (0, 5), (5, 6), (6, 7), (7, 8),
    (0, 9), (9, 10), (10, 11), (11, 12),
    (0, 13), (13, 14), (14, 15), (15, 16),
    (0, 17), (17, 18), (18, 19), (19, 20),
]
# COCO body skeleton restricted to nose/eyes/ears/shoulders/elbows/wrists.
_BODY_EDGES = [
    (0, 1), (0, 2), (1, 2), (1, 3), (2, 4), (3, 5), (4, 6),
    (5, 6), (5, 7), (7, 9), (6, 8), (8, 10),
]


def _one_based_to_source() -> list[int]:
    out: list[int] = []
    for lo, hi in _ONE_BASED_SPANS:
        out.extend(range(lo - 1, hi))
    return out


class LayoutError(ValueError):
    """Raised when pose arrays do not match the keypoint layout."""


@dataclass(frozen=True)
class KeypointLayout:
    total_joints: int = 79
    source_indices: tuple[int, ...] = field(default_factory=lambda: tuple(_one_based_to_source()))
    # Half-open spans into the 79-joint layout.
    part_ranges: dict = field(default_factory=lambda: {
        "body": (0, 11),
        "facial": (11, 29),
        "mouth": (29, 37),
        "left_hand": (37, 58),
        "right_hand": (58, 79),
    })

    def __post_init__(self):
        if len(self.source_indices) != self.total_joints:
            raise LayoutError(
                f"{len(self.source_indices)} source indices for {self.total_joints} joints"
            )

    def part(self, name: str) -> np.ndarray:
        if name == "hands":
            return np.concatenate([self.part("left_hand"), self.part("right_hand")])
        lo, hi = self.part_ranges[name]
        return np.arange(lo, hi)

    @cached_property
    def part_sizes(self) -> dict[str, int]:
        sizes = {name: hi - lo for name, (lo, hi) in self.part_ranges.items()}
        sizes["hands"] = sizes.pop("left_hand") + sizes.pop("right_hand")
        return sizes

    @cached_property
    def manual_set(self) -> np.ndarray:
        return np.concatenate([self.part("body"), self.part("hands")])

    @cached_property
    def nonmanual_set(self) -> np.ndarray:
        return np.concatenate([self.part("facial"), self.part("mouth")])

    @cached_property
    def hand_sets(self) -> tuple[np.ndarray, np.ndarray]:
        return self.part("left_hand"), self.part("right_hand")

    @cached_property
    def skeleton_edges(self) -> list[tuple[int, int]]:
        body0 = self.part_ranges["body"][0]
        face0 = self.part_ranges["facial"][0]
        mouth0 = self.part_ranges["mouth"][0]
        lh0 = self.part_ranges["left_hand"][0]
        rh0 = self.part_ranges["right_hand"][0]

        edges = [(body0 + a, body0 + b) for a, b in _BODY_EDGES]
        # jawline chain (17 points), then the nose tip hangs off the chin
        edges += [(face0 + i, face0 + i + 1) for i in range(16)]
        nose_tip = face0 + 17
        edges.append((face0 + 8, nose_tip))
        # inner-lip ring
        edges += [(mouth0 + i, mouth0 + (i + 1) % 8) for i in range(8)]
        edges += [(lh0 + a, lh0 + b) for a, b in _HAND_EDGES]
        edges += [(rh0 + a, rh0 + b) for a, b in _HAND_EDGES]
        # cross-part links: nose, upper lip, and wrist -> hand root
        edges += [
            (body0 + 0, nose_tip),
            (nose_tip, mouth0 + 2),
            (body0 + 9, lh0),
            (body0 + 10, rh0),
        ]
        return edges

    def adjacency(self, self_loops: bool = True) -> np.ndarray:
        a = np.zeros((self.total_joints, self.total_joints))
        for i, j in self.skeleton_edges:
            a[i, j] = a[j, i] = 1.0
        if self_loops:
            a += np.eye(self.total_joints)
        return a

    def normalized_adjacency(self) -> np.ndarray:
        """Symmetric D^-1/2 (A + I) D^-1/2."""
        a = self.adjacency(self_loops=True)
        d = 1.0 / np.sqrt(a.sum(axis=1))
        return a * d[:, None] * d[None, :]


DEFAULT_LAYOUT = KeypointLayout()
