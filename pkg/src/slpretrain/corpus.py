"""On-disk corpus: ``manifest.jsonl`` plus one binary pose file per sample.

Pose file layout (little endian): magic ``b"SLPS"``, uint32 version, uint32 t,
uint32 K, then t*K*3 float32 values as (x, y, confidence), row-major.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .layout import DEFAULT_LAYOUT, KeypointLayout
from .pose import PoseSequence, SignTextSample

MAGIC = b"SLPS"
VERSION = 1
_HEADER = struct.Struct("<4sIII")
MANIFEST_NAME = "manifest.jsonl"


class CorpusFormatError(ValueError):
    pass


@dataclass
class CorpusManifest:
    root: Path
    records: list[dict] = field(default_factory=list)

    @property
    def path(self) -> Path:
        return Path(self.root) / MANIFEST_NAME

    def __len__(self):
        return len(self.records)

    def fingerprint(self) -> str:
        """Hash of the manifest lines; pose payload changes show up via num_frames only."""
        h = hashlib.sha256()
        for rec in self.records:
            h.update(json.dumps(rec, sort_keys=True).encode())
        return h.hexdigest()[:16]


def write_pose_file(path: Path, pose: PoseSequence) -> None:
    t, k = pose.num_frames, pose.num_joints
    payload = pose.stacked().astype("<f4", copy=False)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, t, k))
        fh.write(payload.tobytes(order="C"))


def read_pose_file(path: Path, record_id: str = "?") -> np.ndarray:
    """Return the raw [t, K, 3] float32 payload."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CorpusFormatError(f"record {record_id}: truncated header in {path}")
    magic, version, t, k = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorpusFormatError(f"record {record_id}: bad magic {magic!r} in {path}")
    if version != VERSION:
        raise CorpusFormatError(f"record {record_id}: unsupported version {version} in {path}")
    expected = _HEADER.size + t * k * 3 * 4
    if len(data) != expected:
        raise CorpusFormatError(
            f"record {record_id}: payload is {len(data)} bytes, header implies {expected}"
        )
    arr = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
    return arr.reshape(t, k, 3)


def save_corpus(samples: Iterable[SignTextSample], root: str | Path,
                layout: KeypointLayout = DEFAULT_LAYOUT) -> CorpusManifest:
    root = Path(root)
    (root / "poses").mkdir(parents=True, exist_ok=True)
    manifest = CorpusManifest(root=root)
    seen = set()
    for s in samples:
        if s.pose.num_joints != layout.total_joints:
            raise CorpusFormatError(
                f"record {s.id}: {s.pose.num_joints} joints, layout has {layout.total_joints}"
            )
        if s.id in seen:
            raise CorpusFormatError(f"duplicate record id {s.id}")
        seen.add(s.id)
        rel = f"poses/{s.id}.slps"
        write_pose_file(root / rel, s.pose)
        rec = {
            "id": s.id,
            "text": s.text,
            "lang": s.lang.value,
            "pose_file": rel,
            "num_frames": s.pose.num_frames,
        }
        if s.gloss_labels is not None:
            rec["gloss_labels"] = list(s.gloss_labels)
        if s.pose.normalized:
            rec["normalized"] = True
        manifest.records.append(rec)
    with open(manifest.path, "w", encoding="utf-8") as fh:
        for rec in manifest.records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    return manifest


def read_manifest(root: str | Path) -> CorpusManifest:
    root = Path(root)
    path = root / MANIFEST_NAME
    if not path.exists():
        raise CorpusFormatError(f"no {MANIFEST_NAME} under {root}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from None
            missing = {"id", "text", "lang", "pose_file", "num_frames"} - rec.keys()
            if missing:
                raise CorpusFormatError(
                    f"record {rec.get('id', lineno)}: missing keys {sorted(missing)}"
                )
            records.append(rec)
    return CorpusManifest(root=root, records=records)


def load_corpus(manifest: CorpusManifest | str | Path,
                layout: KeypointLayout = DEFAULT_LAYOUT,
                ids: Optional[set[str]] = None) -> list[SignTextSample]:
    if not isinstance(manifest, CorpusManifest):
        manifest = read_manifest(manifest)
    samples = []
    for rec in manifest.records:
        rid = rec["id"]
        if ids is not None and rid not in ids:
            continue
        path = Path(manifest.root) / rec["pose_file"]
        if not path.exists():
            raise CorpusFormatError(f"record {rid}: pose file {path} does not exist")
        raw = read_pose_file(path, rid)
        t, k = raw.shape[:2]
        if t != rec["num_frames"]:
            raise CorpusFormatError(f"record {rid}: header t={t}, manifest num_frames={rec['num_frames']}")
        if k != layout.total_joints:
            raise CorpusFormatError(f"record {rid}: header K={k}, layout has {layout.total_joints}")
        pose = PoseSequence(raw[..., :2], raw[..., 2], normalized=bool(rec.get("normalized", False)))
        gl = rec.get("gloss_labels")
        samples.append(SignTextSample(
            id=rid, pose=pose, text=rec["text"], lang=rec["lang"],
            gloss_labels=tuple(gl) if gl is not None else None,
        ))
    return samples
