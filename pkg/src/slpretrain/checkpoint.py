"""Checkpoint container: a torch state file plus a JSON sidecar describing it."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

import torch
from torch import nn

from .config import RunConfig

SIDECAR_SUFFIX = ".json"


class CheckpointError(RuntimeError):
    pass


def sidecar_path(path: str | Path) -> Path:
    return Path(path).with_suffix(SIDECAR_SUFFIX)


def parameter_manifest(model: nn.Module) -> dict[str, list[int]]:
    return {k: list(v.shape) for k, v in model.state_dict().items()}


def save_checkpoint(path: str | Path, model: nn.Module, rc: RunConfig, epoch: int,
                    corpus_fingerprint: Optional[str] = None, kind: str = "pretrain",
                    extra: Optional[dict[str, Any]] = None,
                    optimizer: Optional[torch.optim.Optimizer] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"model": model.state_dict(), "epoch": epoch}
    if optimizer is not None:
        payload["optimizer"] = optimizer.state_dict()
    torch.save(payload, path)
    meta = {
        "kind": kind,
        "config": rc.as_dict(),
        "config_hash": rc.hash(),
        "epoch": epoch,
        "corpus_fingerprint": corpus_fingerprint,
        "parameters": parameter_manifest(model),
        "extra": extra or {},
    }
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True))
    return path


def read_sidecar(path: str | Path) -> dict[str, Any]:
    side = sidecar_path(path)
    if not side.exists():
        raise CheckpointError(f"{side}: sidecar missing")
    try:
        return json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{side}: {exc}") from None


def load_checkpoint(path: str | Path, model: nn.Module,
                    optimizer: Optional[torch.optim.Optimizer] = None) -> dict[str, Any]:
    """Load weights into `model` after checking every shape against the sidecar
    manifest and the model itself. Returns the sidecar."""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"{path}: checkpoint missing")
    meta = read_sidecar(path)
    expected = parameter_manifest(model)
    recorded = meta["parameters"]
    problems = [f"missing {k}" for k in expected if k not in recorded]
    problems += [f"unexpected {k}" for k in recorded if k not in expected]
    problems += [f"{k}: checkpoint {recorded[k]} vs model {expected[k]}"
                 for k in expected if k in recorded and recorded[k] != expected[k]]
    if problems:
        raise CheckpointError(f"{path}: parameter mismatch: " + "; ".join(problems[:5]))
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model.load_state_dict(payload["model"])
    if optimizer is not None and "optimizer" in payload:
        optimizer.load_state_dict(payload["optimizer"])
    return meta


def check_resume(path: str | Path, rc: RunConfig) -> dict[str, Any]:
    """Refuse to resume from a checkpoint written under a different config."""
    meta = read_sidecar(path)
    if meta["config_hash"] != rc.hash():
        raise CheckpointError(
            f"{path}: config hash {meta['config_hash']} does not match current config {rc.hash()}")
    return meta
