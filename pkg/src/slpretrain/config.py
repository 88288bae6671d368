"""Flat run configuration with dotted keys.

Defaults are the full-scale training recipe where one exists; ``preset``
selects desk-scale or full-scale model widths. Files are flat JSON objects;
``--set key=value`` overrides parse values as JSON when possible.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from pathlib import Path
from typing import Any, Mapping

from .model import ModelConfig
from .synthetic import SynthesisConfig

OUTPUT_ROOT_ENV = "SLPRETRAIN_OUTPUT_ROOT"


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "preset": "desk",
    # model
    "model.d_g": None, "model.d1": None, "model.d2": None, "model.N": None, "model.heads": None,
    "model.ff_mult": 4, "model.dropout": 0.1, "model.d_t": None, "model.text_layers": None,
    "model.gcn_layers": 2, "model.embedding": "gcn", "model.readout": "mean",
    "model.decoder_hidden": None,
    "sim.window_s": 4, "sim.d_e": None, "sim.mode": "fine",
    # masking
    "mask.ratio": 0.4, "mask.level_props": [0.25, 0.25, 0.5],
    "mask.corruption_probs": [0.8, 0.1, 0.1], "mask.jitter_std": 0.05,
    # pre-training loss
    "loss.lambda": 1.0, "loss.tau_init": 0.07, "loss.mask_normalized": True, "loss.use_pr": True,
    # optimisation (pre-training)
    "optim.base_lr": 1e-4, "optim.weight_decay": 0.1, "optim.momentum": 0.9,
    "optim.warmup": 0.1, "optim.schedule": "linear", "optim.step_size": 20, "optim.gamma": 0.1,
    "train.batch_size": 512, "train.epochs": 100,
    # synthetic corpus
    "synth.vocab_size": 10, "synth.n_samples": 200, "synth.jitter_std": 0.01, "synth.seed": 0,
    "synth.min_glosses": 2, "synth.max_glosses": 4, "synth.single_fraction": 0.5,
    "synth.pose_only_fraction": 0.0, "synth.signer_shift_std": 0.0, "synth.occlusion_prob": 0.0,
    "synth.prototype_seed": 0, "synth.kind": "mixed",
    # downstream
    "task.name": "islr", "task.label_smoothing": 0.2, "task.finetune_rate": 0.1,
    "task.beam_width": 4, "task.decoder_blocks": 3, "task.num_frames": 32,
    "task.cslr_hidden": 64, "task.cslr_strides": [2, 2], "task.lstm_layers": 1,
    "task.max_len": 30, "task.fresh_projectors": False,
    "task.base_lr": None, "task.weight_decay": None, "task.schedule": None, "task.warmup": None,
    "task.epochs": None, "task.batch_size": None, "task.step_size": None,
}

# Per-task optimisation defaults.
TASK_DEFAULTS: dict[str, dict[str, Any]] = {
    "islr": {"base_lr": 1e-3, "weight_decay": 1e-4, "schedule": "steplr", "warmup": 0.0,
             "epochs": 60, "batch_size": 64, "step_size": 20},
    "cslr": {"base_lr": 1e-4, "weight_decay": 1e-5, "schedule": "steplr", "warmup": 0.0,
             "epochs": 40, "batch_size": 8, "step_size": 20},
    "slt": {"base_lr": 1e-4, "weight_decay": 1e-4, "schedule": "cosine", "warmup": 0.1,
            "epochs": 60, "batch_size": 32, "step_size": 20},
    "slrt": {"base_lr": 1e-4, "weight_decay": 1e-3, "schedule": "cosine", "warmup": 0.0,
             "epochs": 60, "batch_size": 32, "step_size": 20},
}
TASKS = tuple(TASK_DEFAULTS)
SCHEDULES = ("linear", "steplr", "cosine", "constant")


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


class RunConfig(Mapping):
    def __init__(self, values: Mapping[str, Any] | None = None):
        self._v = copy.deepcopy(DEFAULTS)
        if values:
            self.update(values)

    def update(self, values: Mapping[str, Any]) -> None:
        unknown = sorted(set(values) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        for k, v in values.items():
            self._v[k] = copy.deepcopy(v)
        self.validate()

    def set(self, assignment: str) -> None:
        if "=" not in assignment:
            raise ConfigError(f"expected key=value, got {assignment!r}")
        key, raw = assignment.split("=", 1)
        self.update({key.strip(): _parse_value(raw.strip())})

    def validate(self) -> None:
        v = self._v
        if v["preset"] not in ("desk", "paper"):
            raise ConfigError(f"preset must be desk or paper, got {v['preset']!r}")
        if not 0.0 <= float(v["mask.ratio"]) < 1.0:
            raise ConfigError("mask.ratio must lie in [0, 1)")
        if float(v["loss.lambda"]) < 0:
            raise ConfigError("loss.lambda must be >= 0")
        if int(v["synth.vocab_size"]) < 2:
            raise ConfigError("synth.vocab_size must be >= 2")
        if float(v["synth.jitter_std"]) < 0:
            raise ConfigError("synth.jitter_std must be >= 0")
        if v["task.name"] not in TASKS:
            raise ConfigError(f"task.name must be one of {TASKS}")
        if not 0.0 <= float(v["task.label_smoothing"]) < 1.0:
            raise ConfigError("task.label_smoothing must lie in [0, 1)")
        if not 0.0 <= float(v["task.finetune_rate"]) <= 1.0:
            raise ConfigError("task.finetune_rate must lie in [0, 1]")
        if v["optim.schedule"] not in SCHEDULES:
            raise ConfigError(f"optim.schedule must be one of {SCHEDULES}")
        if v["sim.mode"] not in ("fine", "coarse"):
            raise ConfigError("sim.mode must be fine or coarse")
        if int(v["sim.window_s"]) < 1:
            raise ConfigError("sim.window_s must be >= 1")

    def __getitem__(self, key):
        return self._v[key]

    def __iter__(self):
        return iter(self._v)

    def __len__(self):
        return len(self._v)

    def as_dict(self) -> dict[str, Any]:
        return copy.deepcopy(self._v)

    def hash(self) -> str:
        blob = json.dumps(self._v, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_overrides(self, **kw) -> "RunConfig":
        rc = RunConfig(self._v)
        rc.update({k.replace("__", "."): v for k, v in kw.items()})
        return rc

    def task(self, key: str) -> Any:
        """Task option with the per-task table default as fallback."""
        val = self._v.get(f"task.{key}")
        if val is None:
            val = TASK_DEFAULTS[self._v["task.name"]][key]
        return val

    def model_config(self) -> ModelConfig:
        base = ModelConfig.paper() if self._v["preset"] == "paper" else ModelConfig.desk()
        kw = {}
        for key in ("d_g", "d1", "d2", "N", "heads", "ff_mult", "dropout", "d_t", "text_layers",
                    "gcn_layers", "embedding", "readout", "decoder_hidden"):
            val = self._v[f"model.{key}"]
            if val is not None:
                kw[key] = val
        if self._v["sim.d_e"] is not None:
            kw["d_e"] = self._v["sim.d_e"]
        kw["s"] = self._v["sim.window_s"]
        kw["similarity"] = self._v["sim.mode"]
        return base.replace(**kw)

    def synthesis_config(self) -> SynthesisConfig:
        v = self._v
        return SynthesisConfig(
            vocab_size=int(v["synth.vocab_size"]), min_glosses=int(v["synth.min_glosses"]),
            max_glosses=int(v["synth.max_glosses"]), jitter_std=float(v["synth.jitter_std"]),
            seed=int(v["synth.seed"]), single_fraction=float(v["synth.single_fraction"]),
            pose_only_fraction=float(v["synth.pose_only_fraction"]),
            signer_shift_std=float(v["synth.signer_shift_std"]),
            occlusion_prob=float(v["synth.occlusion_prob"]),
            prototype_seed=int(v["synth.prototype_seed"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self._v, indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a flat JSON object")
        return cls(data)


def output_root(default: str = "runs") -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, default))
