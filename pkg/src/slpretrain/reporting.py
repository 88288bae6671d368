"""Metric reports (JSON), prediction dumps (JSONL) and delimited tables (CSV)."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import jsonschema

METRIC_SCHEMA = {
    "type": "object",
    "required": ["metric", "value", "split", "n_samples"],
    "properties": {
        "metric": {"type": "string"},
        "value": {"type": "number"},
        "k": {"type": "integer", "minimum": 1},
        "split": {"type": "string"},
        "n_samples": {"type": "integer", "minimum": 0},
    },
    "additionalProperties": False,
}

REPORT_SCHEMA = {
    "type": "object",
    "required": ["task", "config_hash", "seed", "split", "metrics"],
    "properties": {
        "task": {"type": "string"},
        "config_hash": {"type": "string"},
        "seed": {"type": "integer"},
        "split": {"type": "string"},
        "metrics": {"type": "array", "items": METRIC_SCHEMA},
        "settings": {"type": "object"},
    },
}

PREDICTION_SCHEMA = {
    "type": "object",
    "required": ["id", "reference", "hypothesis"],
}


def metric(name: str, value: float, split: str, n_samples: int, k: Optional[int] = None) -> dict:
    row = {"metric": name, "value": float(value), "split": split, "n_samples": int(n_samples)}
    if k is not None:
        row["k"] = int(k)
    return row


def make_report(task: str, config_hash: str, seed: int, split: str, metrics: Sequence[dict],
                settings: Optional[dict] = None) -> dict:
    report = {"task": task, "config_hash": config_hash, "seed": int(seed), "split": split,
              "metrics": list(metrics)}
    if settings:
        report["settings"] = settings
    validate_report(report)
    return report


def validate_report(report: dict) -> None:
    jsonschema.validate(report, REPORT_SCHEMA)


def metric_value(report: dict, name: str, k: Optional[int] = None) -> float:
    for row in report["metrics"]:
        if row["metric"] == name and row.get("k") == k:
            return row["value"]
    raise KeyError(f"{name} (k={k}) not in report")


def write_json(path: str | Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


def write_predictions(path: str | Path, rows: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        for row in rows:
            jsonschema.validate(row, PREDICTION_SCHEMA)
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def read_predictions(path: str | Path) -> list[dict]:
    with Path(path).open() as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_csv(path: str | Path, rows: Sequence[dict], fields: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = list(fields or (rows[0].keys() if rows else []))
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    return path
