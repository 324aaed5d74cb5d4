"""Run records, CSV persistence and JSON summaries."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

CSV_HEADER = ("scenario", "param_json", "metric", "value", "seed", "wall_time_ms")


@dataclass(frozen=True)
class RunRecord:
    scenario: str
    params: dict
    metric: str
    value: float
    seed: int
    wall_time_ms: float = 0.0


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (tuple, list, np.ndarray)):
        return [_jsonable(u) for u in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(u) for k, u in v.items()}
    return v


def param_json(params: dict) -> str:
    return json.dumps(_jsonable(params), sort_keys=True, separators=(",", ":"))


def write_csv(records, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(
                [r.scenario, param_json(r.params), r.metric, format_float(r.value), str(int(r.seed)), format_float(r.wall_time_ms)]
            )
    return path


def read_csv(path) -> list[RunRecord]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [
        RunRecord(
            scenario=row["scenario"],
            params=json.loads(row["param_json"]),
            metric=row["metric"],
            value=float(row["value"]),
            seed=int(row["seed"]),
            wall_time_ms=float(row["wall_time_ms"]),
        )
        for row in rows
    ]


def write_summary(summary: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
