"""Report serialization: JSON reports and CSV sweep tables."""

import csv
import dataclasses
import json
import math
import os
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import torch


def to_jsonable(value: Any) -> Any:
    """
    Convert report values into plain JSON types.

    Tensors and arrays of size one become floats, larger ones become nested lists.
    Non-finite floats are written as strings so the output stays valid JSON.
    """
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        if hasattr(value, "to_dict"):
            return to_jsonable(value.to_dict())
        return to_jsonable(dataclasses.asdict(value))
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    if isinstance(value, np.ndarray):
        return to_jsonable(value.item() if value.size == 1 else value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def dumps_report(report: Dict[str, Any]) -> str:
    """Serialize deterministically: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(to_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_report(
    path: str,
    report: Dict[str, Any],
    config: Optional[Dict[str, Any]] = None,
    timestamp: bool = False,
) -> str:
    """
    Write a JSON report, embedding the resolved run configuration.

    Args:
        path: Output file path
        report: Report fields
        config: Resolved configuration stored under "config"
        timestamp: Add a "created_at" field (the only non-reproducible field)

    Returns:
        The path written
    """
    payload = dict(report)
    if config is not None:
        payload["config"] = config
    if timestamp:
        payload["created_at"] = datetime.now(timezone.utc).isoformat()

    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(dumps_report(payload))
    return path


def write_csv(path: str, rows: Iterable[Dict[str, Any]], columns: Sequence[str]) -> str:
    """Write sweep rows with a fixed column order; missing values stay empty."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _csv_value(row.get(key)) for key in columns})
    return path


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


def _csv_value(value: Any) -> Any:
    value = to_jsonable(value)
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else value
