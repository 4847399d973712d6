"""Dataset loading for the shared project,text,label schema.

Accepts CSV (with header) or JSON Lines; the format is sniffed from the
file extension. Labels must be canonical wire names.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from model_server.labels import LABEL_INDEX

REQUIRED_FIELDS = ("project", "text", "label")


@dataclass(frozen=True)
class Example:
    project: str
    text: str
    label: int  # canonical index


def _coerce(row: dict, where: str) -> Example:
    for field in REQUIRED_FIELDS:
        if field not in row:
            raise ValueError(f"{where}: missing field {field!r}")
    label = row["label"]
    if label not in LABEL_INDEX:
        raise ValueError(f"{where}: unknown label {label!r}")
    text = row["text"]
    if not isinstance(text, str) or not text.strip():
        raise ValueError(f"{where}: text must be a non-empty string")
    return Example(project=str(row["project"]), text=text, label=LABEL_INDEX[label])


def load_dataset(path: str | Path) -> list[Example]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset not found: {path}")
    rows: list[Example] = []
    if path.suffix.lower() == ".csv":
        with path.open(newline="", encoding="utf-8") as fh:
            for i, row in enumerate(csv.DictReader(fh), start=2):
                rows.append(_coerce(row, f"{path}:{i}"))
    else:
        # JSON Lines, one object per line
        with path.open(encoding="utf-8") as fh:
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{path}:{i}: invalid JSON: {exc}") from None
                if not isinstance(obj, dict):
                    raise ValueError(f"{path}:{i}: expected an object")
                rows.append(_coerce(obj, f"{path}:{i}"))
    if not rows:
        raise ValueError(f"dataset is empty: {path}")
    return rows


def split_dataset(
    examples: list[Example], seed: int
) -> tuple[list[Example], list[Example], list[Example]]:
    """80/10/10 train/validation/test split after a seeded shuffle."""
    import random

    if len(examples) < 10:
        raise ValueError("need at least 10 examples for an 80/10/10 split")
    order = list(examples)
    random.Random(seed).shuffle(order)
    n = len(order)
    n_train = int(n * 0.8)
    n_val = int(n * 0.1)
    train = order[:n_train]
    val = order[n_train : n_train + n_val]
    test = order[n_train + n_val :]
    if not train or not val or not test:
        raise ValueError("split produced an empty part")
    return train, val, test
