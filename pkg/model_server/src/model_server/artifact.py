"""Model artifacts: a directory holding manifest, weights, and vocab.

The manifest names the label order the head was trained against; loading
refuses directories without one, and serving refuses manifests whose
label list does not match the canonical six.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from model_server.labels import LABELS, MAX_LENGTH
from model_server.modeling import TinyClassifier
from model_server.tokenizer import Tokenizer

if TYPE_CHECKING:
    from model_server.training import TrainRun

MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.npz"
VOCAB_NAME = "vocab.json"
REPORT_NAME = "report.json"

FORMAT = "model-server-artifact"
VERSION = 1


class ArtifactError(ValueError):
    pass


class LabelMismatch(ArtifactError):
    """Manifest label order differs from the canonical protocol labels."""

    def __init__(self, found):
        self.found = tuple(found)
        super().__init__(
            f"artifact labels {list(found)!r} do not match the canonical order {list(LABELS)!r}"
        )


@dataclass
class Artifact:
    manifest: dict
    model: TinyClassifier
    tokenizer: Tokenizer

    @property
    def model_id(self) -> str:
        return self.manifest["model_id"]

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.manifest["labels"])


def save_artifact(
    out_dir: Path,
    model: TinyClassifier,
    tokenizer: Tokenizer,
    run: "TrainRun",
    report: dict,
    epochs_run: int,
    stopped_early: bool,
) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    manifest = {
        "format": FORMAT,
        "version": VERSION,
        "model_id": run.model_id,
        "labels": list(LABELS),
        "max_length": run.max_length,
        "dim": model.dim,
        "vocab_size": tokenizer.vocab_size,
        "lora": (
            {"r": run.lora.r, "alpha": run.lora.alpha, "dropout": run.lora.dropout}
            if run.lora
            else None
        ),
        "int8": run.int8,
        "training": {
            "learning_rate": run.learning_rate,
            "weight_decay": run.weight_decay,
            "batch_size": run.batch_size,
            "epochs": run.epochs,
            "epochs_run": epochs_run,
            "stopped_early": stopped_early,
            "seed": run.seed,
        },
    }
    (out_dir / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    (out_dir / VOCAB_NAME).write_text(
        json.dumps({"tokens": tokenizer.tokens}) + "\n", encoding="utf-8"
    )
    (out_dir / REPORT_NAME).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    np.savez(out_dir / WEIGHTS_NAME, **model.state())
    return out_dir


def load_artifact(path: str | Path) -> Artifact:
    path = Path(path)
    if not path.is_dir():
        raise ArtifactError(f"artifact directory not found: {path}")
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ArtifactError(f"refusing artifact without a manifest: {path}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"manifest is not valid JSON: {exc}") from None

    if manifest.get("format") != FORMAT:
        raise ArtifactError(f"unrecognized artifact format {manifest.get('format')!r}")
    if manifest.get("version") != VERSION:
        raise ArtifactError(f"unsupported artifact version {manifest.get('version')!r}")
    labels = manifest.get("labels")
    if not isinstance(labels, list) or tuple(labels) != LABELS:
        raise LabelMismatch(labels or ())
    if manifest.get("max_length") != MAX_LENGTH:
        raise ArtifactError(f"artifact max_length {manifest.get('max_length')!r} is not {MAX_LENGTH}")

    vocab = json.loads((path / VOCAB_NAME).read_text(encoding="utf-8"))
    tokenizer = Tokenizer(vocab["tokens"], max_length=manifest["max_length"])
    if tokenizer.vocab_size != manifest["vocab_size"]:
        raise ArtifactError("vocab size does not match the manifest")

    lora = manifest.get("lora")
    model = TinyClassifier(
        tokenizer.vocab_size,
        dim=manifest["dim"],
        lora_r=lora["r"] if lora else 0,
        lora_alpha=lora["alpha"] if lora else 0.0,
        lora_dropout=lora["dropout"] if lora else 0.0,
    )
    with np.load(path / WEIGHTS_NAME) as data:
        state = {name: data[name] for name in data.files}
    model.load_state(state)
    return Artifact(manifest=manifest, model=model, tokenizer=tokenizer)
