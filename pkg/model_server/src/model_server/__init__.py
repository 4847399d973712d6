"""Fine-tuning and serving sidecar for SATD comment classification.

This package is deliberately independent of the scanner package. The two
components share only wire-level contracts: the classification protocol
(HTTP, v1), the dataset schema (project,text,label), and the evaluation
report schema. Anything imported here is defined here.
"""

from model_server.labels import LABELS, N_LABELS
from model_server.registry import MODEL_REGISTRY, ModelSpec, get_spec
from model_server.training import (
    BATCH_LADDER,
    GRID_LEARNING_RATES,
    GRID_WEIGHT_DECAYS,
    BatchTooLarge,
    TrainRun,
    build_run,
    finetune,
    grid,
)
from model_server.artifact import Artifact, ArtifactError, LabelMismatch, load_artifact
from model_server.server import create_app

__all__ = [
    "LABELS",
    "N_LABELS",
    "MODEL_REGISTRY",
    "ModelSpec",
    "get_spec",
    "BATCH_LADDER",
    "GRID_LEARNING_RATES",
    "GRID_WEIGHT_DECAYS",
    "BatchTooLarge",
    "TrainRun",
    "build_run",
    "finetune",
    "grid",
    "Artifact",
    "ArtifactError",
    "LabelMismatch",
    "load_artifact",
    "create_app",
]
