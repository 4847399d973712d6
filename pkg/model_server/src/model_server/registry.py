"""Checkpoint registry.

Maps checkpoint identifiers to the size class that drives the training
protocol: epoch budget, LoRA, and the memory-motivated defaults. Entries
for local stand-in checkpoints can be added at runtime (tests do this),
the ten stock entries cover the evaluated model zoo.
"""

from __future__ import annotations

from dataclasses import dataclass

# Models at or above this parameter count train with LoRA adapters and a
# reduced epoch budget; everything smaller gets full fine-tuning.
SEVEN_B_THRESHOLD = 7.0

EPOCHS_SMALL = 10
EPOCHS_7B = 3


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    display_name: str
    params_b: float  # parameter count, billions

    def __post_init__(self) -> None:
        if not self.model_id:
            raise ValueError("model_id must be non-empty")
        if self.params_b <= 0:
            raise ValueError("params_b must be positive")

    @property
    def seven_b(self) -> bool:
        return self.params_b >= SEVEN_B_THRESHOLD

    @property
    def default_epochs(self) -> int:
        return EPOCHS_7B if self.seven_b else EPOCHS_SMALL


_STOCK = (
    ModelSpec("google-bert/bert-base-uncased", "BERT-base", 0.11),
    ModelSpec("google-bert/bert-large-uncased", "BERT-large", 0.34),
    ModelSpec("microsoft/codebert-base", "CodeBERT-base", 0.125),
    ModelSpec("FacebookAI/roberta-base", "RoBERTa-base", 0.125),
    ModelSpec("mistralai/Mistral-7B-v0.3", "Mistral-7B", 7.3),
    ModelSpec("meta-llama/Llama-2-7b-hf", "Llama-2-7B", 7.0),
    ModelSpec("deepseek-ai/DeepSeek-R1-Distill-Qwen-1.5B", "DeepSeek-Qwen-1.5B", 1.5),
    ModelSpec("deepseek-ai/DeepSeek-R1-Distill-Qwen-7B", "DeepSeek-Qwen-7B", 7.6),
    ModelSpec("google-t5/t5-base", "T5-base", 0.22),
    ModelSpec("google-t5/t5-large", "T5-large", 0.77),
)

MODEL_REGISTRY: dict[str, ModelSpec] = {spec.model_id: spec for spec in _STOCK}


def get_spec(model_id: str) -> ModelSpec:
    try:
        return MODEL_REGISTRY[model_id]
    except KeyError:
        known = ", ".join(sorted(MODEL_REGISTRY))
        raise KeyError(f"unknown model id {model_id!r}; known ids: {known}") from None


def register(spec: ModelSpec) -> ModelSpec:
    """Add a checkpoint entry; replaces any existing entry with the same id."""
    MODEL_REGISTRY[spec.model_id] = spec
    return spec
