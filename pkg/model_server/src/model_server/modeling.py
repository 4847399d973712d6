"""Compact text classifier used as the local training target.

Real checkpoints from the registry are multi-gigabyte downloads; this
module provides the trainable network the fine-tuning protocol drives at
desk scale: an embedding bag pooled over non-pad tokens and a linear
head over the six labels. The protocol pieces (optimizer, schedule,
early stopping, LoRA wiring) are identical regardless of the backbone.

Under LoRA the backbone (embedding and base head) is frozen and a
low-rank delta B @ A is trained on the head, scaled by alpha / r, with
dropout on the adapter input. Full fine-tuning updates everything.
"""

from __future__ import annotations

import numpy as np

from model_server.labels import N_LABELS
from model_server.tokenizer import PAD_ID


class TinyClassifier:
    def __init__(
        self,
        vocab_size: int,
        dim: int = 32,
        seed: int = 0,
        lora_r: int = 0,
        lora_alpha: float = 0.0,
        lora_dropout: float = 0.0,
    ):
        if vocab_size < 2:
            raise ValueError("vocab_size must cover PAD and UNK")
        rng = np.random.default_rng(seed)
        self.dim = dim
        self.embedding = rng.normal(0.0, 0.1, size=(vocab_size, dim))
        self.embedding[PAD_ID] = 0.0
        self.head_w = np.zeros((N_LABELS, dim))
        self.head_b = np.zeros(N_LABELS)
        self.lora_r = lora_r
        self.lora_alpha = lora_alpha
        self.lora_dropout = lora_dropout
        if lora_r > 0:
            # standard init: A random, B zero, so the delta starts at zero
            self.lora_a = rng.normal(0.0, 0.1, size=(lora_r, dim))
            self.lora_b = np.zeros((N_LABELS, lora_r))
        else:
            self.lora_a = None
            self.lora_b = None

    @property
    def uses_lora(self) -> bool:
        return self.lora_r > 0

    def trainable(self) -> dict[str, np.ndarray]:
        """Parameters the optimizer updates, keyed by name."""
        if self.uses_lora:
            return {"lora_a": self.lora_a, "lora_b": self.lora_b, "head_b": self.head_b}
        return {"embedding": self.embedding, "head_w": self.head_w, "head_b": self.head_b}

    def _pool(self, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        mask = (ids != PAD_ID).astype(np.float64)
        counts = np.maximum(mask.sum(axis=1), 1.0)
        pooled = np.einsum("btd,bt->bd", self.embedding[ids], mask) / counts[:, None]
        return pooled, mask, counts

    def _effective_head(self) -> np.ndarray:
        if self.uses_lora:
            return self.head_w + (self.lora_alpha / self.lora_r) * (self.lora_b @ self.lora_a)
        return self.head_w

    def logits(self, ids: np.ndarray) -> np.ndarray:
        pooled, _, _ = self._pool(ids)
        return pooled @ self._effective_head().T + self.head_b

    def scores(self, ids: np.ndarray) -> np.ndarray:
        z = self.logits(ids)
        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=1, keepdims=True)

    def loss_and_grads(
        self,
        ids: np.ndarray,
        labels: np.ndarray,
        rng: np.random.Generator | None = None,
    ) -> tuple[float, dict[str, np.ndarray]]:
        """Mean cross-entropy and gradients for the trainable parameters.

        rng drives adapter dropout; pass None for evaluation-mode forward.
        """
        batch = ids.shape[0]
        pooled, mask, counts = self._pool(ids)

        if self.uses_lora:
            scale = self.lora_alpha / self.lora_r
            dropped = pooled
            if rng is not None and self.lora_dropout > 0.0:
                keep = (rng.random(pooled.shape) >= self.lora_dropout).astype(np.float64)
                dropped = pooled * keep / (1.0 - self.lora_dropout)
            adapter_in = dropped @ self.lora_a.T  # (batch, r)
            z = pooled @ self.head_w.T + scale * adapter_in @ self.lora_b.T + self.head_b
        else:
            z = pooled @ self.head_w.T + self.head_b

        z = z - z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        loss = float(-np.mean(np.log(probs[np.arange(batch), labels] + 1e-300)))

        dz = probs.copy()
        dz[np.arange(batch), labels] -= 1.0
        dz /= batch

        grads: dict[str, np.ndarray] = {"head_b": dz.sum(axis=0)}
        if self.uses_lora:
            grads["lora_b"] = scale * (dz.T @ adapter_in)
            grads["lora_a"] = scale * (self.lora_b.T @ dz.T) @ dropped
        else:
            grads["head_w"] = dz.T @ pooled
            dpooled = dz @ self.head_w  # (batch, dim)
            dembed = np.zeros_like(self.embedding)
            scaled = dpooled / counts[:, None]
            np.add.at(dembed, ids.ravel(), (scaled[:, None, :] * mask[:, :, None]).reshape(-1, self.dim))
            dembed[PAD_ID] = 0.0
            grads["embedding"] = dembed
        return loss, grads

    def state(self) -> dict[str, np.ndarray]:
        out = {
            "embedding": self.embedding,
            "head_w": self.head_w,
            "head_b": self.head_b,
        }
        if self.uses_lora:
            out["lora_a"] = self.lora_a
            out["lora_b"] = self.lora_b
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for name, value in state.items():
            current = getattr(self, name)
            if current is None or current.shape != value.shape:
                raise ValueError(f"state shape mismatch for {name}")
            setattr(self, name, value.copy())
