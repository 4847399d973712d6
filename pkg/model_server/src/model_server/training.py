"""Fine-tuning protocol: run configuration, optimizer, and the grid.

Hyperparameters are pinned to the published search space: learning rate
in {1e-5, 5e-5, 1e-4}, weight decay in {0.0, 0.01, 0.1}, batch size from
the descending ladder {256, 128, 64, 32, 16, 8} (largest that fits),
inputs padded/truncated to 128 tokens. Models under the 7B threshold
fine-tune fully for up to 10 epochs; 7B-class models train LoRA adapters
(r=16, alpha=16, dropout=0.1) for 3 epochs. Both stop early after 2
epochs without validation-loss improvement. Optimization is AdamW with a
linear schedule and warm-up over the first tenth of the steps.

The int8 flag records that a run would load the backbone 8-bit quantized
(memory headroom for 7B-class cross-project training). The local
stand-in network is tiny, so the flag is metadata only here.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from model_server.artifact import save_artifact
from model_server.data import Example, load_dataset, split_dataset
from model_server.labels import MAX_LENGTH
from model_server.metrics import report_from_predictions
from model_server.modeling import TinyClassifier
from model_server.registry import ModelSpec, get_spec
from model_server.tokenizer import Tokenizer

log = logging.getLogger("model_server")

GRID_LEARNING_RATES = (1e-5, 5e-5, 1e-4)
GRID_WEIGHT_DECAYS = (0.0, 0.01, 0.1)
BATCH_LADDER = (256, 128, 64, 32, 16, 8)

LORA_R = 16
LORA_ALPHA = 16.0
LORA_DROPOUT = 0.1

PATIENCE = 2
WARMUP_FRACTION = 0.1


class BatchTooLarge(MemoryError):
    """Batch does not fit the memory budget.

    suggested is the next rung down the batch ladder, or None when the
    run was already at the smallest batch size.
    """

    def __init__(self, batch_size: int, suggested: int | None):
        self.batch_size = batch_size
        self.suggested = suggested
        if suggested is None:
            hint = "already at the smallest ladder size"
        else:
            hint = f"retry with batch size {suggested}"
        super().__init__(f"batch size {batch_size} exceeds the memory budget; {hint}")


def next_batch_size(current: int) -> int | None:
    """Next rung down the descending batch ladder, None below the last."""
    if current not in BATCH_LADDER:
        raise ValueError(f"batch size {current} is not on the ladder {BATCH_LADDER}")
    idx = BATCH_LADDER.index(current)
    return BATCH_LADDER[idx + 1] if idx + 1 < len(BATCH_LADDER) else None


@dataclass(frozen=True)
class LoraConfig:
    r: int = LORA_R
    alpha: float = LORA_ALPHA
    dropout: float = LORA_DROPOUT

    def __post_init__(self) -> None:
        if self.r < 1:
            raise ValueError("lora r must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("lora dropout must be in [0, 1)")


@dataclass(frozen=True)
class TrainRun:
    """One fully specified fine-tuning run.

    Invariants: hyperparameters come from the grid sets, batch_size from
    the ladder, max_length is 128, epochs match the model's size class,
    and lora is present exactly for 7B-class models.
    """

    model_id: str
    learning_rate: float
    weight_decay: float
    batch_size: int
    epochs: int
    seed: int = 0
    max_length: int = MAX_LENGTH
    lora: LoraConfig | None = None
    int8: bool = False

    def __post_init__(self) -> None:
        spec = get_spec(self.model_id)
        if self.learning_rate not in GRID_LEARNING_RATES:
            raise ValueError(f"learning rate must come from {GRID_LEARNING_RATES}")
        if self.weight_decay not in GRID_WEIGHT_DECAYS:
            raise ValueError(f"weight decay must come from {GRID_WEIGHT_DECAYS}")
        if self.batch_size not in BATCH_LADDER:
            raise ValueError(f"batch size must come from the ladder {BATCH_LADDER}")
        if self.max_length != MAX_LENGTH:
            raise ValueError(f"max_length is fixed at {MAX_LENGTH}")
        if self.epochs != spec.default_epochs:
            raise ValueError(
                f"{self.model_id} trains for {spec.default_epochs} epochs, got {self.epochs}"
            )
        if spec.seven_b and self.lora is None:
            raise ValueError(f"{self.model_id} is 7B-class and requires lora")
        if not spec.seven_b and self.lora is not None:
            raise ValueError(f"{self.model_id} is below the 7B threshold; lora not allowed")


def build_run(
    model_id: str,
    learning_rate: float = 5e-5,
    weight_decay: float = 0.01,
    batch_size: int = 8,
    seed: int = 0,
    int8: bool = False,
) -> TrainRun:
    """TrainRun with size-class fields (epochs, lora) filled from the registry."""
    spec = get_spec(model_id)
    return TrainRun(
        model_id=model_id,
        learning_rate=learning_rate,
        weight_decay=weight_decay,
        batch_size=batch_size,
        epochs=spec.default_epochs,
        seed=seed,
        lora=LoraConfig() if spec.seven_b else None,
        int8=int8,
    )


def pick_batch_size(spec: ModelSpec, budget_mb: float | None = None) -> int:
    """Largest ladder batch whose activation estimate fits budget_mb.

    With no budget the top of the ladder is used. Raises BatchTooLarge
    when even the smallest rung does not fit.
    """
    if budget_mb is None:
        return BATCH_LADDER[0]
    for size in BATCH_LADDER:
        if _batch_cost_mb(spec, size) <= budget_mb:
            return size
    raise BatchTooLarge(BATCH_LADDER[-1], None)


def _batch_cost_mb(spec: ModelSpec, batch_size: int) -> float:
    # crude activation estimate: tokens * a per-token cost that grows
    # with parameter count; only relative order matters for the ladder
    per_token_kb = 4.0 * max(spec.params_b, 0.05)
    return batch_size * MAX_LENGTH * per_token_kb / 1024.0


@dataclass
class TrainResult:
    run: TrainRun
    model: TinyClassifier
    tokenizer: Tokenizer
    epochs_run: int
    stopped_early: bool
    train_losses: list[float]
    val_losses: list[float]
    best_val_loss: float


@dataclass
class FinetuneResult:
    run: TrainRun
    artifact_dir: Path
    report: dict
    epochs_run: int
    stopped_early: bool
    val_losses: list[float] = field(default_factory=list)


class _AdamW:
    """AdamW with decoupled weight decay and a linear warm-up schedule."""

    def __init__(self, params: dict[str, np.ndarray], lr: float, weight_decay: float, total_steps: int):
        self.params = params
        self.lr = lr
        self.weight_decay = weight_decay
        self.total_steps = max(total_steps, 1)
        self.warmup_steps = max(1, math.ceil(WARMUP_FRACTION * self.total_steps))
        self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step_lr(self) -> float:
        # linear warm-up then linear decay to zero
        t = self.t
        if t <= self.warmup_steps:
            return self.lr * t / self.warmup_steps
        remaining = self.total_steps - t
        span = self.total_steps - self.warmup_steps
        return self.lr * max(remaining, 0) / max(span, 1)

    def step(self, grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        lr_t = self.step_lr()
        for name, p in self.params.items():
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1 - self.beta2) * g * g
            mhat = self.m[name] / (1 - self.beta1**self.t)
            vhat = self.v[name] / (1 - self.beta2**self.t)
            p -= lr_t * mhat / (np.sqrt(vhat) + self.eps)
            if self.weight_decay and name != "head_b":
                p -= lr_t * self.weight_decay * p


def train_model(
    train: list[Example],
    val: list[Example],
    run: TrainRun,
    budget_mb: float | None = None,
) -> TrainResult:
    """Train on the given split, early-stopping on validation loss."""
    if not train or not val:
        raise ValueError("train and validation sets must be non-empty")
    spec = get_spec(run.model_id)
    if budget_mb is not None and _batch_cost_mb(spec, run.batch_size) > budget_mb:
        raise BatchTooLarge(run.batch_size, next_batch_size(run.batch_size))

    tokenizer = Tokenizer.build([ex.text for ex in train])
    model = TinyClassifier(
        tokenizer.vocab_size,
        seed=run.seed,
        lora_r=run.lora.r if run.lora else 0,
        lora_alpha=run.lora.alpha if run.lora else 0.0,
        lora_dropout=run.lora.dropout if run.lora else 0.0,
    )

    x_train = tokenizer.encode_batch([ex.text for ex in train])
    y_train = np.array([ex.label for ex in train], dtype=np.int64)
    x_val = tokenizer.encode_batch([ex.text for ex in val])
    y_val = np.array([ex.label for ex in val], dtype=np.int64)

    steps_per_epoch = math.ceil(len(train) / run.batch_size)
    opt = _AdamW(
        model.trainable(),
        lr=run.learning_rate,
        weight_decay=run.weight_decay,
        total_steps=run.epochs * steps_per_epoch,
    )
    rng = np.random.default_rng(run.seed)

    best_loss = math.inf
    best_state = {k: v.copy() for k, v in model.state().items()}
    bad_epochs = 0
    train_losses: list[float] = []
    val_losses: list[float] = []
    epochs_run = 0
    stopped_early = False

    for epoch in range(run.epochs):
        epochs_run = epoch + 1
        order = rng.permutation(len(train))
        epoch_loss = 0.0
        for start in range(0, len(train), run.batch_size):
            batch = order[start : start + run.batch_size]
            loss, grads = model.loss_and_grads(x_train[batch], y_train[batch], rng=rng)
            opt.step(grads)
            epoch_loss += loss * len(batch)
        train_losses.append(epoch_loss / len(train))

        val_loss, _ = model.loss_and_grads(x_val, y_val, rng=None)
        val_losses.append(val_loss)
        if val_loss < best_loss:
            best_loss = val_loss
            best_state = {k: v.copy() for k, v in model.state().items()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= PATIENCE:
                stopped_early = True
                break

    model.load_state(best_state)
    return TrainResult(
        run=run,
        model=model,
        tokenizer=tokenizer,
        epochs_run=epochs_run,
        stopped_early=stopped_early,
        train_losses=train_losses,
        val_losses=val_losses,
        best_val_loss=best_loss,
    )


def finetune(
    dataset_path: str | Path,
    run: TrainRun,
    out_dir: str | Path,
    budget_mb: float | None = None,
) -> FinetuneResult:
    """Fine-tune on an 80/10/10 split and save an artifact plus report.

    The returned report (also written next to the artifact) follows the
    shared evaluation schema and covers the held-out test split.
    """
    examples = load_dataset(dataset_path)
    train, val, test = split_dataset(examples, seed=run.seed)
    result = train_model(train, val, run, budget_mb=budget_mb)

    x_test = result.tokenizer.encode_batch([ex.text for ex in test])
    preds = result.model.scores(x_test).argmax(axis=1)
    report = report_from_predictions([ex.label for ex in test], [int(p) for p in preds])

    out_dir = Path(out_dir)
    artifact_dir = save_artifact(
        out_dir,
        model=result.model,
        tokenizer=result.tokenizer,
        run=run,
        report=report,
        epochs_run=result.epochs_run,
        stopped_early=result.stopped_early,
    )
    log.info(
        "finetune %s lr=%g wd=%g batch=%d: epochs=%d weighted_f1=%.4f",
        run.model_id,
        run.learning_rate,
        run.weight_decay,
        run.batch_size,
        result.epochs_run,
        report["weighted_f1"],
    )
    return FinetuneResult(
        run=run,
        artifact_dir=artifact_dir,
        report=report,
        epochs_run=result.epochs_run,
        stopped_early=result.stopped_early,
        val_losses=result.val_losses,
    )


def grid(
    dataset_path: str | Path,
    model_id: str,
    out_dir: str | Path,
    batch_size: int = 8,
    seed: int = 0,
) -> tuple[list[FinetuneResult], FinetuneResult]:
    """Exhaustive 3x3 grid over learning rate and weight decay.

    Trains exactly nine runs, one per (lr, wd) cell, each saved under
    out_dir/run-NN. Returns all results and the one with the best
    test-split weighted F1 (ties go to the earlier cell).
    """
    out_dir = Path(out_dir)
    results: list[FinetuneResult] = []
    for i, lr in enumerate(GRID_LEARNING_RATES):
        for j, wd in enumerate(GRID_WEIGHT_DECAYS):
            run = build_run(model_id, learning_rate=lr, weight_decay=wd, batch_size=batch_size, seed=seed)
            cell = i * len(GRID_WEIGHT_DECAYS) + j
            log.info("grid cell %d/9 lr=%g wd=%g", cell + 1, lr, wd)
            results.append(finetune(dataset_path, run, out_dir / f"run-{cell:02d}"))
    best = max(results, key=lambda r: r.report["weighted_f1"])
    log.info(
        "grid best lr=%g wd=%g weighted_f1=%.4f",
        best.run.learning_rate,
        best.run.weight_decay,
        best.report["weighted_f1"],
    )
    return results, best
