"""Trainable n-gram baseline: multinomial logistic regression over
unigram+bigram counts, mini-batch gradient descent, cross-entropy loss,
early stopping with patience 2 on validation loss."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from satdscan.classifier.base import Classification
from satdscan.classifier.kernels import get_backend
from satdscan.labels import LABEL_ORDER, Label, decode_label

MODEL_FORMAT = "satdscan-ngram"
MODEL_VERSION = 1


class MissingLabelInTrain(ValueError):
    def __init__(self, label: Label):
        super().__init__(f"training data has no examples labeled {label.value!r}")
        self.label = label


class DegenerateData(ValueError):
    pass


class GradientMismatch(AssertionError):
    def __init__(self, report):
        super().__init__(
            f"worst relative error {report.worst_relative_error:.3e} at weight "
            f"coordinate {report.worst_coordinate}, threshold {report.threshold:g}"
        )
        self.report = report


def _ngrams(tokens):
    yield from tokens
    for a, b in zip(tokens, tokens[1:]):
        yield a + " " + b


def build_vocabulary(texts, min_frequency: int = 2) -> dict:
    counts = Counter()
    for text in texts:
        counts.update(_ngrams(text.split()))
    kept = sorted(ng for ng, c in counts.items() if c >= min_frequency)
    return {ng: i for i, ng in enumerate(kept)}


def featurize(texts, vocabulary) -> tuple:
    """CSR count features. Column indices are sorted within each row."""
    indptr = np.zeros(len(texts) + 1, dtype=np.int64)
    indices = []
    data = []
    for i, text in enumerate(texts):
        row = Counter()
        for ng in _ngrams(text.split()):
            idx = vocabulary.get(ng)
            if idx is not None:
                row[idx] += 1
        for idx in sorted(row):
            indices.append(idx)
            data.append(float(row[idx]))
        indptr[i + 1] = len(indices)
    return indptr, np.asarray(indices, dtype=np.int64), np.asarray(data, dtype=np.float64)


@dataclass(frozen=True)
class NgramModel:
    vocabulary: dict
    weights: np.ndarray
    ngram_orders: tuple = (1, 2)
    training_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        n_features = len(self.vocabulary)
        if sorted(self.vocabulary.values()) != list(range(n_features)):
            raise ValueError("vocabulary indices must be dense in [0, num_features)")
        expected = (len(LABEL_ORDER), n_features + 1)
        if self.weights.shape != expected:
            raise ValueError(f"weights shape {self.weights.shape}, expected {expected}")
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("weights must be finite")

    def scores(self, texts) -> np.ndarray:
        backend = get_backend()
        indptr, indices, data = featurize(texts, self.vocabulary)
        logits = backend.logits(indptr, indices, data, self.weights)
        return backend.softmax(logits)

    def classify_batch(self, texts) -> list:
        probs = self.scores(texts)
        out = []
        for row in probs:
            scores = {label: float(row[i]) for i, label in enumerate(LABEL_ORDER)}
            # row-first argmax = lowest order index among tied maxima
            out.append(Classification(label=LABEL_ORDER[int(np.argmax(row))], scores=scores))
        return out

    def save(self, path):
        payload = {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "labels": [label.value for label in LABEL_ORDER],
            "ngram_orders": list(self.ngram_orders),
            "vocabulary": self.vocabulary,
            "weights": self.weights.tolist(),
            "training_meta": self.training_meta,
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "NgramModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} container")
        if payload.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {payload.get('version')}")
        labels = [decode_label(name) for name in payload["labels"]]
        if labels != list(LABEL_ORDER):
            raise ValueError("model label order does not match the canonical order")
        return cls(
            vocabulary=payload["vocabulary"],
            weights=np.asarray(payload["weights"], dtype=np.float64),
            ngram_orders=tuple(payload["ngram_orders"]),
            training_meta=payload.get("training_meta", {}),
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    weight_decay: float = 0.0  # decoupled L2, never applied to the bias column
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 2
    min_frequency: int = 2
    seed: int = 0
    # The full corpus carries all six labels; small fixtures may not.
    require_all_labels: bool = True


def _mean_xent(probs: np.ndarray, y: np.ndarray) -> float:
    return float(-np.log(probs[np.arange(len(y)), y]).sum() / len(y))


def train_ngram(train, validation, config: TrainConfig = TrainConfig()) -> NgramModel:
    """Deterministic under config.seed: same data + seed gives identical weights."""
    if not train:
        raise ValueError("train set must be non-empty")
    if not validation:
        raise ValueError("validation set must be non-empty")
    present = {ex.label for ex in train}
    if config.require_all_labels:
        for label in LABEL_ORDER:
            if label not in present:
                raise MissingLabelInTrain(label)
    texts = [ex.text for ex in train]
    if len(set(texts)) == 1:
        raise DegenerateData("all training texts are identical")

    backend = get_backend()
    vocabulary = build_vocabulary(texts, min_frequency=config.min_frequency)
    n_features = len(vocabulary)
    indptr, indices, data = featurize(texts, vocabulary)
    y = np.asarray([ex.label.order_index for ex in train], dtype=np.int64)
    val_feats = featurize([ex.text for ex in validation], vocabulary)
    y_val = np.asarray([ex.label.order_index for ex in validation], dtype=np.int64)

    weights = np.zeros((len(LABEL_ORDER), n_features + 1))
    rng = np.random.default_rng(config.seed)
    n = len(train)

    best_loss = math.inf
    best_weights = weights.copy()
    epochs_since_improve = 0
    epochs_run = 0

    for epoch in range(config.max_epochs):
        epochs_run = epoch + 1
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = perm[start:start + config.batch_size]
            b_indptr, b_indices, b_data = _take_rows(indptr, indices, data, batch)
            logits = backend.logits(b_indptr, b_indices, b_data, weights)
            probs = backend.softmax(logits)
            _, grad = backend.xent_grad(b_indptr, b_indices, b_data, probs, y[batch], n_features)
            weights -= config.learning_rate * grad
            if config.weight_decay:
                weights[:, :n_features] *= 1.0 - config.learning_rate * config.weight_decay

        val_logits = backend.logits(*val_feats, weights)
        val_loss = _mean_xent(backend.softmax(val_logits), y_val)
        if val_loss < best_loss:
            best_loss = val_loss
            best_weights = weights.copy()
            epochs_since_improve = 0
        else:
            epochs_since_improve += 1
            if epochs_since_improve >= config.patience:
                break

    meta = {
        "seed": config.seed,
        "epochs": epochs_run,
        "learning_rate": config.learning_rate,
        "weight_decay": config.weight_decay,
        "batch_size": config.batch_size,
        "min_frequency": config.min_frequency,
        "best_validation_loss": best_loss,
        "stopped_early": epochs_run < config.max_epochs,
    }
    return NgramModel(vocabulary=vocabulary, weights=best_weights, training_meta=meta)


def _take_rows(indptr, indices, data, rows):
    sub_indptr = np.zeros(len(rows) + 1, dtype=np.int64)
    parts_i = []
    parts_d = []
    for out_i, r in enumerate(rows):
        lo, hi = indptr[r], indptr[r + 1]
        parts_i.append(indices[lo:hi])
        parts_d.append(data[lo:hi])
        sub_indptr[out_i + 1] = sub_indptr[out_i] + (hi - lo)
    if parts_i:
        return sub_indptr, np.concatenate(parts_i), np.concatenate(parts_d)
    return sub_indptr, np.empty(0, dtype=np.int64), np.empty(0, dtype=np.float64)


@dataclass(frozen=True)
class GradientCheckReport:
    passed: bool
    checked: int
    threshold: float
    worst_coordinate: tuple
    worst_relative_error: float


def evaluate_gradient(model: NgramModel, batch, seed: int = 0,
                      sample_fraction: float = 0.01,
                      threshold: float = 1e-4,
                      step: float = 1e-5) -> GradientCheckReport:
    """Check the analytic cross-entropy gradient against central differences.

    Pass/fail threshold is relative error 1e-4 on a sampled 1% of weight
    coordinates (at least one). Raises GradientMismatch on failure; the
    report names the worst coordinate either way.
    """
    if len(batch) > 8:
        raise ValueError("gradient check batches are capped at 8 examples")
    if not batch:
        raise ValueError("gradient check needs a non-empty batch")
    backend = get_backend()
    n_features = len(model.vocabulary)
    feats = featurize([ex.text for ex in batch], model.vocabulary)
    y = np.asarray([ex.label.order_index for ex in batch], dtype=np.int64)

    weights = model.weights.copy()
    probs = backend.softmax(backend.logits(*feats, weights))
    _, grad = backend.xent_grad(*feats, probs, y, n_features)

    def loss_at(w):
        return _mean_xent(backend.softmax(backend.logits(*feats, w)), y)

    rng = np.random.default_rng(seed)
    total = weights.size
    m = max(1, round(sample_fraction * total))
    coords = rng.choice(total, size=min(m, total), replace=False)

    worst_err = 0.0
    worst_coord = (0, 0)
    for flat in coords:
        l, j = divmod(int(flat), weights.shape[1])
        saved = weights[l, j]
        weights[l, j] = saved + step
        up = loss_at(weights)
        weights[l, j] = saved - step
        down = loss_at(weights)
        weights[l, j] = saved
        numeric = (up - down) / (2.0 * step)
        analytic = grad[l, j]
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
        if rel > worst_err:
            worst_err = rel
            worst_coord = (l, j)

    report = GradientCheckReport(
        passed=bool(worst_err <= threshold),
        checked=len(coords),
        threshold=threshold,
        worst_coordinate=worst_coord,
        worst_relative_error=float(worst_err),
    )
    if not report.passed:
        raise GradientMismatch(report)
    return report
