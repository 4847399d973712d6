"""Classification contract shared by every backend (native or remote)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, runtime_checkable

from satdscan.labels import LABEL_ORDER, Label, decode_label
from satdscan.preprocess import is_normalized

SCORE_SUM_TOL = 1e-6


class BackendFailure(RuntimeError):
    """A backend failed for texts[start:stop]. No partial results are kept."""

    def __init__(self, start: int, stop: int, message: str = ""):
        detail = message or "backend failed"
        super().__init__(f"{detail} (texts {start}..{stop})")
        self.start = start
        self.stop = stop


def argmax_label(scores: Mapping[Label, float]) -> Label:
    """Highest-scoring label; ties go to the lowest canonical order index."""
    best = LABEL_ORDER[0]
    for label in LABEL_ORDER[1:]:
        if scores[label] > scores[best]:
            best = label
    return best


@dataclass(frozen=True)
class Classification:
    label: Label
    scores: Mapping[Label, float]

    def __post_init__(self):
        if set(self.scores.keys()) != set(LABEL_ORDER):
            raise ValueError("scores must cover exactly the six labels")
        for label, s in self.scores.items():
            if not -1e-9 <= s <= 1.0 + 1e-9:
                raise ValueError(f"score for {label.value} out of [0,1]: {s}")
        total = sum(self.scores.values())
        if abs(total - 1.0) > SCORE_SUM_TOL:
            raise ValueError(f"scores sum to {total}, expected 1 within {SCORE_SUM_TOL}")
        if self.label is not argmax_label(self.scores):
            raise ValueError("label must be the tie-broken argmax of scores")

    def to_wire(self) -> dict:
        return {
            "label": self.label.value,
            "scores": {label.value: float(s) for label, s in self.scores.items()},
        }

    @classmethod
    def from_wire(cls, obj: dict) -> "Classification":
        label = decode_label(obj["label"])
        scores = {decode_label(name): float(v) for name, v in obj["scores"].items()}
        return cls(label=label, scores=scores)


def one_hot(label: Label) -> dict:
    return {l: (1.0 if l is label else 0.0) for l in LABEL_ORDER}


@runtime_checkable
class Classifier(Protocol):
    def classify_batch(self, texts: list) -> list:
        ...


def classify(texts: Iterable[str], backend: Classifier) -> list[Classification]:
    """One Classification per text, order preserving.

    Every input must already be normalized; batching is the backend's
    concern. A backend exception fails the whole call with the affected
    index range, never a partial result.
    """
    texts = list(texts)
    for i, text in enumerate(texts):
        if not is_normalized(text):
            raise ValueError(f"texts[{i}] is not normalized: {text!r}")
    if not texts:
        return []
    try:
        results = backend.classify_batch(texts)
    except BackendFailure:
        raise
    except Exception as exc:
        raise BackendFailure(0, len(texts), str(exc)) from exc
    if len(results) != len(texts):
        raise BackendFailure(0, len(texts),
                             f"backend returned {len(results)} results for {len(texts)} texts")
    return results


@dataclass(frozen=True)
class MajorityBackend:
    """Predicts one fixed label. Baseline for dominance checks."""

    label: Label

    @classmethod
    def fit(cls, examples) -> "MajorityBackend":
        counts = {l: 0 for l in LABEL_ORDER}
        for ex in examples:
            counts[ex.label] += 1
        return cls(label=argmax_label(counts))

    def classify_batch(self, texts: list) -> list:
        result = Classification(label=self.label, scores=one_hot(self.label))
        return [result for _ in texts]
