"""Evaluation report in the shared JSON schema.

Schema: {"per_label": {wire: {"precision", "recall", "f1", "support"}},
"macro_f1", "weighted_f1"}. Macro averages over all six labels; the
weighted average uses true supports. Undefined ratios are 0.
"""

from __future__ import annotations

from model_server.labels import LABELS, N_LABELS


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def report_from_predictions(y_true: list[int], y_pred: list[int]) -> dict:
    if len(y_true) != len(y_pred):
        raise ValueError("prediction count does not match truth count")
    if not y_true:
        raise ValueError("empty evaluation set")
    counts = [[0] * N_LABELS for _ in range(N_LABELS)]
    for t, p in zip(y_true, y_pred):
        counts[t][p] += 1

    per_label = {}
    f1s = []
    weighted_num = 0.0
    total = len(y_true)
    for i, name in enumerate(LABELS):
        tp = counts[i][i]
        support = sum(counts[i])
        predicted = sum(counts[r][i] for r in range(N_LABELS))
        precision = _ratio(tp, predicted)
        recall = _ratio(tp, support)
        f1 = _ratio(2 * precision * recall, precision + recall)
        per_label[name] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": support,
        }
        f1s.append(f1)
        weighted_num += support * f1
    return {
        "per_label": per_label,
        "macro_f1": sum(f1s) / N_LABELS,
        "weighted_f1": weighted_num / total,
    }


def majority_weighted_f1(y_true: list[int]) -> float:
    """Weighted F1 of always predicting the most frequent true label."""
    if not y_true:
        raise ValueError("empty evaluation set")
    best = max(range(N_LABELS), key=lambda i: y_true.count(i))
    return report_from_predictions(y_true, [best] * len(y_true))["weighted_f1"]
