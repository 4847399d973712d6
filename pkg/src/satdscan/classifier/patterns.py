"""Keyword-pattern backend. First matching substring wins; no match
means NonSatd. The default rule list is a small documented placeholder,
not a curated pattern catalog."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from satdscan.labels import Label, decode_label
from satdscan.classifier.base import Classification, one_hot


@dataclass(frozen=True)
class PatternRuleSet:
    rules: tuple  # ((pattern, Label), ...) in match-priority order
    default: Label = Label.NON_SATD

    def __post_init__(self):
        for pattern, label in self.rules:
            if not pattern:
                raise ValueError("patterns must be non-empty")
            if pattern != pattern.lower():
                raise ValueError(f"patterns must be lowercase: {pattern!r}")
            if not isinstance(label, Label):
                raise ValueError(f"rule label must be a Label, got {label!r}")

    def match(self, text: str) -> Label:
        for pattern, label in self.rules:
            if pattern in text:
                return label
        return self.default

    def classify_batch(self, texts) -> list:
        out = []
        for text in texts:
            label = self.match(text)
            out.append(Classification(label=label, scores=one_hot(label)))
        return out

    @classmethod
    def from_file(cls, path) -> "PatternRuleSet":
        """Load rules from JSON: {"rules": [{"pattern":..., "label": wire}...],
        "default": wire (optional)}. List order is match priority."""
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        rules = tuple(
            (item["pattern"], decode_label(item["label"])) for item in payload["rules"]
        )
        default = decode_label(payload.get("default", Label.NON_SATD.value))
        return cls(rules=rules, default=default)


# Multi-word admissions are checked before the single keywords they contain.
DEFAULT_RULES = PatternRuleSet(rules=(
    ("does not work", Label.CODE_DESIGN),
    ("not correct", Label.SCIENTIFIC),
    ("todo", Label.REQUIREMENT),
    ("fixme", Label.CODE_DESIGN),
    ("hack", Label.CODE_DESIGN),
    ("xxx", Label.CODE_DESIGN),
    ("workaround", Label.CODE_DESIGN),
))
