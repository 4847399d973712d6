"""Shared fixtures: synthetic labeled corpora and transcribed survey tables."""

import json
import random
from pathlib import Path

import pytest

from satdscan.analyzer import RepoReport
from satdscan.corpus import LabeledExample
from satdscan.labels import LABEL_ORDER, Label

FIXTURES = Path(__file__).parent / "fixtures"

# One distinctive vocabulary per label plus shared noise words. With 20%
# noise the mapping stays learnable without being trivially separable.
LABEL_VOCABULARY = {
    Label.NON_SATD: [
        "returns", "handle", "loop", "index", "buffer", "default", "cache", "size",
    ],
    Label.CODE_DESIGN: [
        "hack", "ugly", "refactor", "workaround", "mess", "kludge", "coupling", "smell",
    ],
    Label.DOCUMENTATION: [
        "document", "docs", "comment", "readme", "describe", "undocumented", "docstring", "manual",
    ],
    Label.TEST: [
        "test", "coverage", "assert", "regression", "untested", "flaky", "suite", "mock",
    ],
    Label.REQUIREMENT: [
        "todo", "implement", "missing", "support", "later", "feature", "pending", "eventually",
    ],
    Label.SCIENTIFIC: [
        "precision", "convergence", "boundary", "numerical", "approximation", "unstable",
        "tolerance", "solver",
    ],
}
NOISE_WORDS = [
    "the", "this", "should", "when", "value", "code", "here", "still", "with", "near",
]


def make_synthetic_corpus(per_label=300, noise=0.2, seed=0, n_projects=6,
                          min_words=4, max_words=9):
    """Balanced six-label corpus with label-specific vocabularies."""
    rng = random.Random(seed)
    examples = []
    for label in LABEL_ORDER:
        vocab = LABEL_VOCABULARY[label]
        for _ in range(per_label):
            k = rng.randint(min_words, max_words)
            words = [
                rng.choice(NOISE_WORDS) if rng.random() < noise else rng.choice(vocab)
                for _ in range(k)
            ]
            examples.append(LabeledExample(
                project=f"proj{rng.randrange(n_projects)}",
                text=" ".join(words),
                label=label,
            ))
    rng.shuffle(examples)
    return examples


def load_table_cohort(name):
    """Transcribed survey table -> (raw fixture dict, counts-only RepoReports)."""
    data = json.loads((FIXTURES / "tables" / f"{name}.json").read_text())
    reports = []
    for row in data["rows"]:
        counts = {Label(key): value for key, value in row["counts"].items()}
        reports.append(RepoReport(repo_name=row["repo"], domain_tag=row["domain"],
                                  counts=counts))
    return data, reports


@pytest.fixture(scope="session")
def synthetic_corpus():
    return make_synthetic_corpus(per_label=300, noise=0.2, seed=0)


@pytest.fixture(scope="session")
def small_corpus():
    return make_synthetic_corpus(per_label=60, noise=0.2, seed=1)
