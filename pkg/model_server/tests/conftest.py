import json
import random
from pathlib import Path

import pytest

from model_server.training import build_run, finetune

GOLDEN_PATH = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "protocol" / "golden.json"

# label-specific vocabularies for the toy task; disjoint so the split is
# learnable by a small model in a handful of epochs
WORDS = {
    "non-satd": ["compute", "mean", "value", "return", "result", "loop"],
    "code-design": ["hack", "refactor", "ugly", "coupling", "workaround", "brittle"],
    "documentation": ["docs", "comment", "explain", "readme", "describe", "outdated"],
    "test": ["test", "coverage", "assert", "mock", "flaky", "regression"],
    "requirement": ["todo", "implement", "missing", "feature", "later", "support"],
    "scientific": ["units", "precision", "converge", "approximation", "tolerance", "solver"],
}

FILLER = ["the", "a", "this", "for", "and"]

TINY_MODEL = "deepseek-ai/DeepSeek-R1-Distill-Qwen-1.5B"


def make_toy_rows(per_label: int = 100, seed: int = 5) -> list[dict]:
    rng = random.Random(seed)
    rows = []
    for label, words in WORDS.items():
        for i in range(per_label):
            picked = [rng.choice(words) for _ in range(rng.randint(4, 8))]
            picked += [rng.choice(FILLER) for _ in range(rng.randint(0, 2))]
            rng.shuffle(picked)
            rows.append({
                "project": f"proj-{i % 4}",
                "text": " ".join(picked),
                "label": label,
            })
    rng.shuffle(rows)
    return rows


def write_jsonl(rows: list[dict], path: Path) -> Path:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


@pytest.fixture(scope="session")
def toy_dataset(tmp_path_factory) -> Path:
    path = tmp_path_factory.mktemp("data") / "toy.jsonl"
    return write_jsonl(make_toy_rows(), path)


@pytest.fixture(scope="session")
def trained(toy_dataset, tmp_path_factory):
    """One fine-tuned artifact shared by the serving tests."""
    run = build_run(TINY_MODEL, learning_rate=1e-4, weight_decay=0.0, batch_size=8, seed=0)
    out = tmp_path_factory.mktemp("artifacts") / "tiny"
    return finetune(toy_dataset, run, out)


@pytest.fixture(scope="session")
def golden() -> dict:
    return json.loads(GOLDEN_PATH.read_text(encoding="utf-8"))
