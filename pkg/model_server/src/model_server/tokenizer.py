"""Word-level tokenizer with fixed-length padding.

Sequences are padded or truncated to exactly max_length ids, matching the
serving contract's advertised input window.
"""

from __future__ import annotations

import re

import numpy as np

from model_server.labels import MAX_LENGTH

PAD_ID = 0
UNK_ID = 1
_RESERVED = 2

_WORD = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


class Tokenizer:
    def __init__(self, tokens: list[str], max_length: int = MAX_LENGTH):
        if max_length < 1:
            raise ValueError("max_length must be positive")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.tokens = list(tokens)
        self.max_length = max_length
        self._ids = {tok: i + _RESERVED for i, tok in enumerate(tokens)}

    @property
    def vocab_size(self) -> int:
        # includes PAD and UNK
        return len(self.tokens) + _RESERVED

    @classmethod
    def build(cls, texts: list[str], max_vocab: int = 20000, max_length: int = MAX_LENGTH) -> "Tokenizer":
        counts: dict[str, int] = {}
        for text in texts:
            for tok in tokenize(text):
                counts[tok] = counts.get(tok, 0) + 1
        # most frequent first, ties broken lexicographically for determinism
        ranked = sorted(counts, key=lambda t: (-counts[t], t))[:max_vocab]
        return cls(ranked, max_length=max_length)

    def encode(self, text: str) -> list[int]:
        ids = [self._ids.get(tok, UNK_ID) for tok in tokenize(text)]
        ids = ids[: self.max_length]
        ids.extend([PAD_ID] * (self.max_length - len(ids)))
        return ids

    def encode_batch(self, texts: list[str]) -> np.ndarray:
        return np.array([self.encode(t) for t in texts], dtype=np.int64)
