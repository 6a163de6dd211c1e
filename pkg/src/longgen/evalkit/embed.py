"""Text embedders for the semantic metrics.

External embedding services plug in behind the `TextEmbedder` protocol; the
shipped default is a hashed bag of character trigrams, which is
deterministic and language-agnostic, so metric mechanics can be tested
exactly with no model downloads.
"""

from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np


class TextEmbedder(Protocol):
    """Deterministic map from text to a unit-norm vector of fixed dimension."""

    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cannot take cosine of a zero vector")
    return float(np.dot(a, b) / (na * nb))


class HashedTrigramEmbedder:
    """Counts of character trigrams hashed into a fixed number of buckets,
    L2-normalized.  Texts with disjoint trigram sets mapping to disjoint
    buckets embed orthogonally, which is what the exact-zero tests rely on.
    """

    def __init__(self, dim: int = 256, hash_seed: int = 0):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._key = hash_seed.to_bytes(8, "little", signed=False)

    def _bucket(self, trigram: str) -> int:
        digest = hashlib.blake2b(trigram.encode("utf-8"), digest_size=8, key=self._key).digest()
        return int.from_bytes(digest, "little") % self.dim

    def trigrams(self, text: str) -> list[str]:
        if len(text) < 3:
            return [text] if text else []
        return [text[i : i + 3] for i in range(len(text) - 2)]

    def buckets(self, text: str) -> set[int]:
        return {self._bucket(t) for t in self.trigrams(text)}

    def embed(self, text: str) -> np.ndarray:
        if not text:
            raise ValueError("cannot embed empty text")
        vec = np.zeros(self.dim, dtype=np.float64)
        for tri in self.trigrams(text):
            vec[self._bucket(tri)] += 1.0
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            raise ValueError("text produced no trigram counts")
        return vec / norm


def default_embedder() -> HashedTrigramEmbedder:
    return HashedTrigramEmbedder()
