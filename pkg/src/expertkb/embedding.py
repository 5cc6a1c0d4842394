"""Deterministic feature-hashing text embedder (the canonical test backend).

Each token contributes +-1 at one component chosen by its 64-bit FNV-1a
hash; the accumulated vector is L2-normalized. Real dense encoders plug in
behind the same interface.
"""

from __future__ import annotations

import re
from typing import Protocol

import numpy as np

from .errors import EmptyInput
from .runtime import fnv1a64

DEFAULT_DIMENSION = 64

_TOKEN_RE = re.compile(r"[a-z0-9]+")


class EmbeddingBackend(Protocol):
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


class HashingEmbeddingBackend:
    """Pure function of the input text; output is a float64 unit vector."""

    def __init__(self, dimension: int = DEFAULT_DIMENSION):
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        tokens = _TOKEN_RE.findall(text.lower())
        if not tokens:
            raise EmptyInput("no tokens after lowercasing and splitting")
        vec = np.zeros(self.dimension, dtype=np.float64)
        for token in tokens:
            h = fnv1a64(token.encode("utf-8"))
            sign = 1.0 if (h >> 63) == 0 else -1.0
            vec[h % self.dimension] += sign
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            # Opposed-sign collisions can cancel exactly; fall back to a
            # deterministic one-hot so the unit-norm contract still holds.
            h = fnv1a64("\x1f".join(tokens).encode("utf-8"))
            vec[h % self.dimension] = 1.0 if (h >> 63) == 0 else -1.0
            norm = 1.0
        return vec / norm


def mock_embed(text: str, dimension: int = DEFAULT_DIMENSION) -> np.ndarray:
    return HashingEmbeddingBackend(dimension).embed(text)
