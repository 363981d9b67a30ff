"""Few-shot example selection: fixed, per-document random, and embedding-closest."""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import DatasetSplit, Entry
from .prompts import STANDARD_FS_SIZES

log = logging.getLogger(__name__)

DEFAULT_EMBEDDING_MODEL = "all-mpnet-base-v2"

_MASK64 = (1 << 64) - 1


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    model_id: str

    def __post_init__(self) -> None:
        if not self.values:
            raise SelectionError("embedding vector must not be empty")
        if not all(math.isfinite(v) for v in self.values):
            raise SelectionError("embedding vector has non-finite entries")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class SelectorConfig:
    strategy: str
    n: int
    seed: int = 0
    embedding_model_id: str = DEFAULT_EMBEDDING_MODEL

    def __post_init__(self) -> None:
        if self.strategy not in ("fixed", "random", "closest"):
            raise SelectionError(f"unknown strategy {self.strategy!r}")
        if self.n < 1:
            raise SelectionError("n must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise SelectionError("seed must fit in an unsigned 64-bit integer")
        if self.n not in STANDARD_FS_SIZES:
            log.warning("few-shot n=%d is outside the usual 1/3/5 settings", self.n)


class SplitMix64:
    """SplitMix64 generator (Steele, Lea & Flood 2014); fixed bit stream on every platform."""

    def __init__(self, state: int) -> None:
        self.state = state & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        """Uniform integer in [0, bound) by rejection sampling (no modulo bias)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % bound


def doc_key(seed: int, doc_id: str) -> int:
    """64-bit key for the (seed, doc_id) pair: first 8 bytes of SHA-256, big-endian."""
    payload = f"{seed & _MASK64}\x00{doc_id}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


def _check_n(n: int, available: int) -> None:
    if n < 1:
        raise SelectionError("n must be >= 1")
    if n > available:
        raise SelectionError(f"asked for {n} examples but only {available} are available")


def select_fixed(train: DatasetSplit, n: int) -> list[Entry]:
    _check_n(n, len(train))
    return list(train.entries[:n])


def sample_indices(population: int, n: int, seed: int, doc_id: str) -> list[int]:
    """First ``n`` slots of a partial Fisher-Yates shuffle driven by SplitMix64."""
    _check_n(n, population)
    rng = SplitMix64(doc_key(seed, doc_id))
    pool = list(range(population))
    for i in range(n):
        j = i + rng.below(population - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:n]


def select_random(train: DatasetSplit, n: int, seed: int, doc_id: str) -> list[Entry]:
    return [train.entries[i] for i in sample_indices(len(train), n, seed, doc_id)]


def cosine_similarity(u: EmbeddingVector, v: EmbeddingVector) -> float:
    if u.model_id != v.model_id:
        raise SelectionError(f"embedding models differ: {u.model_id!r} vs {v.model_id!r}")
    if len(u) != len(v):
        raise SelectionError(f"embedding lengths differ: {len(u)} vs {len(v)}")
    a = np.asarray(u.values, dtype=np.float64)
    b = np.asarray(v.values, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise SelectionError("cosine similarity is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def select_closest(
    train_vectors: Sequence[tuple[Entry, EmbeddingVector]],
    query_vector: EmbeddingVector,
    n: int,
) -> list[Entry]:
    """Top-``n`` entries by cosine similarity to the query, most similar first.

    Ties keep training order.
    """
    _check_n(n, len(train_vectors))
    for _, vec in train_vectors:
        if vec.model_id != query_vector.model_id or len(vec) != len(query_vector):
            raise SelectionError("training and query embeddings are not comparable")
    matrix = np.asarray([vec.values for _, vec in train_vectors], dtype=np.float64)
    query = np.asarray(query_vector.values, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1) * np.linalg.norm(query)
    if np.any(norms == 0.0):
        raise SelectionError("cosine similarity is undefined for a zero vector")
    sims = matrix @ query / norms
    order = np.argsort(-sims, kind="stable")
    return [train_vectors[i][0] for i in order[:n]]
