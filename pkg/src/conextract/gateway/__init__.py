"""Uniform access to LLM backends with a persistent response cache."""

from __future__ import annotations

import logging
import threading
from pathlib import Path
from typing import Sequence

from ..fewshot import EmbeddingVector
from .cache import EmbeddingCache, ResponseCache
from .mock import MOCK_KINDS, ReplayBackend, hash_embedding, make_mock_backend, mock_tokenize
from .openai import OpenAICompatibleBackend
from .types import (
    Backend,
    BackendCompatibilityError,
    GatewayError,
    GenerationRequest,
    GenerationResult,
    ReplayMissError,
    RetryableError,
    TokenLogprob,
    cache_key,
)

log = logging.getLogger(__name__)

EMBED_BATCH = 64

__all__ = [
    "Backend",
    "BackendCompatibilityError",
    "EmbeddingCache",
    "Gateway",
    "GatewayError",
    "GenerationRequest",
    "GenerationResult",
    "MOCK_KINDS",
    "OpenAICompatibleBackend",
    "ReplayBackend",
    "ReplayMissError",
    "ResponseCache",
    "RetryableError",
    "TokenLogprob",
    "cache_key",
    "hash_embedding",
    "make_mock_backend",
    "mock_tokenize",
]


class Gateway:
    """Cache-first front for a backend, with a bound on in-flight requests.

    ``backend`` may be None when every request is expected to hit the cache.
    """

    def __init__(
        self,
        backend: Backend | None,
        cache: ResponseCache | None = None,
        embedding_cache: EmbeddingCache | None = None,
        max_concurrency: int = 4,
    ) -> None:
        self.backend = backend
        self.cache = cache if cache is not None else ResponseCache()
        self.embedding_cache = embedding_cache if embedding_cache is not None else EmbeddingCache()
        self._slots = threading.BoundedSemaphore(max(1, max_concurrency))
        self._count_lock = threading.Lock()
        self.backend_calls = 0
        self.warnings: list[str] = []

    @classmethod
    def from_paths(
        cls,
        backend: Backend | None,
        cache_path: str | Path | None,
        max_concurrency: int = 4,
    ) -> "Gateway":
        embedding_path = None
        if cache_path is not None:
            p = Path(cache_path)
            embedding_path = p.with_name(p.stem + ".embeddings.jsonl")
        return cls(backend, ResponseCache(cache_path), EmbeddingCache(embedding_path), max_concurrency)

    def _require_backend(self) -> Backend:
        if self.backend is None:
            raise GatewayError("cache miss and no backend configured")
        return self.backend

    def complete(self, req: GenerationRequest) -> GenerationResult:
        key = cache_key(req)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        backend = self._require_backend()
        with self._slots:
            result = backend.complete(req)
        with self._count_lock:
            self.backend_calls += 1
            self.warnings.extend(result.warnings)
        self.cache.put(key, result, request=req.canonical())
        return result

    def embed(self, texts: Sequence[str], model_id: str) -> list[EmbeddingVector]:
        if not texts:
            raise GatewayError("embed needs at least one text")
        vectors: list[list[float] | None] = [self.embedding_cache.get(model_id, t) for t in texts]
        missing = sorted({t for t, v in zip(texts, vectors) if v is None})
        if missing:
            backend = self._require_backend()
            for start in range(0, len(missing), EMBED_BATCH):
                batch = missing[start : start + EMBED_BATCH]
                with self._slots:
                    fresh = backend.embed(batch, model_id)
                with self._count_lock:
                    self.backend_calls += 1
                for text, vec in zip(batch, fresh):
                    self.embedding_cache.put(model_id, text, vec)
            vectors = [self.embedding_cache.get(model_id, t) for t in texts]
        return [EmbeddingVector(tuple(v), model_id) for v in vectors]  # type: ignore[arg-type]
