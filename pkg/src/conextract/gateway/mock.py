"""Deterministic offline backends for tests and no-network runs."""

from __future__ import annotations

import hashlib
import math
import re
from pathlib import Path
from typing import Sequence

from ..corpus import DatasetSplit, load_split
from .cache import ResponseCache
from .types import GatewayError, GenerationRequest, GenerationResult, ReplayMissError, TokenLogprob, cache_key

MOCK_KINDS = ("echo-gold", "noisy-gold", "replay")
NOISY_PREFIX = "Sure, I'd be happy to help!\n"
UNIFORM_LOGPROB = math.log(0.5)
HASH_EMBEDDING_DIM = 64

_TOKEN_RE = re.compile(r"\s*(?:\w+|[^\w\s])|\s+")


def mock_tokenize(text: str) -> list[str]:
    """Split into word / punctuation pieces carrying their leading whitespace."""
    return _TOKEN_RE.findall(text)


def hash_embedding(text: str, dim: int = HASH_EMBEDDING_DIM) -> list[float]:
    """Signed feature-hashing bag of words; stands in for a sentence encoder offline."""
    vec = [0.0] * dim
    for word in re.findall(r"\w+", text.casefold()):
        digest = hashlib.sha256(word.encode("utf-8")).digest()
        idx = int.from_bytes(digest[:4], "big") % (dim - 1)
        vec[idx] += 1.0 if digest[4] & 1 else -1.0
    vec[-1] = 0.1  # keeps every vector non-zero
    return vec


class _GoldBackend:
    def __init__(self, split: DatasetSplit, noisy: bool) -> None:
        self.split = split
        self.noisy = noisy
        self.backend_id = "mock:noisy-gold" if noisy else "mock:echo-gold"
        self.calls = 0

    def _gold_for(self, req: GenerationRequest) -> tuple[str, ...]:
        content = req.messages[-1].content
        best = None
        for doc, gold in self.split.entries:
            if doc.text in content and (best is None or len(doc.text) > len(best[0].text)):
                best = (doc, gold)
        if best is None:
            raise GatewayError(f"{self.backend_id}: the final user message matches no fixture document")
        return best[1].keyphrases

    def render(self, phrases: Sequence[str]) -> str:
        if not self.noisy:
            return ", ".join(phrases)
        parts = [NOISY_PREFIX]
        for i, phrase in enumerate(phrases):
            if i:
                parts.append("; " if i % 2 else "\n* ")
            parts.append(phrase)
        return "".join(parts)

    def complete(self, req: GenerationRequest) -> GenerationResult:
        self.calls += 1
        text = self.render(self._gold_for(req))
        tokens = tuple(TokenLogprob(t, UNIFORM_LOGPROB) for t in mock_tokenize(text)) if req.want_logprobs else ()
        return GenerationResult(text=text, tokens=tokens, backend_id=self.backend_id)

    def embed(self, texts: Sequence[str], model_id: str) -> list[list[float]]:
        self.calls += 1
        return [hash_embedding(t) for t in texts]


class ReplayBackend:
    """Serves recorded completions from a response-cache file; never generates."""

    def __init__(self, fixture: str | Path) -> None:
        path = Path(fixture)
        if not path.exists():
            raise GatewayError(f"replay fixture {path} does not exist")
        self.cache = ResponseCache(path)
        self.backend_id = f"mock:replay:{path.name}"
        self.calls = 0

    def complete(self, req: GenerationRequest) -> GenerationResult:
        self.calls += 1
        key = cache_key(req)
        result = self.cache.get(key)
        if result is None:
            raise ReplayMissError(f"no recorded completion for cache key {key}")
        return GenerationResult(text=result.text, tokens=result.tokens, backend_id=result.backend_id)

    def embed(self, texts: Sequence[str], model_id: str) -> list[list[float]]:
        raise ReplayMissError("replay backend has no embeddings; pre-populate the embedding cache")


def make_mock_backend(kind: str, fixture: str | Path | DatasetSplit, field_map=None):
    """Build an offline backend.

    ``echo-gold`` and ``noisy-gold`` answer with the gold phrases of the
    document found in the final user message (``fixture`` is a dataset split
    or its JSONL path); ``replay`` serves a recorded response cache.
    """
    if kind == "replay":
        if isinstance(fixture, DatasetSplit):
            raise GatewayError("replay needs a response-cache file, not a dataset")
        return ReplayBackend(fixture)
    if kind in ("echo-gold", "noisy-gold"):
        split = fixture if isinstance(fixture, DatasetSplit) else load_split(fixture, field_map=field_map)
        return _GoldBackend(split, noisy=kind == "noisy-gold")
    raise GatewayError(f"unknown mock backend {kind!r}; choose from {', '.join(MOCK_KINDS)}")
