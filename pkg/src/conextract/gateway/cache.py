"""Append-only JSONL caches for completions and embeddings."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from pathlib import Path
from typing import Iterator

from .types import GenerationResult, canonical_json

log = logging.getLogger(__name__)


def _read_jsonl(path: Path) -> Iterator[dict]:
    if not path.exists():
        return
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError:
                # a torn final write must not poison the whole cache
                log.warning("%s:%d: skipping unreadable cache line", path, lineno)
                continue
            if isinstance(record, dict):
                yield record


class ResponseCache:
    """Completion cache keyed by :func:`cache_key`; in-memory when ``path`` is None.

    Later lines win on key collisions, so the file never needs rewriting.
    """

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        if self.path is not None:
            for record in _read_jsonl(self.path):
                if "key" in record and "value" in record:
                    self._entries[record["key"]] = record

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def get(self, key: str) -> GenerationResult | None:
        with self._lock:
            record = self._entries.get(key)
            if record is None:
                self.misses += 1
                return None
            self.hits += 1
        return GenerationResult.from_dict(record["value"], cached=True)

    def put(self, key: str, result: GenerationResult, request: dict | None = None) -> None:
        record = {"key": key, "value": result.to_dict(), "created_at": time.time()}
        if request is not None:
            record["request"] = request
        line = canonical_json(record) + "\n"
        with self._lock:
            self._entries[key] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line)

    def records(self) -> list[dict]:
        with self._lock:
            return list(self._entries.values())

    def clear(self) -> None:
        with self._lock:
            self._entries.clear()
            if self.path is not None and self.path.exists():
                self.path.unlink()

    def export(self, dest: str | Path) -> int:
        """Write a compacted copy (one line per key, sorted) and return the entry count."""
        records = sorted(self.records(), key=lambda r: r["key"])
        with Path(dest).open("w", encoding="utf-8") as fh:
            for record in records:
                fh.write(canonical_json(record) + "\n")
        return len(records)

    def hit_ratio(self) -> float:
        total = self.hits + self.misses
        return self.hits / total if total else 0.0


def text_sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """Embedding vectors keyed by (model_id, sha256 of the text)."""

    def __init__(self, path: str | Path | None = None) -> None:
        self.path = Path(path) if path is not None else None
        self._vectors: dict[tuple[str, str], list[float]] = {}
        self._lock = threading.Lock()
        if self.path is not None:
            for record in _read_jsonl(self.path):
                try:
                    self._vectors[(record["model_id"], record["text_sha256"])] = list(record["vector"])
                except KeyError:
                    log.warning("%s: skipping embedding record without model_id/text_sha256/vector", self.path)

    def __len__(self) -> int:
        return len(self._vectors)

    def get(self, model_id: str, text: str) -> list[float] | None:
        return self._vectors.get((model_id, text_sha256(text)))

    def put(self, model_id: str, text: str, vector: list[float]) -> None:
        digest = text_sha256(text)
        record = {"model_id": model_id, "text_sha256": digest, "vector": vector}
        with self._lock:
            self._vectors[(model_id, digest)] = list(vector)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record) + "\n")
