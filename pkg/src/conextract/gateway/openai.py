"""Client for OpenAI-compatible ``/chat/completions`` and ``/embeddings`` endpoints."""

from __future__ import annotations

import logging
import os
import time
from typing import Callable, Sequence

import httpx

from .types import (
    BackendCompatibilityError,
    GatewayError,
    GenerationRequest,
    GenerationResult,
    RetryableError,
    TokenLogprob,
)

log = logging.getLogger(__name__)

RETRY_STATUSES = frozenset({408, 429, 500, 502, 503, 504})


class OpenAICompatibleBackend:
    """Greedy chat completions with chosen-token logprobs.

    ``base_url`` is the API root including the version segment,
    e.g. ``http://localhost:8000/v1``.
    """

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout_s: float = 60.0,
        max_attempts: int = 3,
        backoff_s: float = 1.0,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.backend_id = f"openai-compatible:{self.base_url}"
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self._sleep = sleep
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)

    @classmethod
    def from_env(cls, base_url: str, api_key_env: str = "OPENAI_API_KEY", **kwargs) -> "OpenAICompatibleBackend":
        return cls(base_url, api_key=os.environ.get(api_key_env) or None, **kwargs)

    def close(self) -> None:
        self._client.close()

    def _post(self, path: str, payload: dict) -> dict:
        url = f"{self.base_url}{path}"
        last: Exception | None = None
        for attempt in range(self.max_attempts):
            if attempt:
                delay = self.backoff_s * 2 ** (attempt - 1)
                log.warning("retrying %s in %.1fs (attempt %d/%d): %s", path, delay, attempt + 1, self.max_attempts, last)
                self._sleep(delay)
            try:
                resp = self._client.post(url, json=payload)
            except httpx.TransportError as exc:
                last = RetryableError(f"{type(exc).__name__}: {exc}")
                continue
            if resp.status_code in RETRY_STATUSES:
                last = RetryableError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
                continue
            if not resp.is_success:
                raise GatewayError(f"HTTP {resp.status_code} from {url}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise GatewayError(f"non-JSON response from {url}: {resp.text[:200]}") from exc
        raise RetryableError(f"{path} failed after {self.max_attempts} attempts: {last}")

    def complete(self, req: GenerationRequest) -> GenerationResult:
        payload = {
            "model": req.model_id,
            "messages": [m.to_dict() for m in req.messages],
            "max_tokens": req.max_new_tokens,
            "temperature": req.temperature,
        }
        if req.want_logprobs:
            payload["logprobs"] = True
        data = self._post("/chat/completions", payload)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise GatewayError(f"malformed chat completion payload: {str(data)[:200]}") from exc

        warnings: list[str] = []
        tokens: tuple[TokenLogprob, ...] = ()
        content = ((choice.get("logprobs") or {}).get("content")) if req.want_logprobs else None
        if req.want_logprobs and not content:
            warnings.append("backend returned no token logprobs; confidences will be absent")
            log.warning("%s: %s", self.backend_id, warnings[-1])
        elif content:
            try:
                # servers occasionally report +0.0000001 for certain tokens
                tokens = tuple(TokenLogprob(item["token"], min(float(item["logprob"]), 0.0)) for item in content)
            except (KeyError, TypeError, ValueError) as exc:
                raise BackendCompatibilityError(f"malformed logprobs payload: {exc}") from exc
        return GenerationResult(text=text, tokens=tokens, backend_id=self.backend_id, warnings=tuple(warnings))

    def embed(self, texts: Sequence[str], model_id: str) -> list[list[float]]:
        data = self._post("/embeddings", {"model": model_id, "input": list(texts)})
        try:
            items = sorted(data["data"], key=lambda item: item["index"])
            vectors = [list(map(float, item["embedding"])) for item in items]
        except (KeyError, TypeError, ValueError) as exc:
            raise GatewayError(f"malformed embeddings payload: {str(data)[:200]}") from exc
        if len(vectors) != len(texts):
            raise GatewayError(f"asked for {len(texts)} embeddings, got {len(vectors)}")
        return vectors
