from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

from ..prompts import ChatMessage


class GatewayError(RuntimeError):
    """Non-retryable backend failure (bad status, malformed payload, ...)."""


class RetryableError(GatewayError):
    """Transient failure (network, timeout, 429/5xx); retried with backoff."""


class BackendCompatibilityError(GatewayError):
    """Backend response violates the token/text contract."""


class ReplayMissError(GatewayError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    model_id: str
    messages: tuple[ChatMessage, ...]
    max_new_tokens: int = 512
    temperature: float = 0.0
    want_logprobs: bool = True

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("request needs at least one message")
        if self.messages[-1].role != "user":
            raise ValueError("the final message must have role 'user'")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be positive")

    def canonical(self) -> dict:
        return {
            "model_id": self.model_id,
            "messages": [m.to_dict() for m in self.messages],
            "max_new_tokens": self.max_new_tokens,
            "temperature": self.temperature,
        }


def canonical_json(obj: object) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def cache_key(req: GenerationRequest) -> str:
    """SHA-256 over the canonical JSON of everything that determines a greedy completion."""
    return hashlib.sha256(canonical_json(req.canonical()).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TokenLogprob:
    token_text: str
    logprob: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.logprob) or self.logprob > 0.0:
            raise ValueError(f"invalid token logprob {self.logprob!r}")

    @property
    def prob(self) -> float:
        return math.exp(self.logprob)


@dataclass(frozen=True)
class GenerationResult:
    text: str
    tokens: tuple[TokenLogprob, ...] = ()
    backend_id: str = ""
    cached: bool = False
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if self.tokens and "".join(t.token_text for t in self.tokens) != self.text:
            raise BackendCompatibilityError(
                f"token texts from {self.backend_id or 'backend'} do not concatenate to the completion text"
            )

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "tokens": [[t.token_text, t.logprob] for t in self.tokens],
            "backend_id": self.backend_id,
        }

    @classmethod
    def from_dict(cls, data: dict, cached: bool = False) -> "GenerationResult":
        return cls(
            text=data["text"],
            tokens=tuple(TokenLogprob(tok, lp) for tok, lp in data.get("tokens", [])),
            backend_id=data.get("backend_id", ""),
            cached=cached,
        )


class Backend(Protocol):
    backend_id: str

    def complete(self, req: GenerationRequest) -> GenerationResult: ...

    def embed(self, texts: Sequence[str], model_id: str) -> list[list[float]]: ...
