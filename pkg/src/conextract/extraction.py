"""Turn a raw completion into ranked present concepts with token-probability confidences."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

from .corpus import Document
from .gateway.types import GenerationResult
from .text import collapse, normalize_with_map

SEPARATORS = ",;*\n"
_SPLIT_RE = re.compile(r"[,;*\n]")
# "-" / "•" bullets and "N." / "N)" enumerations, only when followed by whitespace or nothing
_LIST_MARKER_RE = re.compile(r"(?:[-•]+|\d+[.)])(?:\s+|$)")
_TRAILING_PERIOD_RE = re.compile(r"(?<!\.)\.$")


class ExtractionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Candidate:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class ExtractedConcept:
    surface: str
    normalized: str
    confidence: float | None = None
    completion_span: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if not self.normalized:
            raise ExtractionError("concept has an empty normalized form")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ExtractionError(f"confidence {self.confidence} outside [0, 1]")

    def to_dict(self) -> dict:
        return {
            "surface": self.surface,
            "normalized": self.normalized,
            "confidence": self.confidence,
            "completion_span": list(self.completion_span) if self.completion_span else None,
        }


@dataclass(frozen=True)
class ExtractionResult:
    doc_id: str
    concepts: tuple[ExtractedConcept, ...]
    raw_completion: str = ""

    def ranked_phrases(self) -> list[str]:
        return [c.normalized for c in self.concepts]

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "raw_completion": self.raw_completion,
            "concepts": [c.to_dict() for c in self.concepts],
        }


def split_completion(text: str) -> list[Candidate]:
    """Split on ``,`` ``;`` ``*`` and newlines, keeping each piece's span in ``text``."""
    candidates: list[Candidate] = []
    pos = 0
    for piece in _SPLIT_RE.split(text):
        start, end = pos, pos + len(piece)
        pos = end + 1
        # trim whitespace, then markers, then whitespace again
        while start < end and text[start].isspace():
            start += 1
        marker = _LIST_MARKER_RE.match(text, start, end)
        if marker:
            start = marker.end()
        while end > start and text[end - 1].isspace():
            end -= 1
        if end > start and _TRAILING_PERIOD_RE.search(text, start, end):
            end -= 1
            while end > start and text[end - 1].isspace():
                end -= 1
        if end > start:
            candidates.append(Candidate(text[start:end], start, end))
    return candidates


def filter_present(
    candidates: Sequence[Candidate],
    doc: Document,
    case_sensitive: bool = False,
) -> list[tuple[Candidate, str]]:
    """Keep candidates found in the document after whitespace (and case) normalization.

    Returns ``(candidate, surface)`` pairs where ``surface`` is the first
    matching stretch of the original document text.
    """
    norm_doc, index_map = normalize_with_map(doc.text, casefold=not case_sensitive)
    kept: list[tuple[Candidate, str]] = []
    for cand in candidates:
        needle = " ".join(cand.text.split())
        if not case_sensitive:
            needle = needle.casefold()
        if not needle:
            continue
        at = norm_doc.find(needle)
        if at < 0:
            continue
        surface = doc.text[index_map[at] : index_map[at + len(needle) - 1] + 1]
        kept.append((cand, surface))
    return kept


def dedupe(items: Sequence, key=None) -> list:
    """First occurrence per normalized form, order preserved.

    ``key`` maps an item to the string that is normalized; by default items
    are strings, :class:`Candidate` or ``(Candidate, surface)`` pairs.
    """
    seen: set[str] = set()
    out = []
    for item in items:
        if key is not None:
            raw = key(item)
        elif isinstance(item, tuple):
            raw = item[0].text
        elif isinstance(item, Candidate):
            raw = item.text
        else:
            raw = item
        norm = collapse(raw)
        if norm in seen:
            continue
        seen.add(norm)
        out.append(item)
    return out


def token_offsets(gen: GenerationResult) -> list[tuple[int, int]]:
    offsets = []
    pos = 0
    for tok in gen.tokens:
        offsets.append((pos, pos + len(tok.token_text)))
        pos += len(tok.token_text)
    return offsets


def span_confidence(
    span: tuple[int, int],
    gen: GenerationResult,
    offsets: list[tuple[int, int]] | None = None,
    aggregate: str = "geometric_mean",
) -> float:
    """Geometric mean of the probabilities of every token overlapping ``span``.

    ``aggregate="product"`` multiplies the probabilities instead.
    """
    if offsets is None:
        offsets = token_offsets(gen)
    start, end = span
    logprobs = [tok.logprob for tok, (a, b) in zip(gen.tokens, offsets) if a < end and b > start]
    if not logprobs:
        raise ExtractionError(f"no generated token covers completion span {span}")
    total = math.fsum(logprobs)
    if aggregate == "product":
        return math.exp(total)
    if aggregate != "geometric_mean":
        raise ValueError(f"unknown aggregate {aggregate!r}")
    return math.exp(total / len(logprobs))


def score_confidences(
    items: Sequence[tuple[Candidate, str]],
    gen: GenerationResult,
    aggregate: str = "geometric_mean",
) -> list[ExtractedConcept]:
    """Attach confidences; without token logprobs every confidence stays ``None``."""
    offsets = token_offsets(gen) if gen.tokens else None
    concepts = []
    for cand, surface in items:
        if gen.text[cand.start : cand.end] != cand.text:
            raise ExtractionError(f"candidate {cand.text!r} is not at {cand.start}:{cand.end} of the completion")
        conf = None
        if offsets is not None:
            conf = span_confidence((cand.start, cand.end), gen, offsets, aggregate)
        concepts.append(
            ExtractedConcept(
                surface=surface,
                normalized=collapse(cand.text),
                confidence=conf,
                completion_span=(cand.start, cand.end),
            )
        )
    return concepts


def rank(concepts: Sequence[ExtractedConcept]) -> list[ExtractedConcept]:
    """Confidence descending, ties (and missing confidences) in appearance order."""
    order = range(len(concepts))
    if any(c.confidence is None for c in concepts):
        return list(concepts)
    return [concepts[i] for i in sorted(order, key=lambda i: (-concepts[i].confidence, i))]  # type: ignore[operator]


def extract(
    doc: Document,
    gen: GenerationResult,
    case_sensitive: bool = False,
    aggregate: str = "geometric_mean",
) -> ExtractionResult:
    present = filter_present(split_completion(gen.text), doc, case_sensitive=case_sensitive)
    scored = score_confidences(dedupe(present), gen, aggregate=aggregate)
    return ExtractionResult(doc_id=doc.id, concepts=tuple(rank(scored)), raw_completion=gen.text)

