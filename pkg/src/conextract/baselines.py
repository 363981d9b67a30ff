"""TF-IDF and FirstPhrases extractors over contiguous 1-3-gram candidates."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

from .corpus import DatasetSplit, Document
from .extraction import ExtractedConcept, ExtractionResult
from .text import collapse

DEFAULT_TOP_N = 10
MAX_NGRAM = 3

_WORD_RE = re.compile(r"\w+(?:[-'’]\w+)*")


class BaselineError(ValueError):
    pass


@lru_cache(maxsize=1)
def default_stopwords() -> frozenset[str]:
    text = resources.files("conextract").joinpath("data/stopwords_en.txt").read_text(encoding="utf-8")
    return frozenset(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )


@dataclass(frozen=True)
class CandidatePhrase:
    surface: str
    position: int
    score: float = 0.0
    n_tokens: int = 1

    @property
    def normalized(self) -> str:
        return collapse(self.surface)


def word_spans(text: str) -> list[tuple[int, int]]:
    return [m.span() for m in _WORD_RE.finditer(text)]


def _usable(token: str) -> bool:
    return len(token) > 1 and not token.replace("-", "").isdigit()


def generate_candidates(doc: Document, stopwords: Iterable[str] | None = None) -> list[CandidatePhrase]:
    """Contiguous 1-3-grams with no stopword at either edge and no punctuation inside.

    Words in an n-gram must be separated by whitespace only, so candidates never
    cross sentence punctuation (or commas, brackets, ...). Numeric and
    single-character words are never part of a candidate.
    """
    stops = frozenset(w.casefold() for w in (default_stopwords() if stopwords is None else stopwords))
    text = doc.text
    spans = word_spans(text)
    words = [text[a:b] for a, b in spans]
    seen: set[str] = set()
    out: list[CandidatePhrase] = []
    for i in range(len(spans)):
        for n in range(1, MAX_NGRAM + 1):
            j = i + n - 1
            if j >= len(spans):
                break
            if n > 1 and not text[spans[j - 1][1] : spans[j][0]].isspace():
                break
            if not _usable(words[j]):
                break
            if not _usable(words[i]) or words[i].casefold() in stops:
                break
            if words[j].casefold() in stops:
                continue
            surface = text[spans[i][0] : spans[j][1]]
            key = collapse(surface)
            if key in seen:
                continue
            seen.add(key)
            out.append(CandidatePhrase(surface=surface, position=spans[i][0], n_tokens=n))
    return out


class IdfTable:
    """Smoothed inverse document frequencies: ``ln((N + 1) / (df + 1)) + 1``."""

    def __init__(self, n_docs: int, df: dict[str, int]) -> None:
        if n_docs < 1:
            raise BaselineError("idf table needs at least one training document")
        self.n_docs = n_docs
        self.df = dict(df)

    @classmethod
    def from_split(cls, split: DatasetSplit) -> "IdfTable":
        df: Counter[str] = Counter()
        for doc, _ in split.entries:
            df.update({w.casefold() for w in _WORD_RE.findall(doc.text)})
        return cls(len(split.entries), dict(df))

    def __getitem__(self, term: str) -> float:
        return math.log((self.n_docs + 1) / (self.df.get(term, 0) + 1)) + 1.0

    def to_json(self) -> str:
        return json.dumps({"n_docs": self.n_docs, "df": dict(sorted(self.df.items()))}, ensure_ascii=False)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "IdfTable":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(int(data["n_docs"]), {str(k): int(v) for k, v in data["df"].items()})


def _minmax(scores: list[float]) -> list[float]:
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return [1.0] * len(scores)
    return [(s - lo) / (hi - lo) for s in scores]


def tfidf_extract(
    doc: Document,
    idf: IdfTable,
    top_n: int = DEFAULT_TOP_N,
    stopwords: Iterable[str] | None = None,
) -> ExtractionResult:
    """Rank candidates by the mean tf*idf of their words (ties: earlier first)."""
    if idf is None or not idf.n_docs:
        raise BaselineError("tfidf_extract needs a non-empty idf table")
    cands = generate_candidates(doc, stopwords)
    if top_n <= 0 or not cands:
        return ExtractionResult(doc_id=doc.id, concepts=())
    tf = Counter(w.casefold() for w in _WORD_RE.findall(doc.text))
    scored = []
    for cand in cands:
        terms = [w.casefold() for w in _WORD_RE.findall(cand.surface)]
        scored.append(sum(tf[t] * idf[t] for t in terms) / len(terms))
    confidences = _minmax(scored)
    order = sorted(range(len(cands)), key=lambda i: (-scored[i], cands[i].position))[:top_n]
    concepts = tuple(
        ExtractedConcept(surface=cands[i].surface, normalized=cands[i].normalized, confidence=confidences[i])
        for i in order
    )
    return ExtractionResult(doc_id=doc.id, concepts=concepts)


def first_phrases_extract(
    doc: Document,
    top_n: int = DEFAULT_TOP_N,
    stopwords: Iterable[str] | None = None,
) -> ExtractionResult:
    """Earliest candidates first; at equal positions the longer n-gram wins."""
    cands = generate_candidates(doc, stopwords)
    if top_n <= 0:
        return ExtractionResult(doc_id=doc.id, concepts=())
    ranked = sorted(cands, key=lambda c: (c.position, -c.n_tokens))[:top_n]
    concepts = tuple(
        ExtractedConcept(surface=c.surface, normalized=c.normalized, confidence=1.0 - rank / (top_n + 1))
        for rank, c in enumerate(ranked)
    )
    return ExtractionResult(doc_id=doc.id, concepts=concepts)
