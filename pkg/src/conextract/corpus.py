"""Benchmark dataset loading (Inspec / SemEval2017 JSONL shape) and per-split statistics."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .text import collapse

# midas/inspec and midas/semeval2017 keep present phrases under this name.
MIDAS_FIELD_MAP: dict[str, str] = {"extractive_keyphrases": "keyphrases"}

FIELD_MAP_PRESETS: dict[str, dict[str, str]] = {
    "default": {},
    "midas": MIDAS_FIELD_MAP,
}

REQUIRED_FIELDS = ("id", "document", "keyphrases")


class DatasetError(ValueError):
    """Raised for malformed dataset files or invalid splits."""


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    token_count: int

    @classmethod
    def from_text(cls, doc_id: str, text: str) -> "Document":
        if not text.strip():
            raise DatasetError(f"document {doc_id!r} has empty text")
        return cls(id=doc_id, text=text, token_count=len(text.split()))


@dataclass(frozen=True)
class GroundTruth:
    doc_id: str
    keyphrases: tuple[str, ...]

    @classmethod
    def from_phrases(cls, doc_id: str, phrases: list[str] | tuple[str, ...]) -> "GroundTruth":
        """Build a gold set, dropping blanks and duplicates under normalization."""
        seen: set[str] = set()
        kept: list[str] = []
        for phrase in phrases:
            key = collapse(phrase)
            if not key or key in seen:
                continue
            seen.add(key)
            kept.append(phrase.strip())
        return cls(doc_id=doc_id, keyphrases=tuple(kept))


Entry = tuple[Document, GroundTruth]


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    entries: tuple[Entry, ...]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for doc, gold in self.entries:
            if doc.id in seen:
                raise DatasetError(f"duplicate document id {doc.id!r} in split {self.name!r}")
            seen.add(doc.id)
            if not gold.keyphrases:
                raise DatasetError(f"document {doc.id!r} has no gold keyphrases")

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def documents(self) -> list[Document]:
        return [doc for doc, _ in self.entries]

    def get(self, doc_id: str) -> Entry:
        for entry in self.entries:
            if entry[0].id == doc_id:
                return entry
        raise KeyError(doc_id)

    def head(self, n: int) -> "DatasetSplit":
        return DatasetSplit(name=self.name, entries=self.entries[:n])


@dataclass(frozen=True)
class DatasetStats:
    n_doc: int
    avg_doc_len: float
    max_doc_len: int
    max_con: int
    min_con: int
    avg_con: float
    length_dist: tuple[float, float, float, float, float]

    def as_row(self) -> dict[str, float | int]:
        row: dict[str, float | int] = {
            "N_doc": self.n_doc,
            "Avg_doc": self.avg_doc_len,
            "Max_doc": self.max_doc_len,
            "Max_con": self.max_con,
            "Min_con": self.min_con,
            "Avg_con": self.avg_con,
        }
        for label, value in zip(("1", "2", "3", "4", ">=5"), self.length_dist):
            row[label] = value
        return row


def resolve_field_map(spec: str | Mapping[str, str] | None) -> dict[str, str]:
    """Accept a preset name, a JSON object string, a path to a JSON file, or a mapping."""
    if spec is None:
        return {}
    if isinstance(spec, Mapping):
        return dict(spec)
    if spec in FIELD_MAP_PRESETS:
        return dict(FIELD_MAP_PRESETS[spec])
    text = spec
    path = Path(spec)
    if not spec.lstrip().startswith("{") and path.exists():
        text = path.read_text(encoding="utf-8")
    try:
        mapping = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"field map is neither a preset, a JSON object nor a JSON file: {spec!r}") from exc
    if not isinstance(mapping, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in mapping.items()
    ):
        raise DatasetError("field map must be a JSON object of string -> string")
    return mapping


def _parse_record(record: dict, lineno: int, join_tokens: bool) -> Entry:
    for name in REQUIRED_FIELDS:
        if name not in record:
            raise DatasetError(f"line {lineno}: missing required field {name!r}")
    doc_id = str(record["id"])
    raw = record["document"]
    if isinstance(raw, list):
        if not join_tokens:
            raise DatasetError(f"line {lineno}: field 'document' is tokenized but join_tokens is off")
        text = " ".join(str(tok) for tok in raw)
    elif isinstance(raw, str):
        text = raw
    else:
        raise DatasetError(f"line {lineno}: field 'document' must be a string or a token array")
    phrases = record["keyphrases"]
    if not isinstance(phrases, list) or not all(isinstance(p, str) for p in phrases):
        raise DatasetError(f"line {lineno}: field 'keyphrases' must be an array of strings")
    if not text.strip():
        raise DatasetError(f"line {lineno}: field 'document' is empty")
    return Document.from_text(doc_id, text), GroundTruth.from_phrases(doc_id, phrases)


def load_split(
    path: str | Path,
    join_tokens: bool = True,
    field_map: str | Mapping[str, str] | None = None,
    name: str | None = None,
) -> DatasetSplit:
    """Load a JSONL split, dropping entries whose gold set is empty.

    ``field_map`` renames source fields to the canonical ``id``/``document``/
    ``keyphrases`` names before validation.
    """
    path = Path(path)
    mapping = resolve_field_map(field_map)
    entries: list[Entry] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: malformed JSON ({exc.msg})") from exc
            if not isinstance(record, dict):
                raise DatasetError(f"line {lineno}: expected a JSON object")
            for source, target in mapping.items():
                if source in record:
                    record[target] = record.pop(source)
            doc, gold = _parse_record(record, lineno, join_tokens)
            if gold.keyphrases:
                entries.append((doc, gold))
    return DatasetSplit(name=name or _split_name(path), entries=tuple(entries))


def _split_name(path: Path) -> str:
    parent = path.parent.name
    return f"{parent}/{path.stem}" if parent else path.stem


def compute_stats(split: DatasetSplit) -> DatasetStats:
    if not split.entries:
        raise DatasetError("cannot compute statistics of an empty split")
    # Length is counted in whitespace tokens of the joined text. The midas files are
    # pre-tokenized (punctuation split off), so a different tokenizer on raw
    # abstracts would shift Avg_doc by a few percent.
    doc_lens = [len(doc.text.split()) for doc, _ in split.entries]
    con_counts = [len(gold.keyphrases) for _, gold in split.entries]
    buckets = [0, 0, 0, 0, 0]
    for _, gold in split.entries:
        for phrase in gold.keyphrases:
            buckets[min(len(phrase.split()), 5) - 1] += 1
    total = sum(buckets)
    return DatasetStats(
        n_doc=len(split.entries),
        avg_doc_len=sum(doc_lens) / len(doc_lens),
        max_doc_len=max(doc_lens),
        max_con=max(con_counts),
        min_con=min(con_counts),
        avg_con=sum(con_counts) / len(con_counts),
        length_dist=tuple(100.0 * b / total for b in buckets),  # type: ignore[arg-type]
    )


def render_stats(name: str, stats: DatasetStats, fmt: str = "table") -> str:
    """Render one statistics row as aligned text or CSV."""
    row = {"Dataset": name, **stats.as_row()}
    cells = {k: (f"{v:.2f}" if isinstance(v, float) else str(v)) for k, v in row.items()}
    if fmt == "csv":
        return ",".join(cells) + "\n" + ",".join(cells.values()) + "\n"
    widths = {k: max(len(k), len(v)) for k, v in cells.items()}
    header = "  ".join(k.rjust(widths[k]) for k in cells)
    body = "  ".join(v.rjust(widths[k]) for k, v in cells.items())
    return header + "\n" + body + "\n"
