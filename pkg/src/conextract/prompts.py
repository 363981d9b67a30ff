"""Closed catalog of zero-shot and few-shot prompt templates, expanded into chat messages.

Model-specific chat templating is left to the serving endpoint; this module only
produces role-tagged message lists.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Literal, Sequence

from .corpus import Document, Entry

Role = Literal["system", "user", "assistant"]

SEARCH_TERMS = ("keywords", "keyphrases", "concepts", "entities", "topics")
FS_STRATEGIES = ("fixed", "random", "closest")
STANDARD_FS_SIZES = (1, 3, 5)

DOMAIN_CLAUSE = "related to the domains of Computer Science, Control, and Information Technology"
DOCUMENT_PREFIX = "I have the following document: "

_TERM_TEMPLATES = {
    "ZS-Keywords": "keywords",
    "ZS-Keyphrases": "keyphrases",
    "ZS-Concepts": "concepts",
    "ZS-Entities": "entities",
    "ZS-Topics": "topics",
}

_SYSTEM_TEXTS = {
    "ZS-ExtractingContext": (
        "You are a helpful, respectful and honest assistant for extracting {term} "
        "from the provided document."
    ),
    "ZS-ExpertContext": "You are an ontology expert in extracting {term} from the document.",
    "ZS-TaskContext": (
        "You are an expert in extracting {term} from documents. {Term} are important "
        "multi- or single noun phrases that cover main topics of the document."
    ),
}

_FS_TEMPLATES = {"FS-Fixed": "fixed", "FS-Random": "random", "FS-Closest": "closest"}

TEMPLATE_NAMES: tuple[str, ...] = (
    *_TERM_TEMPLATES,
    "ZS-Domain",
    *_SYSTEM_TEXTS,
    *_FS_TEMPLATES,
)


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: Role
    content: str

    def __post_init__(self) -> None:
        if self.role not in ("system", "user", "assistant"):
            raise PromptError(f"unknown role {self.role!r}")
        if self.role != "assistant" and not self.content:
            raise PromptError(f"{self.role} message must have content")

    def to_dict(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    search_term: str = "keyphrases"
    system_text: str | None = None
    domain_clause: str | None = None
    fs_strategy: str | None = None
    fs_n: int | None = None

    def __post_init__(self) -> None:
        if self.name not in TEMPLATE_NAMES:
            raise PromptError(f"unknown template {self.name!r}")
        if self.search_term not in SEARCH_TERMS:
            raise PromptError(f"unknown search term {self.search_term!r}")
        if self.is_few_shot != (self.fs_strategy is not None):
            raise PromptError("fs_strategy must be set exactly for FS templates")
        if self.is_few_shot and (self.fs_n is None or self.fs_n < 1):
            raise PromptError("FS templates need fs_n >= 1")

    @property
    def is_few_shot(self) -> bool:
        return self.name.startswith("FS")

    @property
    def display_name(self) -> str:
        if self.is_few_shot:
            return f"{self.name}-{self.fs_n}"
        if self.name in _TERM_TEMPLATES or self.search_term == "keyphrases":
            return self.name
        return f"{self.name}[{self.search_term}]"

    def request(self) -> str:
        term = self.search_term
        if self.name == "ZS-TaskContext":
            term = term.capitalize()
        clause = f" {self.domain_clause}" if self.domain_clause else ""
        return (
            f"Please give me the {term}{clause} that are present in this document "
            "and separate them with commas:"
        )


def list_templates() -> list[str]:
    return list(TEMPLATE_NAMES)


def get_template(name: str, search_term: str | None = None, fs_n: int | None = None) -> PromptTemplate:
    """Return the catalog template ``name``.

    The five term-sweep templates fix their own search term; every other
    template defaults to "keyphrases" unless ``search_term`` overrides it.
    """
    if name not in TEMPLATE_NAMES:
        raise PromptError(f"unknown template {name!r}; choose from {', '.join(TEMPLATE_NAMES)}")
    if name in _TERM_TEMPLATES:
        term = _TERM_TEMPLATES[name]
        if search_term is not None and search_term != term:
            raise PromptError(f"{name} fixes the search term to {term!r}")
        return PromptTemplate(name=name, search_term=term)
    term = search_term or "keyphrases"
    if name == "ZS-Domain":
        return PromptTemplate(name=name, search_term=term, domain_clause=DOMAIN_CLAUSE)
    if name in _SYSTEM_TEXTS:
        system = _SYSTEM_TEXTS[name].format(term=term, Term=term.capitalize())
        return PromptTemplate(name=name, search_term=term, system_text=system)
    if fs_n is None:
        raise PromptError(f"{name} needs the number of examples (fs_n)")
    return PromptTemplate(name=name, search_term=term, fs_strategy=_FS_TEMPLATES[name], fs_n=fs_n)


@dataclass(frozen=True)
class PromptInstance:
    messages: tuple[ChatMessage, ...]
    target_doc_id: str
    template_name: str

    def to_dicts(self) -> list[dict[str, str]]:
        return [m.to_dict() for m in self.messages]


def _with_context(text: str, request: str) -> str:
    return f"{DOCUMENT_PREFIX}{text}\n{request}"


def build_zero_shot(template: PromptTemplate, doc: Document) -> PromptInstance:
    if template.is_few_shot:
        raise PromptError(f"{template.name} is a few-shot template")
    messages: list[ChatMessage] = []
    if template.system_text:
        messages.append(ChatMessage("system", template.system_text))
        user = _with_context(doc.text, template.request())
    else:
        user = f"{template.request()}\n{doc.text}"
    messages.append(ChatMessage("user", user))
    return PromptInstance(tuple(messages), doc.id, template.display_name)


def build_few_shot(template: PromptTemplate, doc: Document, examples: Sequence[Entry]) -> PromptInstance:
    if not template.is_few_shot:
        raise PromptError(f"{template.name} is a zero-shot template")
    if len(examples) != template.fs_n:
        raise PromptError(f"{template.display_name} needs {template.fs_n} examples, got {len(examples)}")
    request = template.request()
    messages: list[ChatMessage] = []
    for example_doc, gold in examples:
        messages.append(ChatMessage("user", _with_context(example_doc.text, request)))
        messages.append(ChatMessage("assistant", ", ".join(gold.keyphrases)))
    messages.append(ChatMessage("user", f"{request}\n{doc.text}"))
    return PromptInstance(tuple(messages), doc.id, template.display_name)


def build_prompt(template: PromptTemplate, doc: Document, examples: Sequence[Entry] = ()) -> PromptInstance:
    if template.is_few_shot:
        return build_few_shot(template, doc, examples)
    return build_zero_shot(template, doc)


def dump_catalog(fs_n: int = 1) -> str:
    """JSON dump of every catalog template (FS ones instantiated with ``fs_n``)."""
    rows = []
    for name in TEMPLATE_NAMES:
        template = get_template(name, fs_n=fs_n)
        row = asdict(template)
        row["request"] = template.request()
        rows.append(row)
    return json.dumps(rows, indent=2, ensure_ascii=False) + "\n"
