import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conextract.corpus import Document
from conextract.extraction import (
    Candidate,
    ExtractedConcept,
    ExtractionError,
    dedupe,
    extract,
    filter_present,
    score_confidences,
    span_confidence,
    split_completion,
)
from conextract.gateway import GenerationResult, TokenLogprob, make_mock_backend
from conextract.gateway import GenerationRequest
from conextract.prompts import build_zero_shot, get_template
from conextract.text import collapse


def texts(cands):
    return [c.text for c in cands]


def gen_from(pieces):
    """GenerationResult from (token_text, prob) pairs."""
    return GenerationResult("".join(t for t, _ in pieces), tuple(TokenLogprob(t, math.log(p)) for t, p in pieces))


# ------------------------------------------------------------------ split

# completion -> expected candidates; kept small and explicit on purpose
GOLDEN = [
    ("a, b; c\n* d", ["a", "b", "c", "d"]),
    ("Sure, I'd be happy to help!\nkeyword one, keyword two", ["Sure", "I'd be happy to help!", "keyword one", "keyword two"]),
    ("", []),
    ("   \n\n , ;", []),
    ("single phrase", ["single phrase"]),
    ("- alpha\n- beta\n- gamma", ["alpha", "beta", "gamma"]),
    ("1. first item\n2. second item\n10. tenth item", ["first item", "second item", "tenth item"]),
    ("1) one\n2) two", ["one", "two"]),
    ("* bullet one\n* bullet two", ["bullet one", "bullet two"]),
    ("**bold phrase**, plain", ["bold phrase", "plain"]),
    ("• dot bullet\n• another", ["dot bullet", "another"]),
    ("Here are the keyphrases:\n\n1. neural networks\n2. deep learning.", ["Here are the keyphrases:", "neural networks", "deep learning"]),
    ("data mining,   text mining ,graph mining", ["data mining", "text mining", "graph mining"]),
    ("x-ray imaging, state-of-the-art", ["x-ray imaging", "state-of-the-art"]),
    ("-5 degrees, 3.5 GHz", ["-5 degrees", "3.5 GHz"]),
    ("U.S. policy, e.g.", ["U.S. policy", "e.g"]),
    ("ends with ellipsis...", ["ends with ellipsis..."]),
    ("tab\tseparated words;\r\nwindows line", ["tab\tseparated words", "windows line"]),
    ("Sure! Here you go: control theory; robust control", ["Sure! Here you go: control theory", "robust control"]),
    ("trailing comma,", ["trailing comma"]),
    ("- ", []),
    ("2019 results", ["2019 results"]),
    ("C++ programming", ["C++ programming"]),
    ("A*B testing", ["A", "B testing"]),
    ("Keyphrases: a; b\n\nI hope this helps!", ["Keyphrases: a", "b", "I hope this helps!"]),
]


@pytest.mark.parametrize("completion,expected", GOLDEN, ids=[f"g{i:02d}" for i in range(len(GOLDEN))])
def test_split_golden(completion, expected):
    assert texts(split_completion(completion)) == expected


def test_split_spans_point_into_completion():
    text = "Sure, I'd be happy!\n1. robust control;  - data mining."
    for cand in split_completion(text):
        assert text[cand.start : cand.end] == cand.text


# ------------------------------------------------------------------ filter and dedupe


def test_filter_case_insensitive_keeps_document_surface():
    doc = Document.from_text("d", "A graphical user interface for scanning data.")
    kept = filter_present([Candidate("Graphical User Interface", 0, 24)], doc)
    assert [s for _, s in kept] == ["graphical user interface"]


def test_filter_drops_conversation_and_collapses_whitespace():
    doc = Document.from_text("d", "Efficient data\n  mining methods.")
    cands = [Candidate("Sure", 0, 4), Candidate("data  mining", 0, 12)]
    kept = filter_present(cands, doc)
    assert [(c.text, s) for c, s in kept] == [("data  mining", "data\n  mining")]


def test_filter_case_sensitive_option():
    doc = Document.from_text("d", "graphical user interface")
    assert filter_present([Candidate("Graphical user interface", 0, 24)], doc, case_sensitive=True) == []


@pytest.mark.parametrize("items,expected", [(["A", "a"], ["A"]), (["x", "y", "x"], ["x", "y"]), ([], [])])
def test_dedupe_examples(items, expected):
    assert dedupe(items) == expected


def test_dedupe_collapses_whitespace():
    assert dedupe(["data mining", "Data   Mining", "mining"]) == ["data mining", "mining"]


WORDS = ["data", "mining", "control", "robust", "neural", "network", "graph", "theory", "model", "system"]
NOISE = ["sure", "happy", "help", "here", "are", "the", "keyphrases", "hope", "this", "helps"]
SEPS = [", ", "; ", "\n", "\n* ", "\n- ", ",", "\n1. "]


def random_pair(rng):
    doc_words = [rng.choice(WORDS) for _ in range(rng.randint(3, 20))]
    doc = Document.from_text("d", " ".join(w.upper() if rng.random() < 0.2 else w for w in doc_words))
    pieces = []
    for _ in range(rng.randint(0, 8)):
        if rng.random() < 0.6 and len(doc_words) > 1:
            i = rng.randrange(len(doc_words))
            pieces.append("  ".join(doc_words[i : i + rng.randint(1, 3)]))
        else:
            pieces.append(" ".join(rng.choice(WORDS + NOISE) for _ in range(rng.randint(1, 3))))
    body = ""
    for p in pieces:
        body += p + rng.choice(SEPS)
    return doc, body


def as_gen(text):
    from conextract.gateway import mock_tokenize

    return GenerationResult(text, tuple(TokenLogprob(t, -0.5) for t in mock_tokenize(text)))


def test_filter_soundness_and_prefix_invariance_10k():
    rng = random.Random(20240501)
    prefixes = ["Sure, I'd be happy to help!\n", "Here are the keyphrases:\n", "Sure! Hope this helps\n* "]
    for _ in range(10_000):
        doc, body = random_pair(rng)
        result = extract(doc, as_gen(body))
        norm_doc = collapse(doc.text)
        for c in result.concepts:
            assert c.normalized in norm_doc
            assert collapse(c.surface) == c.normalized
        noisy = extract(doc, as_gen(rng.choice(prefixes) + body))
        assert {c.normalized for c in noisy.concepts} == {c.normalized for c in result.concepts}
        assert len({c.normalized for c in result.concepts}) == len(result.concepts)


# ------------------------------------------------------------------ confidences


def test_two_token_geometric_mean():
    gen = gen_from([("data", 0.9), (" mining", 0.4)])
    assert span_confidence((0, len(gen.text)), gen) == pytest.approx(0.6, abs=1e-12)
    assert span_confidence((0, len(gen.text)), gen, aggregate="product") == pytest.approx(0.36, abs=1e-12)


def test_single_token_probability():
    gen = gen_from([("x", 0.5)])
    assert span_confidence((0, 1), gen) == pytest.approx(0.5, abs=1e-15)


def test_span_without_tokens_is_internal_error():
    with pytest.raises(ExtractionError):
        span_confidence((10, 12), gen_from([("ab", 0.5)]))


def overlap_oracle(completion_pieces, span):
    """Character-by-character: a token counts if any of its characters lies in span."""
    chosen, pos = [], 0
    for text, p in completion_pieces:
        if any(span[0] <= pos + i < span[1] for i in range(len(text))):
            chosen.append(p)
        pos += len(text)
    return math.exp(sum(math.log(p) for p in chosen) / len(chosen))


def test_confidences_match_brute_force_overlap_oracle():
    rng = random.Random(7)
    alphabet = ["ne", "ural", " net", "works", ",", " ", "deep", " learning", ";", "\n", "* ", "gra", "ph", "s"]
    checked = 0
    for _ in range(2_000):
        pieces = [(rng.choice(alphabet), rng.uniform(0.01, 1.0)) for _ in range(rng.randint(1, 12))]
        gen = gen_from(pieces)
        cands = split_completion(gen.text)
        concepts = score_confidences([(c, c.text) for c in cands], gen)
        for cand, concept in zip(cands, concepts):
            expected = overlap_oracle(pieces, (cand.start, cand.end))
            assert concept.confidence == pytest.approx(expected, rel=0, abs=1e-12)
            assert 0.0 < concept.confidence <= 1.0
            checked += 1
    assert checked > 1_000


def test_five_token_synthetic_completion():
    pieces = [("robust", 0.8), (" cont", 0.5), ("rol, da", 0.9), ("ta", 0.2), (" mining", 0.6)]
    gen = gen_from(pieces)
    concepts = score_confidences([(c, c.text) for c in split_completion(gen.text)], gen)
    assert [c.normalized for c in concepts] == ["robust control", "data mining"]
    assert concepts[0].confidence == pytest.approx((0.8 * 0.5 * 0.9) ** (1 / 3), abs=1e-12)
    assert concepts[1].confidence == pytest.approx((0.9 * 0.2 * 0.6) ** (1 / 3), abs=1e-12)


def test_confidence_independent_of_separator():
    a = gen_from([("x", 0.3), (", ", 0.9), ("graph", 0.7)])
    b = gen_from([("x", 0.3), ("; ", 0.1), ("graph", 0.7)])
    ca = score_confidences([(c, c.text) for c in split_completion(a.text)], a)
    cb = score_confidences([(c, c.text) for c in split_completion(b.text)], b)
    assert [c.confidence for c in ca] == [c.confidence for c in cb]


def test_no_tokens_means_no_confidence():
    gen = GenerationResult("control theory, robust control")
    doc = Document.from_text("d", "robust control and control theory")
    result = extract(doc, gen)
    assert [c.confidence for c in result.concepts] == [None, None]
    assert result.ranked_phrases() == ["control theory", "robust control"]


def test_concept_rejects_out_of_range_confidence():
    with pytest.raises(ExtractionError):
        ExtractedConcept("a", "a", 1.5)
    with pytest.raises(ExtractionError):
        ExtractedConcept("a", "")


# ------------------------------------------------------------------ pipeline


def test_extract_ranks_by_confidence_then_appearance():
    doc = Document.from_text("d", "robust control of neural networks and data mining")
    gen = gen_from([("data mining", 0.5), (", ", 0.9), ("robust control", 0.9), (", ", 0.9), ("neural networks", 0.5)])
    assert extract(doc, gen).ranked_phrases() == ["robust control", "data mining", "neural networks"]


def test_extract_empty_when_nothing_present():
    doc = Document.from_text("d", "robust control")
    assert extract(doc, as_gen("Sure, happy to help")).concepts == ()


def test_extract_is_deterministic():
    doc = Document.from_text("d", "robust control of neural networks")
    gen = as_gen("neural networks, Robust Control, neural  networks")
    assert extract(doc, gen) == extract(doc, gen)
    assert extract(doc, gen).ranked_phrases() == ["neural networks", "robust control"]


@pytest.mark.parametrize("kind", ["echo-gold", "noisy-gold"])
def test_extract_mock_gold_recovers_gold(mini_test, kind):
    backend = make_mock_backend(kind, mini_test)
    for doc, gold in mini_test:
        req = GenerationRequest("m", build_zero_shot(get_template("ZS-Keyphrases"), doc).messages)
        result = extract(doc, backend.complete(req))
        assert set(result.ranked_phrases()) == {collapse(g) for g in gold.keyphrases}


@settings(max_examples=200)
@given(st.text(alphabet="abc ,;*\n-1.", max_size=40))
def test_split_never_yields_blank_or_separator(text):
    for cand in split_completion(text):
        assert cand.text.strip() == cand.text and cand.text
        assert not any(s in cand.text for s in ",;*\n")
