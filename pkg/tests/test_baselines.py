import math
import random

import pytest

from conextract.baselines import (
    BaselineError,
    IdfTable,
    default_stopwords,
    first_phrases_extract,
    generate_candidates,
    tfidf_extract,
)
from conextract.corpus import DatasetSplit, Document, GroundTruth
from conextract.text import collapse


def split_of(*texts):
    return DatasetSplit(
        "toy",
        tuple((Document.from_text(f"r{i}", t), GroundTruth(f"r{i}", ("x",))) for i, t in enumerate(texts)),
    )


TOY = split_of("robust control systems", "adaptive control", "neural systems", "control theory", "graph theory")


def surfaces(cands):
    return [c.surface for c in cands]


def test_boundary_stopword_rule():
    got = surfaces(generate_candidates(Document.from_text("d", "deep learning is fun"), {"is"}))
    assert {"deep", "learning", "deep learning", "fun"} <= set(got)
    assert "learning is" not in got and "is fun" not in got
    # a stopword inside a trigram is fine
    assert "learning is fun" in got


def test_empty_document():
    assert generate_candidates(Document("d", "", 0), set()) == []


def test_four_words_give_nine_ngrams():
    got = surfaces(generate_candidates(Document.from_text("d", "alpha beta gamma delta"), set()))
    assert sorted(got) == sorted(
        ["alpha", "beta", "gamma", "delta", "alpha beta", "beta gamma", "gamma delta",
         "alpha beta gamma", "beta gamma delta"]
    )


def test_candidates_skip_numbers_single_letters_and_punctuation():
    doc = Document.from_text("d", "Model 42 uses a graph. Graph theory, model")
    got = surfaces(generate_candidates(doc, set()))
    assert "42" not in got and "a" not in got
    assert "graph Graph" not in got and "theory model" not in got
    assert "Graph theory" in got
    assert got.count("graph") + got.count("Graph") == 1  # deduplicated by normalized form


def test_candidates_are_document_substrings():
    doc = Document.from_text("d", "Robust   control of\nflexible manipulators, with feedback.")
    for cand in generate_candidates(doc):
        assert doc.text[cand.position : cand.position + len(cand.surface)] == cand.surface
        assert 1 <= cand.n_tokens <= 3


def test_default_stopwords_loaded():
    stops = default_stopwords()
    assert {"the", "of", "and", "is"} <= stops
    assert not any(s.startswith("#") for s in stops)


def test_idf_formula_and_monotonicity():
    idf = IdfTable.from_split(TOY)
    assert idf.n_docs == 5
    assert idf["control"] == pytest.approx(math.log(6 / 4) + 1)
    assert idf["robust"] == pytest.approx(math.log(6 / 2) + 1)
    assert idf["unseen"] == pytest.approx(math.log(6) + 1)
    assert idf["robust"] > idf["control"]


def test_rarer_term_ranks_higher_at_equal_tf():
    result = tfidf_extract(Document.from_text("d", "control, robust"), IdfTable.from_split(TOY), stopwords=set())
    assert result.ranked_phrases() == ["robust", "control"]


def test_tfidf_hand_computed_toy_ranking():
    idf = IdfTable.from_split(TOY)
    doc = Document.from_text("t", "robust control of robust systems")
    result = tfidf_extract(doc, idf, stopwords={"of"})
    # tf: robust 2, control 1, of 1, systems 1; idf over the five toy documents
    robust, control, systems, of = 2 * (math.log(3) + 1), math.log(1.5) + 1, math.log(2) + 1, math.log(6) + 1
    expected = {
        "robust": robust,
        "robust systems": (robust + systems) / 2,
        "robust control": (robust + control) / 2,
        "control of robust": (control + of + robust) / 3,
        "systems": systems,
        "control": control,
    }
    assert result.ranked_phrases() == [
        "robust", "robust systems", "robust control", "control of robust", "systems", "control"
    ]
    lo, hi = min(expected.values()), max(expected.values())
    for concept in result.concepts:
        assert concept.confidence == pytest.approx((expected[concept.normalized] - lo) / (hi - lo), abs=1e-12)


def test_tfidf_ties_keep_position_order():
    result = tfidf_extract(Document.from_text("d", "zeta, omega"), IdfTable.from_split(TOY), stopwords=set())
    assert result.ranked_phrases() == ["zeta", "omega"]
    assert [c.confidence for c in result.concepts] == [1.0, 1.0]


def test_tfidf_top_n_and_errors(tmp_path):
    idf = IdfTable.from_split(TOY)
    doc = Document.from_text("d", "robust control of robust systems")
    assert tfidf_extract(doc, idf, top_n=0).concepts == ()
    assert len(tfidf_extract(doc, idf, top_n=2).concepts) == 2
    with pytest.raises(BaselineError):
        IdfTable(0, {})
    idf.save(tmp_path / "idf.json")
    assert IdfTable.load(tmp_path / "idf.json").to_json() == idf.to_json()


def test_first_phrases_basic():
    doc = Document.from_text("d", "neural networks for image segmentation")
    result = first_phrases_extract(doc, top_n=3)
    assert "neural networks" in result.ranked_phrases()[:3]
    assert [c.confidence for c in result.concepts] == pytest.approx([1.0, 1 - 1 / 4, 1 - 2 / 4])
    everything = first_phrases_extract(doc, top_n=100)
    assert len(everything.concepts) == len(generate_candidates(doc))
    assert first_phrases_extract(doc, top_n=0).concepts == ()


def test_first_phrases_matches_position_sort_oracle():
    rng = random.Random(11)
    words = ["graph", "model", "the", "of", "data", "mining", "control", "system", "and"]
    for _ in range(200):
        text = " ".join(rng.choice(words) + rng.choice(["", "", ",", "."]) for _ in range(rng.randint(1, 15)))
        doc = Document.from_text("d", text)
        cands = generate_candidates(doc)
        oracle = [c.normalized for c in sorted(cands, key=lambda c: (c.position, -len(c.surface.split())))][:10]
        assert first_phrases_extract(doc).ranked_phrases() == oracle


def test_baselines_are_filter_sound(mini_test, mini_train):
    idf = IdfTable.from_split(mini_train)
    for doc, _ in mini_test:
        norm = collapse(doc.text)
        for result in (tfidf_extract(doc, idf), first_phrases_extract(doc)):
            assert result.concepts
            assert all(c.normalized in norm for c in result.concepts)
            assert len({c.normalized for c in result.concepts}) == len(result.concepts)
