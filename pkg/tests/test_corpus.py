import json

import pytest

from conextract.corpus import (
    DatasetError,
    DatasetSplit,
    Document,
    GroundTruth,
    compute_stats,
    load_split,
    render_stats,
    resolve_field_map,
)

from .conftest import MINI_MIDAS, MINI_TEST


def write_jsonl(path, rows):
    path.write_text("".join((r if isinstance(r, str) else json.dumps(r)) + "\n" for r in rows), encoding="utf-8")
    return path


def test_empty_gold_entries_are_dropped(tmp_path):
    path = write_jsonl(
        tmp_path / "s.jsonl",
        [
            {"id": "a", "document": "x y", "keyphrases": []},
            {"id": "b", "document": "x y", "keyphrases": ["x"]},
        ],
    )
    split = load_split(path)
    assert [doc.id for doc, _ in split] == ["b"]


def test_token_arrays_are_joined(tmp_path):
    path = write_jsonl(
        tmp_path / "s.jsonl", [{"id": "b", "document": ["deep", "learning"], "keyphrases": ["deep learning"]}]
    )
    doc, gold = load_split(path).entries[0]
    assert doc.text == "deep learning"
    assert doc.token_count == 2
    assert gold.keyphrases == ("deep learning",)


def test_tokenized_document_without_join_is_rejected(tmp_path):
    path = write_jsonl(tmp_path / "s.jsonl", [{"id": "b", "document": ["a", "b"], "keyphrases": ["a"]}])
    with pytest.raises(DatasetError, match="join_tokens"):
        load_split(path, join_tokens=False)


def test_malformed_line_names_line_number(tmp_path):
    path = write_jsonl(tmp_path / "s.jsonl", [{"id": "a", "document": "x", "keyphrases": ["x"]}, "{not json"])
    with pytest.raises(DatasetError, match="line 2"):
        load_split(path)


def test_missing_field_names_field_and_line(tmp_path):
    path = write_jsonl(tmp_path / "s.jsonl", [{"id": "a", "keyphrases": ["x"]}])
    with pytest.raises(DatasetError, match="line 1.*'document'"):
        load_split(path)


def test_unknown_fields_ignored_and_order_preserved(mini_test):
    assert [d.id for d, _ in mini_test] == ["t1", "t2", "t3", "t4", "t5", "t6"]


def test_loading_is_idempotent():
    assert load_split(MINI_TEST) == load_split(MINI_TEST)


def test_gold_deduplicated_under_normalization():
    gold = GroundTruth.from_phrases("d", ["Deep Learning", "deep  learning", "", "GPU"])
    assert gold.keyphrases == ("Deep Learning", "GPU")


def test_duplicate_ids_rejected():
    doc = Document.from_text("a", "x")
    gold = GroundTruth("a", ("x",))
    with pytest.raises(DatasetError, match="duplicate"):
        DatasetSplit("s", ((doc, gold), (doc, gold)))


def test_midas_field_map_uses_extractive_phrases_only():
    split = load_split(MINI_MIDAS, field_map="midas")
    assert len(split) == 3
    for doc, gold in split:
        assert "control theory" not in gold.keyphrases
        for phrase in gold.keyphrases:
            assert phrase in doc.text.lower()


def test_field_map_json_forms(tmp_path):
    assert resolve_field_map('{"kp": "keyphrases"}') == {"kp": "keyphrases"}
    f = tmp_path / "map.json"
    f.write_text('{"kp": "keyphrases"}')
    assert resolve_field_map(str(f)) == {"kp": "keyphrases"}
    with pytest.raises(DatasetError):
        resolve_field_map("not-a-preset")


def test_stats_single_document(tmp_path):
    path = write_jsonl(tmp_path / "s.jsonl", [{"id": "a", "document": "a b c", "keyphrases": ["a b"]}])
    stats = compute_stats(load_split(path))
    assert stats.n_doc == 1
    assert stats.avg_doc_len == 3
    assert stats.max_doc_len == 3
    assert (stats.min_con, stats.avg_con, stats.max_con) == (1, 1, 1)
    assert stats.length_dist == (0.0, 100.0, 0.0, 0.0, 0.0)


def test_stats_mini_split(mini_test):
    stats = compute_stats(mini_test)
    lens = [len(d.text.split()) for d, _ in mini_test]
    assert stats.n_doc == 6
    assert stats.avg_doc_len == pytest.approx(sum(lens) / 6)
    assert stats.max_doc_len == max(lens)
    assert (stats.min_con, stats.max_con) == (4, 5)
    assert stats.avg_con == pytest.approx(28 / 6)
    assert stats.min_con <= stats.avg_con <= stats.max_con
    assert sum(stats.length_dist) == pytest.approx(100.0, abs=0.1)
    # 28 gold phrases: 1 one-word, 19 two-word, 8 three-word
    assert stats.length_dist == pytest.approx((100 / 28, 1900 / 28, 800 / 28, 0.0, 0.0))


def test_stats_empty_split_rejected():
    with pytest.raises(DatasetError):
        compute_stats(DatasetSplit("empty", ()))


def test_render_stats_row(mini_test):
    stats = compute_stats(mini_test)
    table = render_stats("mini", stats)
    assert "N_doc" in table.splitlines()[0] and "mini" in table.splitlines()[1]
    csv = render_stats("mini", stats, fmt="csv").splitlines()
    assert csv[0].split(",")[:3] == ["Dataset", "N_doc", "Avg_doc"]
    assert csv[1].split(",")[1] == "6"
