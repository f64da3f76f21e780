from __future__ import annotations

import json

import pytest

from kgrag.corpus import Corpus, Document, SourceKind, ingest, load, save, store_document
from kgrag.errors import ConflictError, DataError, MissingInputError, ParseError


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")


def test_empty_file_gives_empty_corpus(tmp_path):
    p = tmp_path / "empty.jsonl"
    p.write_text("")
    assert len(ingest(p)) == 0


def test_three_line_fixture_in_order(tmp_path):
    p = tmp_path / "c.jsonl"
    write_jsonl(p, [{"id": f"d{i}", "text": f"text {i}", "source_kind": "wiki"} for i in (3, 1, 2)])
    corpus = ingest(p)
    assert [d.id for d in corpus] == ["d3", "d1", "d2"]
    assert all(d.source_kind is SourceKind.WIKI for d in corpus)


def test_repeated_id_names_it(tmp_path):
    p = tmp_path / "c.jsonl"
    write_jsonl(p, [{"id": "d1", "text": "a"}, {"id": "d1", "text": "b"}])
    with pytest.raises(ConflictError, match="d1"):
        ingest(p)


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "c.jsonl"
    p.write_text('{"id": "a", "text": "x"}\n{"id": "b", "text": \n')
    with pytest.raises(ParseError) as err:
        ingest(p)
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_missing_text_field_is_parse_error(tmp_path):
    p = tmp_path / "c.jsonl"
    write_jsonl(p, [{"id": "a"}])
    with pytest.raises(ParseError):
        ingest(p)


def test_missing_path():
    with pytest.raises(MissingInputError):
        ingest("/nonexistent/corpus.jsonl")


def test_plain_dir(tmp_path):
    (tmp_path / "b.txt").write_text("second doc")
    (tmp_path / "a.md").write_text("first doc")
    (tmp_path / "skip.bin").write_text("ignored")
    corpus = ingest(tmp_path, "plain-dir")
    assert [d.id for d in corpus] == ["a", "b"]


def test_document_invariants():
    with pytest.raises(DataError):
        Document("x", SourceKind.WEB, "t", "")
    Document("img", SourceKind.IMAGE, "t", "", {"image_ref": "a.png"})
    with pytest.raises(DataError):
        Document("x", SourceKind.WEB, "t", "body", {"URL": "u"})


def test_store_into_empty_and_duplicate():
    c = store_document(Corpus(), Document("a", "web", "t", "body"))
    assert len(c) == 1
    with pytest.raises(ConflictError):
        store_document(c, Document("a", "web", "t", "other"))


def test_store_then_load_is_byte_identical(tmp_path):
    text = "Naïve  text\twith\nodd   spacing and ünïcode ✓"
    c = store_document(Corpus(), Document("a", "scholar", "t", text, {"url": "http://x"}))
    p = tmp_path / "c.jsonl"
    save(c, p)
    back = load(p)
    assert back.get("a").text == text
    assert back == c
    assert back.checksum == c.checksum


def test_checksum_changes_iff_document_changes():
    a = Corpus((Document("a", "web", "t", "one"),))
    b = Corpus((Document("a", "web", "t", "one"),))
    c = Corpus((Document("a", "web", "t", "two"),))
    assert a.checksum == b.checksum
    assert a.checksum != c.checksum


def test_ingest_is_deterministic(fixtures_dir):
    assert ingest(fixtures_dir / "corpus.jsonl").checksum == ingest(fixtures_dir / "corpus.jsonl").checksum


def test_navigate_output_stores_as_synthesized(fixture_providers, fixture_config):
    from kgrag.agents import navigate

    result = navigate("Generate a process flow diagram", "ammonia", fixture_providers, n_max=1, workers=1)
    c = store_document(Corpus(), result.document)
    assert c.documents[0].source_kind is SourceKind.SYNTHESIZED
