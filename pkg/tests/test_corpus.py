from __future__ import annotations

import pytest

from qgsynth.corpus import (
    Corpus,
    CorpusFormatError,
    EmptyCorpusError,
    QAPair,
    ingest_jsonl,
    ingest_squad,
    sample_subset,
    split,
)

from .conftest import make_corpus, write_jsonl_file


# ---------------------------------------------------------------------------
# ingest_squad


def test_ingest_squad_maps_structure(fixtures_dir):
    corpus = ingest_squad(fixtures_dir / "squad_v11.json")
    assert len(corpus) == 3
    solar = [p for p in corpus if p.title == "Solar_energy"]
    assert len(solar) == 2
    assert solar[0].real_context == solar[1].real_context


def test_ingest_squad_solar_energy_exemplar(fixtures_dir):
    corpus = ingest_squad(fixtures_dir / "squad_v11.json")
    pair = next(p for p in corpus if p.id == "solar-q1")
    assert pair.title == "Solar_energy"
    assert pair.answers == ("photoelectric effect",)
    assert pair.real_context.startswith("Solar power is the conversion")
    assert pair.source == "squad"


def test_ingest_squad_keeps_distinct_answers_only(fixtures_dir):
    corpus = ingest_squad(fixtures_dir / "squad_v11.json")
    q2 = next(p for p in corpus if p.id == "solar-q2")
    assert q2.answers == ("lenses or mirrors", "lenses or mirrors and tracking systems")


def test_ingest_squad_v2_skips_and_counts_unanswerable(fixtures_dir):
    corpus = ingest_squad(fixtures_dir / "squad_v20.json")
    assert len(corpus) == 3
    assert corpus.skipped_unanswerable == 2
    assert {p.id for p in corpus} == {"delta-q1", "delta-q2", "delta-q4"}


def test_ingest_squad_malformed_json_reports_offset(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"data": [}')
    with pytest.raises(CorpusFormatError, match="byte offset"):
        ingest_squad(bad)


def test_ingest_squad_empty_data_raises(tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text('{"data": []}')
    with pytest.raises(EmptyCorpusError):
        ingest_squad(empty)


# ---------------------------------------------------------------------------
# ingest_jsonl


def test_ingest_jsonl_osbio_fixture(fixtures_dir):
    corpus = ingest_jsonl(fixtures_dir / "osbio.jsonl")
    assert len(corpus) == 3
    meiosis = corpus.pairs[1]
    assert meiosis.question == "Meiosis usually produces ____ daughter cells."
    assert meiosis.answers == ("four haploid",)
    assert meiosis.real_context is None
    assert meiosis.id == "osbio:2"  # file stem + line number


def test_ingest_jsonl_empty_file_warns(tmp_path, caplog):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    with caplog.at_level("WARNING"):
        corpus = ingest_jsonl(path)
    assert len(corpus) == 0
    assert any("empty corpus" in rec.message for rec in caplog.records)


def test_ingest_jsonl_missing_answer_names_line(tmp_path):
    path = write_jsonl_file(
        tmp_path / "broken.jsonl",
        [{"question": "ok?", "answer": "yes"}] * 6 + [{"question": "broken?"}],
    )
    with pytest.raises(CorpusFormatError, match="line 7: missing field answer"):
        ingest_jsonl(path)


def test_ingest_jsonl_malformed_line_fails_fast(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"question": "q", "answer": "a"}\nnot json\n')
    with pytest.raises(CorpusFormatError, match="line 2"):
        ingest_jsonl(path)


def test_ingest_jsonl_respects_explicit_ids_and_answers_list(tmp_path):
    path = write_jsonl_file(
        tmp_path / "c.jsonl",
        [{"id": "x1", "question": "q?", "answers": ["a", "b"], "context": "ctx a", "title": "T"}],
    )
    pair = ingest_jsonl(path).pairs[0]
    assert pair.id == "x1"
    assert pair.answers == ("a", "b")
    assert pair.real_context == "ctx a"
    assert pair.title == "T"


def test_duplicate_ids_rejected(tmp_path):
    path = write_jsonl_file(
        tmp_path / "dup.jsonl",
        [{"id": "same", "question": "q1?", "answer": "a"},
         {"id": "same", "question": "q2?", "answer": "b"}],
    )
    with pytest.raises(CorpusFormatError, match="duplicate"):
        ingest_jsonl(path)


def test_duplicate_questions_with_distinct_ids_are_kept(tmp_path):
    path = write_jsonl_file(
        tmp_path / "dupq.jsonl",
        [{"id": "a", "question": "same question?", "answer": "x"},
         {"id": "b", "question": "same question?", "answer": "x"}],
    )
    assert len(ingest_jsonl(path)) == 2


def test_ingest_nfc_normalizes_text(tmp_path):
    path = write_jsonl_file(
        tmp_path / "nfc.jsonl",
        [{"id": "n", "question": "what is a café?", "answer": "café"}],
    )
    pair = ingest_jsonl(path).pairs[0]
    assert "café" in pair.question
    assert pair.answers[0] == "café"


# ---------------------------------------------------------------------------
# round trip / hashing


def test_reingest_round_trip_preserves_content_hash(fixtures_dir, tmp_path):
    corpus = ingest_squad(fixtures_dir / "squad_v11.json")
    out = tmp_path / "roundtrip.jsonl"
    corpus.write_jsonl(out)
    again = ingest_jsonl(out)
    assert again.content_hash == corpus.content_hash
    assert again.ids() == corpus.ids()


def test_content_hash_changes_with_content():
    a = make_corpus(3)
    b = Corpus(pairs=a.pairs[:-1])
    assert a.content_hash != b.content_hash


def test_content_hash_ignores_source_field():
    pair = QAPair(id="i", question="q?", answers=("a",))
    relabeled = QAPair(id="i", question="q?", answers=("a",), source="osbio")
    assert Corpus(pairs=(pair,)).content_hash == Corpus(pairs=(relabeled,)).content_hash


# ---------------------------------------------------------------------------
# split


def test_split_sizes_round_half_up():
    train, test = split(make_corpus(10), 0.1, seed=7)
    assert len(test) == 1
    assert len(train) == 9


def test_split_is_deterministic():
    corpus = make_corpus(20)
    first = split(corpus, 0.25, seed=3)
    second = split(corpus, 0.25, seed=3)
    assert first[0].ids() == second[0].ids()
    assert first[1].ids() == second[1].ids()


def test_split_partitions_exhaustively_and_disjointly():
    corpus = make_corpus(17)
    train, test = split(corpus, 0.3, seed=11)
    train_ids, test_ids = set(train.ids()), set(test.ids())
    assert train_ids | test_ids == set(corpus.ids())
    assert not (train_ids & test_ids)


def test_split_different_seeds_differ_with_same_sizes():
    corpus = make_corpus(100)
    a_train, a_test = split(corpus, 0.5, seed=1)
    b_train, b_test = split(corpus, 0.5, seed=2)
    assert len(a_test) == len(b_test) == 50
    assert set(a_test.ids()) != set(b_test.ids())


def test_split_rejects_bad_fraction():
    corpus = make_corpus(4)
    for fraction in (0.0, 1.0, -0.5, 2.0):
        with pytest.raises(ValueError):
            split(corpus, fraction, seed=0)


def test_split_rejects_empty_corpus():
    with pytest.raises(EmptyCorpusError):
        split(Corpus(pairs=()), 0.5, seed=0)


# ---------------------------------------------------------------------------
# sample_subset


def test_sample_full_size_is_identity():
    corpus = make_corpus(8)
    assert sample_subset(corpus, 8, seed=5).ids() == corpus.ids()


def test_sample_preserves_relative_order():
    corpus = make_corpus(50)
    subset = sample_subset(corpus, 10, seed=2)
    positions = [corpus.ids().index(i) for i in subset.ids()]
    assert positions == sorted(positions)


def test_sample_is_deterministic_and_unique():
    corpus = make_corpus(200)
    a = sample_subset(corpus, 50, seed=9)
    b = sample_subset(corpus, 50, seed=9)
    assert a.ids() == b.ids()
    assert len(set(a.ids())) == 50


def test_sample_membership_oracle():
    corpus = make_corpus(40)
    full_ids = set(corpus.ids())
    for seed in range(5):
        subset = sample_subset(corpus, 5, seed=seed)
        assert set(subset.ids()) <= full_ids


def test_sample_too_large_reports_both_sizes():
    with pytest.raises(ValueError, match="9.*4|4.*9"):
        sample_subset(make_corpus(4), 9, seed=0)


def test_sample_1000_from_full_scale_corpus():
    pairs = tuple(
        QAPair(id=f"n{i}", question=f"what is fact {i}?", answers=(f"fact {i}",))
        for i in range(87599)
    )
    corpus = Corpus(pairs=pairs)
    subset = sample_subset(corpus, 1000, seed=17)
    assert len(set(subset.ids())) == 1000
