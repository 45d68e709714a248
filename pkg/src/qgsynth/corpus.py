"""QA corpus ingestion, normalization, and seeded splitting/sampling.

Two input shapes are supported: SQuAD v1.1/v2.0 JSON (data → paragraphs →
qas) and generic QA JSONL (one object per line with at least question +
answer). Both normalize into QAPair records. All text is NFC-normalized and
trimmed at ingest so hashing and tokenization are stable.
"""

from __future__ import annotations

import json
import logging
import random
import unicodedata
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .common import content_hash, round_half_up, write_jsonl

logger = logging.getLogger(__name__)

SOURCES = ("squad", "osbio", "generic")


class CorpusFormatError(ValueError):
    """Malformed input file (bad JSON, missing fields, duplicate ids)."""


class EmptyCorpusError(ValueError):
    """An operation that requires records was given none."""


def _clean(text: str) -> str:
    return unicodedata.normalize("NFC", text).strip()


@dataclass(frozen=True)
class QAPair:
    """One question/answer record; the unit every downstream stage consumes.

    ``answers`` keeps all distinct gold answer texts so max-over-golds
    EM/F1 semantics are possible later. ``real_context`` and ``title`` are
    present for context-bearing corpora (SQuAD) and absent for QA-only ones.
    """

    id: str
    question: str
    answers: tuple[str, ...]
    real_context: str | None = None
    title: str | None = None
    source: str = "generic"

    def __post_init__(self):
        if not self.question.strip():
            raise CorpusFormatError(f"pair {self.id!r}: empty question")
        if not self.answers or any(not a.strip() for a in self.answers):
            raise CorpusFormatError(f"pair {self.id!r}: answers must be non-empty")
        if self.source not in SOURCES:
            raise CorpusFormatError(f"pair {self.id!r}: unknown source {self.source!r}")

    def to_record(self) -> dict:
        record = {"id": self.id, "question": self.question, "answers": list(self.answers)}
        if self.real_context is not None:
            record["context"] = self.real_context
        if self.title is not None:
            record["title"] = self.title
        record["source"] = self.source
        return record


@dataclass(frozen=True)
class Corpus:
    """An ordered, id-unique collection of QAPairs.

    ``content_hash`` covers the semantic payload (id, question, answers,
    context, title) and deliberately excludes ``source`` and provenance, so
    a corpus serialized to JSONL and re-ingested hashes identically.
    """

    pairs: tuple[QAPair, ...]
    source_path: str | None = None
    skipped_unanswerable: int = 0

    def __post_init__(self):
        seen: set[str] = set()
        for pair in self.pairs:
            if pair.id in seen:
                raise CorpusFormatError(f"duplicate pair id {pair.id!r}")
            seen.add(pair.id)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[QAPair]:
        return iter(self.pairs)

    def ids(self) -> list[str]:
        return [pair.id for pair in self.pairs]

    @property
    def content_hash(self) -> str:
        payload = [
            [pair.id, pair.question, list(pair.answers), pair.real_context, pair.title]
            for pair in self.pairs
        ]
        return content_hash(payload)

    def write_jsonl(self, path: str | Path) -> Path:
        return write_jsonl(path, (pair.to_record() for pair in self.pairs))


def ingest_squad(path: str | Path) -> Corpus:
    """Load a SQuAD v1.1/v2.0 JSON file.

    Each QA item becomes one QAPair with the enclosing paragraph as
    ``real_context`` and the article title as ``title``. v2.0 unanswerable
    items are skipped and counted in ``skipped_unanswerable``.
    """
    path = Path(path)
    raw = path.read_text(encoding="utf-8")
    try:
        payload = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{path}: malformed JSON at byte offset {exc.pos}: {exc.msg}") from exc

    articles = payload.get("data")
    if not isinstance(articles, list) or not articles:
        raise EmptyCorpusError(f"{path}: 'data' array is missing or empty")

    pairs: list[QAPair] = []
    skipped = 0
    for article in articles:
        title = _clean(article.get("title", "")) or None
        for paragraph in article.get("paragraphs", []):
            context = _clean(paragraph.get("context", ""))
            for qa in paragraph.get("qas", []):
                if qa.get("is_impossible", False):
                    skipped += 1
                    continue
                answers = []
                for answer in qa.get("answers", []):
                    text = _clean(answer.get("text", ""))
                    if text and text not in answers:
                        answers.append(text)
                qa_id = str(qa.get("id", "")) or f"{path.stem}:{len(pairs)}"
                if not answers:
                    raise CorpusFormatError(f"{path}: qa {qa_id!r} has no answers")
                pairs.append(
                    QAPair(
                        id=qa_id,
                        question=_clean(qa.get("question", "")),
                        answers=tuple(answers),
                        real_context=context,
                        title=title,
                        source="squad",
                    )
                )
    return Corpus(pairs=tuple(pairs), source_path=str(path), skipped_unanswerable=skipped)


def ingest_jsonl(path: str | Path, source: str = "generic") -> Corpus:
    """Load generic QA JSONL: one object per line.

    Recognized fields: id?, question, answer | answers[], context?, title?.
    Any unparsable or incomplete line fails the whole ingest, naming the
    line number; there are no silent skips.
    """
    path = Path(path)
    pairs: list[QAPair] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: malformed JSON: {exc.msg}") from exc
            if not isinstance(record, dict):
                raise CorpusFormatError(f"{path}: line {lineno}: expected an object")
            if "question" not in record:
                raise CorpusFormatError(f"{path}: line {lineno}: missing field question")
            if "answers" in record:
                raw_answers = record["answers"]
                if not isinstance(raw_answers, list):
                    raise CorpusFormatError(f"{path}: line {lineno}: answers must be a list")
            elif "answer" in record:
                raw_answers = [record["answer"]]
            else:
                raise CorpusFormatError(f"{path}: line {lineno}: missing field answer")
            answers = tuple(_clean(str(a)) for a in raw_answers)
            pair_id = str(record["id"]) if "id" in record else f"{path.stem}:{lineno}"
            context = record.get("context")
            title = record.get("title")
            try:
                pairs.append(
                    QAPair(
                        id=pair_id,
                        question=_clean(str(record["question"])),
                        answers=answers,
                        real_context=_clean(str(context)) if context is not None else None,
                        title=_clean(str(title)) if title is not None else None,
                        source=str(record.get("source", source)),
                    )
                )
            except CorpusFormatError as exc:
                raise CorpusFormatError(f"{path}: line {lineno}: {exc}") from exc
    if not pairs:
        logger.warning("ingested empty corpus from %s", path)
    return Corpus(pairs=tuple(pairs), source_path=str(path))


def split(corpus: Corpus, test_fraction: float, seed: int) -> tuple[Corpus, Corpus]:
    """Seeded disjoint, exhaustive train/test partition.

    |test| = round(test_fraction * n) with half-up ties. Both sides preserve
    the corpus's original relative order; identical inputs give identical
    splits.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot split an empty corpus")
    n_test = round_half_up(test_fraction * len(corpus))
    indices = list(range(len(corpus)))
    random.Random(seed).shuffle(indices)
    test_idx = set(indices[:n_test])
    train_pairs = tuple(p for i, p in enumerate(corpus.pairs) if i not in test_idx)
    test_pairs = tuple(p for i, p in enumerate(corpus.pairs) if i in test_idx)
    return (
        Corpus(pairs=train_pairs, source_path=corpus.source_path),
        Corpus(pairs=test_pairs, source_path=corpus.source_path),
    )


def sample_subset(corpus: Corpus, n: int, seed: int) -> Corpus:
    """Uniform sample of ``n`` pairs without replacement, original order kept."""
    if n <= 0:
        raise ValueError(f"sample size must be positive, got {n}")
    if n > len(corpus):
        raise ValueError(f"sample size {n} exceeds corpus size {len(corpus)}")
    chosen = sorted(random.Random(seed).sample(range(len(corpus)), n))
    return Corpus(
        pairs=tuple(corpus.pairs[i] for i in chosen),
        source_path=corpus.source_path,
    )
