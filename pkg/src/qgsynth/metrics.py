"""Reference implementations of the QG evaluation metrics.

Implements, from scratch: sentence/corpus BLEU-4 with clipped modified n-gram
precision, ROUGE-L via longest-common-subsequence, a simplified two-stage
METEOR (exact + stem unigram alignment; no synonym dictionary, hence
"meteor_lite"), SQuAD-style answer normalization with exact-match and
token-bag F1, and perplexity aggregation over token logprobs.

All scores are in [0, 1] except perplexity (positive, unbounded). Corpus BLEU
pools n-gram counts across examples; METEOR/ROUGE-L/EM/F1 are macro-averaged.
"""

from __future__ import annotations

import math
import re
import string
import unicodedata
from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .stemming import porter_stem

# A token is a maximal run of word characters, or a single non-space symbol.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

_ARTICLE_RE = re.compile(r"\b(a|an|the)\b")
_PUNCT = frozenset(string.punctuation)

TokenSeq = list[str]


def tokenize(text: str) -> TokenSeq:
    """Canonical tokenizer: NFC-normalize, lowercase, split punctuation apart.

    >>> tokenize("The cat's mat.")
    ['the', 'cat', "'", 's', 'mat', '.']
    """
    text = unicodedata.normalize("NFC", text).lower()
    return _TOKEN_RE.findall(text)


def is_punctuation_token(token: str) -> bool:
    return all(not ch.isalnum() for ch in token)


# ---------------------------------------------------------------------------
# BLEU-4


def _ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _bleu_stats(
    candidate: Sequence[str], references: Sequence[Sequence[str]]
) -> tuple[list[int], list[int], int, int]:
    """Clipped match / total counts for n=1..4, candidate length, closest ref length."""
    matches = [0, 0, 0, 0]
    totals = [0, 0, 0, 0]
    for n in range(1, 5):
        cand_counts = _ngram_counts(candidate, n)
        max_ref: Counter = Counter()
        for ref in references:
            for gram, count in _ngram_counts(ref, n).items():
                if count > max_ref[gram]:
                    max_ref[gram] = count
        matches[n - 1] = sum(min(count, max_ref[gram]) for gram, count in cand_counts.items())
        totals[n - 1] = max(len(candidate) - n + 1, 0)
    c = len(candidate)
    # Closest reference length; ties broken toward the shorter reference.
    r = min((abs(len(ref) - c), len(ref)) for ref in references)[1]
    return matches, totals, c, r


def _bleu_from_stats(matches: Sequence[int], totals: Sequence[int], c: int, r: int) -> float:
    if c == 0:
        return 0.0
    log_sum = 0.0
    for n in range(1, 5):
        num, den = matches[n - 1], totals[n - 1]
        if n >= 2 and num == 0:
            num, den = num + 1, den + 1
        if num == 0 or den == 0:
            return 0.0  # zero unigram overlap: no smoothing below n=2
        log_sum += 0.25 * math.log(num / den)
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return brevity * math.exp(log_sum)


def bleu4(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Sentence BLEU-4 with add-one smoothing on zero numerators for n >= 2.

    The brevity penalty exp(1 - r/c) applies when the candidate is shorter
    than the closest reference. An empty candidate scores 0 by definition.
    """
    if not candidate:
        return 0.0
    if not references:
        raise ValueError("bleu4 requires at least one reference")
    return _bleu_from_stats(*_bleu_stats(candidate, references))


# ---------------------------------------------------------------------------
# ROUGE-L


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Length of the longest common subsequence, O(len(a) * len(b)) DP."""
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        curr = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                curr.append(prev[j - 1] + 1)
            else:
                curr.append(max(prev[j], curr[j - 1]))
        prev = curr
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> dict[str, float]:
    """LCS-based precision/recall/F1 (beta=1). Empty inputs score 0."""
    if not candidate or not reference:
        return {"precision": 0.0, "recall": 0.0, "f": 0.0}
    length = lcs_length(candidate, reference)
    precision = length / len(candidate)
    recall = length / len(reference)
    f = 0.0 if length == 0 else 2 * precision * recall / (precision + recall)
    return {"precision": precision, "recall": recall, "f": f}


# ---------------------------------------------------------------------------
# METEOR (lite)


def _align_stage(
    candidate: Sequence[str],
    reference: Sequence[str],
    cand_free: list[int],
    ref_free: list[int],
    key,
) -> list[tuple[int, int]]:
    """Match free positions whose keyed forms are equal, in left-to-right order.

    In-order pairing per keyed word type yields a maximum matching for the
    stage and keeps same-word matches crossing-free.
    """
    ref_slots: dict[str, deque] = defaultdict(deque)
    for rj in ref_free:
        ref_slots[key(reference[rj])].append(rj)
    pairs = []
    for ci in cand_free:
        slots = ref_slots.get(key(candidate[ci]))
        if slots:
            pairs.append((ci, slots.popleft()))
    return pairs


def _chunk_count(pairs: list[tuple[int, int]]) -> int:
    pairs = sorted(pairs)
    chunks = 0
    prev = None
    for ci, ri in pairs:
        if prev is None or ci != prev[0] + 1 or ri != prev[1] + 1:
            chunks += 1
        prev = (ci, ri)
    return chunks


def meteor_lite(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """Simplified METEOR: exact then stem unigram alignment, no synonyms.

    F_mean = 10PR / (R + 9P); penalty = 0.5 * (chunks / matches)^3;
    score = F_mean * (1 - penalty). Zero matches score 0.
    """
    if not candidate or not reference:
        return 0.0
    pairs = _align_stage(
        candidate, reference, list(range(len(candidate))), list(range(len(reference))), lambda w: w
    )
    cand_used = {ci for ci, _ in pairs}
    ref_used = {ri for _, ri in pairs}
    pairs += _align_stage(
        candidate,
        reference,
        [i for i in range(len(candidate)) if i not in cand_used],
        [j for j in range(len(reference)) if j not in ref_used],
        porter_stem,
    )
    m = len(pairs)
    if m == 0:
        return 0.0
    precision = m / len(candidate)
    recall = m / len(reference)
    f_mean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (_chunk_count(pairs) / m) ** 3
    return f_mean * (1.0 - penalty)


# ---------------------------------------------------------------------------
# SQuAD answer matching


def squad_normalize(text: str) -> str:
    """Lowercase, strip punctuation, drop articles (a/an/the), collapse whitespace."""
    text = text.lower()
    text = "".join(ch for ch in text if ch not in _PUNCT)
    text = _ARTICLE_RE.sub(" ", text)
    return " ".join(text.split())


def contains_normalized_phrase(text: str, phrase: str) -> bool:
    """True when ``phrase`` occurs as a contiguous token run inside ``text``,
    both sides SQuAD-normalized. An empty normalized phrase never matches."""
    needle = squad_normalize(phrase).split()
    if not needle:
        return False
    haystack = squad_normalize(text).split()
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


def _f1_single(prediction: str, gold: str) -> float:
    pred_tokens = squad_normalize(prediction).split()
    gold_tokens = squad_normalize(gold).split()
    if not pred_tokens or not gold_tokens:
        return float(pred_tokens == gold_tokens)
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    return 2 * overlap / (len(pred_tokens) + len(gold_tokens))


def squad_em(prediction: str, golds: Sequence[str]) -> int:
    """1 iff the normalized prediction equals any normalized gold answer."""
    if not golds:
        raise ValueError("squad_em requires at least one gold answer")
    normalized = squad_normalize(prediction)
    return int(any(normalized == squad_normalize(g) for g in golds))


def squad_f1(prediction: str, golds: Sequence[str]) -> float:
    """Max over golds of token-bag F1 (counted with multiplicity)."""
    if not golds:
        raise ValueError("squad_f1 requires at least one gold answer")
    return max(_f1_single(prediction, g) for g in golds)


# ---------------------------------------------------------------------------
# Perplexity


def perplexity(logprobs: Sequence[float]) -> float:
    """exp(-mean(logprobs)); undefined (raises) for empty input."""
    if len(logprobs) == 0:
        raise ValueError("perplexity of empty logprob sequence is undefined")
    return math.exp(-sum(logprobs) / len(logprobs))


# ---------------------------------------------------------------------------
# Corpus scoring


@dataclass(frozen=True)
class ExampleScores:
    pair_id: str
    bleu4: float
    rouge_l_f: float
    meteor: float
    em: int
    f1: float
    external: float | None = None


@dataclass
class MetricReport:
    """Per-example scores plus corpus aggregates.

    Corpus BLEU-4 is computed from pooled n-gram counts; the remaining
    corpus values are means of the per-example columns.
    """

    per_example: list[ExampleScores]
    corpus: dict[str, float]
    n: int

    def to_dict(self) -> dict:
        per_example = []
        for ex in self.per_example:
            row = {
                "pair_id": ex.pair_id,
                "bleu4": ex.bleu4,
                "rouge_l_f": ex.rouge_l_f,
                "meteor": ex.meteor,
                "em": ex.em,
                "f1": ex.f1,
            }
            if ex.external is not None:
                row["external"] = ex.external
            per_example.append(row)
        return {"n": self.n, "corpus": dict(self.corpus), "per_example": per_example}

    @classmethod
    def from_dict(cls, payload: Mapping) -> "MetricReport":
        per_example = [
            ExampleScores(
                pair_id=row["pair_id"],
                bleu4=row["bleu4"],
                rouge_l_f=row["rouge_l_f"],
                meteor=row["meteor"],
                em=row["em"],
                f1=row["f1"],
                external=row.get("external"),
            )
            for row in payload["per_example"]
        ]
        return cls(per_example=per_example, corpus=dict(payload["corpus"]), n=payload["n"])


def score_corpus(
    predictions: Iterable[Mapping],
    golds: Iterable[Mapping],
    external_scores: Mapping[str, float] | None = None,
) -> MetricReport:
    """Score predicted questions against gold questions, id-aligned.

    ``predictions`` rows carry {pair_id, text}; ``golds`` rows carry
    {pair_id, question}. ``external_scores`` (optional) maps pair_id to a
    score from an external scorer and is merged as an extra column.
    """
    pred_by_id = {row["pair_id"]: row["text"] for row in predictions}
    gold_by_id = {row["pair_id"]: row["question"] for row in golds}
    if pred_by_id.keys() != gold_by_id.keys():
        missing = sorted(gold_by_id.keys() - pred_by_id.keys())[:5]
        extra = sorted(pred_by_id.keys() - gold_by_id.keys())[:5]
        raise ValueError(
            f"prediction/gold id mismatch: missing predictions for {missing}, "
            f"unexpected predictions for {extra}"
        )
    if not gold_by_id:
        raise ValueError("cannot score an empty corpus")

    per_example = []
    pooled_matches = [0, 0, 0, 0]
    pooled_totals = [0, 0, 0, 0]
    pooled_c = 0
    pooled_r = 0
    for pair_id in gold_by_id:
        cand = tokenize(pred_by_id[pair_id])
        ref = tokenize(gold_by_id[pair_id])
        matches, totals, c, r = _bleu_stats(cand, [ref])
        for i in range(4):
            pooled_matches[i] += matches[i]
            pooled_totals[i] += totals[i]
        pooled_c += c
        pooled_r += r
        per_example.append(
            ExampleScores(
                pair_id=pair_id,
                bleu4=_bleu_from_stats(matches, totals, c, r),
                rouge_l_f=rouge_l(cand, ref)["f"],
                meteor=meteor_lite(cand, ref),
                em=squad_em(pred_by_id[pair_id], [gold_by_id[pair_id]]),
                f1=squad_f1(pred_by_id[pair_id], [gold_by_id[pair_id]]),
                external=None if external_scores is None else external_scores.get(pair_id),
            )
        )

    n = len(per_example)
    corpus = {
        "bleu4": _bleu_from_stats(pooled_matches, pooled_totals, pooled_c, pooled_r),
        "meteor": sum(ex.meteor for ex in per_example) / n,
        "rouge_l": sum(ex.rouge_l_f for ex in per_example) / n,
        "em_rate": sum(ex.em for ex in per_example) / n,
        "mean_f1": sum(ex.f1 for ex in per_example) / n,
    }
    if external_scores is not None:
        known = [ex.external for ex in per_example if ex.external is not None]
        if known:
            corpus["external"] = sum(known) / len(known)
    return MetricReport(per_example=per_example, corpus=corpus, n=n)
