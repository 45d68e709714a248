"""Context-quality profiling: length/perplexity distributions, answer
containment, the extractive-QA probe, and the manual-review worksheet.

Perplexity and the QA probe fan out through the gateway (and so respect its
cache and rate limits); per-context endpoint failures are recorded as skips,
never fatal. Histograms serialize as {label, bin_edges, counts, mean, median}
and always satisfy sum(counts) == number of scored values with bins covering
min..max.
"""

from __future__ import annotations

import csv
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .common import atomic_write_text
from .gateway import ContextOverflowError, GatewayError, LLMGateway
from .metrics import is_punctuation_token, perplexity, squad_em, squad_f1, tokenize
from .synthesis import Triplet, validate_context

logger = logging.getLogger(__name__)

DEFAULT_REVIEW_CAP = 100  # sample size used for the manual context inspection


class QualityError(ValueError):
    pass


@dataclass(frozen=True)
class Histogram:
    label: str
    bin_edges: tuple[float, ...]
    counts: tuple[int, ...]
    mean: float
    median: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "bin_edges": list(self.bin_edges),
            "counts": list(self.counts),
            "mean": self.mean,
            "median": self.median,
        }


def build_histogram(values: Sequence[float], label: str, bin_width: float) -> Histogram:
    if not values:
        raise QualityError(f"cannot build histogram {label!r} from no values")
    if bin_width <= 0:
        raise QualityError("bin_width must be positive")
    lo = float(np.floor(min(values) / bin_width) * bin_width)
    hi = float(np.ceil(max(values) / bin_width) * bin_width)
    if hi <= lo:
        hi = lo + bin_width
    edges = np.arange(lo, hi + bin_width / 2, bin_width)
    counts, edges = np.histogram(values, bins=edges)
    return Histogram(
        label=label,
        bin_edges=tuple(float(e) for e in edges),
        counts=tuple(int(c) for c in counts),
        mean=float(np.mean(values)),
        median=float(np.median(values)),
    )


def word_count(text: str) -> int:
    """Word count under the canonical tokenizer, punctuation tokens excluded."""
    return sum(1 for token in tokenize(text) if not is_punctuation_token(token))


def length_stats(triplets: Sequence[Triplet], bin_width: int = 10, label: str = "word_count") -> Histogram:
    """Histogram of context word counts."""
    if not triplets:
        raise QualityError("length_stats requires at least one triplet")
    return build_histogram([word_count(t.context) for t in triplets], label, bin_width)


@dataclass
class PerplexityStats:
    series: dict[str, Histogram]
    values: list[dict]  # {pair_id, context_kind, perplexity}
    errors: list[tuple[str, str]]  # (pair_id, error kind)


def perplexity_stats(
    triplets: Sequence[Triplet],
    gateway: LLMGateway,
    scorer_model: str | None = None,
    bin_width: float = 1.0,
) -> PerplexityStats:
    """Per-context perplexity through the gateway's logprob endpoint.

    Emits one labeled histogram per context kind present, so a real vs
    synthetic comparison falls out whenever both kinds are in the input.
    Overflow and endpoint errors are recorded per context and skipped.
    """
    if not triplets:
        raise QualityError("perplexity_stats requires at least one triplet")
    values: list[dict] = []
    errors: list[tuple[str, str]] = []
    for triplet in triplets:
        try:
            lp = gateway.token_logprobs(triplet.context, model_name=scorer_model)
            values.append(
                {
                    "pair_id": triplet.pair_id,
                    "context_kind": triplet.context_kind,
                    "perplexity": perplexity(lp.logprobs),
                }
            )
        except (ContextOverflowError, GatewayError) as exc:
            kind = getattr(exc, "kind", "gateway")
            errors.append((triplet.pair_id, kind))
            logger.warning("perplexity skip for %s: %s", triplet.pair_id, exc)
    series = {}
    for kind in sorted({v["context_kind"] for v in values}):
        series[kind] = build_histogram(
            [v["perplexity"] for v in values if v["context_kind"] == kind],
            label=kind,
            bin_width=bin_width,
        )
    return PerplexityStats(series=series, values=values, errors=errors)


@dataclass
class ContainmentReport:
    rate: float
    misses: list[str]
    n: int


def containment_rate(triplets: Sequence[Triplet], normalized: bool = True) -> ContainmentReport:
    """Fraction of contexts containing their gold answer phrase."""
    if not triplets:
        raise QualityError("containment_rate requires at least one triplet")
    misses = [
        t.pair_id
        for t in triplets
        if not validate_context(t.context, [t.answer], normalized=normalized).contains_answer
    ]
    return ContainmentReport(
        rate=(len(triplets) - len(misses)) / len(triplets),
        misses=misses,
        n=len(triplets),
    )


@dataclass
class ProbeReport:
    em_rate: float
    mean_f1: float
    per_example: list[dict]  # {pair_id, predicted_span, em, f1}
    skips: list[tuple[str, str]]

    @property
    def n(self) -> int:
        return len(self.per_example)


def qa_probe(triplets: Sequence[Triplet], gateway: LLMGateway) -> ProbeReport:
    """Answer each gold question from its context with the extractive QA
    endpoint, then score the predicted span against the gold answer."""
    if not triplets:
        raise QualityError("qa_probe requires at least one triplet")
    per_example: list[dict] = []
    skips: list[tuple[str, str]] = []
    for triplet in triplets:
        try:
            probe = gateway.answer_question(triplet.context, triplet.question)
        except GatewayError as exc:
            skips.append((triplet.pair_id, getattr(exc, "kind", "gateway")))
            logger.warning("qa probe skip for %s: %s", triplet.pair_id, exc)
            continue
        golds = [triplet.answer]
        em = squad_em(probe.predicted_span, golds)
        f1 = squad_f1(probe.predicted_span, golds)
        per_example.append(
            {"pair_id": triplet.pair_id, "predicted_span": probe.predicted_span, "em": em, "f1": f1}
        )
    if not per_example:
        return ProbeReport(em_rate=0.0, mean_f1=0.0, per_example=[], skips=skips)
    n = len(per_example)
    return ProbeReport(
        em_rate=sum(row["em"] for row in per_example) / n,
        mean_f1=sum(row["f1"] for row in per_example) / n,
        per_example=per_example,
        skips=skips,
    )


def review_worksheet(
    cases: Sequence[Mapping],
    path: str | Path,
    cap: int = DEFAULT_REVIEW_CAP,
    seed: int = 0,
) -> Path:
    """Write the human-review CSV (pair_id, question, answers, context, probe_answer).

    When more than ``cap`` cases exist, a seeded sample is taken; row order is
    deterministic, so re-runs produce byte-identical files.
    """
    cases = list(cases)
    if len(cases) > cap:
        chosen = sorted(random.Random(seed).sample(range(len(cases)), cap))
        cases = [cases[i] for i in chosen]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "question", "answers", "context", "probe_answer"])
        for case in cases:
            writer.writerow(
                [
                    case.get("pair_id", ""),
                    case.get("question", ""),
                    json.dumps(case.get("answers", []), ensure_ascii=False),
                    case.get("context", ""),
                    case.get("probe_answer", ""),
                ]
            )
    return path


def build_review_cases(
    triplets: Sequence[Triplet],
    probe: ProbeReport | None = None,
    misses: Sequence[str] | None = None,
) -> list[dict]:
    """Assemble worksheet rows for containment misses and non-exact-match probes."""
    by_id = {t.pair_id: t for t in triplets}
    flagged: dict[str, str] = {}
    for pair_id in misses or []:
        flagged.setdefault(pair_id, "")
    for row in (probe.per_example if probe else []):
        if row["em"] == 0:
            flagged.setdefault(row["pair_id"], row["predicted_span"])
    cases = []
    for pair_id, probe_answer in flagged.items():
        triplet = by_id.get(pair_id)
        if triplet is None:
            continue
        cases.append(
            {
                "pair_id": pair_id,
                "question": triplet.question,
                "answers": [triplet.answer],
                "context": triplet.context,
                "probe_answer": probe_answer,
            }
        )
    return cases


def write_quality_summary(
    path: str | Path,
    containment: ContainmentReport,
    probe: ProbeReport | None = None,
) -> Path:
    payload = {
        "containment_rate": containment.rate,
        "n": containment.n,
        "em_rate": probe.em_rate if probe else None,
        "mean_f1": probe.mean_f1 if probe else None,
        "skips": len(probe.skips) if probe else 0,
    }
    return atomic_write_text(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def write_histogram_json(path: str | Path, histograms: Iterable[Histogram]) -> Path:
    payload = [h.to_dict() for h in histograms]
    return atomic_write_text(path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
