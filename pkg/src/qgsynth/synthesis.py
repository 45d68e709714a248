"""Context synthesis over a corpus: prompts in, validated Triplets out.

The output file is append-only JSONL keyed by pair_id, which makes runs
crash-safe and resumable: a re-run skips every pair already present and only
touches the gateway for the remainder. Per-pair failures are recorded, never
fatal, unless the failure rate crosses the configured threshold (protection
against burning API budget on a misconfigured endpoint).
"""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

from .common import content_hash
from .corpus import Corpus
from .gateway import CompletionRequest, GatewayError, LLMGateway
from .metrics import contains_normalized_phrase
from .prompts import Exemplar, Prompt, StylePreset, build_context_prompt
from .report import ExperimentManifest, manifest_for

logger = logging.getLogger(__name__)

CONTEXT_KINDS = ("real", "synthetic_zero", "synthetic_few")

DEFAULT_FAILURE_THRESHOLD = 0.1

_MODE_TO_KIND = {"zero_shot": "synthetic_zero", "few_shot": "synthetic_few"}


class SynthesisError(RuntimeError):
    pass


class FailureRateExceeded(SynthesisError):
    """Raised when too large a share of the corpus failed; partial output remains."""

    def __init__(self, message: str, completed: int, failed: list[tuple[str, str]]):
        super().__init__(message)
        self.completed = completed
        self.failed = failed


@dataclass(frozen=True)
class GenMeta:
    model_name: str
    request_key: str
    timestamp: str
    prompt_snapshot_hash: str
    finish_reason: str = "stop"  # kept so length-truncated contexts stay filterable

    def to_dict(self) -> dict:
        return {
            "model_name": self.model_name,
            "request_key": self.request_key,
            "timestamp": self.timestamp,
            "prompt_snapshot_hash": self.prompt_snapshot_hash,
            "finish_reason": self.finish_reason,
        }


@dataclass(frozen=True)
class Triplet:
    """A {question, context, answer} training record with context provenance."""

    pair_id: str
    question: str
    answer: str
    context: str
    context_kind: str
    gen_meta: GenMeta | None = None

    def __post_init__(self):
        if self.context_kind not in CONTEXT_KINDS:
            raise ValueError(f"triplet {self.pair_id!r}: unknown context_kind {self.context_kind!r}")
        if not self.context:
            raise ValueError(f"triplet {self.pair_id!r}: context must be non-empty")
        if self.context_kind == "real" and self.gen_meta is not None:
            raise ValueError(f"triplet {self.pair_id!r}: real contexts carry no gen_meta")
        if self.context_kind != "real" and self.gen_meta is None:
            raise ValueError(f"triplet {self.pair_id!r}: synthetic contexts require gen_meta")

    def to_record(self) -> dict:
        record = {
            "pair_id": self.pair_id,
            "question": self.question,
            "answer": self.answer,
            "context": self.context,
            "context_kind": self.context_kind,
        }
        if self.gen_meta is not None:
            record["gen_meta"] = self.gen_meta.to_dict()
        return record

    @classmethod
    def from_record(cls, record: dict) -> "Triplet":
        meta = record.get("gen_meta")
        return cls(
            pair_id=record["pair_id"],
            question=record["question"],
            answer=record["answer"],
            context=record["context"],
            context_kind=record["context_kind"],
            gen_meta=None
            if meta is None
            else GenMeta(
                model_name=meta["model_name"],
                request_key=meta["request_key"],
                timestamp=meta["timestamp"],
                prompt_snapshot_hash=meta["prompt_snapshot_hash"],
                finish_reason=meta.get("finish_reason", "stop"),
            ),
        )


@dataclass
class SynthesisRun:
    manifest: ExperimentManifest
    completed: int
    failed: list[tuple[str, str]]
    output_path: Path

    @property
    def attempted(self) -> int:
        return self.completed + len(self.failed)


@dataclass(frozen=True)
class ValidationFlags:
    empty: bool
    too_short: bool
    too_long: bool
    contains_answer: bool


def validate_context(
    context: str,
    answers: Sequence[str],
    limits: dict | None = None,
    normalized: bool = True,
) -> ValidationFlags:
    """Pure quality classification of one context against its gold answers.

    ``contains_answer`` is true iff any gold answer occurs as a contiguous
    token run of the context after metric normalization (raw case-sensitive
    substring matching is available via ``normalized=False``). Length flags
    count non-punctuation words against ``limits`` {min_words, max_words}.
    """
    limits = limits or {}
    words = [w for w in context.split() if any(ch.isalnum() for ch in w)]
    if normalized:
        contains = any(contains_normalized_phrase(context, answer) for answer in answers)
    else:
        contains = any(answer in context for answer in answers if answer)
    return ValidationFlags(
        empty=not context.strip(),
        too_short=len(words) < limits["min_words"] if "min_words" in limits else False,
        too_long=len(words) > limits["max_words"] if "max_words" in limits else False,
        contains_answer=contains,
    )


def prompt_snapshot_hash(prompt: Prompt) -> str:
    return content_hash(prompt.to_payload())


def read_triplets(path: str | Path) -> list[Triplet]:
    """Load triplets in canonical (pair_id) order.

    Files are appended in completion order, which varies with parallel
    scheduling; ordering at read time keeps every downstream stage a pure
    function of file content.
    """
    triplets = [Triplet.from_record(record) for _, record in _iter_triplet_records(path)]
    triplets.sort(key=lambda t: t.pair_id)
    return triplets


def write_triplets(path: str | Path, triplets: Iterable[Triplet]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for triplet in triplets:
            fh.write(json.dumps(triplet.to_record(), ensure_ascii=False) + "\n")
    return path


def _iter_triplet_records(path: str | Path):
    """Parse triplet JSONL, tolerating one truncated final line (crash residue)."""
    path = Path(path)
    if not path.exists():
        return
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield lineno, json.loads(line)
        except json.JSONDecodeError:
            if lineno == len(lines):
                logger.warning("%s: dropping truncated final line %d (resuming)", path, lineno)
                return
            raise


def existing_pair_ids(path: str | Path) -> set[str]:
    return {record["pair_id"] for _, record in _iter_triplet_records(path)}


def triplets_content_hash(triplets_or_path) -> str:
    """Order-independent content hash of triplets, timestamps excluded.

    Used for idempotence checks: two runs over the same inputs hash equal
    even though append order and generation timestamps differ.
    """
    if isinstance(triplets_or_path, (str, Path)):
        triplets = read_triplets(triplets_or_path)
    else:
        triplets = list(triplets_or_path)
    payload = []
    for triplet in sorted(triplets, key=lambda t: t.pair_id):
        record = triplet.to_record()
        if "gen_meta" in record:
            record["gen_meta"] = {
                k: v for k, v in record["gen_meta"].items() if k != "timestamp"
            }
        payload.append(record)
    return content_hash(payload)


def attach_real_contexts(corpus: Corpus) -> list[Triplet]:
    """Wrap every pair's real context as a Triplet (context_kind 'real')."""
    missing = [pair.id for pair in corpus if not pair.real_context]
    if missing:
        raise SynthesisError(
            f"{len(missing)} pairs have no real context: {', '.join(missing[:10])}"
            + ("…" if len(missing) > 10 else "")
        )
    return [
        Triplet(
            pair_id=pair.id,
            question=pair.question,
            answer=pair.answers[0],
            context=pair.real_context,
            context_kind="real",
        )
        for pair in corpus
    ]


def synthesize(
    corpus: Corpus,
    style: StylePreset,
    mode: str,
    exemplars: Sequence[Exemplar],
    gateway: LLMGateway,
    out_path: str | Path,
    parallelism: int = 4,
    failure_threshold: float = DEFAULT_FAILURE_THRESHOLD,
    as_single_message: bool = False,
) -> SynthesisRun:
    """Generate one synthetic context per QA pair, resumably.

    Already-present pair_ids in ``out_path`` are skipped without touching the
    gateway. Completed triplets are appended (and flushed) as they finish, so
    an interrupted run loses at most one in-flight record. Raises
    FailureRateExceeded once failures surpass ``failure_threshold`` as a
    fraction of the whole corpus.
    """
    if len(corpus) == 0:
        raise SynthesisError("cannot synthesize over an empty corpus")
    if mode not in _MODE_TO_KIND:
        raise SynthesisError(f"unknown synthesis mode {mode!r}")
    if parallelism <= 0:
        raise SynthesisError("parallelism must be positive")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    kind = _MODE_TO_KIND[mode]
    try:
        done = existing_pair_ids(out_path)
    except OSError as exc:
        raise SynthesisError(f"cannot read output path {out_path}: {exc}") from exc
    pending = [pair for pair in corpus if pair.id not in done]
    logger.info(
        "synthesizing %d/%d contexts (%d already present) → %s",
        len(pending), len(corpus), len(done), out_path,
    )

    allowed_failures = failure_threshold * len(corpus)
    failed: list[tuple[str, str]] = []
    completed = 0
    write_lock = threading.Lock()
    abort = threading.Event()

    def generate(pair):
        prompt = build_context_prompt(
            pair, style, exemplars=exemplars, mode=mode, as_single_message=as_single_message
        )
        request = CompletionRequest(
            model_name=gateway.config.model_name,
            prompt=prompt,
            temperature=gateway.config.temperature,
            top_p=gateway.config.top_p,
            max_output_tokens=gateway.config.max_output_tokens,
        )
        response = gateway.complete(request)
        return Triplet(
            pair_id=pair.id,
            question=pair.question,
            answer=pair.answers[0],
            context=response.text,
            context_kind=kind,
            gen_meta=GenMeta(
                model_name=gateway.config.model_name,
                request_key=request.request_key,
                timestamp=datetime.now(timezone.utc).isoformat(),
                prompt_snapshot_hash=prompt_snapshot_hash(prompt),
                finish_reason=response.finish_reason,
            ),
        )

    try:
        out_fh = open(out_path, "a", encoding="utf-8")
    except OSError as exc:
        raise SynthesisError(f"cannot open output path {out_path}: {exc}") from exc

    with out_fh:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            futures = {pool.submit(generate, pair): pair for pair in pending}
            for future in as_completed(futures):
                pair = futures[future]
                try:
                    triplet = future.result()
                except GatewayError as exc:
                    failed.append((pair.id, exc.kind))
                    logger.warning("pair %s failed: %s", pair.id, exc)
                    if len(failed) > allowed_failures:
                        abort.set()
                        for other in futures:
                            other.cancel()
                        break
                else:
                    with write_lock:
                        out_fh.write(json.dumps(triplet.to_record(), ensure_ascii=False) + "\n")
                        out_fh.flush()
                    completed += 1

    manifest = manifest_for(
        input_hashes={"corpus": corpus.content_hash},
        style_preset=style.name,
        mode=mode,
        subset_size=len(corpus),
        gateway_fingerprint=gateway.config.fingerprint(),
    )
    if abort.is_set():
        raise FailureRateExceeded(
            f"aborted: {len(failed)} failures exceed threshold "
            f"{failure_threshold:.0%} of {len(corpus)} pairs "
            f"(completed {completed + len(done)}, kinds: "
            f"{sorted(set(k for _, k in failed))})",
            completed=completed + len(done),
            failed=failed,
        )
    return SynthesisRun(
        manifest=manifest,
        completed=completed + len(done),
        failed=failed,
        output_path=out_path,
    )
