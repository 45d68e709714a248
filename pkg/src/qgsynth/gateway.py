"""Uniform client for chat-completion, token-logprob, and extractive-QA endpoints.

Every call is content-addressed: the request key is a pure function of the
request fields, responses are cached as one JSON file per key under the cache
directory, and a warm cache answers without any network I/O. Transient
failures retry with capped exponential backoff; auth failures and malformed
payloads never retry. A deterministic mock transport (endpoint scheme
``mock:``) ships in-tree so every offline test and the acceptance suite run
without credentials or sockets.
"""

from __future__ import annotations

import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .common import atomic_write_text, content_hash
from .prompts import Prompt

logger = logging.getLogger(__name__)

FINISH_REASONS = ("stop", "length", "error")

DEFAULT_TEMPERATURE = 0.9
DEFAULT_TOP_P = 1.0
DEFAULT_MAX_OUTPUT_TOKENS = 512  # generous for one paragraph; override per deployment


class GatewayError(Exception):
    kind = "gateway"


class AuthError(GatewayError):
    kind = "auth"


class PayloadError(GatewayError):
    kind = "payload"


class ContextOverflowError(GatewayError):
    kind = "overflow"


class TransientError(GatewayError):
    """Retryable failure (network trouble, 429, 5xx)."""

    kind = "transient"

    def __init__(self, message: str, reason: str = "network"):
        super().__init__(message)
        self.reason = reason  # network | rate_limit | server


class RetriesExhaustedError(GatewayError):
    kind = "retries_exhausted"

    def __init__(self, message: str, reason: str):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class CompletionRequest:
    model_name: str
    prompt: Prompt
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_output_tokens <= 0:
            raise ValueError("max_output_tokens must be positive")

    @property
    def request_key(self) -> str:
        """Stable content hash of the request; identical across runs/platforms."""
        return content_hash(
            {
                "kind": "completion",
                "model": self.model_name,
                "messages": self.prompt.to_payload(),
                "temperature": self.temperature,
                "top_p": self.top_p,
                "max_tokens": self.max_output_tokens,
            }
        )

    def wire_body(self) -> dict:
        return {
            "model": self.model_name,
            "messages": self.prompt.to_payload(),
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_output_tokens,
        }


@dataclass(frozen=True)
class CompletionResponse:
    text: str
    finish_reason: str
    usage: dict = field(default_factory=dict)
    raw_provider_id: str | None = None

    def __post_init__(self):
        if self.finish_reason not in FINISH_REASONS:
            raise ValueError(f"unknown finish_reason {self.finish_reason!r}")
        if self.finish_reason == "stop" and not self.text:
            raise ValueError("finish_reason 'stop' requires non-empty text")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "finish_reason": self.finish_reason,
            "usage": dict(self.usage),
            "raw_provider_id": self.raw_provider_id,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "CompletionResponse":
        return cls(
            text=payload["text"],
            finish_reason=payload["finish_reason"],
            usage=dict(payload.get("usage", {})),
            raw_provider_id=payload.get("raw_provider_id"),
        )


@dataclass(frozen=True)
class TokenLogprobs:
    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.logprobs):
            raise ValueError("tokens and logprobs must have equal length")
        if any(lp > 0 for lp in self.logprobs):
            raise ValueError("logprobs must be non-positive")

    def to_dict(self) -> dict:
        return {"tokens": list(self.tokens), "logprobs": list(self.logprobs)}

    @classmethod
    def from_dict(cls, payload: dict) -> "TokenLogprobs":
        return cls(tokens=tuple(payload["tokens"]), logprobs=tuple(payload["logprobs"]))


@dataclass(frozen=True)
class QAProbeResult:
    predicted_span: str
    confidence: float

    def __post_init__(self):
        if not 0 <= self.confidence <= 1:
            raise ValueError("confidence must be in [0, 1]")

    def to_dict(self) -> dict:
        return {"predicted_span": self.predicted_span, "confidence": self.confidence}

    @classmethod
    def from_dict(cls, payload: dict) -> "QAProbeResult":
        return cls(predicted_span=payload["predicted_span"], confidence=payload["confidence"])


@dataclass(frozen=True)
class GatewayConfig:
    """Endpoint wiring and client policy. Credentials stay in the environment."""

    endpoint: str = "mock:"
    model_name: str = "gpt-3.5-turbo"
    scorer_model: str = "gpt2"
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_output_tokens: int = DEFAULT_MAX_OUTPUT_TOKENS
    qa_endpoint: str | None = None
    api_key_env: str = "QGSYNTH_API_KEY"
    cache_dir: str | None = None
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 30.0
    requests_per_minute: float | None = None
    context_window: int | None = None
    timeout: float = 60.0

    def fingerprint(self) -> dict:
        """Reproducibility record of the endpoint config; excludes credentials."""
        return {
            "endpoint": self.endpoint,
            "model_name": self.model_name,
            "scorer_model": self.scorer_model,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_output_tokens": self.max_output_tokens,
            "qa_endpoint": self.qa_endpoint,
        }


class RequestCache:
    """Content-addressed response store: one JSON record per request key.

    Records keep the full request alongside the response so a cache can be
    audited after the fact. Writes are atomic (tmp + rename), which also
    serializes concurrent writers per key at the filesystem level.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.root / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            logger.warning("dropping unreadable cache record %s", path)
            return None

    def put(self, key: str, record: dict) -> None:
        atomic_write_text(self._path(key), json.dumps(record, ensure_ascii=False, indent=0))


class TokenBucket:
    """Requests-per-minute limiter shared across all gateway threads."""

    def __init__(self, rate_per_minute: float, clock=time.monotonic, sleep=time.sleep):
        if rate_per_minute <= 0:
            raise ValueError("rate_per_minute must be positive")
        self.rate = rate_per_minute / 60.0
        self.capacity = max(1.0, rate_per_minute / 60.0)
        self.tokens = self.capacity
        self.clock = clock
        self.sleep = sleep
        self.updated = clock()
        self._lock = threading.Lock()

    def acquire(self) -> None:
        while True:
            with self._lock:
                now = self.clock()
                self.tokens = min(self.capacity, self.tokens + (now - self.updated) * self.rate)
                self.updated = now
                if self.tokens >= 1.0:
                    self.tokens -= 1.0
                    return
                wait = (1.0 - self.tokens) / self.rate
            self.sleep(wait)


# ---------------------------------------------------------------------------
# Transports


class HttpTransport:
    """OpenAI-compatible wire client (chat completions, echo logprobs, QA)."""

    def __init__(self, config: GatewayConfig):
        import requests  # deferred so offline/mock runs never import it

        self._requests = requests
        self.config = config
        self.network_calls = 0

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env) or os.environ.get("OPENAI_API_KEY")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, url: str, body: dict) -> dict:
        self.network_calls += 1
        try:
            response = self._requests.post(
                url, json=body, headers=self._headers(), timeout=self.config.timeout
            )
        except self._requests.RequestException as exc:
            raise TransientError(f"network error calling {url}: {exc}", reason="network") from exc
        if response.status_code in (401, 403):
            raise AuthError(f"{url} rejected credentials (HTTP {response.status_code})")
        if response.status_code == 429:
            raise TransientError(f"{url} rate limited", reason="rate_limit")
        if response.status_code >= 500:
            raise TransientError(f"{url} server error {response.status_code}", reason="server")
        if response.status_code >= 400:
            raise PayloadError(f"{url} returned HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as exc:
            raise PayloadError(f"{url} returned non-JSON payload") from exc

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        payload = self._post(url, request.wire_body())
        try:
            choice = payload["choices"][0]
            text = choice["message"]["content"]
            finish = choice.get("finish_reason", "stop")
        except (KeyError, IndexError, TypeError) as exc:
            raise PayloadError(f"malformed completion payload from {url}") from exc
        if finish not in FINISH_REASONS:
            finish = "stop" if text else "error"
        return CompletionResponse(
            text=text,
            finish_reason=finish,
            usage=payload.get("usage", {}),
            raw_provider_id=payload.get("id"),
        )

    def token_logprobs(self, model_name: str, text: str) -> TokenLogprobs:
        url = self.config.endpoint.rstrip("/") + "/completions"
        body = {"model": model_name, "prompt": text, "max_tokens": 0, "echo": True, "logprobs": 0}
        payload = self._post(url, body)
        try:
            lp = payload["choices"][0]["logprobs"]
            tokens = lp["tokens"]
            logprobs = lp["token_logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise PayloadError(f"malformed logprob payload from {url}") from exc
        # The first echoed token carries a null logprob; drop such entries.
        kept = [(t, p) for t, p in zip(tokens, logprobs) if p is not None]
        if not kept:
            raise PayloadError(f"logprob payload from {url} had no scored tokens")
        return TokenLogprobs(
            tokens=tuple(t for t, _ in kept), logprobs=tuple(float(p) for _, p in kept)
        )

    def answer_question(self, context: str, question: str) -> QAProbeResult:
        url = self.config.qa_endpoint or self.config.endpoint.rstrip("/") + "/qa"
        payload = self._post(url, {"question": question, "context": context})
        try:
            answer = payload["answer"]
            score = float(payload.get("score", 0.0))
        except (KeyError, TypeError) as exc:
            raise PayloadError(f"malformed QA payload from {url}") from exc
        return QAProbeResult(predicted_span=answer, confidence=max(0.0, min(1.0, score)))


_ANSWER_MARKER = "It is established that the answer is"


class MockTransport:
    """Deterministic offline stand-in selected by the ``mock:`` endpoint scheme.

    Default behaviors form a closed loop: completions write a context that
    embeds the pair's answer behind a fixed marker phrase, and the QA probe
    extracts the span after that marker. Tests can override any behavior with
    canned maps or callables, and can inject failures.
    """

    def __init__(
        self,
        completions: dict[str, str] | None = None,
        complete_fn: Callable[[CompletionRequest], str] | None = None,
        logprob_value: float = -math.log(2.0),
        logprob_fn: Callable[[str, str], TokenLogprobs] | None = None,
        qa_fn: Callable[[str, str], QAProbeResult] | None = None,
        fail_with: Callable[[str], GatewayError | None] | None = None,
        context_window: int | None = None,
    ):
        self.completions = completions or {}
        self.complete_fn = complete_fn
        self.logprob_value = logprob_value
        self.logprob_fn = logprob_fn
        self.qa_fn = qa_fn
        self.fail_with = fail_with
        self.context_window = context_window
        self.calls: dict[str, int] = {"complete": 0, "token_logprobs": 0, "answer_question": 0}
        self._lock = threading.Lock()

    def _record(self, op: str) -> None:
        with self._lock:
            self.calls[op] += 1
        if self.fail_with is not None:
            error = self.fail_with(op)
            if error is not None:
                raise error

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        self._record("complete")
        key = request.request_key
        if key in self.completions:
            text = self.completions[key]
        elif self.complete_fn is not None:
            text = self.complete_fn(request)
        else:
            resolved = request.prompt.resolved_placeholders
            question = resolved.get("q_i", "")
            answer = resolved.get("a_i", "")
            text = (
                f"{question} This topic has been studied at length. "
                f"{_ANSWER_MARKER} {answer}."
            )
        return CompletionResponse(text=text, finish_reason="stop", usage={"total_tokens": len(text.split())})

    def token_logprobs(self, model_name: str, text: str) -> TokenLogprobs:
        self._record("token_logprobs")
        if self.logprob_fn is not None:
            return self.logprob_fn(model_name, text)
        if self.context_window is not None and len(text.split()) > self.context_window:
            raise ContextOverflowError(
                f"text of {len(text.split())} tokens exceeds mock window {self.context_window}"
            )
        tokens = tuple(text.split())
        return TokenLogprobs(tokens=tokens, logprobs=tuple(self.logprob_value for _ in tokens))

    def answer_question(self, context: str, question: str) -> QAProbeResult:
        self._record("answer_question")
        if self.qa_fn is not None:
            return self.qa_fn(context, question)
        marker_at = context.rfind(_ANSWER_MARKER)
        if marker_at == -1:
            return QAProbeResult(predicted_span="", confidence=0.0)
        span = context[marker_at + len(_ANSWER_MARKER) :].strip()
        span = span.rstrip(".").strip()
        return QAProbeResult(predicted_span=span, confidence=0.9)


def make_transport(config: GatewayConfig):
    if config.endpoint.startswith("mock:"):
        return MockTransport(context_window=config.context_window)
    return HttpTransport(config)


# ---------------------------------------------------------------------------
# Gateway


class LLMGateway:
    """Caching, retrying front door for all model endpoints.

    Thread-safe: callers may issue concurrent requests up to their own
    parallelism; the shared rate limiter and cache handle serialization.
    """

    def __init__(
        self,
        config: GatewayConfig,
        transport=None,
        sleep=time.sleep,
    ):
        self.config = config
        self.transport = transport if transport is not None else make_transport(config)
        self.cache = RequestCache(config.cache_dir) if config.cache_dir else None
        self.limiter = (
            TokenBucket(config.requests_per_minute, sleep=sleep)
            if config.requests_per_minute
            else None
        )
        self._sleep = sleep
        self._lock = threading.Lock()
        self.stats = {"cache_hits": 0, "transport_calls": 0}

    def _count(self, counter: str) -> None:
        with self._lock:
            self.stats[counter] += 1

    def _call_with_retries(self, fn, *args):
        last: TransientError | None = None
        for attempt in range(1 + self.config.max_retries):
            if attempt > 0:
                backoff = min(
                    self.config.backoff_cap, self.config.backoff_base * (2 ** (attempt - 1))
                )
                self._sleep(backoff)
            if self.limiter is not None:
                self.limiter.acquire()
            self._count("transport_calls")
            try:
                return fn(*args)
            except TransientError as exc:
                last = exc
                logger.warning("transient endpoint failure (attempt %d): %s", attempt + 1, exc)
        assert last is not None
        raise RetriesExhaustedError(
            f"gave up after {1 + self.config.max_retries} attempts: {last}", reason=last.reason
        )

    def _cached(self, key: str, kind: str, request_payload: dict, fn, *args, decode=None):
        if self.cache is not None:
            record = self.cache.get(key)
            if record is not None:
                self._count("cache_hits")
                return decode(record["response"])
        result = fn(*args)
        if self.cache is not None:
            self.cache.put(
                key, {"key": key, "kind": kind, "request": request_payload, "response": result.to_dict()}
            )
        return result

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        return self._cached(
            request.request_key,
            "completion",
            request.wire_body(),
            self._call_with_retries,
            self.transport.complete,
            request,
            decode=CompletionResponse.from_dict,
        )

    def token_logprobs(self, text: str, model_name: str | None = None) -> TokenLogprobs:
        if not text:
            raise ValueError("cannot score empty text")
        model = model_name or self.config.scorer_model
        if self.config.context_window is not None and len(text.split()) > self.config.context_window:
            raise ContextOverflowError(
                f"text of {len(text.split())} whitespace tokens exceeds the configured "
                f"context window of {self.config.context_window}"
            )
        key = content_hash({"kind": "logprobs", "model": model, "text": text})
        return self._cached(
            key,
            "logprobs",
            {"model": model, "text": text},
            self._call_with_retries,
            self.transport.token_logprobs,
            model,
            text,
            decode=TokenLogprobs.from_dict,
        )

    def answer_question(self, context: str, question: str) -> QAProbeResult:
        if not context or not question:
            raise ValueError("context and question must be non-empty")
        key = content_hash({"kind": "qa", "context": context, "question": question})
        result = self._cached(
            key,
            "qa",
            {"context": context, "question": question},
            self._call_with_retries,
            self.transport.answer_question,
            context,
            question,
            decode=QAProbeResult.from_dict,
        )
        if result.predicted_span and result.predicted_span not in context:
            raise PayloadError(
                f"QA endpoint returned a span that is not a substring of the context: "
                f"{result.predicted_span[:80]!r}"
            )
        return result
