"""Shared plumbing: canonical JSON hashing, half-up rounding, atomic file writes.

Everything that must be byte-stable across runs and platforms funnels through
this module so there is exactly one canonicalization to audit.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator


def canonical_json(payload: Any) -> str:
    """Serialize to a canonical JSON string (sorted keys, no whitespace, ASCII)."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def content_hash(payload: Any) -> str:
    """sha256 hex digest of the canonical JSON serialization of ``payload``."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def file_hash(path: str | Path) -> str:
    """sha256 hex digest of a file's bytes."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def round_half_up(value: float) -> int:
    """round() with deterministic half-up ties (Python's round() is half-even)."""
    return math.floor(value + 0.5)


def atomic_write_text(path: str | Path, text: str) -> Path:
    """Write ``text`` to ``path`` via tmp-file + rename so readers never see partial content."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_jsonl(path: str | Path, records: Iterable[dict]) -> Path:
    lines = "".join(json.dumps(rec, ensure_ascii=False) + "\n" for rec in records)
    return atomic_write_text(path, lines)


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield (1-based line number, parsed object) for every non-blank line."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            yield lineno, json.loads(line)
