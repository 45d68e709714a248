from __future__ import annotations

import json
from pathlib import Path

import pytest

from qgsynth.corpus import Corpus, QAPair

FIXTURES = Path(__file__).parent / "fixtures"


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {name}: {report.outcome.upper()}")


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def make_corpus(n: int, with_context: bool = True, prefix: str = "p") -> Corpus:
    pairs = []
    for i in range(n):
        pairs.append(
            QAPair(
                id=f"{prefix}{i}",
                question=f"What is component {i} of the assembly called?",
                answers=(f"part {i}",),
                real_context=(
                    f"The assembly contains many components. Component {i} is known as "
                    f"part {i} and sits between its neighbours."
                )
                if with_context
                else None,
                title=f"Assembly_{i % 3}" if with_context else None,
            )
        )
    return Corpus(pairs=tuple(pairs))


@pytest.fixture
def small_corpus() -> Corpus:
    return make_corpus(5)


@pytest.fixture
def no_network(monkeypatch):
    """Fail the test if anything attempts a real HTTP call."""
    import requests

    def _blocked(*args, **kwargs):
        raise AssertionError("network access attempted during an offline test")

    monkeypatch.setattr(requests, "post", _blocked)
    monkeypatch.setattr(requests, "get", _blocked)
    monkeypatch.setattr(requests.Session, "request", _blocked)
    return None


def write_jsonl_file(path: Path, records: list[dict]) -> Path:
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in records))
    return path
