from __future__ import annotations

import json
from pathlib import Path

import pytest

from qgsynth.cli import EXIT_ENDPOINT, EXIT_ERROR, EXIT_MISSING_FILE, EXIT_OK, main
from qgsynth.config import ConfigError, parse_config_file, resolve_config
from qgsynth.report import load_manifest
from qgsynth.synthesis import read_triplets

from .conftest import write_jsonl_file


@pytest.fixture
def corpus_path(tmp_path) -> Path:
    records = [
        {
            "id": f"p{i}",
            "question": f"What is component {i} of the assembly called?",
            "answer": f"part {i}",
            "context": f"The assembly has pieces. Component {i} is called part {i} here.",
            "title": f"Assembly_{i % 2}",
        }
        for i in range(6)
    ]
    return write_jsonl_file(tmp_path / "corpus.jsonl", records)


def _run(*argv) -> int:
    return main(list(argv))


# ---------------------------------------------------------------------------
# config


def test_parse_config_file_values(tmp_path):
    path = tmp_path / "qgsynth.conf"
    path.write_text(
        "# endpoint settings\n"
        'endpoint = "mock:"\n'
        "temperature = 0.7\n"
        "parallelism = 2\n"
        "model_name = my-model\n"
    )
    values = parse_config_file(path)
    assert values == {
        "endpoint": "mock:", "temperature": 0.7, "parallelism": 2, "model_name": "my-model"
    }


def test_config_precedence_flags_over_env_over_file(tmp_path, monkeypatch):
    path = tmp_path / "qgsynth.conf"
    path.write_text("temperature = 0.1\nparallelism = 9\n")
    monkeypatch.setenv("QGSYNTH_TEMPERATURE", "0.5")
    config = resolve_config(config_path=path, overrides={"temperature": 0.9})
    assert config.gateway.temperature == 0.9  # flag wins
    assert config.parallelism == 9  # file survives where nothing overrides

    config = resolve_config(config_path=path, overrides={})
    assert config.gateway.temperature == 0.5  # env beats file


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("no_such_option = 1\n")
    with pytest.raises(ConfigError, match="unknown config keys"):
        resolve_config(config_path=path)


def test_config_default_sampling_parameters():
    config = resolve_config()
    assert config.gateway.temperature == 0.9
    assert config.gateway.top_p == 1.0


# ---------------------------------------------------------------------------
# subcommands


def test_ingest_squad_writes_corpus_and_manifest(tmp_path, fixtures_dir, capsys):
    out = tmp_path / "corpus.jsonl"
    rc = _run("ingest", "--format", "squad", "--in", str(fixtures_dir / "squad_v11.json"),
              "--out", str(out))
    assert rc == EXIT_OK
    assert out.exists()
    manifest = load_manifest(tmp_path / "corpus.jsonl.manifest.json")
    assert "corpus" in manifest.input_hashes


def test_split_subcommand(tmp_path, corpus_path):
    rc = _run("split", "--in", str(corpus_path), "--test-fraction", "0.5", "--seed", "3",
              "--out-train", str(tmp_path / "train.jsonl"),
              "--out-test", str(tmp_path / "test.jsonl"))
    assert rc == EXIT_OK
    train_lines = (tmp_path / "train.jsonl").read_text().splitlines()
    test_lines = (tmp_path / "test.jsonl").read_text().splitlines()
    assert len(train_lines) == 3 and len(test_lines) == 3


def test_sample_subcommand(tmp_path, corpus_path):
    rc = _run("sample", "--in", str(corpus_path), "--n", "2", "--seed", "1",
              "--out", str(tmp_path / "sub.jsonl"))
    assert rc == EXIT_OK
    assert len((tmp_path / "sub.jsonl").read_text().splitlines()) == 2


def test_synthesize_offline_with_mock(tmp_path, corpus_path, no_network):
    out = tmp_path / "synth.jsonl"
    rc = _run("synthesize", "--corpus", str(corpus_path), "--style", "squad_wiki",
              "--mode", "zero", "--endpoint", "mock:", "--out", str(out))
    assert rc == EXIT_OK
    triplets = read_triplets(out)
    assert len(triplets) == 6
    manifest = load_manifest(tmp_path / "synth.jsonl.manifest.json")
    assert manifest.mode == "zero_shot"
    assert manifest.gateway["endpoint"] == "mock:"


def test_mix_records_fraction_in_manifest(tmp_path, corpus_path, no_network):
    synth = tmp_path / "synth.jsonl"
    real = tmp_path / "real.jsonl"
    mixed = tmp_path / "mixed.jsonl"
    assert _run("synthesize", "--corpus", str(corpus_path), "--endpoint", "mock:",
                "--out", str(synth)) == EXIT_OK
    assert _run("attach-real", "--corpus", str(corpus_path), "--out", str(real)) == EXIT_OK
    rc = _run("mix", "--real", str(real), "--synthetic", str(synth),
              "--fraction", "0.1", "--seed", "4", "--out", str(mixed))
    assert rc == EXIT_OK
    manifest = load_manifest(tmp_path / "mixed.jsonl.manifest.json")
    assert manifest.mix_fraction == 0.1
    assert manifest.seeds == {"mix": 4}


def test_score_identity_prints_unit_bleu(tmp_path, corpus_path, capsys):
    records = [json.loads(line) for line in corpus_path.read_text().splitlines()]
    preds = write_jsonl_file(
        tmp_path / "preds.jsonl",
        [{"pair_id": r["id"], "text": r["question"]} for r in records],
    )
    rc = _run("score", "--pred", str(preds), "--gold", str(corpus_path),
              "--out", str(tmp_path / "report.json"))
    assert rc == EXIT_OK
    out = capsys.readouterr().out
    assert "bleu4=1.000" in out
    assert (tmp_path / "report.csv").exists()


def test_score_merges_external_scores(tmp_path, corpus_path):
    records = [json.loads(line) for line in corpus_path.read_text().splitlines()]
    preds = write_jsonl_file(
        tmp_path / "preds.jsonl",
        [{"pair_id": r["id"], "text": r["question"]} for r in records],
    )
    external = tmp_path / "external.json"
    external.write_text(json.dumps({r["id"]: 0.5 for r in records}))
    rc = _run("score", "--pred", str(preds), "--gold", str(corpus_path),
              "--external-scores", str(external), "--out", str(tmp_path / "report.json"))
    assert rc == EXIT_OK
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["corpus"]["external"] == 0.5


def test_quality_writes_outputs_and_figures(tmp_path, corpus_path, no_network):
    synth = tmp_path / "synth.jsonl"
    assert _run("synthesize", "--corpus", str(corpus_path), "--endpoint", "mock:",
                "--out", str(synth)) == EXIT_OK
    out_dir = tmp_path / "quality"
    rc = _run("quality", "--triplets", str(synth), "--endpoint", "mock:",
              "--out", str(out_dir))
    assert rc == EXIT_OK
    for name in (
        "quality_summary.json",
        "length_histogram.json",
        "length_histogram.png",
        "perplexity_histogram.json",
        "perplexity_histogram.png",
        "review_worksheet.csv",
    ):
        assert (out_dir / name).exists(), name
    summary = json.loads((out_dir / "quality_summary.json").read_text())
    assert summary["containment_rate"] == 1.0
    assert summary["em_rate"] == 1.0


def test_report_table_and_curve_and_verify(tmp_path, corpus_path):
    records = [json.loads(line) for line in corpus_path.read_text().splitlines()]
    preds = write_jsonl_file(
        tmp_path / "preds.jsonl",
        [{"pair_id": r["id"], "text": r["question"]} for r in records],
    )
    report_path = tmp_path / "report.json"
    assert _run("score", "--pred", str(preds), "--gold", str(corpus_path),
                "--out", str(report_path)) == EXIT_OK

    table = tmp_path / "table.csv"
    assert _run("report", "table", "--inputs", f"identity={report_path}",
                "--out", str(table)) == EXIT_OK
    assert table.exists() and table.with_suffix(".md").exists()

    curve = tmp_path / "curve.csv"
    assert _run("report", "curve", "--inputs", f"0.0={report_path}", f"0.5={report_path}",
                "--out", str(curve)) == EXIT_OK
    assert curve.exists() and curve.with_suffix(".png").exists()

    assert _run("report", "verify", "--manifest", str(tmp_path / "report.json.manifest.json")) == EXIT_OK
    # Drift detection: editing an input flips verify to failure.
    preds.write_text(preds.read_text() + "\n")
    assert _run("report", "verify", "--manifest", str(tmp_path / "report.json.manifest.json")) == EXIT_ERROR


# ---------------------------------------------------------------------------
# exit codes


def test_unknown_flag_exits_2(corpus_path):
    with pytest.raises(SystemExit) as excinfo:
        main(["ingest", "--no-such-flag", "x"])
    assert excinfo.value.code == 2


def test_missing_file_exits_3(tmp_path, capsys):
    rc = _run("ingest", "--format", "jsonl", "--in", str(tmp_path / "absent.jsonl"),
              "--out", str(tmp_path / "out.jsonl"))
    assert rc == EXIT_MISSING_FILE
    assert "error kind=missing_file" in capsys.readouterr().err


def test_endpoint_failure_exits_4(tmp_path, corpus_path, monkeypatch, capsys):
    import requests

    def refuse(*args, **kwargs):
        raise requests.ConnectionError("nothing listening")

    monkeypatch.setattr(requests, "post", refuse)
    monkeypatch.setenv("QGSYNTH_MAX_RETRIES", "0")  # skip backoff sleeps
    rc = _run("synthesize", "--corpus", str(corpus_path),
              "--endpoint", "http://127.0.0.1:9", "--out", str(tmp_path / "s.jsonl"))
    assert rc == EXIT_ENDPOINT
    assert "error kind=" in capsys.readouterr().err


def test_malformed_corpus_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text("not json at all\n")
    rc = _run("ingest", "--format", "jsonl", "--in", str(bad), "--out", str(tmp_path / "o.jsonl"))
    assert rc == EXIT_ERROR
    assert "error kind=data" in capsys.readouterr().err
