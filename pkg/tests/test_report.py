from __future__ import annotations

import csv

from qgsynth.common import file_hash
from qgsynth.gateway import GatewayConfig
from qgsynth.metrics import score_corpus
from qgsynth.plots import render_curves, render_histograms
from qgsynth.quality import build_histogram
from qgsynth.report import (
    curve_data,
    load_manifest,
    load_report_json,
    manifest_for,
    manifest_path_for,
    read_curve_data,
    report_to_csv,
    table_compare,
    verify_manifest,
    write_manifest,
    write_report_json,
)


def _report(texts: dict[str, str], golds: dict[str, str] | None = None, external=None):
    predictions = [{"pair_id": k, "text": v} for k, v in texts.items()]
    gold_rows = [{"pair_id": k, "question": v} for k, v in (golds or texts).items()]
    return score_corpus(predictions, gold_rows, external_scores=external)


# ---------------------------------------------------------------------------
# manifests


def test_manifest_is_deterministic(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text('{"id": "a"}\n')
    make = lambda: manifest_for(
        seeds={"mix": 3},
        inputs={"corpus": corpus},
        style_preset="squad_wiki",
        mode="few_shot",
        mix_fraction=0.5,
        gateway_fingerprint=GatewayConfig().fingerprint(),
    )
    assert make().to_json() == make().to_json()
    assert make().run_id == make().run_id


def test_manifest_verify_ok_on_unchanged_inputs(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text('{"id": "a"}\n')
    manifest = manifest_for(inputs={"corpus": corpus})
    assert verify_manifest(manifest) == []


def test_manifest_verify_names_drifted_input(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text('{"id": "a"}\n')
    manifest = manifest_for(inputs={"corpus": corpus})
    corpus.write_text('{"id": "edited"}\n')
    diffs = verify_manifest(manifest)
    assert len(diffs) == 1
    assert diffs[0].startswith("corpus:")


def test_manifest_fingerprint_excludes_credentials(tmp_path, monkeypatch):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text("{}\n")
    monkeypatch.setenv("QGSYNTH_API_KEY", "secret-credential-value")
    manifest = manifest_for(
        inputs={"corpus": corpus}, gateway_fingerprint=GatewayConfig().fingerprint()
    )
    serialized = manifest.to_json()
    assert "secret-credential-value" not in serialized
    assert "api_key" not in serialized
    # Credential changes leave the manifest byte-identical.
    monkeypatch.setenv("QGSYNTH_API_KEY", "rotated-credential")
    assert manifest_for(
        inputs={"corpus": corpus}, gateway_fingerprint=GatewayConfig().fingerprint()
    ).to_json() == serialized


def test_manifest_round_trip(tmp_path):
    manifest = manifest_for(seeds={"s": 1}, input_hashes={"corpus": "ab" * 32})
    path = write_manifest(manifest, tmp_path / "m.json")
    assert load_manifest(path) == manifest


def test_manifest_path_for_sits_beside_output(tmp_path):
    assert manifest_path_for(tmp_path / "out.jsonl").name == "out.jsonl.manifest.json"


# ---------------------------------------------------------------------------
# tables


def test_table_compare_row_per_label_in_input_order(tmp_path):
    reports = {
        "real": _report({"a": "one two three"}),
        "synthetic_zero": _report({"a": "one two three"}, {"a": "one two four"}),
        "synthetic_few": _report({"a": "one two three"}, {"a": "two three one"}),
    }
    path = table_compare(reports, tmp_path / "table.csv")
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows] == ["label", "real", "synthetic_zero", "synthetic_few"]
    assert rows[0][1:4] == ["bleu4", "meteor", "rouge_l"]
    assert (tmp_path / "table.md").exists()


def test_table_compare_single_label(tmp_path):
    path = table_compare({"only": _report({"a": "x y z"})}, tmp_path / "t.csv")
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2


def test_table_values_are_three_decimal_renders_of_report(tmp_path):
    report = _report({"a": "one two three"}, {"a": "one two four"})
    path = table_compare({"r": report}, tmp_path / "t.csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    for column in ("bleu4", "meteor", "rouge_l"):
        assert rows[0][column] == f"{report.corpus[column]:.3f}"


# ---------------------------------------------------------------------------
# curves


def test_curve_data_long_format_shape(tmp_path):
    points = [(f / 10, _report({"a": "one two three"})) for f in range(11)]
    path = curve_data(points, tmp_path / "curve.csv")
    rows = read_curve_data(path)
    metrics = {r["metric"] for r in rows}
    assert len(rows) == 11 * len(metrics)


def test_curve_fractions_strictly_increasing_within_metric(tmp_path):
    points = [(0.5, _report({"a": "x y"})), (0.0, _report({"a": "x y"})),
              (1.0, _report({"a": "x y"}))]
    path = curve_data(points, tmp_path / "curve.csv")
    rows = read_curve_data(path)
    by_metric: dict[str, list[float]] = {}
    for row in rows:
        by_metric.setdefault(row["metric"], []).append(row["fraction"])
    for fractions in by_metric.values():
        assert fractions == sorted(fractions)
        assert len(set(fractions)) == len(fractions)


def test_curve_round_trip_parse_equals_input(tmp_path):
    reports = [(0.0, _report({"a": "one two three"})),
               (0.3, _report({"a": "one two three"}, {"a": "three two one"}))]
    path = curve_data(reports, tmp_path / "curve.csv")
    rows = read_curve_data(path)
    for fraction, report in reports:
        for metric, value in report.corpus.items():
            matching = [r for r in rows if r["fraction"] == fraction and r["metric"] == metric]
            assert len(matching) == 1
            assert matching[0]["value"] == value  # full precision survives


# ---------------------------------------------------------------------------
# report serialization


def test_report_json_round_trip(tmp_path):
    report = _report({"a": "one two three", "b": "four five six"})
    path = write_report_json(report, tmp_path / "r.json")
    assert load_report_json(path).to_dict() == report.to_dict()


def test_report_csv_has_per_example_rows_and_summary(tmp_path):
    report = _report({"a": "one two three", "b": "four five six"})
    path = report_to_csv(report, tmp_path / "r.csv")
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 1 + 2 + 1  # header, two examples, summary
    assert rows[-1][0] == "corpus"


def test_report_files_are_byte_stable(tmp_path):
    report = _report({"a": "one two three"})
    p1 = write_report_json(report, tmp_path / "r1.json")
    p2 = write_report_json(report, tmp_path / "r2.json")
    assert file_hash(p1) == file_hash(p2)
    t1 = table_compare({"x": report}, tmp_path / "t1.csv")
    t2 = table_compare({"x": report}, tmp_path / "t2.csv")
    assert file_hash(t1) == file_hash(t2)


def test_external_scores_flow_through_to_table(tmp_path):
    report = _report({"a": "one two three"}, external={"a": 0.42})
    path = table_compare({"r": report}, tmp_path / "t.csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["external"] == "0.420"


# ---------------------------------------------------------------------------
# figures


def test_render_histograms_writes_png(tmp_path):
    hist = build_histogram([1.0, 2.0, 2.5, 4.0], "real", 1.0)
    out = render_histograms([hist], tmp_path / "h.png", xlabel="value")
    assert out.exists() and out.stat().st_size > 0


def test_render_curves_writes_png(tmp_path):
    rows = [
        {"fraction": 0.0, "metric": "meteor", "value": 0.9},
        {"fraction": 0.5, "metric": "meteor", "value": 0.8},
        {"fraction": 1.0, "metric": "meteor", "value": 0.6},
    ]
    out = render_curves(rows, tmp_path / "c.png")
    assert out.exists() and out.stat().st_size > 0
