"""Experiment manifests and result-table / curve-data rendering.

A manifest is the reproducibility record for one run: seeds, input content
hashes, preset/mode, subset size, mix fraction, and the gateway fingerprint
(model names and sampling parameters; never credentials). Manifests serialize
deterministically, so identical runs produce identical manifest bytes.

Tables render one row per labeled report with three-decimal values; curve
data is long-format CSV for the mixing-fraction sweeps.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__
from .common import atomic_write_text, canonical_json, content_hash, file_hash
from .metrics import MetricReport

MANIFEST_SCHEMA_VERSION = 1

TABLE_COLUMNS = ("bleu4", "meteor", "rouge_l", "em_rate", "mean_f1", "external")


@dataclass(frozen=True)
class ExperimentManifest:
    run_id: str
    seeds: dict = field(default_factory=dict)
    input_hashes: dict = field(default_factory=dict)
    style_preset: str | None = None
    mode: str | None = None
    subset_size: int | None = None
    mix_fraction: float | None = None
    gateway: dict | None = None
    toolkit_version: str = __version__
    schema_version: int = MANIFEST_SCHEMA_VERSION

    def payload(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "run_id": self.run_id,
            "seeds": dict(self.seeds),
            "input_hashes": dict(self.input_hashes),
            "style_preset": self.style_preset,
            "mode": self.mode,
            "subset_size": self.subset_size,
            "mix_fraction": self.mix_fraction,
            "gateway": dict(self.gateway) if self.gateway is not None else None,
            "toolkit_version": self.toolkit_version,
        }

    def to_json(self) -> str:
        return canonical_json(self.payload())


def manifest_for(
    *,
    seeds: Mapping[str, int] | None = None,
    inputs: Mapping[str, str | Path] | None = None,
    input_hashes: Mapping[str, str] | None = None,
    style_preset: str | None = None,
    mode: str | None = None,
    subset_size: int | None = None,
    mix_fraction: float | None = None,
    gateway_fingerprint: Mapping | None = None,
) -> ExperimentManifest:
    """Build a manifest, hashing any input files given by path.

    ``inputs`` maps role name to file path (hashed here); ``input_hashes``
    supplies pre-computed hashes (e.g. an in-memory corpus hash). run_id is
    a content hash of the manifest payload, so it is itself deterministic.
    """
    hashes: dict[str, dict] = {}
    for name, path in (inputs or {}).items():
        hashes[name] = {"path": str(path), "sha256": file_hash(path)}
    for name, digest in (input_hashes or {}).items():
        hashes[name] = {"path": None, "sha256": digest}
    body = {
        "seeds": dict(seeds or {}),
        "input_hashes": hashes,
        "style_preset": style_preset,
        "mode": mode,
        "subset_size": subset_size,
        "mix_fraction": mix_fraction,
        "gateway": dict(gateway_fingerprint) if gateway_fingerprint is not None else None,
        "toolkit_version": __version__,
    }
    return ExperimentManifest(run_id=content_hash(body)[:12], **body)


def write_manifest(manifest: ExperimentManifest, path: str | Path) -> Path:
    return atomic_write_text(path, manifest.to_json() + "\n")


def manifest_path_for(output_path: str | Path) -> Path:
    output_path = Path(output_path)
    return output_path.with_name(output_path.name + ".manifest.json")


def load_manifest(path: str | Path) -> ExperimentManifest:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return ExperimentManifest(
        run_id=payload["run_id"],
        seeds=payload.get("seeds", {}),
        input_hashes=payload.get("input_hashes", {}),
        style_preset=payload.get("style_preset"),
        mode=payload.get("mode"),
        subset_size=payload.get("subset_size"),
        mix_fraction=payload.get("mix_fraction"),
        gateway=payload.get("gateway"),
        toolkit_version=payload.get("toolkit_version", __version__),
        schema_version=payload.get("schema_version", MANIFEST_SCHEMA_VERSION),
    )


def verify_manifest(
    manifest: ExperimentManifest,
    inputs: Mapping[str, str | Path] | None = None,
) -> list[str]:
    """Re-hash the manifest's inputs and report every field that drifted.

    Returns an empty list when everything still matches. Files are re-read
    from the recorded paths unless ``inputs`` overrides them. Entries without
    a recorded path (in-memory hashes) need an override to be re-checked and
    are otherwise reported as unverifiable only if an override is expected.
    """
    diffs: list[str] = []
    for name, entry in manifest.input_hashes.items():
        path = (inputs or {}).get(name) or entry.get("path")
        if path is None:
            continue
        try:
            current = file_hash(path)
        except OSError as exc:
            diffs.append(f"{name}: cannot re-read {path}: {exc}")
            continue
        if current != entry["sha256"]:
            diffs.append(
                f"{name}: content hash drift ({entry['sha256'][:12]}… → {current[:12]}…)"
            )
    if manifest.toolkit_version != __version__:
        diffs.append(f"toolkit_version: {manifest.toolkit_version} → {__version__}")
    return diffs


# ---------------------------------------------------------------------------
# Tables and curves


def _format(value: float | int | None) -> str:
    if value is None:
        return ""
    return f"{value:.3f}"


def table_compare(reports: Mapping[str, MetricReport], path: str | Path) -> Path:
    """Write a label-per-row comparison table as CSV, plus a markdown twin.

    Column order is bleu4/meteor/rouge_l, then em_rate/mean_f1/external when
    any report carries them; row order is the input mapping order. Rendered
    values are rounded to 3 decimals (raw report JSON keeps full precision).
    """
    path = Path(path)
    columns = [c for c in TABLE_COLUMNS if any(c in r.corpus for r in reports.values())]
    rows = [
        [label] + [_format(report.corpus.get(c)) for c in columns]
        for label, report in reports.items()
    ]

    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", *columns])
        writer.writerows(rows)

    md_lines = [
        "| label | " + " | ".join(columns) + " |",
        "|" + "---|" * (len(columns) + 1),
    ]
    md_lines += ["| " + " | ".join(row) + " |" for row in rows]
    atomic_write_text(path.with_suffix(".md"), "\n".join(md_lines) + "\n")
    return path


def curve_data(
    points: Sequence[tuple[float, MetricReport]], path: str | Path
) -> Path:
    """Write long-format (fraction, metric, value) CSV, fractions ascending.

    Full float precision is kept so a parse-back reproduces the inputs
    exactly; plotting-side rounding is the renderer's business.
    """
    path = Path(path)
    metrics_present = [
        c for c in TABLE_COLUMNS if any(c in report.corpus for _, report in points)
    ]
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fraction", "metric", "value"])
        for metric in metrics_present:
            for fraction, report in sorted(points, key=lambda p: p[0]):
                if metric in report.corpus:
                    writer.writerow([repr(float(fraction)), metric, repr(report.corpus[metric])])
    return path


def read_curve_data(path: str | Path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [
            {"fraction": float(row["fraction"]), "metric": row["metric"], "value": float(row["value"])}
            for row in csv.DictReader(fh)
        ]


def report_to_csv(report: MetricReport, path: str | Path) -> Path:
    """Per-example rows plus one trailing summary row."""
    path = Path(path)
    has_external = any(ex.external is not None for ex in report.per_example)
    columns = ["pair_id", "bleu4", "rouge_l_f", "meteor", "em", "f1"]
    if has_external:
        columns.append("external")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for ex in report.per_example:
            row = [ex.pair_id, ex.bleu4, ex.rouge_l_f, ex.meteor, ex.em, ex.f1]
            if has_external:
                row.append("" if ex.external is None else ex.external)
            writer.writerow(row)
        summary = [
            "corpus",
            report.corpus["bleu4"],
            report.corpus["rouge_l"],
            report.corpus["meteor"],
            report.corpus["em_rate"],
            report.corpus["mean_f1"],
        ]
        if has_external:
            summary.append(report.corpus.get("external", ""))
        writer.writerow(summary)
    return path


def write_report_json(report: MetricReport, path: str | Path) -> Path:
    return atomic_write_text(path, json.dumps(report.to_dict(), ensure_ascii=False, indent=2) + "\n")


def load_report_json(path: str | Path) -> MetricReport:
    return MetricReport.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
