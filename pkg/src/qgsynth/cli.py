"""Command-line entry point: the pipeline as subcommands.

Every subcommand is a thin adapter over the library operations, exits 0 on
success with a structured error line on stderr otherwise, and writes an
experiment manifest beside each output artifact. Exit codes: 2 usage, 3
missing/unreadable files, 4 endpoint failures, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, resolve_config
from .corpus import (
    CorpusFormatError,
    EmptyCorpusError,
    ingest_jsonl,
    ingest_squad,
    sample_subset,
    split,
)
from .gateway import GatewayError, LLMGateway
from .metrics import score_corpus
from .mixer import emit_trainset, mix
from .prompts import PromptError, load_exemplars, load_preset
from .quality import (
    build_review_cases,
    containment_rate,
    length_stats,
    perplexity_stats,
    qa_probe,
    review_worksheet,
    write_histogram_json,
    write_quality_summary,
)
from .report import (
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
from .synthesis import (
    FailureRateExceeded,
    SynthesisError,
    attach_real_contexts,
    read_triplets,
    synthesize,
    write_triplets,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_ENDPOINT = 4


def _gateway(config) -> LLMGateway:
    return LLMGateway(config.gateway)


def _emit_manifest(out_path: str | Path, **kwargs) -> None:
    manifest = manifest_for(**kwargs)
    write_manifest(manifest, manifest_path_for(out_path))


def _load_gold_rows(path: Path) -> list[dict]:
    """Gold questions from corpus JSONL, triplets JSONL, or emitted trainsets."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            pair_id = record.get("pair_id", record.get("id"))
            if pair_id is None and isinstance(record.get("meta"), dict):
                pair_id = record["meta"].get("pair_id")
            question = record.get("question", record.get("target"))
            if pair_id is None or question is None:
                raise CorpusFormatError(f"{path}: line {lineno}: need pair_id/id and question")
            rows.append({"pair_id": pair_id, "question": question})
    return rows


def _load_pred_rows(path: Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            record = json.loads(line)
            if "pair_id" not in record or "text" not in record:
                raise CorpusFormatError(f"{path}: line {lineno}: need pair_id and text")
            rows.append({"pair_id": record["pair_id"], "text": record["text"]})
    return rows


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_ingest(args, config) -> int:
    if args.format == "squad":
        corpus = ingest_squad(args.infile)
        if corpus.skipped_unanswerable:
            print(f"skipped {corpus.skipped_unanswerable} unanswerable items")
    else:
        corpus = ingest_jsonl(args.infile)
    corpus.write_jsonl(args.out)
    _emit_manifest(
        args.out,
        inputs={"input": args.infile},
        input_hashes={"corpus": corpus.content_hash},
    )
    print(f"ingested {len(corpus)} pairs → {args.out}")
    return EXIT_OK


def _cmd_split(args, config) -> int:
    corpus = ingest_jsonl(args.infile)
    train, test = split(corpus, args.test_fraction, args.seed)
    train.write_jsonl(args.out_train)
    test.write_jsonl(args.out_test)
    for out in (args.out_train, args.out_test):
        _emit_manifest(
            out,
            seeds={"split": args.seed},
            inputs={"input": args.infile},
        )
    print(f"split {len(corpus)} pairs → {len(train)} train / {len(test)} test")
    return EXIT_OK


def _cmd_sample(args, config) -> int:
    corpus = ingest_jsonl(args.infile)
    subset = sample_subset(corpus, args.n, args.seed)
    subset.write_jsonl(args.out)
    _emit_manifest(
        args.out,
        seeds={"sample": args.seed},
        inputs={"input": args.infile},
        subset_size=args.n,
    )
    print(f"sampled {len(subset)}/{len(corpus)} pairs → {args.out}")
    return EXIT_OK


def _cmd_synthesize(args, config) -> int:
    corpus = ingest_jsonl(args.corpus)
    style = load_preset(args.style)
    exemplars = load_exemplars(args.exemplars) if args.exemplars else style.exemplars
    gateway = _gateway(config)
    mode = {"zero": "zero_shot", "few": "few_shot"}.get(args.mode, args.mode)
    run = synthesize(
        corpus,
        style,
        mode=mode,
        exemplars=exemplars,
        gateway=gateway,
        out_path=args.out,
        parallelism=config.parallelism,
        failure_threshold=config.failure_threshold,
        as_single_message=args.single_message,
    )
    write_manifest(run.manifest, manifest_path_for(args.out))
    print(
        f"synthesized {run.completed}/{len(corpus)} contexts "
        f"({len(run.failed)} failed) → {args.out}"
    )
    return EXIT_OK


def _cmd_attach_real(args, config) -> int:
    corpus = ingest_jsonl(args.corpus)
    triplets = attach_real_contexts(corpus)
    write_triplets(args.out, triplets)
    _emit_manifest(args.out, inputs={"corpus": args.corpus})
    print(f"attached {len(triplets)} real contexts → {args.out}")
    return EXIT_OK


def _cmd_mix(args, config) -> int:
    real = read_triplets(args.real)
    synthetic = read_triplets(args.synthetic)
    mixed = mix(real, synthetic, args.fraction, args.seed, independent=args.independent)
    write_triplets(args.out, mixed)
    _emit_manifest(
        args.out,
        seeds={"mix": args.seed},
        inputs={"real": args.real, "synthetic": args.synthetic},
        mix_fraction=args.fraction,
    )
    n_synth = sum(1 for t in mixed if t.context_kind != "real")
    print(f"mixed {len(mixed)} triplets at fraction {args.fraction} ({n_synth} synthetic) → {args.out}")
    return EXIT_OK


def _cmd_emit(args, config) -> int:
    triplets = read_triplets(args.triplets)
    style = load_preset(args.style)
    report = emit_trainset(triplets, style, args.out, max_input_tokens=config.max_input_tokens)
    _emit_manifest(
        args.out,
        inputs={"triplets": args.triplets},
        style_preset=style.name,
    )
    print(f"emitted {report.count} records ({report.truncated_count} truncated) → {args.out}")
    return EXIT_OK


def _cmd_score(args, config) -> int:
    predictions = _load_pred_rows(Path(args.pred))
    golds = _load_gold_rows(Path(args.gold))
    external = None
    if args.external_scores:
        external = json.loads(Path(args.external_scores).read_text(encoding="utf-8"))
    report = score_corpus(predictions, golds, external_scores=external)
    write_report_json(report, args.out)
    report_to_csv(report, Path(args.out).with_suffix(".csv"))
    inputs = {"pred": args.pred, "gold": args.gold}
    if args.external_scores:
        inputs["external_scores"] = args.external_scores
    _emit_manifest(args.out, inputs=inputs)
    corpus_line = " ".join(f"{k}={v:.3f}" for k, v in report.corpus.items())
    print(f"scored {report.n} examples: {corpus_line}")
    return EXIT_OK


def _cmd_quality(args, config) -> int:
    triplets = read_triplets(args.triplets)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    by_kind: dict[str, list] = {}
    for t in triplets:
        by_kind.setdefault(t.context_kind, []).append(t)
    length_histograms = [
        length_stats(kind_triplets, bin_width=config.length_bin_width, label=kind)
        for kind, kind_triplets in sorted(by_kind.items())
    ]
    write_histogram_json(out_dir / "length_histogram.json", length_histograms)

    containment = containment_rate(triplets, normalized=not args.raw_containment)
    probe = None
    figures = [("length_histogram.png", length_histograms, "context word count")]
    if args.endpoint or config.gateway.endpoint:
        gateway = _gateway(config)
        stats = perplexity_stats(
            triplets, gateway, scorer_model=args.scorer, bin_width=config.perplexity_bin_width
        )
        write_histogram_json(out_dir / "perplexity_histogram.json", stats.series.values())
        if stats.series:
            figures.append(
                ("perplexity_histogram.png", list(stats.series.values()), "context perplexity")
            )
        probe = qa_probe(triplets, gateway)
    write_quality_summary(out_dir / "quality_summary.json", containment, probe)
    cases = build_review_cases(triplets, probe=probe, misses=containment.misses)
    review_worksheet(cases, out_dir / "review_worksheet.csv", cap=config.review_cap, seed=config.seed)

    from .plots import render_histograms  # deferred: matplotlib import is slow

    for name, histograms, xlabel in figures:
        render_histograms(histograms, out_dir / name, xlabel=xlabel)

    _emit_manifest(
        out_dir / "quality_summary.json",
        seeds={"review": config.seed},
        inputs={"triplets": args.triplets},
        gateway_fingerprint=config.gateway.fingerprint(),
    )
    probe_part = (
        f" em_rate={probe.em_rate:.3f} mean_f1={probe.mean_f1:.3f}" if probe is not None else ""
    )
    print(f"quality over {containment.n} contexts: containment={containment.rate:.3f}{probe_part}")
    return EXIT_OK


def _parse_labeled(pairs: list[str]) -> dict[str, str]:
    out = {}
    for item in pairs:
        label, _, path = item.partition("=")
        if not label or not path:
            raise ConfigError(f"expected LABEL=PATH, got {item!r}")
        out[label] = path
    return out


def _cmd_report_table(args, config) -> int:
    labeled = _parse_labeled(args.inputs)
    reports = {label: load_report_json(path) for label, path in labeled.items()}
    table_compare(reports, args.out)
    _emit_manifest(args.out, inputs=labeled)
    print(f"wrote comparison table for {len(reports)} runs → {args.out}")
    return EXIT_OK


def _cmd_report_curve(args, config) -> int:
    labeled = _parse_labeled(args.inputs)
    points = [(float(label), load_report_json(path)) for label, path in labeled.items()]
    curve_data(points, args.out)
    from .plots import render_curves

    figure_path = Path(args.out).with_suffix(".png")
    render_curves(read_curve_data(args.out), figure_path)
    _emit_manifest(args.out, inputs=labeled)
    print(f"wrote curve data ({len(points)} fractions) → {args.out} (+ {figure_path.name})")
    return EXIT_OK


def _cmd_report_verify(args, config) -> int:
    manifest = load_manifest(args.manifest)
    diffs = verify_manifest(manifest)
    if diffs:
        for diff in diffs:
            print(f"drift: {diff}")
        return EXIT_ERROR
    print(f"ok: run {manifest.run_id} inputs unchanged")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qgsynth",
        description="Synthetic-context pipeline for question generation",
    )
    parser.add_argument("--version", action="version", version=f"qgsynth {__version__}")
    parser.add_argument("--config", help="TOML-like key/value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="normalize a QA corpus into corpus JSONL")
    p.add_argument("--format", choices=("squad", "jsonl"), required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("split", help="seeded train/test split of a corpus JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--test-fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("sample", help="seeded subset of a corpus JSONL")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("synthesize", help="generate synthetic contexts for a corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--style", default="squad_wiki", help="preset name or preset JSON path")
    p.add_argument("--mode", choices=("zero", "few", "zero_shot", "few_shot"), default="zero")
    p.add_argument("--exemplars", help="JSON array of few-shot exemplars")
    p.add_argument("--endpoint", help="chat-completion endpoint URL (mock: for offline)")
    p.add_argument("--model", dest="model_name", help="completion model name")
    p.add_argument("--parallelism", type=int)
    p.add_argument("--cache-dir", dest="cache_dir")
    p.add_argument("--temperature", type=float)
    p.add_argument("--top-p", dest="top_p", type=float)
    p.add_argument("--max-output-tokens", dest="max_output_tokens", type=int)
    p.add_argument("--failure-threshold", dest="failure_threshold", type=float)
    p.add_argument("--single-message", action="store_true",
                   help="collapse few-shot prompts into one user message (completion-style endpoints)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_synthesize)

    p = sub.add_parser("attach-real", help="wrap real contexts of a corpus as triplets")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_attach_real)

    p = sub.add_parser("mix", help="interpolate real and synthetic triplets")
    p.add_argument("--real", required=True)
    p.add_argument("--synthetic", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--independent", action="store_true",
                   help="sample flips independently instead of the monotone prefix")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_mix)

    p = sub.add_parser("emit", help="emit a training-ready input/target JSONL")
    p.add_argument("--triplets", required=True)
    p.add_argument("--style", default="squad_wiki")
    p.add_argument("--max-input-tokens", dest="max_input_tokens", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_emit)

    p = sub.add_parser("score", help="score predicted questions against gold questions")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--external-scores", dest="external_scores",
                   help="JSON object mapping pair_id to an external metric score")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_score)

    p = sub.add_parser("quality", help="context-quality profile of a triplet file")
    p.add_argument("--triplets", required=True)
    p.add_argument("--endpoint", help="gateway endpoint for perplexity and QA probe")
    p.add_argument("--scorer", help="logprob scorer model name")
    p.add_argument("--raw-containment", action="store_true",
                   help="use raw case-sensitive substring matching")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_quality)

    p = sub.add_parser("report", help="tables, curves, and manifest verification")
    report_sub = p.add_subparsers(dest="report_command", required=True)

    rp = report_sub.add_parser("table", help="label-per-row comparison table")
    rp.add_argument("--inputs", nargs="+", required=True, metavar="LABEL=REPORT.json")
    rp.add_argument("--out", required=True)
    rp.set_defaults(handler=_cmd_report_table)

    rp = report_sub.add_parser("curve", help="fraction sweep curve data + figure")
    rp.add_argument("--inputs", nargs="+", required=True, metavar="FRACTION=REPORT.json")
    rp.add_argument("--out", required=True)
    rp.set_defaults(handler=_cmd_report_curve)

    rp = report_sub.add_parser("verify", help="re-check a manifest against current inputs")
    rp.add_argument("--manifest", required=True)
    rp.set_defaults(handler=_cmd_report_verify)

    return parser


_CONFIG_OVERRIDE_KEYS = (
    "endpoint", "model_name", "cache_dir", "temperature", "top_p", "max_output_tokens",
    "parallelism", "failure_threshold", "max_input_tokens", "scorer_model",
)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        overrides = {
            key: getattr(args, key) for key in _CONFIG_OVERRIDE_KEYS if hasattr(args, key)
        }
        if getattr(args, "scorer", None):
            overrides["scorer_model"] = args.scorer
        config = resolve_config(config_path=args.config, overrides=overrides)
        return args.handler(args, config)
    except FileNotFoundError as exc:
        print(f"error kind=missing_file: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except FailureRateExceeded as exc:
        print(f"error kind=failure_rate: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except GatewayError as exc:
        print(f"error kind={exc.kind}: {exc}", file=sys.stderr)
        return EXIT_ENDPOINT
    except (CorpusFormatError, EmptyCorpusError, PromptError, SynthesisError, ConfigError) as exc:
        print(f"error kind=data: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ValueError as exc:
        print(f"error kind=argument: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
