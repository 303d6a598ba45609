"""Command-line orchestration of the suggestion pipeline.

Subcommands: ingest, generate, evaluate, agreement, export-sft, report,
serve.  Exit codes: 0 success, 1 module error (single machine-parsable
line on stderr), 2 usage/config error.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from . import agreement as agreement_mod
from . import quality, runs, sft
from .backend import GenRequest, build_client, load_backend_config, prompt_digest
from .corpus import (
    FilterPolicy,
    IngestStats,
    ProductContext,
    build_contexts,
    load_catalog,
    load_reviews,
    read_contexts,
    sample_eval_set,
)
from .errors import ConfigError, ShopqError
from .parsing import QuestionSuggestion, parse_suggestions
from .prompts import FewShotExample, GenConfig, render_generation_prompt
from .service import load_service_config
from .service import serve as serve_service


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, sort_keys=True, indent=2)
        handle.write("\n")


def cmd_ingest(args) -> int:
    policy = FilterPolicy(
        min_helpful_votes=args.min_votes,
        accept_vine=not args.no_vine,
        min_text_chars=args.min_chars,
        max_text_chars=args.max_chars,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    meta_stats, review_stats = IngestStats(), IngestStats()
    products = []
    seen_asins = set()
    duplicates = 0
    for product in load_catalog(args.meta, meta_stats):
        if product.asin in seen_asins:
            duplicates += 1
            continue
        seen_asins.add(product.asin)
        products.append(product)

    reviews_by_asin: dict[str, list] = {}
    unmatched = 0
    for review in load_reviews(args.reviews, review_stats):
        if review.asin in seen_asins:
            reviews_by_asin.setdefault(review.asin, []).append(review)
        else:
            unmatched += 1

    contexts: list[ProductContext] = []
    skip_lines = []
    for product in products:
        built = build_contexts(product, reviews_by_asin.get(product.asin, []), policy)
        if built:
            contexts.extend(built)
        else:
            skip_lines.append(f"{product.asin}\tno_contexts")

    if args.sample_n:
        contexts = sample_eval_set(contexts, args.sample_n, args.seed)

    runs.write_jsonl(out / runs.CONTEXTS_FILE, (c.to_record() for c in contexts))
    (out / "skip_log.txt").write_text(
        "".join(line + "\n" for line in skip_lines), encoding="utf-8"
    )
    _write_json(
        out / "ingest_stats.json",
        {
            "products_loaded": meta_stats.records_loaded,
            "products_duplicate": duplicates,
            "reviews_loaded": review_stats.records_loaded,
            "reviews_unmatched": unmatched,
            "malformed_meta_lines": meta_stats.malformed_lines,
            "malformed_review_lines": review_stats.malformed_lines,
            "contexts_written": len(contexts),
            "products_skipped": len(skip_lines),
            "policy": {
                "min_helpful_votes": policy.min_helpful_votes,
                "accept_vine": policy.accept_vine,
                "min_text_chars": policy.min_text_chars,
                "max_text_chars": policy.max_text_chars,
            },
        },
    )
    runs.append_run_log(
        out,
        "ingest",
        {"meta": args.meta, "reviews": args.reviews},
        [runs.CONTEXTS_FILE, "skip_log.txt", "ingest_stats.json"],
    )
    print(f"ingest: {len(contexts)} contexts from {len(products)} products -> {out}")
    return 0


def _load_few_shot(path) -> tuple[FewShotExample, ...]:
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    return tuple(
        FewShotExample(context_text=e["context_text"], rendered_output=e["rendered_output"])
        for e in raw
    )


def cmd_generate(args) -> int:
    config = load_backend_config(args.backend)
    client = build_client(config)
    few_shot = _load_few_shot(args.few_shot) if args.few_shot else ()
    gen_config = GenConfig(
        k_questions=args.k,
        few_shot=few_shot,
        temperature=config.temperature,
        max_tokens=config.max_tokens,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(args.contexts, out / runs.CONTEXTS_FILE)
    contexts = read_contexts(out / runs.CONTEXTS_FILE)

    completion_records = []
    suggestion_records = []
    rejected_records = []
    for context in contexts:
        prompt = render_generation_prompt(context, gen_config)
        completion = client.generate(
            GenRequest(
                prompt=prompt,
                model_id=config.model_id,
                temperature=config.temperature,
                max_tokens=config.max_tokens,
            )
        )
        completion_records.append(
            {
                "context_id": context.context_id,
                "prompt_digest": prompt_digest(prompt),
                "text": completion.text,
            }
        )
        report = parse_suggestions(completion.text, context.context_id)
        suggestion_records.extend(s.to_record() for s in report.suggestions)
        rejected_records.extend(
            {"context_id": context.context_id, "line": line, "reason": reason}
            for line, reason in report.rejected_lines
        )

    runs.write_jsonl(out / runs.COMPLETIONS_FILE, completion_records)
    runs.write_jsonl(out / runs.SUGGESTIONS_FILE, suggestion_records)
    runs.write_jsonl(out / runs.PARSE_REPORT_FILE, rejected_records)
    runs.append_run_log(
        out,
        "generate",
        {"contexts": args.contexts, "backend": args.backend},
        [runs.CONTEXTS_FILE, runs.COMPLETIONS_FILE, runs.SUGGESTIONS_FILE, runs.PARSE_REPORT_FILE],
        args={"k": args.k, "seed": args.seed, "few_shot": bool(args.few_shot)},
    )
    print(
        f"generate: {len(suggestion_records)} suggestions "
        f"({len(rejected_records)} rejected lines) -> {out}"
    )
    return 0


def _load_run(run_dir: Path) -> tuple[dict[str, ProductContext], list[QuestionSuggestion]]:
    contexts = {c.context_id: c for c in read_contexts(run_dir / runs.CONTEXTS_FILE)}
    suggestions = [
        QuestionSuggestion.from_record(r) for r in runs.read_jsonl(run_dir / runs.SUGGESTIONS_FILE)
    ]
    return contexts, suggestions


def cmd_evaluate(args) -> int:
    run_dir = Path(args.run)
    contexts, suggestions = _load_run(run_dir)
    config = load_backend_config(args.judge)
    client = build_client(config)

    verdicts = quality.judge_all(
        ((s, contexts[s.context_id]) for s in suggestions),
        client,
        judge_model=config.model_id,
    )
    verdict_records = [dict(v.to_record(), variant=args.variant) for v in verdicts]
    runs.write_jsonl(run_dir / runs.VERDICTS_FILE, verdict_records)

    by_context: dict[str, list[QuestionSuggestion]] = {}
    for suggestion in suggestions:
        by_context.setdefault(suggestion.context_id, []).append(suggestion)
    diversity_reports = []
    diversity_records = []
    for context_id in sorted(by_context):
        report = quality.diversity(by_context[context_id])
        diversity_reports.append(report)
        diversity_records.append(dict(report.to_record(), context_id=context_id))
    runs.write_jsonl(run_dir / runs.DIVERSITY_FILE, diversity_records)

    table = quality.aggregate_records(verdict_records)
    report = quality.report(table, diversity_reports)
    human = report.pop("human_readable")
    _write_json(run_dir / runs.REPORT_JSON_FILE, report)
    (run_dir / runs.REPORT_TEXT_FILE).write_text(human + "\n", encoding="utf-8")

    runs.append_run_log(
        run_dir,
        "evaluate",
        {"suggestions": run_dir / runs.SUGGESTIONS_FILE, "judge": args.judge},
        [runs.VERDICTS_FILE, runs.DIVERSITY_FILE, runs.REPORT_JSON_FILE, runs.REPORT_TEXT_FILE],
    )
    print(f"evaluate: {len(verdict_records)} verdicts -> {run_dir}")
    return 0


def cmd_report(args) -> int:
    run_dir = Path(args.run)
    verdict_records = runs.read_jsonl(run_dir / runs.VERDICTS_FILE)
    diversity_reports = [
        quality.DiversityReport(
            length_diversity=r["length_diversity"],
            lexical_diversity=r["lexical_diversity"],
            aspect_diversity=r["aspect_diversity"],
            overall=r["overall"],
            list_size=r["list_size"],
        )
        for r in runs.read_jsonl(run_dir / runs.DIVERSITY_FILE)
    ]
    table = quality.aggregate_records(verdict_records)
    report = quality.report(table, diversity_reports)
    human = report.pop("human_readable")
    _write_json(run_dir / runs.REPORT_JSON_FILE, report)
    (run_dir / runs.REPORT_TEXT_FILE).write_text(human + "\n", encoding="utf-8")
    print(human)
    return 0


def cmd_agreement(args) -> int:
    human = agreement_mod.load_annotations(args.human)
    auto = agreement_mod.load_annotations(args.auto)
    report = agreement_mod.percent_agreement(human, auto)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "agreement.json", report.to_record())
    (out / "agreement.txt").write_text(report.render_text() + "\n", encoding="utf-8")
    runs.append_run_log(
        out,
        "agreement",
        {"human": args.human, "auto": args.auto},
        ["agreement.json", "agreement.txt"],
    )
    print(report.render_text())
    return 0


def cmd_export_sft(args) -> int:
    run_dir = Path(args.run)
    contexts, suggestions = _load_run(run_dir)
    run_output = [(contexts[s.context_id], s) for s in suggestions]
    pairs = sft.curate(run_output, lint_gate=not args.no_lint_gate)

    review_errors: list[dict] = []
    if args.decisions:
        decisions = sft.load_decisions(args.decisions)
        pairs, review_errors = sft.apply_review(pairs, decisions)
    if args.approve_pending:
        pairs = [
            p if p.review_status != "pending" else sft.TrainingPair(
                pair_id=p.pair_id,
                context_text=p.context_text,
                question=p.question,
                review_status="approved",
            )
            for p in pairs
        ]

    out = Path(args.out) if args.out else run_dir / "sft"
    out.mkdir(parents=True, exist_ok=True)
    runs.write_jsonl(out / "pairs.jsonl", (p.to_record() for p in pairs))
    if review_errors:
        _write_json(out / "review_errors.json", review_errors)

    manifest, warnings = sft.export(
        pairs,
        out,
        sft.ManifestConfig(source_run_ids=(run_dir.name,)),
        seed=args.seed,
    )
    inputs = {"suggestions": run_dir / runs.SUGGESTIONS_FILE}
    if args.decisions:
        inputs["decisions"] = args.decisions
    runs.append_run_log(
        out,
        "export-sft",
        inputs,
        ["train.jsonl", "validation.jsonl", "manifest.json", "pairs.jsonl"],
    )
    for warning in warnings:
        print(f"warning: {warning}", file=sys.stderr)
    print(
        f"export-sft: {manifest.pair_count} pairs "
        f"({manifest.train_count} train / {manifest.validation_count} validation) -> {out}"
    )
    return 0


def cmd_serve(args) -> int:
    config = load_service_config(args.config)
    serve_service(config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shopq",
        description="Grounded product question suggestions: pipeline and service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build product contexts from catalog + reviews")
    p.add_argument("--meta", required=True, help="catalog metadata JSONL")
    p.add_argument("--reviews", required=True, help="reviews JSONL")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--min-votes", type=int, default=5)
    p.add_argument("--min-chars", type=int, default=80)
    p.add_argument("--max-chars", type=int, default=2000)
    p.add_argument("--no-vine", action="store_true", help="ignore Vine membership")
    p.add_argument("--sample-n", type=int, default=0, help="sample to n contexts")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("generate", help="generate suggestions for a contexts file")
    p.add_argument("--contexts", required=True)
    p.add_argument("--backend", required=True, help="backend config TOML")
    p.add_argument("--out", required=True, help="run directory")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--few-shot", help="JSON file of few-shot examples")
    p.add_argument("--seed", type=int, default=0, help="recorded in the run log")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="judge a run and write the quality report")
    p.add_argument("--run", required=True, help="run directory from generate")
    p.add_argument("--judge", required=True, help="judge backend config TOML")
    p.add_argument("--variant", default="icl_zero_shot")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-render reports from saved verdicts")
    p.add_argument("--run", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("agreement", help="human-vs-auto percent agreement")
    p.add_argument("--human", required=True, help="human annotations CSV")
    p.add_argument("--auto", required=True, help="automatic annotations CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_agreement)

    p = sub.add_parser("export-sft", help="curate and export training pairs")
    p.add_argument("--run", required=True)
    p.add_argument("--out", help="output directory (default: <run>/sft)")
    p.add_argument("--decisions", help="review decisions JSONL")
    p.add_argument("--approve-pending", action="store_true",
                   help="scripted reviews: approve every pending pair")
    p.add_argument("--no-lint-gate", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export_sft)

    p = sub.add_parser("serve", help="run the HTTP suggestion service")
    p.add_argument("--config", required=True, help="service config TOML")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc.error_class}: {exc}", file=sys.stderr)
        return 2
    except ShopqError as exc:
        print(f"error: {exc.error_class}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: io_error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
