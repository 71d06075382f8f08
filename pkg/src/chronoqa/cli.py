"""Command-line surface: ingest, ask, eval, forge, corrupt, verify, annotate.

Exit codes for ``ask``: 0 answered, 3 refused, 1 error.  Every command is
deterministic given its inputs, config and seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .answering import render_trace, result_from_dict, result_to_json
from .config import ConfigError, load_config, load_synonyms
from .corpus import CorpusError, ingest, save_normalized
from .endpoints import HttpFrameExtractor, HttpIntermediateGenerator, HttpRephraser, HttpScorer
from .evaluation import (
    build_run_record,
    corrupt_questions,
    distant_supervision_annotate,
    first_match_rank,
    load_benchmark,
    metrics,
    presence_trace,
)
from .forge import Band, Forge, emit
from .pipeline import Pipeline
from .report import write_eval_report
from .temporal import parse_point
from .verify import Verifier, aggregate_reports


def _build_pipeline(args) -> Pipeline:
    config = load_config(
        getattr(args, "config", None),
        corpus=getattr(args, "corpus", None),
        mode=getattr(args, "mode", None),
        fallback=getattr(args, "fallback", None),
        k=getattr(args, "top_k", None),
        resolver_top_k=getattr(args, "resolver_k", None),
        seed=getattr(args, "seed", None),
    )
    if not config.corpus:
        raise ConfigError("no corpus given (use --corpus or a config file)")
    index = ingest(config.corpus)
    extractor = HttpFrameExtractor(config.extractor_endpoint) if config.extractor_endpoint else None
    generator = HttpIntermediateGenerator(config.generator_endpoint) if config.generator_endpoint else None
    scorer = HttpScorer(config.scorer_endpoint) if config.scorer_endpoint else None
    return Pipeline(index, config, extractor=extractor, generator=generator, scorer=scorer)


def cmd_ingest(args) -> int:
    try:
        index = ingest(args.corpus)
    except CorpusError as exc:
        print("ingestion error: %s" % exc, file=sys.stderr)
        return 1
    if not index.entities:
        print("warning: corpus is empty", file=sys.stderr)
    if args.out:
        save_normalized(index, args.out)
        print("normalized corpus written to %s" % args.out)
    print("ingested %d entities, %d evidence snippets"
          % (len(index.entities), len(index.evidence)))
    return 0


def cmd_ask(args) -> int:
    pipeline = _build_pipeline(args)
    reference = parse_point(args.reference_time)
    result = pipeline.answer(args.question, reference)
    payload = result_to_json(result)
    if args.out:
        Path(args.out).write_text(payload + "\n", encoding="utf-8")
    else:
        print(payload)
    if args.trace:
        print(render_trace(result), file=sys.stderr)
    return 3 if result.refused else 0


def cmd_eval(args) -> int:
    pipeline = _build_pipeline(args)
    items = load_benchmark(args.benchmark)
    records = []
    rows = []
    for item in sorted(items, key=lambda i: i.question_id):
        try:
            result = pipeline.answer(item.question, item.reference_time, collect_stages=True)
            record = build_run_record(item.question_id, result, item.gold,
                                      pipeline.index, pipeline.parser)
            records.append(record)
            rank = None if result.refused else first_match_rank(result, item.gold)
            rows.append({
                "id": item.question_id, "question": item.question,
                "refused": result.refused, "fallback_used": result.fallback_used,
                "rank": rank if rank is not None else "-",
                "top_answer": result.answers[0].label if result.answers else "-",
                "gold": item.gold.labels[0],
            })
        except Exception as exc:  # one bad item must not abort the batch
            print("error on %s: %s" % (item.question_id, exc), file=sys.stderr)
            rows.append({"id": item.question_id, "question": item.question,
                         "refused": "error", "rank": "-", "top_answer": "-",
                         "gold": item.gold.labels[0]})
    if not records:
        print("no question evaluated successfully", file=sys.stderr)
        return 1
    metric_values = metrics(records)
    trace = presence_trace(records)
    paths = write_eval_report(args.out, metric_values, trace, rows, figures=not args.no_figures)
    print(Path(paths["txt"]).read_text(encoding="utf-8"))
    print("report written to %s" % args.out)
    return 0


def cmd_forge(args) -> int:
    pipeline = _build_pipeline(args)
    rephraser = None
    if pipeline.config.rephraser_endpoint:
        rephraser = HttpRephraser(pipeline.config.rephraser_endpoint)
    forge = Forge(pipeline.index, pipeline.parser, parse_point(args.reference_time),
                  sigma=pipeline.config.sigma, rephraser=rephraser)
    quotas = None
    if args.band_quotas:
        parts = [int(p) for p in args.band_quotas.split(",")]
        quotas = dict(zip((Band.LONG_TAIL, Band.MID, Band.PROMINENT), parts))
    items, warnings = forge.run(args.n, quotas, args.type_cap, pipeline.config.seed)
    for warning in warnings:
        print("warning: %s" % warning, file=sys.stderr)
    invalid = [(item.item_id, failures) for item in items
               if (failures := forge.validate_item(item))]
    if invalid:
        for item_id, failures in invalid:
            print("invalid item %s: %s" % (item_id, "; ".join(failures)), file=sys.stderr)
        return 1
    ratios = tuple(float(r) for r in args.split.split(","))
    paths = emit(items, args.out, pipeline.index, ratios, pipeline.config.seed)
    print("%d items -> %s" % (len(items), ", ".join(str(p) for p in paths.values())))
    return 0


def cmd_corrupt(args) -> int:
    pipeline = _build_pipeline(args)
    items = load_benchmark(args.benchmark)
    corrupted, warnings = corrupt_questions(items, args.seed if args.seed is not None else pipeline.config.seed,
                                            pipeline)
    for warning in warnings:
        print("warning: %s" % warning, file=sys.stderr)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as handle:
        for item in corrupted:
            handle.write(json.dumps({
                "id": item.question_id,
                "question": item.question,
                "answers": [{"label": label} for label in item.gold.labels],
                "reference_time": item.reference_time.render(),
                "temporal_value": item.temporal_value.render() if item.temporal_value else None,
                "corrupted_from": item.metadata.get("corrupted_from"),
            }, ensure_ascii=False) + "\n")
    print("%d corrupted questions -> %s" % (len(corrupted), out))
    return 0


def _load_results_file(path: Path):
    """A file of serialized results: one JSON object, an array, or JSONL."""
    text = path.read_text(encoding="utf-8").strip()
    try:
        payload = json.loads(text)
        records = payload if isinstance(payload, list) else [payload]
    except json.JSONDecodeError:
        records = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [result_from_dict(record) for record in records]


def _holds_results(path: Path) -> bool:
    text = path.read_text(encoding="utf-8").strip()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError:
        try:
            payload = json.loads(text.splitlines()[0])
        except (json.JSONDecodeError, IndexError):
            return False
    probe = payload[0] if isinstance(payload, list) and payload else payload
    return isinstance(probe, dict) and "tsf" in probe


def cmd_verify(args) -> int:
    pipeline = _build_pipeline(args)
    verifier = Verifier(pipeline.index, theta=pipeline.config.theta,
                        synonyms=load_synonyms(pipeline.config.synonym_path)
                        if pipeline.config.synonym_path else None)
    reports = []
    lines = []
    if _holds_results(Path(args.benchmark)):
        # batch mode over already-answered results
        for position, result in enumerate(_load_results_file(Path(args.benchmark)), 1):
            if result.refused:
                lines.append({"id": "r%04d" % position, "refused": True})
                continue
            report = verifier.verify(result, rank=1)
            reports.append(report)
            lines.append({"id": "r%04d" % position, "question": result.question,
                          "refused": False, **report.to_dict()})
    else:
        items = load_benchmark(args.benchmark)
        for item in sorted(items, key=lambda i: i.question_id):
            result = pipeline.answer(item.question, item.reference_time)
            if result.refused:
                lines.append({"id": item.question_id, "refused": True})
                continue
            report = verifier.verify(result, rank=1)
            reports.append(report)
            lines.append({"id": item.question_id, "refused": False, **report.to_dict()})
    payload = {"per_question": lines, "aggregate": aggregate_reports(reports)}
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(json.dumps(payload["aggregate"], indent=2))
    return 0


def cmd_annotate(args) -> int:
    pipeline = _build_pipeline(args)
    items = load_benchmark(args.benchmark)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    unresolved = 0
    with out.open("w", encoding="utf-8") as handle:
        for item in items:
            annotation = distant_supervision_annotate(
                item.question, item.gold, pipeline.index, pipeline.parser,
                item.reference_time, signal=item.signal,
                category=item.metadata.get("temporal_category"))
            unresolved += annotation.unresolved
            handle.write(json.dumps({
                "id": item.question_id,
                "question": item.question,
                "target": annotation.serialize(),
                "unresolved": annotation.unresolved,
            }, ensure_ascii=False) + "\n")
    print("annotated %d questions (%d unresolved) -> %s" % (len(items), unresolved, out))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chronoqa",
                                     description="Faithful temporal QA over heterogeneous corpora")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, reference_required=True):
        p.add_argument("--corpus", help="corpus directory with the JSONL files")
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--mode", choices=["faith", "unfaith"])
        p.add_argument("--fallback", choices=["never", "on-refusal"])
        p.add_argument("--top-k", type=int, dest="top_k", help="evidence cutoff (default 100)")
        p.add_argument("--resolver-k", type=int, dest="resolver_k",
                       help="answer candidates per intermediate question (default 1)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("ingest", help="validate a corpus and build the index")
    p.add_argument("corpus")
    p.add_argument("--out", help="write the normalized corpus here")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("ask", help="answer one question")
    p.add_argument("question")
    p.add_argument("--reference-time", required=True, dest="reference_time",
                   help="question creation time, YYYY-MM-DD")
    p.add_argument("--trace", action="store_true", help="render the derivation to stderr")
    p.add_argument("--out", help="write the result JSON here instead of stdout")
    common(p)
    p.set_defaults(func=cmd_ask)

    p = sub.add_parser("eval", help="run a benchmark and report metrics")
    p.add_argument("benchmark")
    p.add_argument("--out", required=True, help="report directory")
    p.add_argument("--no-figures", action="store_true", dest="no_figures")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("forge", help="generate implicit questions from the corpus")
    p.add_argument("--out", required=True, help="output directory for the dataset files")
    p.add_argument("--n", type=int, default=10, help="number of topic entities to sample")
    p.add_argument("--band-quotas", dest="band_quotas",
                   help="long-tail,mid,prominent counts (default near-equal)")
    p.add_argument("--type-cap", type=float, default=0.10, dest="type_cap")
    p.add_argument("--split", default="0.6,0.2,0.2")
    p.add_argument("--reference-time", default="2025-01-01", dest="reference_time")
    common(p)
    p.set_defaults(func=cmd_forge)

    p = sub.add_parser("corrupt", help="replace temporal values with unsatisfiable dates")
    p.add_argument("benchmark")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("verify", help="faithfulness reports for benchmark answers")
    p.add_argument("benchmark")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("annotate", help="distant-supervision frame annotations")
    p.add_argument("benchmark")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_annotate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, ConfigError, FileNotFoundError, ValueError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
